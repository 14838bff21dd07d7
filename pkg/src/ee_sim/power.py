"""NOMA coefficient optimization for a fixed path.

The per-slot power-per-bit ratios are decoupled by two fractional-programming
devices: the scalar weights varpi[n] split each P/R ratio into
varpi P^2 + 1/(4 varpi R^2), and the coefficients lambda[n] replace the
destination's interference-limited SINR by the concave surrogate
2 lambda sqrt(rho2 |h_sd|^2) - lambda^2 (rho1 |h_sd|^2 + noise), which equals
the true ratio at lambda's closed-form update. Feasibility is enforced by an
augmented Lagrangian: every constraint contributes a squared positive-part
penalty per slot, multipliers follow the standard projected update, and the
penalty factor doubles per outer iteration.

Penalty bookkeeping uses constraints normalized by their natural scales
(peak power, threshold SINR floors); reported residuals are absolute.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleProblem, InvalidParameter, SurrogateCollapse
from .geometry import TrajectoryGrid
from .kernel import ConvexProblem, SolverOptions, solve
from .link import NomaPower, SlotGains, SlotRadioParams
from .scenario import LinkState, Scenario, feasibility_precheck, link_state

LN2 = math.log(2.0)


@dataclass(frozen=True)
class QuadState:
    """Per-slot weights of the two fractional transforms."""

    varpi: np.ndarray
    lam: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.varpi, dtype=float)
        l = np.asarray(self.lam, dtype=float)
        if np.any(v <= 0.0):
            raise InvalidParameter("varpi must be positive elementwise")
        if np.any(l < 0.0):
            raise InvalidParameter("lambda must be nonnegative elementwise")
        object.__setattr__(self, "varpi", v)
        object.__setattr__(self, "lam", l)


@dataclass(frozen=True)
class ChiCoefficients:
    """Residual destination-SINR demand after the relayed copy is credited."""

    chi: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.chi, dtype=float)
        if np.any(~np.isfinite(c)):
            raise InvalidParameter("chi must be finite")
        object.__setattr__(self, "chi", c)


@dataclass
class AlmState:
    """Multipliers (normalized constraint space) and the penalty factor."""

    mult_sic: np.ndarray
    mult_dest: np.ndarray
    mult_peak: np.ndarray
    mult_avg: np.ndarray
    mult_eh: np.ndarray
    penalty: float = 1.0

    @staticmethod
    def fresh(n: int) -> "AlmState":
        z = lambda: np.zeros(n)
        return AlmState(z(), z(), z(), z(), z(), penalty=1.0)

    def multipliers(self) -> list[np.ndarray]:
        return [self.mult_sic, self.mult_dest, self.mult_peak, self.mult_avg, self.mult_eh]


@dataclass
class PowerSolution:
    powers: list[NomaPower]
    ee: float  # sum over slots of R/P, bits/s/Hz per W
    feasibility_residuals: dict
    iterations: int
    feasible: bool
    diverged: bool = False


# ---------------------------------------------------------------------------
# Closed-form updates
# ---------------------------------------------------------------------------


def chi(scn: Scenario, traj: TrajectoryGrid) -> ChiCoefficients:
    """Destination threshold minus the (coefficient-free) relayed SINR."""
    state = link_state(scn, traj.slot_positions())
    return ChiCoefficients(chi=scn.sinr_min_dest - state.relay_coeff)


def varpi_update(power_sum, sum_rate) -> np.ndarray:
    """Per-slot weight refresh, 1 / (2 P^2 R^2), as published.

    The tangency identity varpi A^2 + 1/(4 varpi B^2) = A/B holds at
    varpi = 1/(2AB); the production loop uses that tangent value (see
    _varpi_tangent) so its fixed point matches the efficiency optimum, while
    this routine preserves the published update for callers that want it.
    """
    p = np.asarray(power_sum, dtype=float)
    r = np.asarray(sum_rate, dtype=float)
    if np.any(p <= 0.0) or np.any(r <= 0.0):
        raise InvalidParameter("varpi update needs positive rate and power")
    return 1.0 / (2.0 * p * p * r * r)


def _varpi_tangent(power_sum, sum_rate) -> np.ndarray:
    p = np.asarray(power_sum, dtype=float)
    r = np.asarray(sum_rate, dtype=float)
    return 1.0 / (2.0 * p * r)


def lambda_update(p: NomaPower, h_sd: float, sp: SlotRadioParams) -> float:
    """Closed-form surrogate weight: sqrt(rho2 |h|^2) / (rho1 |h|^2 + noise)."""
    h2 = h_sd * h_sd
    return math.sqrt(p.rho2 * h2) / (p.rho1 * h2 + sp.noise_dest_ep1)


def rhat_sum(p: NomaPower, gains: SlotGains, sp: SlotRadioParams, lam: float) -> float:
    """Surrogate sum rate; equals the true sum rate at the closed-form lambda."""
    h_su2 = gains.h_su * gains.h_su
    h_sd2 = gains.h_sd * gains.h_sd
    own = sp.split_id * p.rho1 * h_su2 / sp.noise_uav_id
    relay = sp.eh_efficiency * sp.split_eh * gains.g_sum**2 * gains.h_ud**2 / sp.noise_dest_ep2
    arg = (
        1.0
        + relay
        + 2.0 * lam * math.sqrt(p.rho2 * h_sd2)
        - lam * lam * (p.rho1 * h_sd2 + sp.noise_dest_ep1)
    )
    if arg <= 0.0:
        raise SurrogateCollapse(f"surrogate log argument {arg} <= 0")
    return math.log2(1.0 + own) + math.log2(arg)


# ---------------------------------------------------------------------------
# Normalized constraint system for the penalty terms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _PowerModel:
    """Frozen per-slot data for one inner minimization.

    The relayed SINR and the harvested offset are affine in the transmit
    sum: value = const + slope * tx_scale * (rho1 + rho2). Under the default
    harvesting model the slopes are zero; with transmit-power-scaled
    harvesting the constants are zero instead.
    """

    n: int
    a_own: np.ndarray  # own-data SINR slope per W
    h_sd2: np.ndarray
    relay_const: np.ndarray
    relay_slope: np.ndarray
    harvest_const: np.ndarray  # relay transmit power offset [W]
    harvest_slope: np.ndarray
    rate_scale: float
    tx_scale: float  # transmit power per W of coefficients (1 or 0.5)
    q_sic: np.ndarray  # rho2 >= sic_slope * rho1 + q_sic
    sic_slope: np.ndarray
    dest_slope_coef: np.ndarray  # chi-form destination constraint pieces
    p_peak: float
    p_max: float
    p_c: float
    eh_floor: np.ndarray
    noise_dest_ep1: np.ndarray

    def relay(self, rho1, rho2):
        return self.relay_const + self.relay_slope * self.tx_scale * (rho1 + rho2)

    def harvest(self, rho1, rho2):
        return self.harvest_const + self.harvest_slope * self.tx_scale * (rho1 + rho2)

    def dest_floor(self, rho1, rho2, chi_vec):
        """rho2 floor of the combined-SINR constraint at frozen chi."""
        chi_pos = np.maximum(chi_vec, 0.0)
        if self.rate_scale == 0.5:  # orthogonal access: no superposition term
            return chi_pos * self.noise_dest_ep1 / self.h_sd2
        return chi_pos * rho1 + chi_pos * self.noise_dest_ep1 / self.h_sd2


def _power_model(scn: Scenario, state: LinkState) -> _PowerModel:
    n = scn.n_slots
    h_su2 = state.h_su2
    h_sd2 = state.h_sd2
    scaled = scn.eh_scaled_by_tx_power
    zeros = np.zeros(n)
    if scn.oma_mode:
        sic_slope = zeros
        q_sic = scn.sinr_min_uav * scn.noise_uav_id / (scn.split_id * h_su2)
        rate_scale, tx_scale = 0.5, 0.5
    else:
        sic_slope = scn.sinr_min_uav.copy()
        q_sic = scn.sinr_min_uav * scn.noise_uav_id / (scn.split_id * h_su2)
        rate_scale, tx_scale = 1.0, 1.0
    return _PowerModel(
        n=n,
        a_own=scn.split_id * h_su2 / scn.noise_uav_id,
        h_sd2=h_sd2,
        relay_const=zeros if scaled else state.relay_coeff.copy(),
        relay_slope=state.relay_coeff.copy() if scaled else zeros,
        harvest_const=zeros if scaled else state.harvest_power.copy(),
        harvest_slope=state.harvest_power.copy() if scaled else zeros,
        rate_scale=rate_scale,
        tx_scale=tx_scale,
        q_sic=q_sic,
        sic_slope=sic_slope,
        dest_slope_coef=zeros,
        p_peak=scn.p_peak_w,
        p_max=scn.p_max_w,
        p_c=scn.circuit_power_w,
        eh_floor=scn.harvest_floor_w.copy(),
        noise_dest_ep1=scn.noise_dest_ep1.copy(),
    )


def _repair_coefficients(m: _PowerModel, rho: np.ndarray, chi_vec) -> np.ndarray:
    """Closed-form feasibility polish of an iterate.

    Both SINR constraints are floors on rho2 that are affine in rho1 (at
    frozen chi), so lifting rho2 onto the floor (and paying for it out of
    rho1 when the peak cap would overflow) restores feasibility exactly
    whenever the instance is feasible at all.
    """
    out = np.clip(rho.copy(), 0.0, m.p_peak)
    floor = np.maximum(
        m.sic_slope * out[:, 0] + m.q_sic, m.dest_floor(out[:, 0], out[:, 1], chi_vec)
    )
    pad = 1e-7 * m.p_peak  # strict margin so downstream surrogates can start
    lift = np.maximum(floor + pad - out[:, 1], 0.0)
    out[:, 1] += lift
    excess = np.maximum(out.sum(axis=1) - m.p_peak, 0.0)
    out[:, 0] = np.maximum(out[:, 0] - excess, 0.0)
    return out


def _rates_powers(scn: Scenario, m: _PowerModel, rho1, rho2):
    """True per-slot rate and net power for any coefficient arrays."""
    own = m.a_own * rho1
    if scn.oma_mode:
        direct = rho2 * m.h_sd2 / scn.noise_dest_ep1
    else:
        direct = rho2 * m.h_sd2 / (rho1 * m.h_sd2 + scn.noise_dest_ep1)
    rate = m.rate_scale * (np.log2(1.0 + own) + np.log2(1.0 + m.relay(rho1, rho2) + direct))
    power = m.tx_scale * (rho1 + rho2) + m.p_c - m.harvest(rho1, rho2)
    return rate, power


def _normalized_violations(m: _PowerModel, rho1, rho2, chi_vec):
    """g <= 0 rows per constraint family, all O(1)-scaled.

    chi_vec is the residual destination demand, frozen for one outer
    iteration so the row stays affine in the coefficients.
    """
    peak = m.p_peak
    g_sic = (m.sic_slope * rho1 + m.q_sic - rho2) / peak
    g_dest = (m.dest_floor(rho1, rho2, chi_vec) - rho2) / peak
    g_peak = (rho1 + rho2 - peak) / peak
    g_avg = np.full(m.n, (np.mean(rho1 + rho2) - m.p_max) / peak)
    floor_mean = float(np.mean(m.eh_floor))
    norm = max(floor_mean, 1e-30)
    g_eh = np.full(m.n, (floor_mean - float(np.mean(m.harvest(rho1, rho2)))) / norm)
    return [g_sic, g_dest, g_peak, g_avg, g_eh]


def alm_objective(
    powers: np.ndarray,
    quad: QuadState,
    alm: AlmState,
    scn: Scenario,
    traj: TrajectoryGrid,
) -> float:
    """Penalized objective evaluated at full precision.

    sum_n [varpi_n P_n^2 + 1/(4 varpi_n Rhat_n^2)]
      + (1/2z) sum_constraints sum_n ([m + z g]^+ ^2 - m^2).
    """
    state = link_state(scn, traj.slot_positions())
    m = _power_model(scn, state)
    rho1 = np.asarray(powers[:, 0], dtype=float)
    rho2 = np.asarray(powers[:, 1], dtype=float)
    rhat = _rhat_vec(scn, m, rho1, rho2, quad.lam)
    if np.any(rhat <= 0.0):
        raise SurrogateCollapse("surrogate sum rate <= 0")
    _, power = _rates_powers(scn, m, rho1, rho2)
    core = float(np.sum(quad.varpi * power**2 + 1.0 / (4.0 * quad.varpi * rhat**2)))
    z = alm.penalty
    chi_vec = scn.sinr_min_dest - m.relay(rho1, rho2)
    pen = 0.0
    for mult, g in zip(alm.multipliers(), _normalized_violations(m, rho1, rho2, chi_vec)):
        bracket = np.maximum(mult + z * g, 0.0)
        pen += float(np.sum(bracket**2 - mult**2))
    return core + pen / (2.0 * z)


def _rhat_vec(scn: Scenario, m: _PowerModel, rho1, rho2, lam):
    own = m.a_own * rho1
    if scn.oma_mode:
        den = np.full_like(rho1, 1.0) * scn.noise_dest_ep1
    else:
        den = rho1 * m.h_sd2 + scn.noise_dest_ep1
    arg = (
        1.0
        + m.relay(rho1, rho2)
        + 2.0 * lam * np.sqrt(np.maximum(rho2 * m.h_sd2, 0.0))
        - lam**2 * den
    )
    with np.errstate(invalid="ignore"):
        vals = m.rate_scale * (np.log2(1.0 + own) + np.log2(np.maximum(arg, 1e-300)))
    return np.where(arg > 0.0, vals, -np.inf)


# ---------------------------------------------------------------------------
# Inner convex minimization
# ---------------------------------------------------------------------------


def _inner_problem(
    scn, m: _PowerModel, quad: QuadState, alm: AlmState, chi_vec, core_scale: float = 1.0
):
    n = m.n
    z = alm.penalty
    mults = [mu.copy() for mu in alm.multipliers()]
    noise1 = scn.noise_dest_ep1
    rel_slope = m.relay_slope * m.tx_scale
    harv_slope = m.harvest_slope * m.tx_scale
    chi_pos = np.maximum(chi_vec, 0.0)
    dest_r1 = chi_pos if m.rate_scale == 1.0 else np.zeros(n)
    floor_mean = float(np.mean(m.eh_floor))
    eh_norm = max(floor_mean, 1e-30)
    eh_coef = harv_slope / (n * eh_norm)

    def split(x):
        return x[:n], x[n:]

    def objective(x):
        rho1, rho2 = split(x)
        rhat = _rhat_vec(scn, m, rho1, rho2, quad.lam)
        if np.any(~np.isfinite(rhat)) or np.any(rhat <= 0.0):
            return np.inf
        power = m.tx_scale * (rho1 + rho2) + m.p_c - m.harvest(rho1, rho2)
        val = core_scale * float(
            np.sum(quad.varpi * power**2 + 1.0 / (4.0 * quad.varpi * rhat**2))
        )
        pen = 0.0
        for mu, g in zip(mults, _normalized_violations(m, rho1, rho2, chi_vec)):
            bracket = np.maximum(mu + z * g, 0.0)
            pen += float(np.sum(bracket**2 - mu**2))
        return val + pen / (2.0 * z)

    def gradient(x):
        rho1, rho2 = split(x)
        lam = quad.lam
        own = m.a_own * rho1
        if scn.oma_mode:
            den = np.ones_like(rho1) * noise1
            dden_dr1 = np.zeros(n)
        else:
            den = rho1 * m.h_sd2 + noise1
            dden_dr1 = m.h_sd2
        sq = np.sqrt(np.maximum(rho2 * m.h_sd2, 1e-300))
        arg = 1.0 + m.relay(rho1, rho2) + 2.0 * lam * sq - lam**2 * den
        rhat = m.rate_scale * (np.log2(1.0 + own) + np.log2(arg))
        drhat_r1 = m.rate_scale * (
            m.a_own / ((1.0 + own) * LN2) + (rel_slope - lam**2 * dden_dr1) / (arg * LN2)
        )
        drhat_r2 = m.rate_scale * ((lam * m.h_sd2 / sq + rel_slope) / (arg * LN2))
        power = m.tx_scale * (rho1 + rho2) + m.p_c - m.harvest(rho1, rho2)
        dpower = m.tx_scale - harv_slope
        gp = core_scale * 2.0 * quad.varpi * power * dpower
        gr = core_scale * (-1.0 / (2.0 * quad.varpi * rhat**3))
        g1 = gp + gr * drhat_r1
        g2 = gp + gr * drhat_r2
        # Penalty gradients: sum over families of [mu + z g]^+ dg.
        peak = m.p_peak
        gs = _normalized_violations(m, rho1, rho2, chi_vec)
        b_sic = np.maximum(mults[0] + z * gs[0], 0.0)
        g1 += b_sic * (m.sic_slope / peak)
        g2 += b_sic * (-1.0 / peak)
        b_dest = np.maximum(mults[1] + z * gs[1], 0.0)
        g1 += b_dest * (dest_r1 / peak)
        g2 += b_dest * (-1.0 / peak)
        b_peak = np.maximum(mults[2] + z * gs[2], 0.0)
        g1 += b_peak / peak
        g2 += b_peak / peak
        b_avg = np.maximum(mults[3] + z * gs[3], 0.0)
        avg_coef = float(np.sum(b_avg)) / (m.n * peak)
        g1 += avg_coef
        g2 += avg_coef
        b_eh = float(np.sum(np.maximum(mults[4] + z * gs[4], 0.0)))
        g1 -= b_eh * eh_coef
        g2 -= b_eh * eh_coef
        return np.concatenate([g1, g2])

    lo = np.zeros(2 * n)
    hi = np.full(2 * n, m.p_peak)
    return ConvexProblem(
        dimension=2 * n,
        objective=objective,
        objective_grad=gradient,
        box_bounds=(lo, hi),
    )


def _coarse_seed(scn: Scenario, m: _PowerModel, steps: int = 24) -> np.ndarray:
    """Per-slot best point of a coarse feasible grid; basin selector only.

    The alternating transform converges to the stationary point of whatever
    basin it starts in, and the per-slot efficiency can form two of them
    (spend on rates versus coast on the relayed copy). A 24x24 scan is
    enough to start in the right one; the outer loop does the real work.
    """
    grid = np.linspace(0.0, m.p_peak, steps)
    r1 = grid[:, None, None]
    r2 = grid[None, :, None]
    rate, power = _rates_powers(scn, m, r1, r2)
    relay = m.relay(r1, r2)
    chi = scn.sinr_min_dest - relay
    ok = (r1 + r2) <= min(m.p_peak, m.p_max)
    ok = ok & (r2 >= m.sic_slope * r1 + m.q_sic)
    ok = ok & (r2 >= m.dest_floor(r1, r2, chi))
    with np.errstate(invalid="ignore", divide="ignore"):
        ee = np.where(ok & (power > 0.0), rate / power, -np.inf)
    flat = ee.reshape(-1, m.n)
    idx = np.argmax(flat, axis=0)
    if np.any(~np.isfinite(flat[idx, np.arange(m.n)])):
        return None
    i1, i2 = np.unravel_index(idx, (steps, steps))
    return np.stack([grid[i1], grid[i2]], axis=1)


# ---------------------------------------------------------------------------
# Outer ALM loop
# ---------------------------------------------------------------------------


def solve_power_alm(
    traj: TrajectoryGrid,
    scn: Scenario,
    powers0: np.ndarray = None,
    tol: float = 1e-3,
    max_outer: int = 14,
    residual_tol: float = 1e-4,
    solver_opts: SolverOptions = None,
) -> PowerSolution:
    """Alternate inner convex solves with weight and multiplier updates.

    Stops once the tracked objective (sum of per-slot power-per-bit ratios)
    changes by less than tol and the absolute feasibility residuals are
    within residual_tol, or when max_outer is reached.
    """
    feasibility_precheck(scn, traj)
    state = link_state(scn, traj.slot_positions())
    m = _power_model(scn, state)
    n = scn.n_slots
    if powers0 is None:
        powers0 = scn.initial_powers()
    rho = np.asarray(powers0, dtype=float).copy()
    sums = rho[:, 0] + rho[:, 1]
    if np.any(sums > scn.p_peak_w * (1.0 + 1e-6)):
        raise InvalidParameter("starting coefficients must satisfy the peak cap strictly")
    # Warm starts may ride the cap; pull them just inside before the first
    # inner solve (the box barrier needs a strictly interior point).
    riding = sums >= scn.p_peak_w * (1.0 - 1e-9)
    if np.any(riding):
        scale = scn.p_peak_w * (1.0 - 1e-7) / sums[riding]
        rho[riding] *= scale[:, None]
    # Box-only inner problems tolerate a loose first stage; the dominant cost
    # is barrier stages, so start high and grow fast.
    opts = solver_opts or SolverOptions(
        kkt_tol=3e-7, barrier_t0=100.0, barrier_growth=100.0
    )
    warm_opts = SolverOptions(
        kkt_tol=opts.kkt_tol, barrier_t0=1e4, barrier_growth=300.0, feas_tol=opts.feas_tol
    )

    alm = AlmState.fresh(n)
    from .scenario import constraint_residuals  # local to avoid cycle at import

    def tracked(rho_arr):
        rate, power = _rates_powers(scn, m, rho_arr[:, 0], rho_arr[:, 1])
        return float(np.sum(power / rate)), rate, power

    b_prev, rate, power = tracked(rho)
    # Basin selection: start from the coarse per-slot grid winner when it
    # beats the supplied starting point.
    seed = _coarse_seed(scn, m)
    if seed is not None:
        seed = _repair_coefficients(m, seed, scn.sinr_min_dest - m.relay(seed[:, 0], seed[:, 1]))
        seed *= np.minimum(1.0, scn.p_peak_w * (1.0 - 1e-7) / np.maximum(seed.sum(axis=1), 1e-30))[
            :, None
        ]
        b_seed, rate_s, power_s = tracked(seed)
        if b_seed < b_prev:
            rho, b_prev, rate, power = seed, b_seed, rate_s, power_s
    best = (b_prev, rho.copy())
    # One fixed rescaling keeps the core objective O(1) against unit-scale
    # penalties; identical algorithm, counted in normalized units.
    core_scale = 1.0 / max(b_prev, 1e-12)
    increases = 0
    diverged = False
    iters = 0
    for iters in range(1, max_outer + 1):
        lam = np.array(
            [
                lambda_update(
                    NomaPower(rho[k, 0], rho[k, 1]), float(state.h_sd[k]), scn.slot_params(k)
                )
                if not scn.oma_mode
                else math.sqrt(rho[k, 1] * m.h_sd2[k]) / scn.noise_dest_ep1[k]
                for k in range(n)
            ]
        )
        quad = QuadState(varpi=_varpi_tangent(power, rate), lam=lam)
        chi_vec = scn.sinr_min_dest - m.relay(rho[:, 0], rho[:, 1])
        problem = _inner_problem(scn, m, quad, alm, chi_vec, core_scale=core_scale)
        x0 = np.concatenate([rho[:, 0], rho[:, 1]])
        res = solve(problem, x0, opts if iters == 1 else warm_opts)
        rho_new = np.stack([res.x_opt[:n], res.x_opt[n:]], axis=1)
        b_new, rate, power = tracked(rho_new)

        if b_new > b_prev + 1e-12:
            increases += 1
            if increases >= 3:
                # Divergence guard: rewind to the best iterate, restart the
                # transform weights there, and flag the solution.
                diverged = True
                rho = best[1].copy()
                _, rate, power = tracked(rho)
                increases = 0
                alm.penalty *= 2.0
                continue
        else:
            increases = 0
        rho = rho_new
        if b_new < best[0]:
            best = (b_new, rho.copy())

        # Multiplier update in the normalized constraint space, then z *= 2.
        gs = _normalized_violations(m, rho[:, 0], rho[:, 1], chi_vec)
        for mu, g in zip(alm.multipliers(), gs):
            np.copyto(mu, np.maximum(mu + alm.penalty * g, 0.0))
        alm.penalty *= 2.0

        resid = constraint_residuals(scn, traj, rho)
        worst = max(resid.values())
        if abs(b_new - b_prev) < tol and worst <= residual_tol:
            b_prev = b_new
            break
        b_prev = b_new

    # Prefer feasibility first, then the smaller ratio sum; the repair leaves
    # strictly feasible points untouched and lifts boundary riders off the
    # SINR floors so the next trajectory surrogate has room to start.
    def final_chi(r):
        return scn.sinr_min_dest - m.relay(r[:, 0], r[:, 1])

    candidates = [
        _repair_coefficients(m, rho, final_chi(rho)),
        _repair_coefficients(m, best[1], final_chi(best[1])),
    ]
    chosen = None
    for cand in candidates:
        resid = constraint_residuals(scn, traj, cand)
        key = (max(resid.values()) > residual_tol, tracked(cand)[0])
        if chosen is None or key < chosen[0]:
            chosen = (key, cand, resid)
    rho, resid = chosen[1], chosen[2]
    worst = max(resid.values())
    rate, power = _rates_powers(scn, m, rho[:, 0], rho[:, 1])
    return PowerSolution(
        powers=[NomaPower(float(r1), float(r2)) for r1, r2 in rho],
        ee=float(np.sum(rate / power)),
        feasibility_residuals=resid,
        iterations=iters,
        feasible=worst <= residual_tol,
        diverged=diverged,
    )
