"""UAV path optimization for fixed NOMA coefficients.

The per-slot efficiency sum is a sum of ratios; a parametric subtractive
transform turns it into sum_n alpha_n (R[n] - beta_n P[n]) whose optimal
(alpha, beta) satisfy R[n] = beta_n P[n] and alpha_n P[n] = 1. The inner
layer maximizes the subtractive objective over the path by successive convex
approximation; the outer layer drives the optimality residual of
(alpha, beta) to zero with a damped Newton iteration.

The distance profile f(u) = ||u - q||^2 exp(xi ||u - q||) of every link is
convex in u (composition of the convex increasing scalar map t^2 e^{xi t}
with a norm), so the surrogate subproblem keeps it exact and only replaces
exponentials of the slack variables by their tangent lines, every one of
which lower-bounds its exponential globally. That makes each surrogate a
true inner approximation: its optimum never overstates the objective, which
is what gives the ascent guarantee of the inner layer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import InfeasibleProblem, InvalidParameter, LineSearchStall
from .geometry import DegenerateGeometry, TrajectoryGrid, _as_xyz
from .kernel import ConvexProblem, SolverOptions, solve
from .scenario import Scenario, evaluate, link_state

LN2 = math.log(2.0)


@dataclass(frozen=True)
class FractionalParams:
    """Weights of the subtractive transform, one pair per slot.

    Production iterates keep alpha > 0 and beta >= 0; construction only
    requires finiteness so that residual probes at degenerate weights work.
    """

    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.alpha, dtype=float)
        b = np.asarray(self.beta, dtype=float)
        if np.any(~np.isfinite(a)) or np.any(~np.isfinite(b)):
            raise InvalidParameter("fractional parameters must be finite")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "beta", b)


@dataclass(frozen=True)
class SlackState:
    """Slack variables of the surrogate problem plus their expansion point."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    expansion_c: np.ndarray
    expansion_d: np.ndarray
    expansion_u: np.ndarray  # (N+1, 3) trajectory points


@dataclass(frozen=True)
class DerivedConstants:
    """Per-slot constants of the reformulated subproblem (both > 0)."""

    c1: np.ndarray  # harvest-path constant: eta * M * a_M^2 * split_eh * beta0^2
    c2: np.ndarray  # decode-path constant: noise_id / (split_id * beta0^2)


def derived_constants(scn: Scenario) -> DerivedConstants:
    beta0_sq = scn.channel.ref_gain**2
    a2 = scn.rhs.absorption**2
    c1 = scn.eh_efficiency * scn.rhs.element_count * a2 * scn.split_eh * beta0_sq
    c2 = scn.noise_uav_id / (scn.split_id * beta0_sq)
    return DerivedConstants(c1=np.broadcast_to(c1, (scn.n_slots,)).copy(), c2=c2.copy())


# ---------------------------------------------------------------------------
# Taylor bounds
# ---------------------------------------------------------------------------


def taylor_exp_lower_bound(c, c_k):
    """Tangent of exp at c_k: exp(c_k) * (1 + c - c_k) <= exp(c) everywhere."""
    return np.exp(c_k) * (1.0 + np.asarray(c) - c_k)


def distance_profile(u, anchor, xi: float) -> float:
    """||u - anchor||^2 * exp(xi * ||u - anchor||); convex in u for xi >= 0."""
    d = float(np.linalg.norm(_as_xyz(u) - _as_xyz(anchor)))
    return d * d * math.exp(xi * d)


def taylor_distance_lower_bound(u, u_k, anchor, xi: float) -> float:
    """First-order expansion of distance_profile about u_k.

    Tangent to a convex function, hence a global lower bound; exact at
    u = u_k. The expansion point may not coincide with the anchor.
    """
    uk = _as_xyz(u_k)
    q = _as_xyz(anchor)
    dk = float(np.linalg.norm(uk - q))
    if dk == 0.0:
        raise DegenerateGeometry("expansion point coincides with the link anchor")
    e = math.exp(xi * dk)
    base = dk * dk * e
    slope_vec = e * (2.0 + xi * dk) * (uk - q)
    return base + float(slope_vec @ (_as_xyz(u) - uk))


# ---------------------------------------------------------------------------
# Subtractive objective and slot coefficients
# ---------------------------------------------------------------------------


def subtractive_objective(
    traj: TrajectoryGrid, fp: FractionalParams, powers: np.ndarray, scn: Scenario
) -> float:
    """sum_n alpha_n * (R[n] - beta_n * P[n]) at the true link metrics."""
    totals = evaluate(scn, traj, powers)
    return float(np.sum(fp.alpha * (totals.rate - fp.beta * totals.power)))


@dataclass(frozen=True)
class _SlotCoeffs:
    """Everything about one slot that the surrogate needs, powers folded in."""

    a_own: np.ndarray  # own-data SINR = a_own * exp(-c)
    b_dir: np.ndarray  # direct destination SINR (position-independent)
    k_rel: np.ndarray  # relayed SINR = k_rel * exp(-(c+d))
    k_harv: np.ndarray  # relay transmit power = k_harv * exp(-c)
    rate_scale: float  # 1 for superposed access, 1/2 for orthogonal slots
    tx_power: np.ndarray  # transmit part of the power sum
    c_cap: np.ndarray  # decode threshold: c <= c_cap (inf when absent)
    cd_cap: np.ndarray  # MRC threshold: c + d <= cd_cap (inf when absent)


def _slot_coeffs(scn: Scenario, powers: np.ndarray, h_sd2: np.ndarray) -> _SlotCoeffs:
    rho1 = powers[:, 0]
    rho2 = powers[:, 1]
    dc = derived_constants(scn)
    beta0_sq = scn.channel.ref_gain**2
    m = scn.rhs.element_count
    tx_factor = (rho1 + rho2) if scn.eh_scaled_by_tx_power else np.ones_like(rho1)
    a_own = rho1 / dc.c2
    k_rel = m * dc.c1 * beta0_sq / scn.noise_dest_ep2 * tx_factor
    k_harv = (
        m * dc.c1 * scn.episode1_fraction / (1.0 - scn.episode1_fraction) * tx_factor
    )
    with np.errstate(divide="ignore"):
        if scn.oma_mode:
            b_dir = rho2 * h_sd2 / scn.noise_dest_ep1
            decode_bound = rho2 / (dc.c2 * scn.sinr_min_uav)
            rate_scale = 0.5
            tx_power = 0.5 * (rho1 + rho2)
        else:
            b_dir = rho2 * h_sd2 / (rho1 * h_sd2 + scn.noise_dest_ep1)
            decode_bound = np.where(
                scn.sinr_min_uav > 0.0, (rho2 / scn.sinr_min_uav - rho1) / dc.c2, np.inf
            )
            rate_scale = 1.0
            tx_power = rho1 + rho2
        if np.any(decode_bound <= 0.0):
            k = int(np.argmin(decode_bound))
            raise InfeasibleProblem(
                f"sic_decode threshold unreachable for the fixed coefficients in slot {k}"
            )
        c_cap = np.log(decode_bound)
        resid = scn.sinr_min_dest - b_dir
        cd_cap = np.where(resid > 0.0, np.log(k_rel / np.maximum(resid, 1e-300)), np.inf)
    return _SlotCoeffs(
        a_own=a_own,
        b_dir=b_dir,
        k_rel=k_rel,
        k_harv=k_harv,
        rate_scale=rate_scale,
        tx_power=tx_power,
        c_cap=c_cap,
        cd_cap=cd_cap,
    )


def slack_from_trajectory(scn: Scenario, traj: TrajectoryGrid) -> SlackState:
    """Exact slack values at a trajectory: the tight expansion point."""
    pts = traj.slot_positions()
    s = scn.source.as_array()
    d = scn.dest.as_array()
    xi = scn.channel.absorption_coeff
    d_su = np.linalg.norm(pts - s[None, :], axis=1)
    d_ud = np.linalg.norm(pts - d[None, :], axis=1)
    f_s = d_su**2 * np.exp(xi * d_su)
    f_d = d_ud**2 * np.exp(xi * d_ud)
    return SlackState(
        a=f_s.copy(),
        b=f_d.copy(),
        c=np.log(f_s),
        d=np.log(f_d),
        expansion_c=np.log(f_s),
        expansion_d=np.log(f_d),
        expansion_u=np.asarray(traj.points, dtype=float).copy(),
    )


# ---------------------------------------------------------------------------
# Surrogate subproblem
# ---------------------------------------------------------------------------


class _P5Layout:
    """Index bookkeeping for the surrogate variable vector.

    z = [xy of the N-1 interior points | a (N) | b (N) | c (N) | d (N)].
    Slot k (0-based) flies at trajectory point k; points 0 and N are pinned.
    """

    def __init__(self, n_slots: int):
        self.n = n_slots
        self.n_xy = 2 * (n_slots - 1)
        self.a0 = self.n_xy
        self.b0 = self.n_xy + n_slots
        self.c0 = self.n_xy + 2 * n_slots
        self.d0 = self.n_xy + 3 * n_slots
        self.dim = self.n_xy + 4 * n_slots

    def points(self, z: np.ndarray, template: np.ndarray) -> np.ndarray:
        pts = template.copy()
        if self.n_xy:
            pts[1 : self.n, 0] = z[0 : self.n_xy : 2]
            pts[1 : self.n, 1] = z[1 : self.n_xy : 2]
        return pts

    def pack(self, pts: np.ndarray, a, b, c, d) -> np.ndarray:
        z = np.empty(self.dim)
        if self.n_xy:
            z[0 : self.n_xy : 2] = pts[1 : self.n, 0]
            z[1 : self.n_xy : 2] = pts[1 : self.n, 1]
        z[self.a0 : self.a0 + self.n] = a
        z[self.b0 : self.b0 + self.n] = b
        z[self.c0 : self.c0 + self.n] = c
        z[self.d0 : self.d0 + self.n] = d
        return z


def build_p5(
    traj_k: TrajectoryGrid,
    slack_k: SlackState,
    fp: FractionalParams,
    powers: np.ndarray,
    scn: Scenario,
) -> tuple[ConvexProblem, np.ndarray, "_P5Layout"]:
    """Convex surrogate around the expansion trajectory.

    Returns the problem, a strictly interior start point, and the variable
    layout used to unpack solutions. Maximization is encoded by negating the
    affine objective (the kernel minimizes).
    """
    n = scn.n_slots
    lay = _P5Layout(n)
    state = link_state(scn, traj_k.slot_positions())
    co = _slot_coeffs(scn, powers, state.h_sd2)
    xi = scn.channel.absorption_coeff
    s_anchor = scn.source.as_array()
    d_anchor = scn.dest.as_array()
    template = np.asarray(traj_k.points, dtype=float).copy()
    budget_sq = (traj_k.step_budget + 1e-12) ** 2

    ck = slack_k.expansion_c
    dk = slack_k.expansion_d
    exp_ck = np.exp(ck)
    exp_dk = np.exp(dk)
    wk = ck + dk

    # Tangent data of the three exponential-in-slack terms.
    own_k = co.a_own * np.exp(-ck)
    rel_k = co.k_rel * np.exp(-wk)
    v1 = np.log2(1.0 + own_k)
    s1 = -own_k / ((1.0 + own_k) * LN2)
    v2 = np.log2(1.0 + co.b_dir + rel_k)
    s2 = -rel_k / ((1.0 + co.b_dir + rel_k) * LN2)
    harv_k = co.k_harv * np.exp(-ck)  # tangent of k_harv * exp(-c) at ck

    alpha = fp.alpha
    beta = fp.beta
    rs = co.rate_scale

    # Affine objective: value = const + gc . c + gd . d (maximized).
    grad_c = alpha * (rs * (s1 + s2) + beta * (-harv_k))
    grad_d = alpha * rs * s2
    const = float(
        np.sum(
            alpha
            * (
                rs * (v1 + v2)
                - beta * (co.tx_power + scn.circuit_power_w)
                + beta * harv_k
            )
        )
        - np.sum(grad_c * ck)
        - np.sum(grad_d * dk)
    )
    gvec = np.zeros(lay.dim)
    gvec[lay.c0 : lay.c0 + n] = grad_c
    gvec[lay.d0 : lay.d0 + n] = grad_d

    def objective(z):
        return -(const + float(gvec @ z))

    def objective_grad(z):
        return -gvec

    # --- constraints, one vector handle -------------------------------------
    # Rows: [f_s - a | a - te_c | f_d - b | b - te_d | affine caps | speed].

    # Affine caps: decode threshold, combined-SINR threshold, harvest floor.
    cap_rows = []
    cap_rhs = []
    for k in range(n):
        if np.isfinite(co.c_cap[k]):
            row = np.zeros(lay.dim)
            row[lay.c0 + k] = 1.0
            cap_rows.append(row)
            cap_rhs.append(co.c_cap[k])
    for k in range(n):
        if np.isfinite(co.cd_cap[k]):
            row = np.zeros(lay.dim)
            row[lay.c0 + k] = 1.0
            row[lay.d0 + k] = 1.0
            cap_rows.append(row)
            cap_rhs.append(co.cd_cap[k])
    # Harvest floor: sum_k k_harv * tangent(exp(-c_k)) >= sum of floors.
    floor = float(np.sum(scn.harvest_floor_w))
    row = np.zeros(lay.dim)
    row[lay.c0 : lay.c0 + n] = harv_k  # -(d/dc)[k_harv e^{-c}] at ck
    offset = float(np.sum(harv_k * (1.0 + ck)))
    cap_rows.append(row)
    cap_rhs.append(offset - floor)
    cap_mat = np.vstack(cap_rows)
    cap_vec = np.asarray(cap_rhs)
    n_caps = cap_vec.size
    with_speed = lay.n_xy > 0
    idx = np.arange(n)

    def constraints(z):
        pts = lay.points(z, template)
        slot = pts[:n]
        du = slot - s_anchor[None, :]
        dv = slot - d_anchor[None, :]
        dsu = np.sqrt(np.einsum("ij,ij->i", du, du))
        dud = np.sqrt(np.einsum("ij,ij->i", dv, dv))
        with np.errstate(over="ignore"):  # far line-search probes; rejected anyway
            f_s = dsu * dsu * np.exp(xi * dsu)
            f_d = dud * dud * np.exp(xi * dud)
        a = z[lay.a0 : lay.a0 + n]
        b = z[lay.b0 : lay.b0 + n]
        c = z[lay.c0 : lay.c0 + n]
        d = z[lay.d0 : lay.d0 + n]
        te_c = exp_ck * (1.0 + c - ck)
        te_d = exp_dk * (1.0 + d - dk)
        parts = [f_s - a, a - te_c, f_d - b, b - te_d, cap_mat @ z - cap_vec]
        if with_speed:
            steps = np.diff(pts, axis=0)
            parts.append(np.einsum("ij,ij->i", steps, steps) - budget_sq)
        return np.concatenate(parts)

    def constraints_jac(z):
        pts = lay.points(z, template)
        slot = pts[:n]
        rows = 4 * n + n_caps + (n if with_speed else 0)
        J = np.zeros((rows, lay.dim))
        for q_idx, (anchor, row0) in enumerate(((s_anchor, 0), (d_anchor, 2 * n))):
            diff = slot - anchor[None, :]
            dist = np.linalg.norm(diff, axis=1)
            coef = np.exp(xi * dist) * (2.0 + xi * dist)  # d f / d dist over dist
            for k in range(1, n):  # interior, hence variable, points
                J[row0 + k, 2 * (k - 1)] = coef[k] * diff[k, 0]
                J[row0 + k, 2 * (k - 1) + 1] = coef[k] * diff[k, 1]
            slack0 = lay.a0 if q_idx == 0 else lay.b0
            J[row0 + idx, slack0 + idx] = -1.0
        J[n + idx, lay.a0 + idx] = 1.0
        J[n + idx, lay.c0 + idx] = -exp_ck
        J[3 * n + idx, lay.b0 + idx] = 1.0
        J[3 * n + idx, lay.d0 + idx] = -exp_dk
        J[4 * n : 4 * n + n_caps] = cap_mat
        if with_speed:
            srow = 4 * n + n_caps
            for j in range(n):
                diff = pts[j + 1] - pts[j]
                if 1 <= j <= n - 1:
                    J[srow + j, 2 * (j - 1)] -= 2.0 * diff[0]
                    J[srow + j, 2 * (j - 1) + 1] -= 2.0 * diff[1]
                if 1 <= j + 1 <= n - 1:
                    J[srow + j, 2 * j] += 2.0 * diff[0]
                    J[srow + j, 2 * j + 1] += 2.0 * diff[1]
        return J

    problem = ConvexProblem(
        dimension=lay.dim,
        objective=objective,
        objective_grad=objective_grad,
        inequality_constraints=[constraints],
        constraint_jacs=[constraints_jac],
    )

    # Strictly interior start near the expansion point. The upward slack
    # shifts stay inside whatever cap margin each slot has; a slot whose cap
    # is exactly active gets no shift and phase-I takes over.
    margin_c = co.c_cap - ck
    margin_cd = co.cd_cap - (ck + dk)
    delta_c = np.clip(np.minimum(1e-7, np.minimum(0.4 * margin_c, 0.2 * margin_cd)), 0.0, None)
    delta_d = np.clip(np.minimum(1e-7, 0.2 * margin_cd), 0.0, None)
    f_s0 = np.exp(ck)
    f_d0 = np.exp(dk)
    z0 = lay.pack(
        template,
        f_s0 * (1.0 + 0.4 * delta_c),
        f_d0 * (1.0 + 0.4 * delta_d),
        ck + delta_c,
        dk + delta_d,
    )
    return problem, z0, lay


# ---------------------------------------------------------------------------
# Inner SCA layer
# ---------------------------------------------------------------------------


@dataclass
class ScaInfo:
    iterations: int
    objective_trace: list
    converged: bool


def solve_inner_sca(
    traj0: TrajectoryGrid,
    fp: FractionalParams,
    powers: np.ndarray,
    scn: Scenario,
    tol: float = 1e-3,
    max_iters: int = 25,
    solver_opts: SolverOptions = None,
) -> tuple[TrajectoryGrid, ScaInfo]:
    """Maximize the subtractive objective over the path for fixed weights.

    Each iteration solves the convex surrogate expanded at the incumbent and
    re-tightens the slack variables at the new path. Steps that fail to
    improve the true objective are rejected, which both terminates the loop
    and preserves the ascent property against solver noise.
    """
    cold = solver_opts or SolverOptions(kkt_tol=1e-6, barrier_growth=100.0)
    warm = SolverOptions(
        kkt_tol=cold.kkt_tol, barrier_t0=1e5, barrier_growth=300.0, feas_tol=cold.feas_tol
    )
    traj = traj0
    current = subtractive_objective(traj, fp, powers, scn)
    trace = [current]
    converged = False
    iters = 0
    for iters in range(1, max_iters + 1):
        slack = slack_from_trajectory(scn, traj)
        problem, z0, lay = build_p5(traj, slack, fp, powers, scn)
        try:
            res = solve(problem, z0, cold if iters == 1 else warm)
        except InfeasibleProblem:
            # The incumbent is feasible but boundary-tight (an active SINR cap
            # leaves the strict interior empty); it cannot be improved here.
            converged = True
            break
        new_pts = lay.points(res.x_opt, np.asarray(traj.points, dtype=float).copy())
        new_pts[:, 2] = traj.start.z  # altitude never varies
        candidate = traj.with_points(new_pts)
        value = subtractive_objective(candidate, fp, powers, scn)
        if value < current - 1e-12:
            converged = True
            break
        gain = value - current
        traj, current = candidate, value
        trace.append(current)
        if gain < tol:
            converged = True
            break
    return traj, ScaInfo(iterations=iters, objective_trace=trace, converged=converged)


# ---------------------------------------------------------------------------
# Outer damped-Newton layer
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NewtonState:
    params: FractionalParams
    theta: np.ndarray  # 2N residual
    jacobian: np.ndarray  # 2N x 2N diagonal matrix
    step_scale: float = 1.0
    shrink: float = 0.5
    armijo: float = 0.3


def theta_residual(
    traj: TrajectoryGrid, fp: FractionalParams, powers: np.ndarray, scn: Scenario
) -> np.ndarray:
    """Optimality residual of the transform weights at the current path."""
    totals = evaluate(scn, traj, powers)
    top = totals.rate - fp.beta * totals.power
    bottom = 1.0 - fp.alpha * totals.power
    return np.concatenate([top, bottom])


def newton_state(
    traj: TrajectoryGrid, fp: FractionalParams, powers: np.ndarray, scn: Scenario
) -> NewtonState:
    totals = evaluate(scn, traj, powers)
    theta = theta_residual(traj, fp, powers, scn)
    jac = np.diag(np.concatenate([-totals.power, -totals.power]))
    return NewtonState(params=fp, theta=theta, jacobian=jac)


def damped_newton_step(
    state: NewtonState, traj: TrajectoryGrid, powers: np.ndarray, scn: Scenario
) -> NewtonState:
    """One backtracked Newton update of (alpha, beta) with the path frozen.

    The residual is affine in the weights for a frozen path, so the full
    step is usually accepted and zeroes the residual exactly.
    """
    theta = state.theta
    norm0 = float(np.linalg.norm(theta))
    if norm0 <= 1e-14:  # already at the root, up to float noise
        return state
    totals = evaluate(scn, traj, powers)
    n = scn.n_slots
    # Newton direction: x + mu zeroes the affine residual at full step.
    mu_beta = theta[:n] / totals.power
    mu_alpha = theta[n:] / totals.power
    fp = state.params
    cap = 50
    for m in range(cap + 1):
        scale = state.shrink**m
        trial = FractionalParams(
            alpha=fp.alpha + scale * mu_alpha, beta=fp.beta + scale * mu_beta
        )
        trial_theta = theta_residual(traj, trial, powers, scn)
        if np.linalg.norm(trial_theta) <= (1.0 - state.armijo * scale) * norm0:
            jac = np.diag(np.concatenate([-totals.power, -totals.power]))
            return replace(
                state,
                params=trial,
                theta=trial_theta,
                jacobian=jac,
                step_scale=scale,
            )
    raise LineSearchStall(f"no acceptable damping within {cap} trials")


# ---------------------------------------------------------------------------
# Full trajectory step
# ---------------------------------------------------------------------------


@dataclass
class TrajectoryResult:
    trajectory: TrajectoryGrid
    params: FractionalParams
    theta_norm: float
    outer_iterations: int
    converged: bool
    objective_trace: list


def initial_fractional_params(
    traj: TrajectoryGrid, powers: np.ndarray, scn: Scenario
) -> FractionalParams:
    """Start at the fixed-point form: alpha = 1/P, beta = R/P."""
    totals = evaluate(scn, traj, powers)
    return FractionalParams(alpha=1.0 / totals.power, beta=totals.rate / totals.power)


def optimize_trajectory(
    traj0: TrajectoryGrid,
    powers: np.ndarray,
    scn: Scenario,
    i_max: int = 20,
    eps1: float = 1e-3,
    theta_tol: float = 1e-3,
    sca_max_iters: int = 25,
    solver_opts: SolverOptions = None,
) -> TrajectoryResult:
    """Alternate the inner SCA and the damped Newton update until both rest."""
    fp = initial_fractional_params(traj0, powers, scn)
    traj = traj0
    trace = []
    theta_norm = np.inf
    converged = False
    outer = 0
    for outer in range(1, i_max + 1):
        traj, info = solve_inner_sca(
            traj, fp, powers, scn, tol=eps1, max_iters=sca_max_iters, solver_opts=solver_opts
        )
        trace.extend(info.objective_trace)
        theta = theta_residual(traj, fp, powers, scn)
        theta_norm = float(np.max(np.abs(theta)))
        if theta_norm <= theta_tol:
            converged = True
            break
        st = newton_state(traj, fp, powers, scn)
        st = damped_newton_step(st, traj, powers, scn)
        fp = st.params
    return TrajectoryResult(
        trajectory=traj,
        params=fp,
        theta_norm=theta_norm,
        outer_iterations=outer,
        converged=converged,
        objective_trace=trace,
    )
