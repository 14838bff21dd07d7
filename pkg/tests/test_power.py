"""Quadratic transform and augmented-Lagrangian power step."""

import math

import numpy as np
import pytest

from conftest import desk_scenario, seeded_random_scenario
from ee_sim.errors import InfeasibleProblem, InvalidParameter, SurrogateCollapse
from ee_sim.link import NomaPower, SlotGains
from ee_sim.power import (
    AlmState,
    QuadState,
    alm_objective,
    chi,
    lambda_update,
    rhat_sum,
    solve_power_alm,
    varpi_update,
)
from ee_sim.scenario import constraint_residuals, evaluate, link_state, rate_and_power


def slot_setup(scn, k=0):
    traj = scn.initial_trajectory()
    state = link_state(scn, traj.slot_positions())
    gains = SlotGains(
        h_su=float(state.h_su[k]),
        h_ud=float(state.h_ud[k]),
        h_sd=float(state.h_sd[k]),
        g_sum=float(state.g_sum[k]),
    )
    return traj, state, gains, scn.slot_params(k)


class TestChi:
    def test_zero_thresholds_zero_surface(self):
        scn = desk_scenario(slots=2, sinr_min_dest=0.0, split_eh=1e-12)
        # split_eh must stay in (0,1); a vanishing split makes the relayed
        # SINR negligible, so chi collapses to the threshold itself.
        c = chi(scn, scn.initial_trajectory())
        np.testing.assert_allclose(c.chi, 0.0, atol=1e-12)

    def test_relay_exactly_at_threshold(self):
        scn = desk_scenario(slots=1)
        traj = scn.initial_trajectory()
        state = link_state(scn, traj.slot_positions())
        scn2 = desk_scenario(slots=1, sinr_min_dest=float(state.relay_coeff[0]))
        c = chi(scn2, traj)
        np.testing.assert_allclose(c.chi, 0.0, atol=1e-15)

    def test_matches_direct_oracle(self):
        scn = desk_scenario(slots=3)
        traj = scn.initial_trajectory()
        state = link_state(scn, traj.slot_positions())
        got = chi(scn, traj).chi
        a2 = scn.rhs.absorption**2
        expected = scn.sinr_min_dest - (
            scn.eh_efficiency * a2 * scn.split_eh * state.g_sum**2 * state.h_ud**2
        ) / scn.noise_dest_ep2
        np.testing.assert_allclose(got, expected, rtol=1e-12)


class TestVarpi:
    def test_published_formula(self):
        assert varpi_update(2.0, 4.0) == pytest.approx(1.0 / 128.0, rel=1e-15)
        assert varpi_update(1.0, 1.0) == pytest.approx(0.5, rel=1e-15)

    def test_random_slots_match_oracle(self):
        rng = np.random.default_rng(3)
        p = rng.uniform(0.5, 3.0, 20)
        r = rng.uniform(0.1, 2.0, 20)
        np.testing.assert_allclose(varpi_update(p, r), 1.0 / (2 * p**2 * r**2), rtol=1e-15)

    def test_rejects_nonpositive(self):
        with pytest.raises(InvalidParameter):
            varpi_update(0.0, 1.0)

    def test_tangency_identity(self):
        # varpi A^2 + 1/(4 varpi B^2) == A/B exactly at varpi = 1/(2AB)
        rng = np.random.default_rng(4)
        for _ in range(1000):
            a = rng.uniform(0.05, 5.0)
            b = rng.uniform(0.05, 5.0)
            w = 1.0 / (2.0 * a * b)
            val = w * a * a + 1.0 / (4.0 * w * b * b)
            assert val == pytest.approx(a / b, rel=1e-12)


class TestLambdaAndSurrogate:
    def test_lambda_closed_form_cases(self):
        scn = desk_scenario(slots=1)
        _, _, gains, sp = slot_setup(scn)
        assert lambda_update(NomaPower(0.5, 0.0), gains.h_sd, sp) == 0.0
        # rho1 = 0 and rho2 |h|^2 = noise = x: lambda = sqrt(x)/x
        h = math.sqrt(sp.noise_dest_ep1)
        lam = lambda_update(NomaPower(0.0, 1.0), h, sp)
        assert lam == pytest.approx(1.0 / math.sqrt(sp.noise_dest_ep1), rel=1e-12)

    def test_lambda_matches_direct_formula(self):
        scn = desk_scenario(slots=1)
        _, _, gains, sp = slot_setup(scn)
        rng = np.random.default_rng(5)
        for _ in range(50):
            p = NomaPower(*rng.uniform(0.01, 0.5, 2))
            expected = math.sqrt(p.rho2 * gains.h_sd**2) / (
                p.rho1 * gains.h_sd**2 + sp.noise_dest_ep1
            )
            assert lambda_update(p, gains.h_sd, sp) == pytest.approx(expected, rel=1e-12)

    def test_tangency_with_true_rate(self):
        # At the closed-form lambda the surrogate equals the true sum rate.
        scn = desk_scenario(slots=1)
        traj, state, gains, sp = slot_setup(scn)
        rng = np.random.default_rng(6)
        for _ in range(1000):
            p = NomaPower(*rng.uniform(0.005, 0.5, 2))
            lam = lambda_update(p, gains.h_sd, sp)
            rate, _ = rate_and_power(
                scn, state, np.array([p.rho1]), np.array([p.rho2])
            )
            assert rhat_sum(p, gains, sp, lam) == pytest.approx(float(rate[0]), rel=1e-12)

    def test_majorization_direction(self):
        # Any other nonnegative lambda underestimates the true rate.
        scn = desk_scenario(slots=1)
        traj, state, gains, sp = slot_setup(scn)
        rng = np.random.default_rng(7)
        for _ in range(500):
            p = NomaPower(*rng.uniform(0.005, 0.5, 2))
            rate, _ = rate_and_power(scn, state, np.array([p.rho1]), np.array([p.rho2]))
            lam_star = lambda_update(p, gains.h_sd, sp)
            lam = rng.uniform(0.0, 3.0) * (lam_star + 1e-12)
            try:
                val = rhat_sum(p, gains, sp, lam)
            except SurrogateCollapse:
                continue
            assert val <= float(rate[0]) + 1e-12

    def test_zero_lambda_keeps_only_remaining_terms(self):
        scn = desk_scenario(slots=1)
        _, state, gains, sp = slot_setup(scn)
        p = NomaPower(0.2, 0.4)
        got = rhat_sum(p, gains, sp, 0.0)
        own = sp.split_id * p.rho1 * gains.h_su**2 / sp.noise_uav_id
        relay = (
            sp.eh_efficiency * sp.split_eh * gains.g_sum**2 * gains.h_ud**2 / sp.noise_dest_ep2
        )
        assert got == pytest.approx(math.log2(1 + own) + math.log2(1 + relay), rel=1e-12)


class TestAlmObjective:
    def test_limit_of_large_penalty_on_feasible_point(self):
        scn = desk_scenario(slots=2)
        traj = scn.initial_trajectory()
        powers = scn.initial_powers()
        totals = evaluate(scn, traj, powers)
        state = link_state(scn, traj.slot_positions())
        lam = np.array(
            [
                lambda_update(NomaPower(*powers[k]), float(state.h_sd[k]), scn.slot_params(k))
                for k in range(2)
            ]
        )
        varpi = 1.0 / (2 * totals.power * totals.rate)
        quad = QuadState(varpi=varpi, lam=lam)
        alm = AlmState.fresh(2)
        alm.penalty = 1e9
        got = alm_objective(powers, quad, alm, scn, traj)
        expected = float(
            np.sum(varpi * totals.power**2 + 1.0 / (4 * varpi * totals.rate**2))
        )
        assert got == pytest.approx(expected, rel=1e-9)

    def test_single_violated_peak_constraint_penalty(self):
        scn = desk_scenario(slots=1)
        traj = scn.initial_trajectory()
        delta = 0.07  # normalized violation of the peak cap
        powers = np.array([[0.5, 0.5 + delta * scn.p_peak_w]])
        totals_rate, totals_power = rate_and_power(
            scn, link_state(scn, traj.slot_positions()), powers[:, 0], powers[:, 1]
        )
        state = link_state(scn, traj.slot_positions())
        lam = np.array(
            [lambda_update(NomaPower(*powers[0]), float(state.h_sd[0]), scn.slot_params(0))]
        )
        varpi = 1.0 / (2 * totals_power * totals_rate)
        quad = QuadState(varpi=varpi, lam=lam)
        for z in (1.0, 8.0):
            alm = AlmState.fresh(1)
            alm.penalty = z
            base = float(
                np.sum(varpi * totals_power**2 + 1.0 / (4 * varpi * totals_rate**2))
            )
            got = alm_objective(powers, quad, alm, scn, traj)
            assert got - base == pytest.approx(z * delta**2 / 2.0, rel=1e-9)

    def test_matches_scripted_equation_oracle(self):
        scn = desk_scenario(slots=3)
        traj = scn.initial_trajectory()
        rng = np.random.default_rng(8)
        powers = rng.uniform(0.05, 0.45, size=(3, 2))
        state = link_state(scn, traj.slot_positions())
        lam_star = np.array(
            [
                lambda_update(NomaPower(*powers[k]), float(state.h_sd[k]), scn.slot_params(k))
                for k in range(3)
            ]
        )
        lam = lam_star * rng.uniform(0.3, 1.2, 3)
        varpi = rng.uniform(0.1, 2.0, 3)
        quad = QuadState(varpi=varpi, lam=lam)
        alm = AlmState(
            mult_sic=rng.uniform(0, 0.5, 3),
            mult_dest=rng.uniform(0, 0.5, 3),
            mult_peak=rng.uniform(0, 0.5, 3),
            mult_avg=rng.uniform(0, 0.5, 3),
            mult_eh=rng.uniform(0, 0.5, 3),
            penalty=4.0,
        )
        got = alm_objective(powers, quad, alm, scn, traj)

        # Independent re-evaluation, scalar loops only.
        total = 0.0
        rho1, rho2 = powers[:, 0], powers[:, 1]
        from ee_sim.power import _normalized_violations, _power_model, _rhat_vec

        model = _power_model(scn, state)
        rhat = _rhat_vec(scn, model, rho1, rho2, lam)
        _, pw = rate_and_power(scn, state, rho1, rho2)
        for k in range(3):
            total += varpi[k] * pw[k] ** 2 + 1.0 / (4 * varpi[k] * rhat[k] ** 2)
        pen = 0.0
        chi_vec = scn.sinr_min_dest - model.relay(rho1, rho2)
        gs = _normalized_violations(model, rho1, rho2, chi_vec)
        for mu, g in zip(alm.multipliers(), gs):
            for k in range(3):
                pen += max(mu[k] + 4.0 * g[k], 0.0) ** 2 - mu[k] ** 2
        total += pen / 8.0
        assert got == pytest.approx(total, rel=1e-10)


def grid_oracle_single_slot(scn, traj, steps=400):
    """Exhaustive (rho1, rho2) search honoring every constraint."""
    state = link_state(scn, traj.slot_positions())
    grid = np.linspace(0.0, scn.p_peak_w, steps)
    r1, r2 = np.meshgrid(grid, grid, indexing="ij")
    rate, power = rate_and_power(
        scn, state, r1[..., None], r2[..., None], clip_infeasible=True
    )
    from ee_sim.scenario import sinr_decode_dest, sinr_dest_combined

    ok = (r1 + r2 <= scn.p_peak_w + 1e-12) & ((r1 + r2) <= scn.p_max_w)
    ok &= sinr_decode_dest(scn, state, r1[..., None], r2[..., None])[..., 0] >= scn.sinr_min_uav[0]
    ok &= (
        sinr_dest_combined(scn, state, r1[..., None], r2[..., None])[..., 0]
        >= scn.sinr_min_dest[0]
    )
    ee = np.where(ok, rate[..., 0] / power[..., 0], -np.inf)
    idx = np.unravel_index(np.argmax(ee), ee.shape)
    return float(ee[idx]), (float(r1[idx]), float(r2[idx]))


class TestSolvePowerAlm:
    def test_single_slot_matches_grid_oracle(self):
        scn = desk_scenario(slots=1, sinr_min_uav=0.0, sinr_min_dest=0.0)
        traj = scn.initial_trajectory()
        sol = solve_power_alm(traj, scn)
        assert sol.feasible
        oracle_ee, _ = grid_oracle_single_slot(scn, traj)
        assert sol.ee >= oracle_ee * 0.98

    def test_infeasible_threshold_surfaces_named_constraint(self):
        scn = desk_scenario(slots=1, sinr_min_uav=10.0, sinr_min_dest=20.0)
        with pytest.raises(InfeasibleProblem, match="sic_decode"):
            solve_power_alm(scn.initial_trajectory(), scn)

    def test_three_slots_residuals_and_per_slot_oracle(self):
        scn = desk_scenario(slots=3)
        traj = scn.initial_trajectory()
        sol = solve_power_alm(traj, scn)
        assert sol.feasible
        assert max(sol.feasibility_residuals.values()) <= 1e-4
        # Slots decouple when the average-power cap is slack, so the per-slot
        # grid oracle bounds each slot's achievable ratio.
        state = link_state(scn, traj.slot_positions())
        powers = np.array([[p.rho1, p.rho2] for p in sol.powers])
        rate, power = rate_and_power(scn, state, powers[:, 0], powers[:, 1])
        for k in range(3):
            sub = desk_scenario(slots=1)
            pts = traj.points[k : k + 2].copy()
            sub_traj = sub.grid.with_points(
                np.vstack([traj.points[k], traj.points[k]])
            )
            sub = sub.with_grid(sub_traj)
            oracle_ee, _ = grid_oracle_single_slot(sub, sub_traj)
            assert rate[k] / power[k] >= oracle_ee * 0.98 - 1e-9

    def test_multiplier_nonnegativity_preserved(self):
        scn = desk_scenario(slots=2)
        sol = solve_power_alm(scn.initial_trajectory(), scn)
        assert sol.feasible  # updates clamp at zero internally

    def test_starting_point_must_respect_peak(self):
        scn = desk_scenario(slots=1)
        with pytest.raises(InvalidParameter):
            solve_power_alm(scn.initial_trajectory(), scn, powers0=np.array([[0.6, 0.6]]))
