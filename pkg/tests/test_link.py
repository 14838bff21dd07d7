"""Per-slot SINR, harvesting, and efficiency contracts."""

import math

import numpy as np
import pytest

from ee_sim.errors import InvalidParameter, NonPositivePower
from ee_sim.link import (
    LinkMetrics,
    NomaPower,
    SlotGains,
    SlotRadioParams,
    ee_to_mbits_per_joule,
    harvested_energy,
    relay_power,
    sinr_dest_direct,
    sinr_dest_relay,
    sinr_mrc,
    sinr_uav_decodes_dest,
    sinr_uav_own,
    slot_metrics,
)


def params(**kw):
    base = dict(
        split_id=0.5,
        split_eh=0.5,
        noise_uav_id=1e-13,
        noise_dest_ep1=1e-13,
        noise_dest_ep2=1e-13,
        eh_efficiency=0.7,
        episode1_fraction=0.5,
    )
    base.update(kw)
    return SlotRadioParams(**base)


class TestUavSinrs:
    def test_interference_free_limit(self):
        sp = params()
        p = NomaPower(0.0, 0.8)
        h = 1e-6
        expected = 0.8 * h * h * sp.split_id / sp.noise_uav_id
        assert sinr_uav_decodes_dest(p, h, sp) == pytest.approx(expected, rel=1e-12)

    def test_zero_message_power_gives_zero(self):
        assert sinr_uav_decodes_dest(NomaPower(0.5, 0.0), 1e-6, params()) == 0.0
        assert sinr_uav_own(NomaPower(0.0, 0.5), 1e-6, params()) == 0.0

    def test_reference_slot(self):
        # rho1 = rho2 = 0.5, |h|^2 = 1e-12, noise 1e-13, split 0.5:
        # 0.5e-12 / (0.5e-12 + 2e-13) = 5/7
        sp = params()
        p = NomaPower(0.5, 0.5)
        h = 1e-6
        assert sinr_uav_decodes_dest(p, h, sp) == pytest.approx(5.0 / 7.0, rel=1e-12)
        assert sinr_uav_own(p, h, sp) == pytest.approx(2.5, rel=1e-12)

    def test_unit_crossover(self):
        sp = params(split_id=0.999999, noise_uav_id=1e-12)
        # split ~1, rho1 = 1, |h|^2 = noise -> SINR ~ 1
        assert sinr_uav_own(NomaPower(1.0, 0.0), 1e-6, sp) == pytest.approx(1.0, rel=1e-5)

    def test_nonfinite_inputs_rejected(self):
        with pytest.raises(InvalidParameter):
            sinr_uav_decodes_dest(NomaPower(0.1, 0.1), float("inf"), params())
        with pytest.raises(InvalidParameter):
            sinr_uav_decodes_dest(NomaPower(0.1, 0.1), 0.0, params())

    def test_sic_ordering_monotonicity(self):
        sp = params()
        h = 2e-6
        rng = np.random.default_rng(11)
        for _ in range(200):
            r1, r2 = rng.uniform(0.0, 1.0, 2)
            d = rng.uniform(0.0, 0.3)
            base = sinr_uav_decodes_dest(NomaPower(r1, r2), h, sp)
            assert sinr_uav_decodes_dest(NomaPower(r1 + d, r2), h, sp) <= base + 1e-15
            assert sinr_uav_decodes_dest(NomaPower(r1, r2 + d), h, sp) >= base - 1e-15


class TestHarvesting:
    def test_all_unit_case(self):
        sp = params(eh_efficiency=1.0, split_eh=0.999999999999, episode1_fraction=0.5)
        e = harvested_energy(NomaPower(0.1, 0.1), 1.0, sp)
        assert e == pytest.approx(0.5, rel=1e-9)

    def test_reference_value(self):
        sp = params(eh_efficiency=0.7, split_eh=0.6, episode1_fraction=0.5)
        e = harvested_energy(NomaPower(0.1, 0.1), 2e-6, sp)
        assert e == pytest.approx(8.4e-13, rel=1e-12)

    def test_vanishing_split_boundary(self):
        # The (0,1) invariant is relaxed here on purpose: probe the linear
        # limit split_eh -> 0 by scaling rather than constructing split=0.
        sp1 = params(split_eh=0.5)
        sp2 = params(split_eh=0.25)
        e1 = harvested_energy(NomaPower(0, 0), 1e-6, sp1)
        e2 = harvested_energy(NomaPower(0, 0), 1e-6, sp2)
        assert e2 == pytest.approx(0.5 * e1, rel=1e-12)

    def test_linearity_and_quadratic_scaling(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            eta, t_frac, s2 = rng.uniform(0.05, 0.95, 3)
            g = rng.uniform(1e-8, 1e-4)
            k = rng.uniform(0.1, 3.0)
            base = harvested_energy(
                NomaPower(0, 0), g, params(eh_efficiency=eta, episode1_fraction=t_frac, split_eh=s2)
            )
            assert harvested_energy(
                NomaPower(0, 0),
                g,
                params(eh_efficiency=min(eta * k, 1.0), episode1_fraction=t_frac, split_eh=s2),
            ) == pytest.approx(min(eta * k, 1.0) / eta * base, rel=1e-12)
            assert harvested_energy(
                NomaPower(0, 0), g * k, params(eh_efficiency=eta, episode1_fraction=t_frac, split_eh=s2)
            ) == pytest.approx(k * k * base, rel=1e-12)

    def test_tx_power_scaling_flag(self):
        sp = params()
        base = harvested_energy(NomaPower(0.3, 0.5), 1e-6, sp)
        scaled = harvested_energy(NomaPower(0.3, 0.5), 1e-6, sp, scaled_by_tx_power=True)
        assert scaled == pytest.approx(0.8 * base, rel=1e-12)

    def test_relay_power(self):
        sp = params(episode1_fraction=0.5)
        assert relay_power(0.0, sp) == 0.0
        assert relay_power(0.5, sp) == pytest.approx(1.0, rel=1e-12)
        sp = params(episode1_fraction=0.25)
        assert relay_power(8.4e-13, sp) == pytest.approx(1.12e-12, rel=1e-12)


class TestDestinationSinrs:
    def test_direct_reference_value(self):
        sp = params()
        p = NomaPower(0.3, 0.5)
        h = math.sqrt(2e-12)
        assert sinr_dest_direct(p, h, sp) == pytest.approx(10.0 / 7.0, rel=1e-12)

    def test_direct_trivial_cases(self):
        sp = params()
        assert sinr_dest_direct(NomaPower(0.5, 0.0), 1e-6, sp) == 0.0
        h = math.sqrt(sp.noise_dest_ep1)  # rho2 |h|^2 == noise
        assert sinr_dest_direct(NomaPower(0.0, 1.0), h, sp) == pytest.approx(1.0, rel=1e-12)

    def test_relay_reference_value(self):
        sp = params(eh_efficiency=0.7, split_eh=0.6)
        got = sinr_dest_relay(2e-6, 1e-6, sp)
        assert got == pytest.approx(0.7 * 0.6 * 4e-12 * 1e-12 / 1e-13, rel=1e-12)
        assert got == pytest.approx(1.68e-11, rel=1e-12)

    def test_relay_trivial_cases(self):
        sp = params(eh_efficiency=0.999999999999, split_eh=0.999999999999)
        assert sinr_dest_relay(0.0, 1e-6, sp) == 0.0
        assert sinr_dest_relay(1.0, math.sqrt(sp.noise_dest_ep2), sp) == pytest.approx(
            1.0, rel=1e-9
        )

    def test_mrc_is_exact_addition(self):
        assert sinr_mrc(0.0, 0.0) == 0.0
        assert sinr_mrc(1.5, 0.0) == 1.5
        assert sinr_mrc(1.42857, 0.3) == 1.42857 + 0.3
        rng = np.random.default_rng(2)
        for _ in range(100):
            a, b = rng.uniform(0, 10, 2)
            assert sinr_mrc(a, b) == a + b  # bit-exact


class TestSlotMetrics:
    def gains(self, h_su=1e-6, h_ud=1e-6, h_sd=1e-6, g_sum=2e-6):
        return SlotGains(h_su=h_su, h_ud=h_ud, h_sd=h_sd, g_sum=g_sum)

    def test_zero_power_zero_surface(self):
        m = slot_metrics(NomaPower(0.0, 0.0), self.gains(g_sum=0.0), params(), 0.52)
        assert m.sum_rate == 0.0
        assert m.ee == 0.0
        assert m.power_sum == pytest.approx(0.52)

    def test_zero_power_with_surface_still_relays(self):
        m = slot_metrics(NomaPower(0.0, 0.0), self.gains(), params(), 0.52)
        assert m.sinr_dest_relay > 0.0
        assert m.sum_rate > 0.0

    def test_power_sum_arithmetic(self):
        # slot with a forced 0.02 W harvest: P = 0.3 + 0.5 + 0.52 - 0.02
        sp = params(episode1_fraction=0.5, split_eh=0.5, eh_efficiency=0.8)
        g_needed = math.sqrt(0.02 * 0.5 / (0.8 * 0.5 * 0.5))
        m = slot_metrics(NomaPower(0.3, 0.5), self.gains(g_sum=g_needed), sp, 0.52)
        assert m.power_sum == pytest.approx(1.3, rel=1e-12)

    def test_full_slot_against_field_by_field_oracle(self):
        sp = params(split_eh=0.6)
        p = NomaPower(0.3, 0.5)
        g = self.gains(h_su=1e-6, h_ud=1e-6, h_sd=math.sqrt(2e-12), g_sum=2e-6)
        m = slot_metrics(p, g, sp, 0.52)
        assert m.sinr_uav_dest == pytest.approx(
            0.5e-12 / (0.3e-12 + 1e-13 / 0.5), rel=1e-12
        )
        assert m.sinr_uav_own == pytest.approx(0.5 * 0.3 * 1e-12 / 1e-13, rel=1e-12)
        assert m.sinr_dest_direct == pytest.approx(10.0 / 7.0, rel=1e-12)
        assert m.sinr_dest_relay == pytest.approx(1.68e-11, rel=1e-12)
        assert m.sinr_mrc == m.sinr_dest_direct + m.sinr_dest_relay
        assert m.harvested_energy == pytest.approx(8.4e-13 * 0.5, rel=1e-12)
        assert m.relay_power == pytest.approx(m.harvested_energy / 0.5, rel=1e-12)
        rate = math.log2(1 + m.sinr_uav_own) + math.log2(1 + m.sinr_mrc)
        assert m.sum_rate == pytest.approx(rate, rel=1e-12)
        assert m.power_sum == pytest.approx(0.8 + 0.52 - m.relay_power, rel=1e-12)
        assert m.ee * m.power_sum == pytest.approx(m.sum_rate, rel=1e-12)

    def test_nonpositive_power_raises(self):
        sp = params(eh_efficiency=1.0, split_eh=0.9, episode1_fraction=0.9)
        with pytest.raises(NonPositivePower):
            slot_metrics(NomaPower(0.0, 0.0), self.gains(g_sum=10.0), sp, 0.01)

    def test_rate_increases_in_each_sinr(self):
        # Monotone in the SINR arguments: h_su only feeds the UAV's own-data
        # SINR, g_sum only the relayed one, so bumping either must not lower
        # the sum rate.
        sp = params()
        rng = np.random.default_rng(8)
        for _ in range(100):
            p = NomaPower(*rng.uniform(0.01, 0.5, 2))
            g = self.gains(h_su=rng.uniform(1e-7, 1e-5), g_sum=rng.uniform(1e-7, 1e-5))
            m = slot_metrics(p, g, sp, 0.52)
            assert m.sum_rate >= 0.0
            up_su = self.gains(h_su=1.1 * g.h_su, g_sum=g.g_sum)
            assert slot_metrics(p, up_su, sp, 0.52).sum_rate >= m.sum_rate
            up_g = self.gains(h_su=g.h_su, g_sum=1.1 * g.g_sum)
            assert slot_metrics(p, up_g, sp, 0.52).sum_rate >= m.sum_rate

    def test_bandwidth_scaling(self):
        assert ee_to_mbits_per_joule(0.005, 10e9) == pytest.approx(50.0)
