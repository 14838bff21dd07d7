"""Per-slot NOMA/SIC/MRC link metrics: SINRs, harvested energy, rates, EE.

The cooperative protocol has two episodes per slot. Episode 1: the source
broadcasts a two-message NOMA superposition; the UAV splits its received
power between an information-decoding antenna (share split_id) and the
harvesting surface (share split_eh), while the destination receives its
message directly. Episode 2: the UAV relays the destination's message using
the harvested power, and the destination combines both copies by MRC.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameter, NonPositivePower


def _require_finite(**values):
    for name, v in values.items():
        if not np.all(np.isfinite(v)):
            raise InvalidParameter(f"{name} is not finite: {v}")


@dataclass(frozen=True)
class NomaPower:
    """NOMA power coefficients of one slot, in Watts.

    rho1 carries the UAV's own message, rho2 the destination's message.
    """

    rho1: float
    rho2: float

    def __post_init__(self):
        _require_finite(rho1=self.rho1, rho2=self.rho2)
        if self.rho1 < 0.0 or self.rho2 < 0.0:
            raise InvalidParameter(f"power coefficients must be >= 0, got ({self.rho1}, {self.rho2})")

    @property
    def total(self) -> float:
        return self.rho1 + self.rho2


@dataclass(frozen=True)
class SlotRadioParams:
    """Receiver-side constants of one slot.

    split_id / split_eh: power-split shares of the UAV's ID antenna and of
        the harvesting surface, both strictly inside (0, 1).
    noise_uav_id: noise power at the UAV ID antenna [W].
    noise_dest_ep1 / noise_dest_ep2: destination noise power in episodes
        one and two [W].
    eh_efficiency: RF-to-DC conversion efficiency, in (0, 1].
    episode1_fraction: share of the slot spent on episode one, in (0, 1).
    """

    split_id: float
    split_eh: float
    noise_uav_id: float
    noise_dest_ep1: float
    noise_dest_ep2: float
    eh_efficiency: float
    episode1_fraction: float

    def __post_init__(self):
        _require_finite(
            split_id=self.split_id,
            split_eh=self.split_eh,
            noise_uav_id=self.noise_uav_id,
            noise_dest_ep1=self.noise_dest_ep1,
            noise_dest_ep2=self.noise_dest_ep2,
            eh_efficiency=self.eh_efficiency,
            episode1_fraction=self.episode1_fraction,
        )
        if not (0.0 < self.split_id < 1.0 and 0.0 < self.split_eh < 1.0):
            raise InvalidParameter("power splits must lie strictly inside (0, 1)")
        if not (0.0 < self.episode1_fraction < 1.0):
            raise InvalidParameter("episode-1 fraction must lie strictly inside (0, 1)")
        if not (0.0 < self.eh_efficiency <= 1.0):
            raise InvalidParameter("harvesting efficiency must lie in (0, 1]")
        if min(self.noise_uav_id, self.noise_dest_ep1, self.noise_dest_ep2) <= 0.0:
            raise InvalidParameter("noise powers must be > 0")


@dataclass(frozen=True)
class SlotGains:
    """Channel state of one slot as produced by the geometry module."""

    h_su: float  # source -> UAV amplitude gain
    h_ud: float  # UAV -> destination amplitude gain
    h_sd: float  # source -> destination amplitude gain
    g_sum: float  # summed source -> surface element gains


@dataclass(frozen=True)
class LinkMetrics:
    """All derived per-slot quantities."""

    sinr_uav_dest: float  # UAV decoding the destination's message (SIC stage 1)
    sinr_uav_own: float  # UAV decoding its own message (SIC stage 2)
    sinr_dest_direct: float  # destination, episode-1 copy
    sinr_dest_relay: float  # destination, episode-2 relayed copy
    sinr_mrc: float
    harvested_energy: float  # slot-normalized harvested energy [W]
    relay_power: float  # UAV transmit power in episode 2 [W]
    sum_rate: float  # bits/s/Hz
    power_sum: float  # W
    ee: float  # bits/s/Hz per W


def sinr_uav_decodes_dest(p: NomaPower, h_su: float, sp: SlotRadioParams) -> float:
    """SINR at the UAV for the destination's message, before SIC removal."""
    _require_finite(h_su=h_su)
    if h_su <= 0.0:
        raise InvalidParameter(f"channel gain must be > 0, got {h_su}")
    h2 = h_su * h_su
    return p.rho2 * h2 / (p.rho1 * h2 + sp.noise_uav_id / sp.split_id)


def sinr_uav_own(p: NomaPower, h_su: float, sp: SlotRadioParams) -> float:
    """SINR at the UAV for its own message, after SIC removed the other one."""
    _require_finite(h_su=h_su)
    return sp.split_id * p.rho1 * (h_su * h_su) / sp.noise_uav_id


def harvested_energy(
    p: NomaPower,
    g_sum: float,
    sp: SlotRadioParams,
    absorption: float = 1.0,
    scaled_by_tx_power: bool = False,
) -> float:
    """Slot-normalized RF energy captured by the surface during episode 1.

    The uniform element phase contributes unit magnitude and the element
    absorption enters squared (power domain). The default form carries no
    transmit-power factor; scaled_by_tx_power=True multiplies by
    (rho1 + rho2) for sensitivity studies.
    """
    _require_finite(g_sum=g_sum)
    if g_sum < 0.0:
        raise InvalidParameter(f"summed element gain must be >= 0, got {g_sum}")
    e = (
        sp.eh_efficiency
        * (absorption * absorption)
        * sp.episode1_fraction
        * sp.split_eh
        * g_sum
        * g_sum
    )
    if scaled_by_tx_power:
        e *= p.total
    return e


def relay_power(e: float, sp: SlotRadioParams) -> float:
    """Episode-2 transmit power funded by the episode-1 harvest."""
    _require_finite(harvested=e)
    return e / (1.0 - sp.episode1_fraction)


def sinr_dest_direct(p: NomaPower, h_sd: float, sp: SlotRadioParams) -> float:
    """Destination SINR on the direct episode-1 copy."""
    _require_finite(h_sd=h_sd)
    h2 = h_sd * h_sd
    return p.rho2 * h2 / (p.rho1 * h2 + sp.noise_dest_ep1)


def sinr_dest_relay(
    g_sum: float, h_ud: float, sp: SlotRadioParams, absorption: float = 1.0
) -> float:
    """Destination SINR on the relayed episode-2 copy.

    Equals relay_power(harvested_energy(...)) * |h_ud|^2 / noise when the
    episode split is one half; written in closed form so it stays valid for
    any episode1_fraction.
    """
    _require_finite(g_sum=g_sum, h_ud=h_ud)
    return (
        sp.eh_efficiency
        * (absorption * absorption)
        * sp.split_eh
        * (g_sum * g_sum)
        * (h_ud * h_ud)
        / sp.noise_dest_ep2
    )


def sinr_mrc(direct: float, relay: float) -> float:
    """Maximal ratio combining of the two destination copies."""
    return direct + relay


def slot_metrics(
    p: NomaPower,
    gains: SlotGains,
    sp: SlotRadioParams,
    circuit_power: float,
    rhs_absorption: float = 1.0,
    eh_scaled_by_tx_power: bool = False,
) -> LinkMetrics:
    """Assemble every per-slot metric from powers, gains, and radio constants.

    Raises NonPositivePower when the harvested offset exceeds the consumed
    power, which would make the efficiency ratio undefined.
    """
    s_ud = sinr_uav_decodes_dest(p, gains.h_su, sp)
    s_own = sinr_uav_own(p, gains.h_su, sp)
    s_dir = sinr_dest_direct(p, gains.h_sd, sp)
    s_rel = sinr_dest_relay(gains.g_sum, gains.h_ud, sp, absorption=rhs_absorption)
    if eh_scaled_by_tx_power:
        s_rel *= p.total
    s_comb = sinr_mrc(s_dir, s_rel)
    e = harvested_energy(
        p, gains.g_sum, sp, absorption=rhs_absorption, scaled_by_tx_power=eh_scaled_by_tx_power
    )
    p_rhs = relay_power(e, sp)
    rate = math.log2(1.0 + s_own) + math.log2(1.0 + s_comb)
    p_sum = p.rho1 + p.rho2 + circuit_power - p_rhs
    if p_sum <= 0.0:
        raise NonPositivePower(
            f"harvested power {p_rhs} exceeds consumed power; net {p_sum} W"
        )
    return LinkMetrics(
        sinr_uav_dest=s_ud,
        sinr_uav_own=s_own,
        sinr_dest_direct=s_dir,
        sinr_dest_relay=s_rel,
        sinr_mrc=s_comb,
        harvested_energy=e,
        relay_power=p_rhs,
        sum_rate=rate,
        power_sum=p_sum,
        ee=rate / p_sum,
    )


def ee_to_mbits_per_joule(ee: float, bandwidth_hz: float) -> float:
    """Scale a bits/s/Hz-per-Watt efficiency to Mbits/Joule."""
    return ee * bandwidth_hz / 1e6
