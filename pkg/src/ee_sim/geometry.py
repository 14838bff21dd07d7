"""Node geometry, trajectory constraints, and THz channel gains.

All links follow the free-space amplitude model with exponential molecular
absorption: gain(d) = (beta0 / d) * exp(-xi/2 * d), where beta0 = c / (4 pi f)
is the reference gain at 1 m and xi is the molecular absorption coefficient
in 1/m. Distances are plain 3D Euclidean.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateGeometry, InvalidParameter

SPEED_OF_LIGHT = 299_792_458.0  # m/s

# Tolerance added to the per-slot speed budget so that trajectories sitting
# exactly on the limit (e.g. solver output) validate cleanly.
SPEED_SLACK = 1e-9  # meters


def _as_xyz(p) -> np.ndarray:
    """Coerce a Position3D, tuple, or array-like to a float (3,) array."""
    if isinstance(p, Position3D):
        return p.as_array()
    arr = np.asarray(p, dtype=float)
    if arr.shape != (3,):
        raise InvalidParameter(f"expected a 3D position, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class Position3D:
    """A point in the 3D deployment coordinate system (z is altitude)."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        for name in ("x", "y", "z"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise InvalidParameter(f"coordinate {name} is not finite: {v}")
        if self.z < 0.0:
            raise InvalidParameter(f"altitude must be >= 0, got {self.z}")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    def distance_to(self, other) -> float:
        return float(np.linalg.norm(self.as_array() - _as_xyz(other)))


@dataclass(frozen=True)
class ChannelParams:
    """Carrier and absorption constants shared by every link.

    ref_gain defaults to c / (4 pi f); passing an explicit value that deviates
    by more than 1e-12 relative is rejected.
    """

    carrier_freq_hz: float
    absorption_coeff: float = 0.005  # 1/m
    bandwidth_hz: float = 10e9
    ref_gain: float = None  # meters; derived when omitted

    def __post_init__(self):
        if not (self.carrier_freq_hz > 0.0 and math.isfinite(self.carrier_freq_hz)):
            raise InvalidParameter(f"carrier frequency must be > 0, got {self.carrier_freq_hz}")
        if self.absorption_coeff < 0.0 or not math.isfinite(self.absorption_coeff):
            raise InvalidParameter(f"absorption coefficient must be >= 0, got {self.absorption_coeff}")
        if not (self.bandwidth_hz > 0.0):
            raise InvalidParameter(f"bandwidth must be > 0, got {self.bandwidth_hz}")
        nominal = SPEED_OF_LIGHT / (4.0 * math.pi * self.carrier_freq_hz)
        if self.ref_gain is None:
            object.__setattr__(self, "ref_gain", nominal)
        elif abs(self.ref_gain - nominal) > 1e-12 * nominal:
            raise InvalidParameter(
                f"ref_gain {self.ref_gain} inconsistent with c/(4 pi f) = {nominal}"
            )


@dataclass(frozen=True)
class RhsLayout:
    """Element layout of the energy-harvesting holographic surface.

    Offsets are displacements of each element from the UAV center. The phase
    is carried for documentation only: with a uniform phase across elements
    the magnitude of every power expression is unchanged, so no computation
    consumes it.
    """

    element_count: int
    element_offsets: np.ndarray  # (M, 3)
    absorption: float = 1.0  # uniform per-element absorption, in (0, 1]
    phase: float = 0.0  # radians, uniform across elements

    def __post_init__(self):
        offsets = np.atleast_2d(np.asarray(self.element_offsets, dtype=float))
        if offsets.shape != (self.element_count, 3):
            raise InvalidParameter(
                f"expected {self.element_count} offsets of shape (3,), got array {offsets.shape}"
            )
        if not (0.0 < self.absorption <= 1.0):
            raise InvalidParameter(f"absorption must be in (0, 1], got {self.absorption}")
        offsets = offsets.copy()
        offsets.setflags(write=False)
        object.__setattr__(self, "element_offsets", offsets)

    @staticmethod
    def point_array(element_count: int, absorption: float = 1.0, phase: float = 0.0) -> "RhsLayout":
        """All elements co-located at the UAV center (point approximation)."""
        return RhsLayout(element_count, np.zeros((element_count, 3)), absorption, phase)

    @staticmethod
    def half_wavelength_grid(
        element_count: int,
        carrier_freq_hz: float,
        absorption: float = 1.0,
        phase: float = 0.0,
    ) -> "RhsLayout":
        """Square-ish planar grid with lambda/2 spacing, centered on the UAV.

        At THz carriers the grid spans millimeters, so gains differ from the
        point approximation only in the ~1e-9 relative range.
        """
        spacing = SPEED_OF_LIGHT / carrier_freq_hz / 2.0
        cols = int(math.ceil(math.sqrt(element_count)))
        offsets = np.zeros((element_count, 3))
        for m in range(element_count):
            r, c = divmod(m, cols)
            offsets[m, 0] = (c - (cols - 1) / 2.0) * spacing
            offsets[m, 1] = (r - (cols - 1) / 2.0) * spacing
        offsets -= offsets.mean(axis=0)  # exact centroid at the UAV center
        return RhsLayout(element_count, offsets, absorption, phase)


@dataclass(frozen=True)
class TrajectoryGrid:
    """UAV path u[n] over N slots: N+1 points, endpoints pinned.

    points[0] is the start, points[N] the end; slot n (1-based) flies at
    points[n-1]. Consecutive points may be at most slot_duration_s *
    max_speed_mps apart.
    """

    slots: int
    slot_duration_s: float
    start: Position3D
    end: Position3D
    max_speed_mps: float
    points: np.ndarray = field(default=None)  # (N+1, 3)

    def __post_init__(self):
        if self.slots < 1:
            raise InvalidParameter(f"need at least 1 slot, got {self.slots}")
        if self.slot_duration_s <= 0 or self.max_speed_mps <= 0:
            raise InvalidParameter("slot duration and max speed must be > 0")
        if self.points is None:
            object.__setattr__(self, "points", straight_line_points(self))
        pts = np.asarray(self.points, dtype=float)
        if pts.shape != (self.slots + 1, 3):
            raise InvalidParameter(
                f"expected {self.slots + 1} trajectory points, got {pts.shape}"
            )
        pts = pts.copy()
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def slot_positions(self) -> np.ndarray:
        """(N, 3) positions at which each slot's channels are evaluated."""
        return self.points[:-1]

    def with_points(self, points: np.ndarray) -> "TrajectoryGrid":
        return TrajectoryGrid(
            self.slots, self.slot_duration_s, self.start, self.end, self.max_speed_mps, points
        )

    @property
    def step_budget(self) -> float:
        return self.slot_duration_s * self.max_speed_mps


def straight_line_points(traj: TrajectoryGrid) -> np.ndarray:
    """Uniformly sampled straight line from start to end (N+1 points)."""
    frac = np.linspace(0.0, 1.0, traj.slots + 1)[:, None]
    a = traj.start.as_array()[None, :]
    b = traj.end.as_array()[None, :]
    return (1.0 - frac) * a + frac * b


def path_gain(distance, params: ChannelParams):
    """Amplitude gain of a free-space THz link of the given length.

    Accepts a scalar or an ndarray of distances; strictly decreasing in
    distance for any absorption_coeff >= 0.
    """
    d = np.asarray(distance, dtype=float)
    if np.any(~np.isfinite(d)):
        raise InvalidParameter("link distance is not finite")
    if np.any(d <= 0.0):
        raise DegenerateGeometry("link distance must be > 0 (co-located nodes)")
    gain = (params.ref_gain / d) * np.exp(-0.5 * params.absorption_coeff * d)
    return float(gain) if np.isscalar(distance) or gain.ndim == 0 else gain


def gain_su(u, s, params: ChannelParams) -> float:
    """Source-to-UAV amplitude gain."""
    return path_gain(float(np.linalg.norm(_as_xyz(u) - _as_xyz(s))), params)


def gain_ud(u, d, params: ChannelParams) -> float:
    """UAV-to-destination amplitude gain."""
    return path_gain(float(np.linalg.norm(_as_xyz(u) - _as_xyz(d))), params)


def gain_sd(s, d, params: ChannelParams) -> float:
    """Source-to-destination amplitude gain."""
    return path_gain(float(np.linalg.norm(_as_xyz(s) - _as_xyz(d))), params)


def gain_sr_sum(u, rhs: RhsLayout, s, params: ChannelParams) -> float:
    """Magnitude of the summed source-to-element gains of the surface.

    Under the uniform-phase convention every per-element gain is real and
    nonnegative, so the magnitude equals the plain sum.
    """
    centers = _as_xyz(u)[None, :] + rhs.element_offsets
    dists = np.linalg.norm(centers - _as_xyz(s)[None, :], axis=1)
    if np.any(dists <= 0.0):
        raise DegenerateGeometry("an RHS element is co-located with the source")
    return float(np.sum(path_gain(dists, params)))


def validate_trajectory(traj: TrajectoryGrid) -> list[str]:
    """Check endpoint pinning, altitude, and per-slot speed; never raises.

    Returns one message per violation (empty list when the grid is valid).
    """
    violations = []
    pts = np.asarray(traj.points, dtype=float)
    if not np.allclose(pts[0], traj.start.as_array(), atol=1e-9):
        violations.append(f"point 0 = {pts[0].tolist()} does not match start {traj.start}")
    if not np.allclose(pts[-1], traj.end.as_array(), atol=1e-9):
        violations.append(f"point {traj.slots} = {pts[-1].tolist()} does not match end {traj.end}")
    alt = traj.start.z
    bad_alt = np.nonzero(np.abs(pts[:, 2] - alt) > 1e-9)[0]
    for idx in bad_alt:
        violations.append(f"point {idx} altitude {pts[idx, 2]} differs from flight altitude {alt}")
    budget = traj.step_budget + SPEED_SLACK
    steps = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    for n in np.nonzero(steps > budget)[0]:
        violations.append(
            f"slot {n}: step {steps[n]:.6g} m exceeds speed budget {traj.step_budget:.6g} m"
        )
    return violations
