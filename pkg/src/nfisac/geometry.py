"""Near-field ULA geometry, spherical-wavefront steering, LoS channels, and the
norm-bounded CSI error model.

The base station is a uniform linear array centered at the origin, element n
(1-based) sitting at y_n = ((-N-1+2n)/2)*d on the array axis.  A point is
addressed in polar coordinates (r, theta); the exact element-to-point distance

    r_n = sqrt(r^2 + (-N-1+2n)^2 d^2 / 4 + (N+1-2n) r d sin(theta))

drives the near-field steering vector exp(-j 2 pi r_n / lambda).  Channels are
steering vectors scaled by the LoS pathloss sqrt(rho0 * r**-alpha).

Channel knowledge is modeled as an estimate plus an additive error bounded in
Euclidean norm: h = h_hat + delta, ||delta|| <= eps.

All types are immutable after construction and all operations are pure given
an explicit RNG, so instances can be shared freely across sweep workers.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0


def _frozen_array(a, dtype) -> np.ndarray:
    out = np.array(a, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class ArrayGeometry:
    """ULA description plus derived aperture and pathloss reference.

    ``spacing`` defaults to half a wavelength and ``reference_pathloss`` to
    lambda/(4 pi).  Note the latter follows the system model convention used
    throughout this package (amplitude-style reference) rather than the
    free-space (lambda/(4 pi))**2 power convention; pass an explicit value to
    override.
    """

    antenna_count: int
    wavelength: float
    spacing: float | None = None
    pathloss_exponent: float = 2.0
    reference_pathloss: float | None = None

    def __post_init__(self):
        if self.antenna_count < 1:
            raise ValueError("antenna_count must be >= 1")
        if self.wavelength <= 0.0:
            raise ValueError("wavelength must be positive")
        if self.spacing is None:
            object.__setattr__(self, "spacing", self.wavelength / 2.0)
        if self.spacing <= 0.0:
            raise ValueError("spacing must be positive")
        if self.pathloss_exponent <= 0.0:
            raise ValueError("pathloss_exponent must be positive")
        if self.reference_pathloss is None:
            object.__setattr__(
                self, "reference_pathloss", self.wavelength / (4.0 * math.pi)
            )
        if self.reference_pathloss <= 0.0:
            raise ValueError("reference_pathloss must be positive")

    @classmethod
    def from_frequency(cls, antenna_count: int, frequency_hz: float, **kwargs):
        return cls(antenna_count, SPEED_OF_LIGHT / frequency_hz, **kwargs)

    @property
    def aperture(self) -> float:
        return (self.antenna_count - 1) * self.spacing


@dataclass(frozen=True)
class PolarPoint:
    """Polar coordinate of a point in front of the array."""

    range_m: float
    angle_rad: float

    def __post_init__(self):
        if self.range_m <= 0.0:
            raise ValueError("range must be positive")
        if not -math.pi / 2 <= self.angle_rad <= math.pi / 2:
            raise ValueError("angle must lie in [-pi/2, pi/2]")


@dataclass(frozen=True)
class CsiEstimate:
    """Channel estimate with a Euclidean error bound."""

    vector: np.ndarray
    error_bound: float

    def __post_init__(self):
        object.__setattr__(self, "vector", _frozen_array(self.vector, complex))
        if self.vector.ndim != 1:
            raise ValueError("estimate must be a vector")
        if self.error_bound < 0.0:
            raise ValueError("error_bound must be nonnegative")

    def __len__(self):
        return self.vector.shape[0]


def element_positions(geom: ArrayGeometry) -> np.ndarray:
    """Element coordinates along the array axis, symmetric about the origin."""
    n = np.arange(1, geom.antenna_count + 1)
    return (-geom.antenna_count - 1 + 2 * n) / 2.0 * geom.spacing


def element_distances(geom: ArrayGeometry, point: PolarPoint) -> np.ndarray:
    """Exact distances from every array element to the point."""
    n = np.arange(1, geom.antenna_count + 1)
    d, r = geom.spacing, point.range_m
    sq = (
        r * r
        + (-geom.antenna_count - 1 + 2 * n) ** 2 * d * d / 4.0
        + (geom.antenna_count + 1 - 2 * n) * r * d * math.sin(point.angle_rad)
    )
    return np.sqrt(sq)


def element_distance(geom: ArrayGeometry, point: PolarPoint, n: int) -> float:
    """Distance from the n-th element (1-based) to the point."""
    if not 1 <= n <= geom.antenna_count:
        raise ValueError(f"element index {n} outside 1..{geom.antenna_count}")
    return float(element_distances(geom, point)[n - 1])


def steering_vector(geom: ArrayGeometry, point: PolarPoint) -> np.ndarray:
    """Near-field steering vector; every entry has unit modulus."""
    return np.exp(-2j * math.pi / geom.wavelength * element_distances(geom, point))


def far_field_steering(geom: ArrayGeometry, angle_rad: float) -> np.ndarray:
    """Planar-wavefront steering vector used by the far-field baseline."""
    y = element_positions(geom)
    return np.exp(2j * math.pi / geom.wavelength * y * math.sin(angle_rad))


def channel(geom: ArrayGeometry, point: PolarPoint) -> np.ndarray:
    """LoS channel: pathloss amplitude times the near-field steering vector."""
    amp = math.sqrt(
        geom.reference_pathloss * point.range_m ** (-geom.pathloss_exponent)
    )
    return amp * steering_vector(geom, point)


def region_bounds(geom: ArrayGeometry) -> tuple[float, float]:
    """(Fresnel distance, Rayleigh distance) for the array aperture."""
    d_ap = geom.aperture
    d_rayleigh = 2.0 * d_ap * d_ap / geom.wavelength
    d_fresnel = 0.5 * math.sqrt(d_ap**3 / geom.wavelength)
    return d_fresnel, d_rayleigh


def normalized_bound(h_est: np.ndarray, eta: float) -> float:
    """Error bound eps = eta * ||h_est|| for a normalized error level eta."""
    if eta < 0.0:
        raise ValueError("eta must be nonnegative")
    return eta * float(np.linalg.norm(h_est))


def unit_complex_vector(n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniformly distributed point on the complex unit sphere in C^n."""
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    nrm = np.linalg.norm(v)
    while nrm == 0.0:  # probability-zero guard
        v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        nrm = np.linalg.norm(v)
    return v / nrm


def sample_error(
    eps: float,
    n: int,
    rng: np.random.Generator,
    radius_fraction: float = 1.0,
) -> np.ndarray:
    """One CSI error draw, uniform on the sphere of radius radius_fraction*eps.

    The default samples the boundary of the uncertainty ball, where robust
    constraint violations concentrate; radius_fraction < 1 probes the
    interior.
    """
    if eps < 0.0:
        raise ValueError("eps must be nonnegative")
    if not 0.0 <= radius_fraction <= 1.0:
        raise ValueError("radius_fraction must lie in [0, 1]")
    if eps == 0.0:
        return np.zeros(n, dtype=complex)
    return radius_fraction * eps * unit_complex_vector(n, rng)


@dataclass(frozen=True)
class CommUser:
    position: PolarPoint
    csi: CsiEstimate
    noise_power: float
    sinr_min: float

    def __post_init__(self):
        if self.noise_power <= 0.0:
            raise ValueError("noise power must be positive")
        if self.sinr_min <= 0.0:
            raise ValueError("SINR threshold must be positive")


@dataclass(frozen=True)
class Eavesdropper:
    position: PolarPoint
    csi: CsiEstimate
    noise_power: float
    leak_max: tuple[float, ...]  # one threshold per communication user

    def __post_init__(self):
        if self.noise_power <= 0.0:
            raise ValueError("noise power must be positive")
        object.__setattr__(self, "leak_max", tuple(float(x) for x in self.leak_max))
        if any(x <= 0.0 for x in self.leak_max):
            raise ValueError("leakage thresholds must be positive")


@dataclass(frozen=True)
class SensingTarget:
    position: PolarPoint
    csi: CsiEstimate


@dataclass(frozen=True)
class Scenario:
    """One complete problem instance.

    ``targets`` may be empty for communication-only feasibility studies, in
    which case the beampattern objective degenerates to zero.  Positions
    outside the [Fresnel, Rayleigh] region only raise a warning so that
    far-field baselines and distance sweeps can run.
    """

    geometry: ArrayGeometry
    cus: tuple[CommUser, ...]
    eves: tuple[Eavesdropper, ...]
    targets: tuple[SensingTarget, ...]
    power_budget: float

    def __post_init__(self):
        object.__setattr__(self, "cus", tuple(self.cus))
        object.__setattr__(self, "eves", tuple(self.eves))
        object.__setattr__(self, "targets", tuple(self.targets))
        if not self.cus:
            raise ValueError("at least one communication user is required")
        if self.power_budget <= 0.0:
            raise ValueError("power budget must be positive")
        n = self.geometry.antenna_count
        k = len(self.cus)
        for ent in (*self.cus, *self.eves, *self.targets):
            if len(ent.csi) != n:
                raise ValueError("CSI estimate length does not match the array")
        for eve in self.eves:
            if len(eve.leak_max) != k:
                raise ValueError("eavesdropper needs one leakage threshold per CU")
        d_f, d_r = region_bounds(self.geometry)
        for ent in (*self.cus, *self.eves, *self.targets):
            r = ent.position.range_m
            if not d_f <= r <= d_r:
                warnings.warn(
                    f"position at r={r:.3g} m outside the near-field region "
                    f"[{d_f:.3g}, {d_r:.3g}] m",
                    stacklevel=2,
                )

    @property
    def num_cus(self) -> int:
        return len(self.cus)

    @property
    def num_eves(self) -> int:
        return len(self.eves)

    @property
    def num_targets(self) -> int:
        return len(self.targets)
