"""Coordinate systems, antenna arrays, network layout and link-state assignment.

Conventions: right-handed Cartesian frame, zenith angle theta measured from
+z, azimuth phi from +x toward +y. SAGIN nodes live in an Earth-centered,
Earth-fixed frame on a spherical Earth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .constants import EARTH_RADIUS_M


class ConfigurationError(ValueError):
    """Invalid user-supplied configuration."""


@dataclass(frozen=True)
class Position3D:
    x: float
    y: float
    z: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.x, self.y, self.z)):
            raise ConfigurationError(f"non-finite position component in {self}")

    @classmethod
    def from_iterable(cls, xyz) -> "Position3D":
        x, y, z = (float(v) for v in xyz)
        return cls(x, y, z)

    def to_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=np.float64)

    def distance_to(self, other: "Position3D") -> float:
        return float(np.linalg.norm(self.to_array() - other.to_array()))


@dataclass(frozen=True)
class ArrayGeometry:
    """Antenna array relative to its phase center (the element centroid)."""

    element_positions: np.ndarray  # (n, 3) meters
    boresight: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0]))
    polarization_slant_rad: float = 0.0

    def __post_init__(self):
        pos = np.asarray(self.element_positions, dtype=np.float64)
        if pos.ndim != 2 or pos.shape[1] != 3 or pos.shape[0] < 1:
            raise ConfigurationError(f"element positions must be (n, 3), got {pos.shape}")
        if not np.all(np.isfinite(pos)):
            raise ConfigurationError("non-finite element position")
        object.__setattr__(self, "element_positions", pos)
        b = np.asarray(self.boresight, dtype=np.float64)
        n = np.linalg.norm(b)
        if n == 0:
            raise ConfigurationError("boresight must be a nonzero vector")
        object.__setattr__(self, "boresight", b / n)

    @property
    def element_count(self) -> int:
        return self.element_positions.shape[0]

    @property
    def aperture(self) -> float:
        """Max pairwise element distance D; 0 for a single element."""
        pos = self.element_positions
        if pos.shape[0] == 1:
            return 0.0
        d2 = np.sum((pos[:, None, :] - pos[None, :, :]) ** 2, axis=-1)
        return float(np.sqrt(d2.max()))


def build_ula(n: int, spacing: float | None = None,
              center_freq: float | None = None) -> ArrayGeometry:
    """Uniform linear array along +y, boresight +x, centered on its centroid.

    ``spacing`` is in meters; when omitted it defaults to half a wavelength
    at ``center_freq``.
    """
    if n < 1:
        raise ConfigurationError(f"element count must be >= 1, got {n}")
    if spacing is None:
        if center_freq is None or center_freq <= 0:
            raise ConfigurationError("need spacing or a positive center_freq")
        from .constants import wavelength
        spacing = wavelength(center_freq) / 2.0
    if spacing <= 0:
        raise ConfigurationError(f"element spacing must be positive, got {spacing}")
    idx = np.arange(n, dtype=np.float64) - (n - 1) / 2.0
    pos = np.zeros((n, 3))
    pos[:, 1] = idx * spacing
    return ArrayGeometry(pos)


def build_upa(nx: int, ny: int, spacing: float) -> ArrayGeometry:
    """Uniform planar array in the y-z plane, row-major element order."""
    if nx < 1 or ny < 1:
        raise ConfigurationError("UPA dimensions must be >= 1")
    if spacing <= 0:
        raise ConfigurationError(f"element spacing must be positive, got {spacing}")
    ys = (np.arange(nx) - (nx - 1) / 2.0) * spacing
    zs = (np.arange(ny) - (ny - 1) / 2.0) * spacing
    pos = np.array([(0.0, y, z) for y in ys for z in zs])
    return ArrayGeometry(pos)


def single_element() -> ArrayGeometry:
    return ArrayGeometry(np.zeros((1, 3)))


def rayleigh_distance(aperture: float, wavelength: float) -> float:
    """Near/far-field boundary 2*D^2/lambda of an array of aperture D."""
    if wavelength <= 0:
        raise ValueError(f"wavelength must be positive, got {wavelength}")
    if aperture < 0:
        raise ValueError(f"aperture must be non-negative, got {aperture}")
    return 2.0 * aperture * aperture / wavelength


# ---------------------------------------------------------------------------
# Satellite geometry (spherical Earth)
# ---------------------------------------------------------------------------

def ecef_from_geodetic(lat_deg: float, lon_deg: float, height_m: float) -> Position3D:
    """Spherical-Earth ECEF position of a node at (lat, lon, height)."""
    lat = math.radians(lat_deg)
    lon = math.radians(lon_deg)
    r = EARTH_RADIUS_M + height_m
    return Position3D(r * math.cos(lat) * math.cos(lon),
                      r * math.cos(lat) * math.sin(lon),
                      r * math.sin(lat))


@dataclass(frozen=True)
class SlantGeometry:
    slant_range: float
    ue_position: Position3D
    sat_position: Position3D
    central_angle_rad: float


def slant_geometry(sat_height: float, elevation: float) -> SlantGeometry:
    """Slant range and node placement for a ground station seeing a satellite
    at the given elevation angle.

    Spherical-Earth law of cosines; the satellite is placed over (0, 0) and
    the ground station on the equator at the central angle matching the
    elevation. Elevation pi/2 returns exactly the satellite height.
    """
    if sat_height <= 0:
        raise ValueError(f"satellite height must be positive, got {sat_height}")
    if not (0.0 < elevation <= math.pi / 2):
        raise ValueError("elevation must be in (0, pi/2]; below-horizon links unsupported")
    re = EARTH_RADIUS_M
    r_sat = re + sat_height
    # Central angle beta between ground station and sub-satellite point.
    beta = math.acos(re / r_sat * math.cos(elevation)) - elevation
    slant = math.sqrt(re * re + r_sat * r_sat - 2.0 * re * r_sat * math.cos(beta))
    sat = Position3D(r_sat, 0.0, 0.0)
    ue = Position3D(re * math.cos(beta), re * math.sin(beta), 0.0)
    return SlantGeometry(slant_range=slant, ue_position=ue, sat_position=sat,
                         central_angle_rad=beta)


def elevation_angle(ue_ecef: Position3D, sat_ecef: Position3D) -> float:
    """Elevation of the satellite above the ground station's local horizon."""
    up = ue_ecef.to_array()
    nup = np.linalg.norm(up)
    if nup == 0:
        raise ValueError("ground station cannot sit at the Earth center")
    los = sat_ecef.to_array() - up
    return math.asin(float(np.dot(up / nup, los / np.linalg.norm(los))))


# ---------------------------------------------------------------------------
# LOS / NLOS assignment
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LinkState:
    state: str  # "LOS" | "NLOS"
    forced: bool

    def __post_init__(self):
        if self.state not in ("LOS", "NLOS"):
            raise ConfigurationError(f"link state must be LOS or NLOS, got {self.state!r}")

    @property
    def is_los(self) -> bool:
        return self.state == "LOS"


def los_probability(curve: dict, distance_2d: float) -> float:
    """Distance-dependent LOS probability for a scenario curve descriptor.

    Curve families follow the public 5G standard (TR 38.901 Table 7.4.2-1):
    ``{"family": "umi"|"uma"|"rma"|"inh_office"|"constant", ...}``.
    """
    d = float(distance_2d)
    fam = curve.get("family")
    if fam == "constant":
        p = float(curve["p"])
    elif fam == "umi":
        p = 1.0 if d <= 18.0 else 18.0 / d + math.exp(-d / 36.0) * (1.0 - 18.0 / d)
    elif fam == "uma":
        p = 1.0 if d <= 18.0 else 18.0 / d + math.exp(-d / 63.0) * (1.0 - 18.0 / d)
    elif fam == "rma":
        p = 1.0 if d <= 10.0 else math.exp(-(d - 10.0) / 1000.0)
    elif fam == "inh_office":
        if d <= 1.2:
            p = 1.0
        elif d < 6.5:
            p = math.exp(-(d - 1.2) / 4.7)
        else:
            p = math.exp(-(d - 6.5) / 32.6) * 0.32
    else:
        raise ConfigurationError(f"unknown LOS probability family {fam!r}")
    return min(max(p, 0.0), 1.0)


def assign_link_state(rng: np.random.Generator, *, forced: str | None = None,
                      curve: dict | None = None,
                      distance_2d: float | None = None) -> LinkState:
    """Forced state returned verbatim; otherwise a Bernoulli draw against the
    scenario's distance-dependent LOS probability."""
    if forced is not None:
        return LinkState(state=forced, forced=True)
    if curve is None or distance_2d is None:
        raise ConfigurationError(
            "link state not forced and no LOS probability curve/distance given")
    p = los_probability(curve, distance_2d)
    return LinkState(state="LOS" if rng.uniform() < p else "NLOS", forced=False)


# ---------------------------------------------------------------------------
# Link bearing angles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LosDirections:
    """Geometric departure/arrival angles of the direct Tx->Rx ray, radians."""

    aod: float  # azimuth of departure at Tx
    zod: float  # zenith of departure at Tx
    aoa: float  # azimuth of arrival at Rx (direction Rx -> Tx)
    zoa: float  # zenith of arrival at Rx


def los_directions(tx: Position3D, rx: Position3D) -> LosDirections:
    d = rx.to_array() - tx.to_array()
    r = np.linalg.norm(d)
    if r == 0:
        raise ConfigurationError("Tx and Rx positions coincide")
    aod = math.atan2(d[1], d[0])
    zod = math.acos(np.clip(d[2] / r, -1.0, 1.0))
    # Arrival unit vector points from Rx back toward Tx.
    aoa = math.atan2(-d[1], -d[0])
    zoa = math.acos(np.clip(-d[2] / r, -1.0, 1.0))
    return LosDirections(aod=aod, zod=zod, aoa=aoa, zoa=zoa)


def unit_vector(zenith: np.ndarray, azimuth: np.ndarray) -> np.ndarray:
    """Spherical angles -> Cartesian unit vector(s), shape (..., 3)."""
    zenith = np.asarray(zenith, dtype=np.float64)
    azimuth = np.asarray(azimuth, dtype=np.float64)
    st = np.sin(zenith)
    return np.stack([st * np.cos(azimuth), st * np.sin(azimuth), np.cos(zenith)], axis=-1)
