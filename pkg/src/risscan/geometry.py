"""Array geometry, inspection regions, and near-field steering vectors.

Conventions used throughout:

* Coordinates are metres in a right-handed (x, y, z) frame.
* A planar array lies in either the x-z plane (wall mount, broadside +y)
  or the x-y plane (ceiling mount, broadside -z).
* Element index i runs row-major over the two array axes,
  i = i1 * n2 + i2, with the grid centred on the array centre.
* Per-element angles are measured in the array's local frame: azimuth is
  the angle between the boresight (normal) and the projection of the
  element-to-point direction onto the (normal, axis1) plane, elevation
  the angle out of that plane toward axis2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Propagation speed. The resolution-requirement arithmetic only comes out
# on round numbers (1 GHz for 0.3 m range resolution) with the rounded
# constant, so it is used everywhere for consistency.
C0 = 3.0e8

# Beamwidth factor in the angular-resolution bound.
BEAMWIDTH_FACTOR = 0.8

_AXES = {
    "xz": (np.array([1.0, 0.0, 0.0]), np.array([0.0, 0.0, 1.0])),
    "xy": (np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])),
}
_DEFAULT_NORMALS = {
    "xz": np.array([0.0, 1.0, 0.0]),   # wall mount looking into the room
    "xy": np.array([0.0, 0.0, -1.0]),  # ceiling mount looking down
}


class SingularityError(ValueError):
    """A field point coincides with an array element."""


@dataclass(frozen=True)
class AngleOfArrival:
    """Azimuth/elevation pair in the local frame of an array, radians."""

    azimuth: float
    elevation: float

    def __post_init__(self):
        if not -math.pi <= self.azimuth <= math.pi:
            raise ValueError(f"azimuth {self.azimuth} outside [-pi, pi]")
        if not -math.pi / 2 <= self.elevation <= math.pi / 2:
            raise ValueError(f"elevation {self.elevation} outside [-pi/2, pi/2]")


@dataclass(frozen=True)
class PlanarArray:
    """Uniform planar array: regular element grid centred on ``center``."""

    center: np.ndarray
    counts: tuple[int, int]
    spacing: float
    plane: str
    normal: np.ndarray
    element_positions: np.ndarray = field(repr=False, compare=False, default=None)

    @property
    def num_elements(self) -> int:
        return self.counts[0] * self.counts[1]

    @property
    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        return _AXES[self.plane]

    def aperture_sides(self) -> tuple[float, float]:
        """Physical side lengths, count * spacing per axis."""
        return self.counts[0] * self.spacing, self.counts[1] * self.spacing


def build_upa(center, counts, spacing, plane, normal=None) -> PlanarArray:
    """Build a uniform planar array.

    ``plane`` is "xz" (wall mount) or "xy" (ceiling mount); ``normal``
    defaults to the broadside direction for the mount (+y resp. -z).
    """
    n1, n2 = int(counts[0]), int(counts[1])
    if n1 < 1 or n2 < 1:
        raise ValueError(f"element counts must be positive, got {counts}")
    if spacing <= 0:
        raise ValueError(f"element spacing must be positive, got {spacing}")
    if plane not in _AXES:
        raise ValueError(f"plane must be one of {sorted(_AXES)}, got {plane!r}")
    center = np.asarray(center, dtype=float)
    if center.shape != (3,):
        raise ValueError("center must be a 3-vector")
    u1, u2 = _AXES[plane]
    if normal is None:
        normal = _DEFAULT_NORMALS[plane]
    normal = np.asarray(normal, dtype=float)
    norm = np.linalg.norm(normal)
    if norm == 0:
        raise ValueError("normal must be non-zero")
    normal = normal / norm
    if abs(normal @ u1) > 1e-12 or abs(normal @ u2) > 1e-12:
        raise ValueError("normal must be orthogonal to the array plane")

    i1 = np.arange(n1) - (n1 - 1) / 2.0
    i2 = np.arange(n2) - (n2 - 1) / 2.0
    offsets = (
        i1[:, None, None] * spacing * u1[None, None, :]
        + i2[None, :, None] * spacing * u2[None, None, :]
    )
    positions = (center[None, None, :] + offsets).reshape(-1, 3)
    return PlanarArray(
        center=center,
        counts=(n1, n2),
        spacing=float(spacing),
        plane=plane,
        normal=normal,
        element_positions=positions,
    )


def element_gain(angle: AngleOfArrival) -> float:
    """Scalar element gain cos^2(azimuth) * cos^2(elevation)."""
    return math.cos(angle.azimuth) ** 2 * math.cos(angle.elevation) ** 2


def local_angles(array: PlanarArray, p) -> tuple[np.ndarray, np.ndarray]:
    """Per-element (azimuth, elevation) of the directions element -> p."""
    p = np.asarray(p, dtype=float)
    diff = p[None, :] - array.element_positions
    dist = np.linalg.norm(diff, axis=1)
    if np.any(dist == 0):
        raise SingularityError(f"point {p} coincides with an array element")
    v = diff / dist[:, None]
    u1, u2 = array.axes
    az = np.arctan2(v @ u1, v @ array.normal)
    el = np.arcsin(np.clip(v @ u2, -1.0, 1.0))
    return az, el


def element_gains(array: PlanarArray, p) -> np.ndarray:
    az, el = local_angles(array, p)
    return np.cos(az) ** 2 * np.cos(el) ** 2


def nf_steering(array: PlanarArray, p, wavelength: float) -> np.ndarray:
    """Near-field steering vector of ``array`` toward point ``p``.

    Entry i is G(theta_i) * (d_center / d_i) * exp(-j 2 pi d_i / wavelength)
    with d_i the element-to-point distance.
    """
    p = np.asarray(p, dtype=float)
    d_center = np.linalg.norm(p - array.center)
    d = np.linalg.norm(p[None, :] - array.element_positions, axis=1)
    if np.any(d == 0):
        raise SingularityError(f"point {p} coincides with an array element")
    gains = element_gains(array, p)
    return gains * (d_center / d) * np.exp(-2j * np.pi * d / wavelength)


def fraunhofer_distance(array: PlanarArray, wavelength: float) -> float:
    """Far-field boundary 2 D^2 / lambda, D the aperture diagonal."""
    s1, s2 = array.aperture_sides()
    d_sq = s1 * s1 + s2 * s2
    return 2.0 * d_sq / wavelength


def required_elements_for_angular_resolution(
    delta_theta_deg: float, spacing: float, wavelength: float
) -> int:
    """Minimum element count along one axis for the given beamwidth in degrees."""
    if delta_theta_deg <= 0:
        raise ValueError("angular resolution must be positive")
    bound = BEAMWIDTH_FACTOR * wavelength / (spacing * delta_theta_deg) * (180.0 / math.pi)
    return math.ceil(bound)


def required_bandwidth_for_range_resolution(delta_d: float) -> float:
    """Minimum bandwidth in Hz resolving ``delta_d`` metres in range."""
    if delta_d <= 0:
        raise ValueError("range resolution must be positive")
    return C0 / delta_d


@dataclass(frozen=True)
class Region:
    """Axis-aligned box given by three closed intervals (metres)."""

    bounds: np.ndarray  # shape (3, 2)

    def __post_init__(self):
        b = np.asarray(self.bounds, dtype=float)
        if b.shape != (3, 2):
            raise ValueError("bounds must have shape (3, 2)")
        if np.any(b[:, 1] < b[:, 0]):
            raise ValueError("interval upper bounds must not be below lower bounds")
        object.__setattr__(self, "bounds", b)

    @property
    def sizes(self) -> np.ndarray:
        return self.bounds[:, 1] - self.bounds[:, 0]

    @property
    def volume(self) -> float:
        return float(np.prod(self.sizes))

    @property
    def centroid(self) -> np.ndarray:
        return self.bounds.mean(axis=1)

    def contains(self, p, atol: float = 0.0) -> bool:
        p = np.asarray(p, dtype=float)
        return bool(
            np.all(p >= self.bounds[:, 0] - atol) and np.all(p <= self.bounds[:, 1] + atol)
        )

    def sample(self, rng, size=None) -> np.ndarray:
        lo, hi = self.bounds[:, 0], self.bounds[:, 1]
        if size is None:
            return rng.uniform(lo, hi)
        return rng.uniform(lo, hi, size=(size, 3))


@dataclass(frozen=True)
class SubRegionPartition:
    """Uniform tiling of a region into grid cells with centroid sample points."""

    parent: Region
    cells: tuple[Region, ...]
    centers: np.ndarray  # shape (N, 3)
    grid: tuple[int, int, int]

    @property
    def num_cells(self) -> int:
        return len(self.cells)

    def cell_grid_index(self, n: int) -> tuple[int, int, int]:
        gx, gy, gz = self.grid
        return n // (gy * gz), (n // gz) % gy, n % gz

    def neighbors(self, n: int) -> list[int]:
        """Face-adjacent cell indices of cell n in the grid."""
        gx, gy, gz = self.grid
        ix, iy, iz = self.cell_grid_index(n)
        out = []
        for dx, dy, dz in ((1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)):
            jx, jy, jz = ix + dx, iy + dy, iz + dz
            if 0 <= jx < gx and 0 <= jy < gy and 0 <= jz < gz:
                out.append((jx * gy + jy) * gz + jz)
        return out

    def sample_points(self, include_corners: bool = False) -> np.ndarray:
        """Per-cell sampling points, shape (N, P, 3).

        P = 1 (the centroid) by default; with ``include_corners`` the eight
        cell corners are appended after the centroid (P = 9).
        """
        if not include_corners:
            return self.centers[:, None, :]
        pts = np.empty((self.num_cells, 9, 3))
        for n, cell in enumerate(self.cells):
            pts[n, 0] = cell.centroid
            corners = np.stack(
                np.meshgrid(*cell.bounds, indexing="ij"), axis=-1
            ).reshape(-1, 3)
            pts[n, 1:] = corners
        return pts


def partition_region(region: Region, grid) -> SubRegionPartition:
    """Tile ``region`` into a uniform (gx, gy, gz) grid of sub-regions.

    Cell index runs row-major over (ix, iy, iz); sample points are the
    cell centroids.
    """
    gx, gy, gz = (int(g) for g in grid)
    if gx < 1 or gy < 1 or gz < 1:
        raise ValueError(f"grid dimensions must be positive, got {grid}")
    lo = region.bounds[:, 0]
    step = region.sizes / np.array([gx, gy, gz], dtype=float)
    cells = []
    centers = []
    for ix in range(gx):
        for iy in range(gy):
            for iz in range(gz):
                idx = np.array([ix, iy, iz], dtype=float)
                c_lo = lo + idx * step
                c_hi = c_lo + step
                cell = Region(np.stack([c_lo, c_hi], axis=1))
                cells.append(cell)
                centers.append(cell.centroid)
    return SubRegionPartition(
        parent=region,
        cells=tuple(cells),
        centers=np.asarray(centers),
        grid=(gx, gy, gz),
    )
