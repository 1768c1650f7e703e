"""Regular-grid data model: density fields, preprocessing filters, downsampling.

A density field is a non-negative scalar sampled at the vertices of a 3D
grid with per-axis physical spacing (micrometres throughout). Linear voxel
indices are x-fastest: ``lin = i + nx * (j + ny * k)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

__all__ = [
    "GridGeometry",
    "DensityField",
    "gaussian_filter",
    "downsample_sum",
]


@dataclass(frozen=True)
class GridGeometry:
    """Shape, spacing and origin of a voxel grid (no data)."""

    dims: tuple[int, int, int]
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self) -> None:
        if len(self.dims) != 3 or any(int(d) < 1 for d in self.dims):
            raise ValueError(f"dims must be three positive integers, got {self.dims}")
        if len(self.spacing) != 3 or any(s <= 0 for s in self.spacing):
            raise ValueError(f"spacing must be three positive reals, got {self.spacing}")
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "spacing", tuple(float(s) for s in self.spacing))
        object.__setattr__(self, "origin", tuple(float(o) for o in self.origin))

    @property
    def num_voxels(self) -> int:
        nx, ny, nz = self.dims
        return nx * ny * nz

    def linear_index(self, i, j, k):
        """Voxel index triple -> linear index (x fastest)."""
        nx, ny, _ = self.dims
        return np.asarray(i) + nx * (np.asarray(j) + ny * np.asarray(k))

    def voxel_of(self, lin):
        """Linear index -> (i, j, k) arrays."""
        nx, ny, _ = self.dims
        lin = np.asarray(lin)
        return lin % nx, (lin // nx) % ny, lin // (nx * ny)

    def position(self, i, j, k) -> np.ndarray:
        """Physical coordinates of voxel centres, shape (..., 3)."""
        sx, sy, sz = self.spacing
        ox, oy, oz = self.origin
        return np.stack(
            [
                ox + np.asarray(i, dtype=np.float64) * sx,
                oy + np.asarray(j, dtype=np.float64) * sy,
                oz + np.asarray(k, dtype=np.float64) * sz,
            ],
            axis=-1,
        )

    def position_of_linear(self, lin) -> np.ndarray:
        i, j, k = self.voxel_of(lin)
        return self.position(i, j, k)

    def contains(self, i, j, k) -> bool:
        nx, ny, nz = self.dims
        return bool(
            np.all((np.asarray(i) >= 0) & (np.asarray(i) < nx))
            and np.all((np.asarray(j) >= 0) & (np.asarray(j) < ny))
            and np.all((np.asarray(k) >= 0) & (np.asarray(k) < nz))
        )


@dataclass
class DensityField:
    """Scalar density on a voxel grid.

    Parameters
    ----------
    geometry : GridGeometry
        Grid shape, physical spacing (µm per voxel) and origin.
    values : (N,) float32
        Non-negative densities in x-fastest linear order, N = nx*ny*nz.
        Any numeric input is converted to float32 on construction.
    """

    geometry: GridGeometry
    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.ascontiguousarray(self.values, dtype=np.float32).ravel()
        if self.values.size != self.geometry.num_voxels:
            raise ValueError(
                f"values has {self.values.size} entries, expected "
                f"{self.geometry.num_voxels} for dims {self.geometry.dims}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("values must be finite")
        if self.values.size and float(self.values.min()) < 0:
            raise ValueError("values must be non-negative")

    # -- convenience accessors ------------------------------------------------

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.geometry.dims

    @property
    def spacing(self) -> tuple[float, float, float]:
        return self.geometry.spacing

    @property
    def origin(self) -> tuple[float, float, float]:
        return self.geometry.origin

    def volume(self) -> np.ndarray:
        """(nx, ny, nz) view of the values, indexed [i, j, k]."""
        nx, ny, nz = self.dims
        return self.values.reshape(nz, ny, nx).transpose(2, 1, 0)

    def at(self, i: int, j: int, k: int) -> float:
        return float(self.values[self.geometry.linear_index(i, j, k)])

    def total_mass(self) -> float:
        return float(self.values.sum(dtype=np.float64))

    @classmethod
    def from_volume(
        cls,
        vol: np.ndarray,
        spacing: tuple[float, float, float] = (1.0, 1.0, 1.0),
        origin: tuple[float, float, float] = (0.0, 0.0, 0.0),
    ) -> "DensityField":
        """Build from an (nx, ny, nz) array indexed [i, j, k]."""
        vol = np.asarray(vol)
        if vol.ndim != 3:
            raise ValueError(f"expected a 3D array, got shape {vol.shape}")
        geom = GridGeometry(tuple(vol.shape), spacing, origin)
        return cls(geom, vol.transpose(2, 1, 0).ravel())


def _gaussian_kernel(radius: int) -> np.ndarray:
    """Normalized 1D Gaussian, sigma = radius/2, truncated at +-radius."""
    if radius == 0:
        return np.ones(1, dtype=np.float64)
    sigma = radius / 2.0
    t = np.arange(-radius, radius + 1, dtype=np.float64)
    w = np.exp(-(t * t) / (2.0 * sigma * sigma))
    return w / w.sum()


def gaussian_filter(field: DensityField, kernel_radius: int) -> DensityField:
    """Separable Gaussian smoothing in voxel units with mirror padding.

    sigma = kernel_radius / 2 per axis, kernel truncated at +-kernel_radius
    and renormalized to sum 1, so constant fields are preserved.
    """
    if kernel_radius < 0:
        raise ValueError("kernel_radius must be >= 0")
    if kernel_radius == 0:
        return DensityField(field.geometry, field.values.copy())
    kernel = _gaussian_kernel(kernel_radius)
    vol = field.volume().astype(np.float64)
    for axis in range(3):
        if vol.shape[axis] == 1:
            continue
        vol = ndimage.correlate1d(vol, kernel, axis=axis, mode="mirror")
    # smoothing of a non-negative field stays non-negative up to rounding
    return DensityField.from_volume(
        np.maximum(vol, 0.0), field.spacing, field.origin
    )


def downsample_sum(
    field: DensityField, factors: tuple[int, int, int]
) -> DensityField:
    """Block-sum downsampling; conserves total mass exactly.

    Each output voxel is the sum of an fx*fy*fz input block; trailing
    partial blocks are summed as-is. Spacing is multiplied by the factors.
    """
    fx, fy, fz = (int(f) for f in factors)
    if fx < 1 or fy < 1 or fz < 1:
        raise ValueError(f"factors must be positive, got {factors}")
    vol = field.volume().astype(np.float64)
    for axis, f in enumerate((fx, fy, fz)):
        if f == 1:
            continue
        idx = np.arange(0, vol.shape[axis], f)
        vol = np.add.reduceat(vol, idx, axis=axis)
    sx, sy, sz = field.spacing
    return DensityField.from_volume(
        vol, (sx * fx, sy * fy, sz * fz), field.origin
    )
