"""Pixel grids, scan geometry, and the image/sinogram containers.

All lengths are expressed in grid units: the image grid tiles the square
``[-extent, extent]^2`` and beam offsets use the same unit.  Discrete inner
products carry quadrature weights (pixel area for images, ``ds * dtheta``
cell weights for sinograms) so that the back-projection is the exact adjoint
of the forward projection with respect to these products.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ImageGrid",
    "DensityImage",
    "ScanGeometry",
    "Sinogram",
    "uniform_scan",
    "image_dot",
    "image_norm",
    "sino_dot",
    "sino_norm",
]


@dataclass(frozen=True)
class ImageGrid:
    """Square n x n pixel grid covering ``[-extent, extent]^2``.

    Note: single-pixel grids are permitted; they are useful as scalar sanity
    checks for the projector and the operator-norm estimator.
    """

    n_pixels: int
    extent: float = 1.0

    def __post_init__(self):
        if self.n_pixels < 1:
            raise ValueError("n_pixels must be >= 1")
        if not (self.extent > 0):
            raise ValueError("extent must be positive")

    @property
    def pixel_side(self) -> float:
        return 2.0 * self.extent / self.n_pixels

    @property
    def pixel_area(self) -> float:
        return self.pixel_side ** 2

    @property
    def n_values(self) -> int:
        return self.n_pixels * self.n_pixels

    def centers_1d(self) -> np.ndarray:
        h = self.pixel_side
        return -self.extent + h * (np.arange(self.n_pixels) + 0.5)

    def center_mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Pixel-center coordinates ``(X, Y)``, each of shape (n, n).

        Row index corresponds to y, column index to x.
        """
        c = self.centers_1d()
        return np.meshgrid(c, c, indexing="xy")


@dataclass
class DensityImage:
    """Piecewise-constant density on an :class:`ImageGrid`.

    ``values`` has shape ``(n, n)`` with ``values[iy, ix]``; the flat layout
    is row-major over (y, x).
    """

    grid: ImageGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        n = self.grid.n_pixels
        if v.size != n * n:
            raise ValueError(f"expected {n * n} values, got {v.size}")
        if not np.all(np.isfinite(v)):
            raise ValueError("image values must be finite")
        self.values = v.reshape(n, n)

    @classmethod
    def zeros(cls, grid: ImageGrid) -> "DensityImage":
        return cls(grid, np.zeros((grid.n_pixels, grid.n_pixels)))

    def ravel(self) -> np.ndarray:
        return self.values.ravel()

    def copy(self) -> "DensityImage":
        return DensityImage(self.grid, self.values.copy())


@dataclass
class ScanGeometry:
    """Angle/offset sampling of a parallel-beam scan.

    Angles live in ``[0, 2*pi)`` (full circle kept as given, no folding to
    ``[0, pi)``); offsets share the length unit of the image grid.  Both must
    be strictly increasing.
    """

    angles: np.ndarray
    offsets: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.angles, dtype=float)
        s = np.asarray(self.offsets, dtype=float)
        if a.ndim != 1 or a.size < 1:
            raise ValueError("need at least one angle")
        if s.ndim != 1 or s.size < 1:
            raise ValueError("need at least one offset")
        if np.any(a < 0) or np.any(a >= 2 * np.pi):
            raise ValueError("angles must lie in [0, 2*pi)")
        if a.size > 1 and np.any(np.diff(a) <= 0):
            raise ValueError("angles must be strictly increasing")
        if s.size > 1 and np.any(np.diff(s) <= 0):
            raise ValueError("offsets must be strictly increasing")
        self.angles = a
        self.offsets = s

    @property
    def n_angles(self) -> int:
        return self.angles.size

    @property
    def n_offsets(self) -> int:
        return self.offsets.size

    @property
    def n_rays(self) -> int:
        return self.n_angles * self.n_offsets

    @property
    def angle_spacing(self) -> float:
        # Single-angle scans use the full-circle cell weight.
        if self.n_angles < 2:
            return 2 * np.pi
        return float(self.angles[1] - self.angles[0])

    @property
    def offset_spacing(self) -> float:
        if self.n_offsets < 2:
            return 1.0
        return float(self.offsets[1] - self.offsets[0])

    @property
    def cell_weight(self) -> float:
        """Quadrature weight of one sinogram cell, ``ds * dtheta``."""
        return self.offset_spacing * self.angle_spacing

    def is_uniform(self, rtol: float = 1e-9) -> bool:
        ok = True
        if self.n_offsets > 2:
            d = np.diff(self.offsets)
            ok &= np.allclose(d, d[0], rtol=rtol, atol=0)
        if self.n_angles > 2:
            d = np.diff(self.angles)
            ok &= np.allclose(d, d[0], rtol=rtol, atol=0)
        return bool(ok)


def uniform_scan(n_angles: int, n_offsets: int, offset_max: float = 1.0) -> ScanGeometry:
    """Full-circle scan: equispaced angles over [0, 2*pi) and cell-centered
    offsets.

    Offsets sit at the centers of ``n_offsets`` detector cells tiling
    ``[-offset_max, offset_max]``, so the ``ds * dtheta`` cell weights form
    an exact midpoint rule over the scan domain.
    """
    angles = np.linspace(0.0, 2 * np.pi, n_angles, endpoint=False)
    ds = 2.0 * offset_max / n_offsets
    offsets = -offset_max + ds * (np.arange(n_offsets) + 0.5)
    return ScanGeometry(angles, offsets)


@dataclass
class Sinogram:
    """Sampled ray data on a :class:`ScanGeometry`.

    ``values`` has shape ``(n_offsets, n_angles)``; ``values[i, j]`` belongs
    to ray ``(offsets[i], angles[j])``.  The canonical flat order is
    offset-fastest (column by column).
    """

    geometry: ScanGeometry
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        shape = (self.geometry.n_offsets, self.geometry.n_angles)
        if v.size != shape[0] * shape[1]:
            raise ValueError(f"expected {shape[0] * shape[1]} values, got {v.size}")
        if not np.all(np.isfinite(v)):
            raise ValueError("sinogram values must be finite")
        self.values = v.reshape(shape)

    @classmethod
    def zeros(cls, geometry: ScanGeometry) -> "Sinogram":
        return cls(geometry, np.zeros((geometry.n_offsets, geometry.n_angles)))

    def ravel(self) -> np.ndarray:
        """Flat values, offset-fastest order."""
        return self.values.T.ravel()

    @classmethod
    def from_flat(cls, geometry: ScanGeometry, flat: np.ndarray) -> "Sinogram":
        v = np.asarray(flat, dtype=float).reshape(geometry.n_angles, geometry.n_offsets).T
        return cls(geometry, v)

    def copy(self) -> "Sinogram":
        return Sinogram(self.geometry, self.values.copy())


def image_dot(a: DensityImage, b: DensityImage) -> float:
    return float(a.grid.pixel_area * np.vdot(a.values, b.values))


def image_norm(a: DensityImage) -> float:
    return float(np.sqrt(a.grid.pixel_area) * np.linalg.norm(a.values))


def sino_dot(a: Sinogram, b: Sinogram) -> float:
    return float(a.geometry.cell_weight * np.vdot(a.values, b.values))


def sino_norm(a: Sinogram) -> float:
    return float(np.sqrt(a.geometry.cell_weight) * np.linalg.norm(a.values))
