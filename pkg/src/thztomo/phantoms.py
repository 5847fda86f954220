"""Synthetic ground-truth images and sinogram oracles.

The triangular phantom mimics a hollow extruded plastic profile: an
equilateral triangular annulus whose top wall is thicker than the two side
walls.  Disk phantoms come with an exact closed-form sinogram used as an
independent oracle for the discrete projector.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import DensityImage, ImageGrid, ScanGeometry, Sinogram, sino_norm

__all__ = [
    "TriangleSpec",
    "triangle_phantom",
    "disk_phantom",
    "analytic_disk_sinogram",
    "add_noise",
]


@dataclass(frozen=True)
class TriangleSpec:
    """Hollow equilateral-triangle sample.

    With zero rotation one vertex points down and the thick wall is the
    horizontal top edge.  ``value`` is the material absorption level, i.e.
    the plateau of the two-valued density.
    """

    circumradius: float = 0.7
    centroid: tuple[float, float] = (0.0, 0.0)
    rotation: float = 0.0
    side_wall_thickness: float = 0.08
    top_wall_thickness: float = 0.16
    value: float = 1.0

    def __post_init__(self):
        r = self.circumradius
        if not (r > 0):
            raise ValueError("circumradius must be positive")
        for t in (self.side_wall_thickness, self.top_wall_thickness):
            if not (0 < t < r / 2 + 1e-12):
                raise ValueError("wall thicknesses must lie in (0, circumradius/2]")
        if self.top_wall_thickness < self.side_wall_thickness:
            raise ValueError("top wall must be at least as thick as the sides")

    def vertices(self) -> np.ndarray:
        # One vertex down, top edge horizontal (before rotation).
        ang = self.rotation + np.deg2rad([-90.0, 30.0, 150.0])
        cx, cy = self.centroid
        return np.stack(
            [cx + self.circumradius * np.cos(ang), cy + self.circumradius * np.sin(ang)],
            axis=1,
        )

    def edge_normals(self) -> np.ndarray:
        """Outward unit normals; row 0 is the top (thick) edge."""
        ang = self.rotation + np.deg2rad([90.0, 210.0, 330.0])
        return np.stack([np.cos(ang), np.sin(ang)], axis=1)

    def wall_thicknesses(self) -> np.ndarray:
        return np.array(
            [self.top_wall_thickness, self.side_wall_thickness, self.side_wall_thickness]
        )


def triangle_phantom(grid: ImageGrid, spec: TriangleSpec = TriangleSpec()) -> DensityImage:
    """Rasterize the triangular annulus by pixel-center membership.

    A pixel is material iff its center lies inside the outer triangle but
    outside the inner triangle obtained by moving each edge inward by its
    wall thickness.  Output is two-valued {0, value}.
    """
    verts = spec.vertices()
    if np.any(np.hypot(verts[:, 0], verts[:, 1]) > grid.extent + 1e-12):
        raise ValueError("triangle does not fit inside the grid's inscribed disk")

    X, Y = grid.center_mesh()
    cx, cy = spec.centroid
    inradius = spec.circumradius / 2.0
    normals = spec.edge_normals()
    thick = spec.wall_thicknesses()

    inside_outer = np.ones_like(X, dtype=bool)
    inside_inner = np.ones_like(X, dtype=bool)
    for (nx, ny), t in zip(normals, thick):
        d = nx * (X - cx) + ny * (Y - cy)
        inside_outer &= d <= inradius
        inside_inner &= d <= inradius - t
    wall = inside_outer & ~inside_inner
    return DensityImage(grid, np.where(wall, spec.value, 0.0))


def disk_phantom(
    grid: ImageGrid, center: tuple[float, float], radius: float, value: float
) -> DensityImage:
    """Two-valued disk by pixel-center membership."""
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    cx, cy = center
    if np.hypot(cx, cy) + radius > grid.extent + 1e-12:
        raise ValueError("disk does not fit inside the grid")
    X, Y = grid.center_mesh()
    inside = (X - cx) ** 2 + (Y - cy) ** 2 < radius**2
    return DensityImage(grid, np.where(inside, value, 0.0))


def analytic_disk_sinogram(
    geometry: ScanGeometry, center: tuple[float, float], radius: float, value: float
) -> Sinogram:
    """Exact Radon transform of a uniform disk: chord length times value.

    ``(Rf)(s, theta) = 2 * value * sqrt(radius^2 - d^2)`` with
    ``d = s - <center, u(theta)>`` and zero for ``|d| >= radius``.
    """
    cx, cy = center
    s = geometry.offsets[:, None]
    th = geometry.angles[None, :]
    d = s - (cx * np.cos(th) + cy * np.sin(th))
    under = radius**2 - d**2
    vals = 2.0 * value * np.sqrt(np.maximum(under, 0.0))
    return Sinogram(geometry, vals)


def add_noise(
    s: Sinogram, relative_level: float, seed: int, kind: str = "gaussian"
) -> tuple[Sinogram, float]:
    """Seeded zero-mean perturbation with RMS = relative_level * RMS(s).

    Returns the perturbed sinogram and the realized perturbation norm
    ``delta = ||g - g_noisy||`` in the weighted sinogram norm, ready for use
    as the noise level of the discrepancy principle.
    """
    if relative_level < 0:
        raise ValueError("relative_level must be nonnegative")
    if relative_level == 0:
        return s.copy(), 0.0
    rng = np.random.default_rng(seed)
    rms = float(np.sqrt(np.mean(s.values**2)))
    scale = relative_level * rms
    if kind == "gaussian":
        noise = rng.normal(0.0, scale, size=s.values.shape)
    elif kind == "uniform":
        half = scale * np.sqrt(3.0)
        noise = rng.uniform(-half, half, size=s.values.shape)
    else:
        raise ValueError(f"unknown noise kind: {kind!r}")
    noisy = Sinogram(s.geometry, s.values + noise)
    delta = sino_norm(Sinogram(s.geometry, noise))
    return noisy, delta
