"""Sparse discrete parallel-beam projector (line model).

Each matrix row holds the exact Euclidean intersection lengths of one ray
with the pixels it crosses, so the transpose is the exact discrete adjoint
(up to the quadrature-weight ratio folded into back-projection).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from .geometry import (
    DensityImage,
    ImageGrid,
    ScanGeometry,
    Sinogram,
    image_dot,
    image_norm,
)

__all__ = [
    "ProjectionMatrix",
    "build_projector",
    "apply_radon",
    "apply_back_projection",
    "operator_norm_estimate",
    "OperatorNormResult",
]

# Direction components below this are treated as axis-parallel.
_PARALLEL_EPS = 1e-14


@dataclass(frozen=True)
class ProjectionMatrix:
    """Immutable sparse Radon matrix bound to its grid and scan geometry.

    Rows are rays in offset-fastest order (``row = j * n_offsets + i``),
    columns are pixels in row-major (y, x) order.
    """

    grid: ImageGrid
    geometry: ScanGeometry
    matrix: sp.csr_matrix

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    @property
    def weight_ratio(self) -> float:
        """Sinogram-cell weight over pixel area; the adjoint scale factor."""
        return self.geometry.cell_weight / self.grid.pixel_area


def _slab_interval(o: np.ndarray, d: float, lo: float, hi: float):
    """Per-ray parameter interval where ``o + t*d`` lies in ``[lo, hi]``."""
    if abs(d) > _PARALLEL_EPS:
        a = (lo - o) / d
        b = (hi - o) / d
        return np.minimum(a, b), np.maximum(a, b)
    inside = (o >= lo) & (o <= hi)
    tmin = np.where(inside, -np.inf, np.inf)
    tmax = np.where(inside, np.inf, -np.inf)
    return tmin, tmax


def build_projector(grid: ImageGrid, geometry: ScanGeometry) -> ProjectionMatrix:
    """Assemble the sparse ray/pixel intersection-length matrix.

    The ray for ``(s, theta)`` is ``s*u(theta) + sigma*u(theta)^perp`` with
    ``u = (cos, sin)``.  Rays running exactly along a pixel boundary are
    attributed to the pixel on the positive side of the ray normal ``u``.
    """
    n = grid.n_pixels
    e = grid.extent
    h = grid.pixel_side
    tie = 1e-9 * h
    min_len = 1e-12 * h
    edges = -e + h * np.arange(n + 1)

    s = geometry.offsets
    n_off = s.size
    rows_all, cols_all, vals_all = [], [], []

    for j, theta in enumerate(geometry.angles):
        ux, uy = np.cos(theta), np.sin(theta)
        dx, dy = -uy, ux
        ox = s * ux
        oy = s * uy

        tx0, tx1 = _slab_interval(ox, dx, -e, e)
        ty0, ty1 = _slab_interval(oy, dy, -e, e)
        tmin = np.maximum(tx0, ty0)
        tmax = np.minimum(tx1, ty1)
        miss = ~(tmax > tmin)
        tmin = np.where(miss, 0.0, tmin)
        tmax = np.where(miss, 0.0, tmax)

        crossings = [tmin[:, None], tmax[:, None]]
        if abs(dx) > _PARALLEL_EPS:
            crossings.append((edges[None, :] - ox[:, None]) / dx)
        if abs(dy) > _PARALLEL_EPS:
            crossings.append((edges[None, :] - oy[:, None]) / dy)
        t = np.concatenate(crossings, axis=1)
        np.clip(t, tmin[:, None], tmax[:, None], out=t)
        t.sort(axis=1)

        seg = np.diff(t, axis=1)
        tm = 0.5 * (t[:, :-1] + t[:, 1:])
        px = ox[:, None] + tm * dx + tie * ux
        py = oy[:, None] + tm * dy + tie * uy
        ix = np.floor((px + e) / h).astype(np.int64)
        iy = np.floor((py + e) / h).astype(np.int64)
        ok = (seg > min_len) & (ix >= 0) & (ix < n) & (iy >= 0) & (iy < n)

        ray_rows = j * n_off + np.arange(n_off)
        rr = np.broadcast_to(ray_rows[:, None], seg.shape)
        rows_all.append(rr[ok])
        cols_all.append((iy * n + ix)[ok])
        vals_all.append(seg[ok])

    rows = np.concatenate(rows_all)
    cols = np.concatenate(cols_all)
    vals = np.concatenate(vals_all)
    mat = sp.coo_matrix(
        (vals, (rows, cols)), shape=(geometry.n_rays, grid.n_values)
    ).tocsr()
    # Boundary-running rays can produce two subsegments of one pixel.
    mat.sum_duplicates()
    return ProjectionMatrix(grid, geometry, mat)


def apply_radon(P: ProjectionMatrix, f: DensityImage) -> Sinogram:
    """Forward projection: line integrals of ``f`` along every stored ray."""
    if f.grid != P.grid:
        raise ValueError("image grid does not match projector grid")
    flat = P.matrix @ f.ravel()
    return Sinogram.from_flat(P.geometry, flat)


def apply_back_projection(P: ProjectionMatrix, g: Sinogram) -> DensityImage:
    """Adjoint of :func:`apply_radon` w.r.t. the weighted inner products.

    Computes ``(ds * dtheta / pixel_area) * P^T g`` so that
    ``<Rf, g>_sino == <f, R*g>_image`` holds exactly (up to rounding).
    """
    if (
        g.geometry.n_offsets != P.geometry.n_offsets
        or g.geometry.n_angles != P.geometry.n_angles
    ):
        raise ValueError("sinogram geometry does not match projector geometry")
    flat = P.matrix.T @ g.ravel()
    n = P.grid.n_pixels
    return DensityImage(P.grid, P.weight_ratio * flat.reshape(n, n))


class OperatorNormResult(NamedTuple):
    value: float
    converged: bool
    iterations: int


def operator_norm_estimate(
    P: ProjectionMatrix, max_iters: int = 100, tol: float = 1e-6
) -> OperatorNormResult:
    """Power-iteration estimate of the largest weighted singular value.

    Iterates ``f <- R*(R f)`` and reports the square root of the Rayleigh
    quotient, which is non-decreasing over iterations.
    """
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    if not (tol > 0):
        raise ValueError("tol must be positive")

    rng = np.random.default_rng(0)
    n = P.grid.n_pixels
    f = DensityImage(P.grid, rng.standard_normal((n, n)))
    f.values /= image_norm(f)

    est = 0.0
    for k in range(1, max_iters + 1):
        b = apply_back_projection(P, apply_radon(P, f))
        sq = image_dot(f, b)
        new_est = float(np.sqrt(max(sq, 0.0)))
        nb = image_norm(b)
        if nb == 0.0:
            return OperatorNormResult(0.0, True, k)
        if k > 1 and abs(new_est - est) <= tol * max(new_est, 1e-300):
            return OperatorNormResult(new_est, True, k)
        est = new_est
        f = DensityImage(P.grid, b.values / nb)
    return OperatorNormResult(est, False, max_iters)
