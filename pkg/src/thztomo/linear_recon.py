"""Linear reconstruction methods for Radon-type sinogram data.

Filtered back-projection, (projected) Landweber iteration with ISTA/FISTA
sparsity variants and discrepancy-principle stopping, Tikhonov
regularization solved by conjugate gradients on the normal equations, and
contour tomography (data differentiation followed by back-projection).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from .geometry import DensityImage, ImageGrid, Sinogram, sino_norm
from .projector import (
    ProjectionMatrix,
    apply_back_projection,
    apply_radon,
    build_projector,
    operator_norm_estimate,
)

__all__ = [
    "StoppingRule",
    "IterationLog",
    "fbp",
    "landweber",
    "tikhonov",
    "contour",
]


@dataclass(frozen=True)
class StoppingRule:
    """Discrepancy-principle parameters: stop once ||residual|| <= tau * delta."""

    tau: float = 1.5
    delta: float = 0.0
    k_max: int = 100

    def __post_init__(self):
        if not (self.tau > 1):
            raise ValueError("tau must be > 1")
        if self.delta < 0:
            raise ValueError("delta must be nonnegative")
        if self.k_max < 1:
            raise ValueError("k_max must be >= 1")


@dataclass
class IterationLog:
    """Per-iteration record of an iterative solve."""

    residuals: list[float] = field(default_factory=list)
    stepsizes: list[float] = field(default_factory=list)
    stop_reason: str = ""
    k_star: int = 0


# ---------------------------------------------------------------------------
# Filtered back-projection
# ---------------------------------------------------------------------------

def _ramp_response(n_fft: int, ds: float, filter_name: str, cutoff: float) -> np.ndarray:
    """Frequency response of the band-limited ramp filter.

    Built from the exact spatial-domain ramp kernel (avoids the DC bias of
    sampling |nu| directly), apodized by the chosen window and truncated at
    ``cutoff`` times the Nyquist frequency.
    """
    kernel = np.zeros(n_fft)
    kernel[0] = 1.0 / (4.0 * ds**2)
    odd = np.arange(1, n_fft // 2 + 1, 2)
    val = -1.0 / (np.pi * odd * ds) ** 2
    kernel[odd] = val
    kernel[-odd] = val
    H = np.real(np.fft.fft(kernel))

    freq = np.fft.fftfreq(n_fft, d=ds)
    f_cut = cutoff * 0.5 / ds
    if filter_name == "hann":
        window = np.where(
            np.abs(freq) <= f_cut, 0.5 * (1.0 + np.cos(np.pi * freq / f_cut)), 0.0
        )
    elif filter_name == "ramlak":
        window = (np.abs(freq) <= f_cut).astype(float)
    else:
        raise ValueError(f"unknown filter {filter_name!r}")
    return H * window


def fbp(
    g: Sinogram,
    grid: ImageGrid,
    filter_name: str = "ramlak",
    cutoff: float = 1.0,
    projector: ProjectionMatrix | None = None,
) -> DensityImage:
    """Filtered back-projection on uniformly sampled full- or half-circle data.

    Each angle's offset profile is ramp-filtered in the frequency domain
    (zero-padded to the next power of two >= 2 * n_offsets), back-projected
    through the matched projector, and normalized; full-circle scans count
    every line twice, which the normalization averages out.
    """
    geom = g.geometry
    if not geom.is_uniform():
        raise ValueError("fbp requires uniformly sampled geometry")
    if not (0 < cutoff <= 1):
        raise ValueError("cutoff must lie in (0, 1]")
    if projector is None:
        projector = build_projector(grid, geom)

    n_off = geom.n_offsets
    ds = geom.offset_spacing
    n_fft = 1 << int(np.ceil(np.log2(max(2 * n_off, 4))))
    H = _ramp_response(n_fft, ds, filter_name, cutoff)

    spectra = np.fft.fft(g.values, n=n_fft, axis=0)
    filtered = np.real(np.fft.ifft(spectra * H[:, None], axis=0))[:n_off] * ds

    coverage = geom.n_angles * geom.angle_spacing
    factor = 0.5 if coverage > np.pi + 1e-9 else 1.0
    back = apply_back_projection(projector, Sinogram(geom, filtered))
    return DensityImage(grid, factor * back.values)


# ---------------------------------------------------------------------------
# Landweber family
# ---------------------------------------------------------------------------

def _soft_threshold(x: np.ndarray, lam: float) -> np.ndarray:
    return np.sign(x) * np.maximum(np.abs(x) - lam, 0.0)


def landweber(
    P: ProjectionMatrix,
    g: Sinogram,
    gamma: float | None = None,
    stop: StoppingRule = StoppingRule(),
    variant: str = "plain",
    sparsity_weight: float = 0.0,
) -> tuple[DensityImage, IterationLog]:
    """Landweber iteration from a zero initial guess.

    ``f_{k+1} = S(f_k + gamma * R*(g - R f_k))`` where S is the identity
    ("plain") or soft-thresholding with threshold gamma * sparsity_weight
    ("ista"); "fista" adds Nesterov momentum on top of the ista step.
    Stops at the first iterate satisfying the discrepancy principle or at
    k_max.  ``gamma=None`` picks 95% of the admissible maximum (2 / ||R||^2,
    or 1 / ||R||^2 for fista) from a power-iteration estimate.
    """
    if variant not in ("plain", "ista", "fista"):
        raise ValueError(f"unknown variant {variant!r}")
    if sparsity_weight < 0:
        raise ValueError("sparsity_weight must be nonnegative")
    if variant == "plain" and sparsity_weight > 0:
        raise ValueError("sparsity_weight > 0 requires variant 'ista' or 'fista'")

    norm_est = operator_norm_estimate(P, max_iters=100, tol=1e-5).value
    # momentum halves the admissible step: fista needs gamma <= 1/||R||^2
    cap = 1.0 if variant == "fista" else 2.0
    gamma_max = cap / norm_est**2 if norm_est > 0 else np.inf
    if gamma is None:
        gamma = 0.95 * gamma_max
    if not (0 < gamma < gamma_max):
        raise ValueError(f"gamma must lie in (0, {gamma_max:.4g})")

    lam = gamma * sparsity_weight
    f = DensityImage.zeros(P.grid)
    y = f.copy()
    t_mom = 1.0
    log = IterationLog()
    threshold = stop.tau * stop.delta

    for k in range(stop.k_max + 1):
        residual = Sinogram(g.geometry, apply_radon(P, f).values - g.values)
        r_norm = sino_norm(residual)
        log.residuals.append(r_norm)
        if r_norm <= threshold:
            log.stop_reason = "discrepancy"
            log.k_star = k
            return f, log
        if k == stop.k_max:
            break

        if variant == "fista":
            res_y = Sinogram(g.geometry, apply_radon(P, y).values - g.values)
            grad = apply_back_projection(P, res_y)
            f_new = _soft_threshold(y.values - gamma * grad.values, lam)
            t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_mom**2))
            y = DensityImage(
                P.grid, f_new + ((t_mom - 1.0) / t_new) * (f_new - f.values)
            )
            t_mom = t_new
            f = DensityImage(P.grid, f_new)
        else:
            grad = apply_back_projection(P, residual)
            update = f.values - gamma * grad.values
            if variant == "ista":
                update = _soft_threshold(update, lam)
            f = DensityImage(P.grid, update)

    log.stop_reason = "k_max"
    log.k_star = stop.k_max
    return f, log


# ---------------------------------------------------------------------------
# Tikhonov
# ---------------------------------------------------------------------------

def tikhonov(
    P: ProjectionMatrix,
    g: Sinogram,
    beta: float,
    cg_tol: float = 1e-8,
    cg_max: int = 500,
) -> DensityImage:
    """Tikhonov-regularized least squares solved by conjugate gradients.

    Minimizes ``||Rf - g||^2 + beta * ||f||^2`` with beta quoted in the
    pixel-unit convention of standard algebraic CT toolboxes (system-matrix
    entries measured in pixel side lengths); since this matrix stores
    physical lengths, beta is rescaled internally by pixel_side^2.
    """
    if not (beta > 0):
        raise ValueError("beta must be positive")
    lam = beta * P.grid.pixel_side**2
    A = P.matrix
    n = P.grid.n_values

    def matvec(x):
        return A.T @ (A @ x) + lam * x

    op = spla.LinearOperator((n, n), matvec=matvec, dtype=float)
    rhs = A.T @ g.ravel()
    x, info = spla.cg(op, rhs, rtol=cg_tol, maxiter=cg_max)
    if info < 0:
        raise RuntimeError("conjugate gradient solver failed")
    npix = P.grid.n_pixels
    return DensityImage(P.grid, x.reshape(npix, npix))


# ---------------------------------------------------------------------------
# Contour tomography
# ---------------------------------------------------------------------------

def contour(P: ProjectionMatrix, g: Sinogram) -> DensityImage:
    """Differentiate the data along s and back-project.

    The result concentrates near the jumps of the density; it localizes
    edges rather than recovering absolute values.  On full-circle scans the
    derivative contributions of opposing angles cancel exactly (the data is
    even under ``(s, theta) -> (-s, theta + pi)`` while the derivative is
    odd), so only the ``[0, pi)`` half of the angles is back-projected.
    """
    if g.geometry.n_offsets < 3:
        raise ValueError("contour tomography needs at least 3 offsets")
    geom = g.geometry
    dg = np.gradient(g.values, geom.offset_spacing, axis=0)

    coverage = geom.n_angles * geom.angle_spacing
    if coverage > np.pi + 1e-9:
        from .geometry import ScanGeometry

        keep = geom.angles < np.pi - 1e-12
        n_keep = int(np.count_nonzero(keep))
        if n_keep >= 1:
            half_geom = ScanGeometry(geom.angles[:n_keep], geom.offsets)
            half_mat = P.matrix[: n_keep * geom.n_offsets]
            half_P = ProjectionMatrix(P.grid, half_geom, half_mat)
            return apply_back_projection(half_P, Sinogram(half_geom, dg[:, :n_keep]))
    return apply_back_projection(P, Sinogram(geom, dg))
