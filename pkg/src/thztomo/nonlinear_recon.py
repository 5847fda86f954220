"""Nonlinear Landweber iteration for the full-beam model.

Iterates ``f_{k+1} = f_k + gamma_k * J(f_k)^* (g - F(f_k))`` where F is the
full-beam forward operator and J its derivative, with either a constant
stepsize or the parameter-free steepest-descent choice
``gamma_k = ||s_k||^2 / ||J(f_k) s_k||^2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .beam import ForwardContext, forward_full_beam, jacobian_adjoint, jacobian_apply
from .geometry import DensityImage, Sinogram, image_dot, sino_norm
from .linear_recon import IterationLog, StoppingRule

__all__ = ["NonlinearSolveConfig", "nonlinear_landweber"]

_STATIONARY_EPS = 1e-30
_DIVERGENCE_FACTOR = 10.0


@dataclass(frozen=True)
class NonlinearSolveConfig:
    """Stepsize mode, stopping rule, and optional nonnegativity clamp."""

    stepsize_mode: str = "steepest_descent"
    constant_gamma: float = 1.0
    stop: StoppingRule = StoppingRule()
    nonneg_projection: bool = False

    def __post_init__(self):
        if self.stepsize_mode not in ("constant", "steepest_descent"):
            raise ValueError(f"unknown stepsize mode {self.stepsize_mode!r}")
        if self.stepsize_mode == "constant" and not (self.constant_gamma > 0):
            raise ValueError("constant gamma must be positive")


def nonlinear_landweber(
    ctx: ForwardContext,
    g: Sinogram,
    f0: DensityImage,
    cfg: NonlinearSolveConfig = NonlinearSolveConfig(),
) -> tuple[DensityImage, IterationLog]:
    """Run nonlinear Landweber iteration from ``f0``.

    Stops by the discrepancy principle, at k_max, when the steepest-descent
    denominator vanishes ("stationary"), or when the residual exceeds 10x
    its initial value ("diverged").
    """
    if f0.grid != ctx.grid:
        raise ValueError("initial guess grid does not match context grid")
    if np.any(g.values <= 0):
        raise ValueError("ratio data must be strictly positive")

    f = f0.copy()
    log = IterationLog()
    threshold = cfg.stop.tau * cfg.stop.delta
    r0 = None

    for k in range(cfg.stop.k_max + 1):
        residual = Sinogram(g.geometry, g.values - forward_full_beam(ctx, f).values)
        r_norm = sino_norm(residual)
        log.residuals.append(r_norm)
        if r0 is None:
            r0 = r_norm
        if r_norm <= threshold:
            log.stop_reason = "discrepancy"
            log.k_star = k
            return f, log
        if r_norm > _DIVERGENCE_FACTOR * max(r0, 1e-300):
            log.stop_reason = "diverged"
            log.k_star = k
            return f, log
        if k == cfg.stop.k_max:
            break

        direction = jacobian_adjoint(ctx, f, residual)
        if cfg.stepsize_mode == "steepest_descent":
            num = image_dot(direction, direction)
            forward_dir = jacobian_apply(ctx, f, direction)
            den = sino_norm(forward_dir) ** 2
            if den < _STATIONARY_EPS:
                log.stop_reason = "stationary"
                log.k_star = k
                return f, log
            gamma = num / den
        else:
            gamma = cfg.constant_gamma
        log.stepsizes.append(gamma)

        new = f.values + gamma * direction.values
        if cfg.nonneg_projection:
            np.maximum(new, 0.0, out=new)
        f = DensityImage(ctx.grid, new)

    log.stop_reason = "k_max"
    log.k_star = cfg.stop.k_max
    return f, log
