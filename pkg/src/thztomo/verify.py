"""Built-in self-verification suite.

Runs fast numerical health checks on the core operators -- adjoint
exactness of the projector, the disk sinogram oracle, smoothness and
boundedness of the smoothed exponential, and the Taylor test for the
full-beam derivative -- and reports measured quantities with pass/fail
verdicts.  Exposed on the command line as ``thztomo verify``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .beam import (
    jacobian_adjoint,
    jacobian_apply,
    forward_full_beam,
    make_forward_context,
    smoothed_exp,
    smoothed_exp_d1,
    smoothed_exp_d2,
)
from .geometry import (
    DensityImage,
    ImageGrid,
    Sinogram,
    image_dot,
    image_norm,
    sino_dot,
    sino_norm,
    uniform_scan,
)
from .phantoms import analytic_disk_sinogram, disk_phantom
from .projector import apply_back_projection, apply_radon, build_projector

__all__ = ["CheckResult", "run_checks", "available_checks", "format_report"]


@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: float
    threshold: float
    detail: str


def _check_adjoint() -> CheckResult:
    grid = ImageGrid(41)
    geom = uniform_scan(90, 35)
    P = build_projector(grid, geom)
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(10):
        f = DensityImage(grid, rng.standard_normal((41, 41)))
        g = Sinogram(geom, rng.standard_normal((35, 90)))
        lhs = sino_dot(apply_radon(P, f), g)
        rhs = image_dot(f, apply_back_projection(P, g))
        denom = sino_norm(apply_radon(P, f)) * sino_norm(g)
        worst = max(worst, abs(lhs - rhs) / denom)
    return CheckResult(
        "adjoint", worst <= 1e-10, worst, 1e-10,
        "relative adjoint identity error over 10 random pairs",
    )


def _check_disk_oracle() -> CheckResult:
    grid = ImageGrid(81)
    geom = uniform_scan(90, 71)
    P = build_projector(grid, geom)
    disk = disk_phantom(grid, (0.0, 0.0), 0.5, 1.0)
    num = apply_radon(P, disk)
    exact = analytic_disk_sinogram(geom, (0.0, 0.0), 0.5, 1.0)
    interior = np.abs(geom.offsets)[:, None] < 0.5 - 2 * grid.pixel_side
    err = float(np.max(np.abs(num.values - exact.values)[np.broadcast_to(interior, num.values.shape)]))
    bound = 2.0 * grid.pixel_side
    return CheckResult(
        "disk_oracle", err <= bound, err, bound,
        "max projector error vs analytic disk sinogram on interior rays",
    )


def _check_smoothness() -> CheckResult:
    eps = 1e-8
    gaps = [
        abs(smoothed_exp(eps) - smoothed_exp(-eps)),
        abs(smoothed_exp_d1(eps) - smoothed_exp_d1(-eps)),
        abs(smoothed_exp_d2(eps) - smoothed_exp_d2(-eps)),
    ]
    x = np.linspace(-50.0, 50.0, 200001)
    bounded = (
        float(np.max(np.abs(smoothed_exp(x)))) <= 2.0
        and float(np.max(np.abs(smoothed_exp_d1(x)))) <= 1.5
        and float(np.max(np.abs(smoothed_exp_d2(x)))) <= 4.0 + 1e-12
    )
    worst_gap = max(gaps)
    # Branch values differ by O(eps) near 0; 5*eps covers the slope.
    tol = 5.0 * eps
    return CheckResult(
        "smoothness", worst_gap <= tol and bounded, worst_gap, tol,
        "C^2 branch matching at 0 and global bounds |E|<=2, |E'|<=1.5, |E''|<=4",
    )


def _check_taylor() -> CheckResult:
    grid = ImageGrid(41)
    geom = uniform_scan(60, 35)
    ctx = make_forward_context(grid, geom, oversampling=2, fwhm=0.05)
    rng = np.random.default_rng(11)
    f = DensityImage(grid, rng.uniform(0.0, 1.0, (41, 41)))
    h = DensityImage(grid, rng.uniform(0.0, 1.0, (41, 41)))
    ts = np.array([1e-1, 1e-2, 1e-3])
    rem = []
    base = forward_full_beam(ctx, f)
    jac = jacobian_apply(ctx, f, h)
    for t in ts:
        pert = forward_full_beam(ctx, DensityImage(grid, f.values + t * h.values))
        r = Sinogram(geom, pert.values - base.values - t * jac.values)
        rem.append(sino_norm(r))
    slope = float(np.polyfit(np.log(ts), np.log(rem), 1)[0])
    # Adjoint identity of the derivative at f.
    g = Sinogram(geom, rng.standard_normal((35, 60)))
    lhs = sino_dot(jacobian_apply(ctx, f, h), g)
    rhs = image_dot(h, jacobian_adjoint(ctx, f, g))
    adj = abs(lhs - rhs) / (image_norm(h) * sino_norm(g))
    ok = abs(slope - 2.0) <= 0.1 and adj <= 1e-8
    return CheckResult(
        "taylor", ok, slope, 2.0,
        f"Taylor remainder slope (target 2.0 +/- 0.1); derivative adjoint err {adj:.2e}",
    )


_CHECKS = {
    "adjoint": _check_adjoint,
    "disk_oracle": _check_disk_oracle,
    "smoothness": _check_smoothness,
    "taylor": _check_taylor,
}


def available_checks() -> list[str]:
    return list(_CHECKS)


def run_checks(only: str | None = None) -> list[CheckResult]:
    if only is not None:
        if only not in _CHECKS:
            raise ValueError(
                f"unknown check {only!r}; available: {', '.join(_CHECKS)}"
            )
        return [_CHECKS[only]()]
    return [fn() for fn in _CHECKS.values()]


def format_report(results: list[CheckResult]) -> str:
    lines = [f"{'check':<12} {'status':<6} {'measured':>12} {'threshold':>12}  detail"]
    for r in results:
        status = "pass" if r.passed else "FAIL"
        lines.append(
            f"{r.name:<12} {status:<6} {r.measured:>12.4e} {r.threshold:>12.4e}  {r.detail}"
        )
    n_fail = sum(not r.passed for r in results)
    lines.append(
        f"{len(results)} checks, {len(results) - n_fail} passed, {n_fail} failed"
    )
    return "\n".join(lines)
