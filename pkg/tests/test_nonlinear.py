import numpy as np
import pytest

from thztomo import (
    DensityImage,
    ImageGrid,
    NonlinearSolveConfig,
    Sinogram,
    StoppingRule,
    disk_phantom,
    forward_full_beam,
    image_norm,
    make_forward_context,
    nonlinear_landweber,
    uniform_scan,
)


@pytest.fixture(scope="module")
def problem():
    grid = ImageGrid(31)
    geom = uniform_scan(60, 25)
    ctx = make_forward_context(grid, geom, oversampling=2, fwhm=0.06)
    truth = disk_phantom(grid, (0.0, 0.0), 0.45, 1.0)
    g = forward_full_beam(ctx, truth)
    return ctx, truth, g


def test_residual_decreases(problem):
    ctx, truth, g = problem
    cfg = NonlinearSolveConfig(stop=StoppingRule(k_max=15))
    _, log = nonlinear_landweber(ctx, g, DensityImage.zeros(ctx.grid), cfg)
    r = np.array(log.residuals)
    assert r[-1] < r[0]
    assert log.stop_reason == "k_max"
    assert len(log.stepsizes) == 15


def test_reduces_error_from_zero_start(problem):
    ctx, truth, g = problem
    cfg = NonlinearSolveConfig(stop=StoppingRule(k_max=60))
    rec, _ = nonlinear_landweber(ctx, g, DensityImage.zeros(ctx.grid), cfg)
    err = image_norm(DensityImage(ctx.grid, rec.values - truth.values))
    assert err / image_norm(truth) < 0.5


def test_exact_solution_is_stationary(problem):
    ctx, truth, g = problem
    cfg = NonlinearSolveConfig(stop=StoppingRule(tau=1.5, delta=0.0, k_max=5))
    rec, log = nonlinear_landweber(ctx, g, truth.copy(), cfg)
    # residual is identically zero at the exact solution: immediate stop,
    # iterate untouched
    assert log.stop_reason == "discrepancy"
    assert log.k_star == 0
    assert np.array_equal(rec.values, truth.values)


def test_discrepancy_stop_with_noise(problem):
    ctx, truth, g = problem
    rng = np.random.default_rng(12)
    noise = rng.normal(0.0, 0.01, g.values.shape)
    noisy = Sinogram(g.geometry, np.clip(g.values + noise, 1e-6, None))
    from thztomo import sino_norm

    delta = sino_norm(Sinogram(g.geometry, noisy.values - g.values))
    cfg = NonlinearSolveConfig(stop=StoppingRule(tau=1.5, delta=delta, k_max=200))
    _, log = nonlinear_landweber(ctx, noisy, DensityImage.zeros(ctx.grid), cfg)
    assert log.stop_reason == "discrepancy"
    assert log.residuals[log.k_star] <= 1.5 * delta


def test_constant_stepsize_mode(problem):
    ctx, truth, g = problem
    cfg = NonlinearSolveConfig(
        stepsize_mode="constant", constant_gamma=0.05, stop=StoppingRule(k_max=10)
    )
    _, log = nonlinear_landweber(ctx, g, DensityImage.zeros(ctx.grid), cfg)
    assert all(s == 0.05 for s in log.stepsizes)


def test_nonneg_projection(problem):
    ctx, truth, g = problem
    cfg = NonlinearSolveConfig(stop=StoppingRule(k_max=20), nonneg_projection=True)
    rec, _ = nonlinear_landweber(ctx, g, DensityImage.zeros(ctx.grid), cfg)
    assert rec.values.min() >= 0.0


def test_rejects_nonpositive_data(problem):
    ctx, truth, g = problem
    bad = Sinogram(g.geometry, g.values.copy())
    bad.values[0, 0] = 0.0
    with pytest.raises(ValueError):
        nonlinear_landweber(ctx, bad, DensityImage.zeros(ctx.grid))


def test_config_validation():
    with pytest.raises(ValueError):
        NonlinearSolveConfig(stepsize_mode="exact")
    with pytest.raises(ValueError):
        NonlinearSolveConfig(stepsize_mode="constant", constant_gamma=0.0)
