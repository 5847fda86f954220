import numpy as np
import pytest

from thztomo import (
    DensityImage,
    ImageGrid,
    Sinogram,
    StoppingRule,
    add_noise,
    analytic_disk_sinogram,
    apply_radon,
    build_projector,
    contour,
    disk_phantom,
    fbp,
    image_norm,
    landweber,
    sino_norm,
    tikhonov,
    triangle_phantom,
    uniform_scan,
)
from thztomo.linear_recon import _ramp_response


@pytest.fixture(scope="module")
def setup():
    grid = ImageGrid(61)
    geom = uniform_scan(120, 51)
    P = build_projector(grid, geom)
    truth = disk_phantom(grid, (0.0, 0.0), 0.5, 1.0)
    g = apply_radon(P, truth)
    return grid, geom, P, truth, g


def rel_err(img, truth):
    diff = DensityImage(img.grid, img.values - truth.values)
    return image_norm(diff) / image_norm(truth)


# ---------------------------------------------------------------------------
# FBP
# ---------------------------------------------------------------------------

def test_ramp_filter_dc_gain_near_zero():
    H = _ramp_response(256, 0.02, "ramlak", 1.0)
    # the spatial-kernel construction keeps the DC gain tiny relative to
    # the peak response (a sampled |nu| ramp would misplace it)
    assert H[0] <= 0.01 * H.max()
    assert H[0] >= 0.0


def test_fbp_recovers_disk(setup):
    grid, geom, P, truth, _ = setup
    exact = analytic_disk_sinogram(geom, (0.0, 0.0), 0.5, 1.0)
    rec = fbp(exact, grid, projector=P)
    X, Y = grid.center_mesh()
    inner = X**2 + Y**2 < 0.4**2
    outer = X**2 + Y**2 > 0.7**2
    assert rec.values[inner].mean() == pytest.approx(1.0, abs=0.1)
    assert abs(rec.values[outer].mean()) < 0.05


def test_fbp_hann_smoother_than_ramlak(setup):
    grid, geom, P, truth, g = setup
    noisy, _ = add_noise(g, 0.05, seed=9)
    sharp = fbp(noisy, grid, filter_name="ramlak", projector=P)
    smooth = fbp(noisy, grid, filter_name="hann", projector=P)
    # apodization suppresses the high-frequency noise energy
    assert np.var(np.diff(smooth.values, axis=1)) < np.var(np.diff(sharp.values, axis=1))


def test_fbp_rejects_nonuniform():
    from thztomo.geometry import ScanGeometry

    geom = ScanGeometry(np.array([0.0, 0.1, 0.5]), np.array([-0.5, 0.0, 0.5]))
    g = Sinogram(geom, np.zeros((3, 3)))
    with pytest.raises(ValueError):
        fbp(g, ImageGrid(16))
    with pytest.raises(ValueError):
        fbp(Sinogram(uniform_scan(10, 9), np.zeros((9, 10))), ImageGrid(16), cutoff=1.5)


# ---------------------------------------------------------------------------
# Landweber family
# ---------------------------------------------------------------------------

def test_landweber_residual_decreases(setup):
    grid, geom, P, truth, g = setup
    _, log = landweber(P, g, stop=StoppingRule(k_max=30))
    r = np.array(log.residuals)
    assert np.all(np.diff(r) < 0)
    assert log.stop_reason == "k_max"


def test_landweber_converges_to_truth(setup):
    grid, geom, P, truth, g = setup
    rec, _ = landweber(P, g, stop=StoppingRule(k_max=300))
    assert rel_err(rec, truth) < 0.1


def test_landweber_discrepancy_stop(setup):
    grid, geom, P, truth, g = setup
    noisy, delta = add_noise(g, 0.05, seed=1)
    rec, log = landweber(P, noisy, stop=StoppingRule(tau=1.5, delta=delta, k_max=500))
    assert log.stop_reason == "discrepancy"
    assert log.k_star < 500
    assert log.residuals[log.k_star] <= 1.5 * delta
    assert log.residuals[log.k_star - 1] > 1.5 * delta


def test_ista_sparsifies(setup):
    grid, geom, P, truth, g = setup
    plain, _ = landweber(P, g, stop=StoppingRule(k_max=50))
    sparse, _ = landweber(
        P, g, stop=StoppingRule(k_max=50), variant="ista", sparsity_weight=0.5
    )
    assert np.count_nonzero(sparse.values) < np.count_nonzero(plain.values)


def test_fista_faster_than_ista(setup):
    grid, geom, P, truth, g = setup
    from thztomo import operator_norm_estimate

    gamma = 0.9 / operator_norm_estimate(P).value ** 2  # admissible for both
    _, log_i = landweber(P, g, gamma=gamma, stop=StoppingRule(k_max=60),
                         variant="ista", sparsity_weight=1e-6)
    _, log_f = landweber(P, g, gamma=gamma, stop=StoppingRule(k_max=60),
                         variant="fista", sparsity_weight=1e-6)
    assert log_f.residuals[-1] < log_i.residuals[-1]


def test_landweber_flag_validation(setup):
    grid, geom, P, truth, g = setup
    with pytest.raises(ValueError):
        landweber(P, g, variant="sirt")
    with pytest.raises(ValueError):
        landweber(P, g, sparsity_weight=0.5)  # plain + sparsity
    with pytest.raises(ValueError):
        landweber(P, g, gamma=1e9)  # above 2 / ||R||^2
    with pytest.raises(ValueError):
        StoppingRule(tau=0.9)


# ---------------------------------------------------------------------------
# Tikhonov
# ---------------------------------------------------------------------------

def test_tikhonov_small_beta_accurate(setup):
    grid, geom, P, truth, g = setup
    rec = tikhonov(P, g, beta=1.0)
    assert rel_err(rec, truth) < 0.1


def test_tikhonov_monotone_damping(setup):
    grid, geom, P, truth, g = setup
    n_small = image_norm(tikhonov(P, g, beta=10.0))
    n_large = image_norm(tikhonov(P, g, beta=1e4))
    assert n_large < n_small
    with pytest.raises(ValueError):
        tikhonov(P, g, beta=0.0)


# ---------------------------------------------------------------------------
# Contour
# ---------------------------------------------------------------------------

def test_contour_highlights_edges(setup):
    grid, geom, P, truth, g = setup
    rec = contour(P, g)
    X, Y = grid.center_mesh()
    rr = np.sqrt(X**2 + Y**2)
    ring = np.abs(rr - 0.5) < 2 * grid.pixel_side
    deep = rr < 0.3
    assert np.abs(rec.values[ring]).mean() > 3 * np.abs(rec.values[deep]).mean()


def test_contour_nontrivial_on_full_circle(setup):
    # opposing angles would cancel if the full circle were back-projected
    grid, geom, P, truth, g = setup
    rec = contour(P, g)
    assert np.abs(rec.values).max() > 1e-3


def test_contour_needs_offsets():
    geom = uniform_scan(8, 2)
    P = build_projector(ImageGrid(8), geom)
    with pytest.raises(ValueError):
        contour(P, Sinogram(geom, np.zeros((2, 8))))
