"""Terahertz tomography toolkit.

Forward simulation (nonlinear full-beam, single-ray, and time-domain
models), signal preprocessing, and linear plus nonlinear reconstruction on
parallel-beam scan geometries.
"""

from .geometry import (
    DensityImage,
    ImageGrid,
    ScanGeometry,
    Sinogram,
    image_dot,
    image_norm,
    sino_dot,
    sino_norm,
    uniform_scan,
)
from .projector import (
    OperatorNormResult,
    ProjectionMatrix,
    apply_back_projection,
    apply_radon,
    build_projector,
    operator_norm_estimate,
)
from .phantoms import (
    TriangleSpec,
    add_noise,
    analytic_disk_sinogram,
    disk_phantom,
    triangle_phantom,
)
from .pulses import (
    PulseTrace,
    RawDataSet,
    average_traces,
    build_ratio_sinogram,
    extract_main_peak,
    integrate_pulse,
    log_transform,
    preprocess,
    pulse_energy,
    reference_pulse,
)
from .beam import (
    BeamProfile,
    ForwardContext,
    MaterialParams,
    compute_delay,
    delta_profile,
    forward_full_beam,
    jacobian_adjoint,
    jacobian_apply,
    make_forward_context,
    sample_gaussian_profile,
    simulate_pulse_ensemble,
    smoothed_exp,
    smoothed_exp_d1,
    smoothed_exp_d2,
)
from .linear_recon import IterationLog, StoppingRule, contour, fbp, landweber, tikhonov
from .nonlinear_recon import NonlinearSolveConfig, nonlinear_landweber

__version__ = "0.1.0"
