"""Time-domain pulse handling and the sinogram preprocessing chain.

Covers the path from raw electric-field traces to reconstruction-ready
sinograms: time integrals (P data) and energies (I data), reference
averaging, main-peak extraction, ratio formation with the absolute-value
fix for sign-flipped P data, thresholding/scaling/Gaussian filtering, and
the log transforms that turn ratio data into Radon data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter1d

from .geometry import ScanGeometry, Sinogram

__all__ = [
    "PulseTrace",
    "RawDataSet",
    "reference_pulse",
    "integrate_pulse",
    "pulse_energy",
    "average_traces",
    "extract_main_peak",
    "build_ratio_sinogram",
    "preprocess",
    "log_transform",
]

LOG_FLOOR = 1e-12


@dataclass
class PulseTrace:
    """Uniformly sampled electric field E(t)."""

    t0: float
    dt: float
    samples: np.ndarray

    def __post_init__(self):
        if not (self.dt > 0):
            raise ValueError("dt must be positive")
        v = np.asarray(self.samples, dtype=float)
        if v.ndim != 1 or v.size < 2:
            raise ValueError("need at least 2 samples")
        if not np.all(np.isfinite(v)):
            raise ValueError("samples must be finite")
        self.samples = v

    @property
    def n_samples(self) -> int:
        return self.samples.size

    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n_samples)

    def copy(self) -> "PulseTrace":
        return PulseTrace(self.t0, self.dt, self.samples.copy())


@dataclass
class RawDataSet:
    """One trace per (offset, angle) pair plus the air reference.

    Traces are stored offset-fastest: ``traces[j * n_offsets + i]`` belongs
    to ray ``(offsets[i], angles[j])``.
    """

    geometry: ScanGeometry
    traces: list[PulseTrace]
    reference: PulseTrace

    def __post_init__(self):
        if len(self.traces) != self.geometry.n_rays:
            raise ValueError(
                f"expected {self.geometry.n_rays} traces, got {len(self.traces)}"
            )

    def trace(self, i: int, j: int) -> PulseTrace:
        return self.traces[j * self.geometry.n_offsets + i]


def reference_pulse(
    t0: float = 0.0,
    dt: float = 0.01,
    n_samples: int = 1024,
    center: float = 3.0,
    width: float = 0.5,
) -> PulseTrace:
    """Synthetic asymmetric reference pulse.

    Stands in for a measured air reference when simulating time-domain
    data; units follow the caller's time convention.  The shape is a skewed
    Gaussian main peak whose time integral is strictly positive, as needed
    for P-data ratios.
    """
    t = t0 + dt * np.arange(n_samples)
    x = (t - center) / width
    return PulseTrace(t0, dt, (1.0 - 0.3 * x) * np.exp(-0.5 * x**2))


def integrate_pulse(tr: PulseTrace) -> float:
    """Trapezoidal approximation of the time integral of E."""
    return float(np.trapezoid(tr.samples, dx=tr.dt))


def pulse_energy(tr: PulseTrace) -> float:
    """Trapezoidal approximation of the pulse energy, integral of E^2."""
    return float(np.trapezoid(tr.samples**2, dx=tr.dt))


def average_traces(traces: list[PulseTrace]) -> PulseTrace:
    """Pointwise mean of traces with identical sampling."""
    if not traces:
        raise ValueError("need at least one trace")
    first = traces[0]
    for tr in traces[1:]:
        if (
            tr.n_samples != first.n_samples
            or abs(tr.t0 - first.t0) > 1e-12 * max(1.0, abs(first.t0))
            or abs(tr.dt - first.dt) > 1e-12 * first.dt
        ):
            raise ValueError("traces must share t0, dt, and length")
    mean = np.mean([tr.samples for tr in traces], axis=0)
    return PulseTrace(first.t0, first.dt, mean)


def extract_main_peak(tr: PulseTrace, window_half_width: float) -> PulseTrace:
    """Keep only the window around the sample of maximal |E|.

    The window ``[t_peak - w, t_peak + w]`` is clipped to the recorded
    trace; the sub-trace keeps the original sampling with an updated t0.
    """
    if not (window_half_width > 0):
        raise ValueError("window_half_width must be positive")
    k = int(np.argmax(np.abs(tr.samples)))
    half = int(np.floor(window_half_width / tr.dt + 1e-9))
    lo = max(k - half, 0)
    hi = min(k + half + 1, tr.n_samples)
    if hi - lo < 2:
        hi = min(lo + 2, tr.n_samples)
        lo = max(hi - 2, 0)
    return PulseTrace(tr.t0 + lo * tr.dt, tr.dt, tr.samples[lo:hi].copy())


def build_ratio_sinogram(data: RawDataSet, mode: str) -> Sinogram:
    """Form the per-ray data ratios against the reference.

    mode "P": |integral(E_ij) / P_ref| -- the absolute value guards against
    noise-induced sign flips of the P data.  mode "I": energy(E_ij) / I_ref,
    nonnegative by construction.
    """
    if mode == "P":
        ref = integrate_pulse(data.reference)
    elif mode == "I":
        ref = pulse_energy(data.reference)
    else:
        raise ValueError(f"mode must be 'P' or 'I', got {mode!r}")
    if ref == 0.0:
        raise ValueError("reference integral is zero")

    geom = data.geometry
    vals = np.empty((geom.n_offsets, geom.n_angles))
    for j in range(geom.n_angles):
        for i in range(geom.n_offsets):
            tr = data.trace(i, j)
            if mode == "P":
                vals[i, j] = abs(integrate_pulse(tr) / ref)
            else:
                vals[i, j] = pulse_energy(tr) / ref
    return Sinogram(geom, vals)


def preprocess(
    s: Sinogram,
    clip_max: float = 1.5,
    scale: float = 1.0,
    sigma_s: float = 0.0,
    sigma_theta: float = 0.0,
) -> Sinogram:
    """Threshold, scale, and Gaussian-filter a ratio sinogram.

    Values are clipped to [0, clip_max] (removing unnaturally large
    measurement artifacts), multiplied by ``scale``, then smoothed with a
    separable Gaussian: reflective boundary along s, periodic along theta.
    Sigmas are in sample units; 0 disables filtering along that axis.
    """
    if not (clip_max > 0):
        raise ValueError("clip_max must be positive")
    if not (scale > 0):
        raise ValueError("scale must be positive")
    if sigma_s < 0 or sigma_theta < 0:
        raise ValueError("filter sigmas must be nonnegative")
    v = np.clip(s.values, 0.0, clip_max) * scale
    if sigma_s > 0:
        v = gaussian_filter1d(v, sigma_s, axis=0, mode="reflect")
    if sigma_theta > 0:
        v = gaussian_filter1d(v, sigma_theta, axis=1, mode="wrap")
    return Sinogram(s.geometry, v)


def log_transform(s: Sinogram, mode: str) -> tuple[Sinogram, int]:
    """Turn ratio data into Radon data: -2*log for P, -log for I.

    Nonpositive values are floored at 1e-12 before the log; the number of
    floored cells is returned as a diagnostic.
    """
    if mode not in ("P", "I"):
        raise ValueError(f"mode must be 'P' or 'I', got {mode!r}")
    floored = int(np.count_nonzero(s.values < LOG_FLOOR))
    v = np.log(np.maximum(s.values, LOG_FLOOR))
    factor = -2.0 if mode == "P" else -1.0
    return Sinogram(s.geometry, factor * v), floored
