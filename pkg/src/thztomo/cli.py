"""Command-line front end.

Subcommands: phantom, simulate, preprocess, reconstruct, verify, info.
Exit codes: 0 success, 1 usage error, 2 data/model mismatch, 3
verification failure.  The optional environment variable THZ_TOMO_THREADS
caps internal (BLAS) parallelism.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .beam import (
    MaterialParams,
    compute_delay,
    forward_full_beam,
    make_forward_context,
    simulate_pulse_ensemble,
)
from .dataio import (
    DatasetError,
    file_sha256,
    read_dataset,
    write_image,
    write_pgm,
    write_sinogram,
    write_traces,
)
from .geometry import DensityImage, ImageGrid, Sinogram, uniform_scan
from .linear_recon import StoppingRule, contour, fbp, landweber, tikhonov
from .nonlinear_recon import NonlinearSolveConfig, nonlinear_landweber
from .phantoms import TriangleSpec, add_noise, disk_phantom, triangle_phantom
from .projector import apply_radon, build_projector
from .pulses import (
    RawDataSet,
    build_ratio_sinogram,
    extract_main_peak,
    log_transform,
    preprocess,
    reference_pulse,
)
from .verify import format_report, run_checks

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_MISMATCH = 2
EXIT_VERIFY = 3


class MismatchError(Exception):
    """Input data is inconsistent with the requested model or method."""


def _apply_thread_cap() -> None:
    raw = os.environ.get("THZ_TOMO_THREADS")
    if not raw:
        return
    try:
        n = int(raw)
        if n < 1:
            raise ValueError
    except ValueError:
        raise MismatchError(  # surfaced as usage error below
            f"THZ_TOMO_THREADS must be a positive integer, got {raw!r}"
        ) from None
    try:
        from threadpoolctl import threadpool_limits

        threadpool_limits(limits=n)
    except ImportError:
        # Best effort: only affects libraries loaded after this point.
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, str(n))


def _provenance(args: argparse.Namespace, inputs: list[str | Path],
                steps: list[str] | None = None) -> dict:
    flags = {
        k: v for k, v in sorted(vars(args).items())
        if k not in ("func", "command") and not callable(v)
    }
    return {
        "tool": f"thztomo {__version__}",
        "command": args.command,
        "flags": flags,
        "input_hashes": {str(p): file_sha256(p) for p in inputs},
        "steps": steps or [],
    }


# ---------------------------------------------------------------------------
# phantom
# ---------------------------------------------------------------------------

def cmd_phantom(args) -> int:
    grid = ImageGrid(args.n, args.extent)
    if args.shape == "triangle":
        spec = TriangleSpec(
            circumradius=args.circumradius,
            rotation=args.rotation,
            side_wall_thickness=args.side_wall,
            top_wall_thickness=args.top_wall,
            value=args.value,
        )
        img = triangle_phantom(grid, spec)
    elif args.shape == "disk":
        img = disk_phantom(grid, (args.cx, args.cy), args.radius, args.value)
    else:  # pragma: no cover - argparse restricts choices
        raise ValueError(f"unknown shape {args.shape!r}")
    write_image(args.output, img, _provenance(args, []), fmt=args.format)
    if args.preview:
        write_pgm(args.preview, img.values)
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def _load_image(path) -> tuple[DensityImage, dict]:
    kind, obj, header = read_dataset(path)
    if kind != "image":
        raise MismatchError(f"{path}: expected an image dataset, got {kind!r}")
    return obj, header


def cmd_simulate(args) -> int:
    img, _ = _load_image(args.input)
    geom = uniform_scan(args.angles, args.offsets, args.offset_max)
    material = MaterialParams(args.material_n, args.material_n0, args.alpha_m, args.c0)
    prov = _provenance(args, [args.input])

    if args.model == "time-domain":
        ctx = make_forward_context(
            img.grid, geom, oversampling=args.oversampling, fwhm=args.fwhm
        )
        ref = reference_pulse()
        data = simulate_pulse_ensemble(ctx, img, ref, material)
        if args.noise > 0:
            rng = np.random.default_rng(args.seed)
            scale = args.noise * max(float(np.max(np.abs(ref.samples))), 1e-300)
            for tr in data.traces:
                tr.samples = tr.samples + rng.normal(0.0, scale, tr.n_samples)
        write_traces(args.output, data, material, prov, fmt=args.format)
        return EXIT_OK

    if args.model == "full-beam":
        ctx = make_forward_context(
            img.grid, geom, oversampling=args.oversampling, fwhm=args.fwhm
        )
        if args.mode == "P":
            sino = forward_full_beam(ctx, img)
        else:
            # I data follows the single-ray law exp(-Rf) regardless of profile.
            P = build_projector(img.grid, geom)
            sino = Sinogram(geom, np.exp(-apply_radon(P, img).values))
    elif args.model == "single-ray":
        P = build_projector(img.grid, geom)
        rf = apply_radon(P, img).values
        sino = Sinogram(geom, np.exp(-0.5 * rf) if args.mode == "P" else np.exp(-rf))
    else:  # pragma: no cover
        raise ValueError(f"unknown model {args.model!r}")

    delta = None
    if args.noise > 0:
        sino, delta = add_noise(sino, args.noise, args.seed, kind=args.noise_kind)
    write_sinogram(
        args.output, sino, f"ratio-{args.mode}", prov, fmt=args.format,
        noise_delta=delta,
    )
    if args.preview:
        write_pgm(args.preview, sino.values)
    return EXIT_OK


# ---------------------------------------------------------------------------
# preprocess
# ---------------------------------------------------------------------------

def cmd_preprocess(args) -> int:
    kind, obj, header = read_dataset(args.input)
    steps = []

    if kind == "traces":
        mode = args.mode or "P"
        if args.peak_window > 0:
            obj = RawDataSet(
                obj.geometry,
                [extract_main_peak(tr, args.peak_window) for tr in obj.traces],
                extract_main_peak(obj.reference, args.peak_window),
            )
            steps.append(f"extract_main_peak({args.peak_window})")
        sino = build_ratio_sinogram(obj, mode)
        steps.append(f"build_ratio_sinogram({mode})")
    elif kind == "sinogram":
        data_kind = header.get("data_kind", "")
        if data_kind == "radon":
            raise MismatchError("input sinogram is already log-transformed")
        mode = args.mode or (data_kind[-1] if data_kind in ("ratio-P", "ratio-I") else "P")
        sino = obj
    else:
        raise MismatchError(f"{args.input}: cannot preprocess dataset kind {kind!r}")

    sino = preprocess(sino, args.clip_max, args.scale, args.sigma_s, args.sigma_theta)
    steps.append(
        f"preprocess(clip_max={args.clip_max}, scale={args.scale}, "
        f"sigma_s={args.sigma_s}, sigma_theta={args.sigma_theta})"
    )
    out_kind = f"ratio-{mode}"
    if args.log:
        sino, floored = log_transform(sino, mode)
        steps.append(f"log_transform({mode}, floored={floored})")
        out_kind = "radon"

    prov = _provenance(args, [args.input], steps)
    noise_delta = header.get("noise_delta")
    write_sinogram(args.output, sino, out_kind, prov, fmt=args.format,
                   noise_delta=noise_delta)
    if args.preview:
        write_pgm(args.preview, sino.values)
    return EXIT_OK


# ---------------------------------------------------------------------------
# reconstruct
# ---------------------------------------------------------------------------

_LINEAR_METHODS = ("fbp", "tikhonov", "landweber", "ista", "fista", "contour")


def cmd_reconstruct(args) -> int:
    kind, sino, header = read_dataset(args.input)
    if kind != "sinogram":
        raise MismatchError(f"{args.input}: expected a sinogram dataset, got {kind!r}")
    data_kind = header.get("data_kind", "")
    if args.method in _LINEAR_METHODS and data_kind != "radon":
        raise MismatchError(
            f"linear method {args.method!r} needs log-transformed (radon) data, "
            f"got {data_kind!r}; run preprocess --log first"
        )
    if args.method == "nonlinear-landweber" and data_kind != "ratio-P":
        raise MismatchError(
            f"nonlinear-landweber needs ratio-P data, got {data_kind!r}"
        )

    grid = ImageGrid(args.n, args.extent)
    delta = args.delta if args.delta is not None else float(header.get("noise_delta") or 0.0)
    stop = StoppingRule(tau=args.tau, delta=delta, k_max=args.iters)
    log = None

    if args.method == "nonlinear-landweber":
        ctx = make_forward_context(
            grid, sino.geometry, oversampling=args.oversampling, fwhm=args.fwhm
        )
        cfg = NonlinearSolveConfig(stop=stop, nonneg_projection=args.nonneg)
        img, log = nonlinear_landweber(ctx, sino, DensityImage.zeros(grid), cfg)
    else:
        P = build_projector(grid, sino.geometry)
        if args.method == "fbp":
            img = fbp(sino, grid, args.filter, args.cutoff, projector=P)
        elif args.method == "tikhonov":
            img = tikhonov(P, sino, args.beta)
        elif args.method == "contour":
            img = contour(P, sino)
        else:
            variant = "plain" if args.method == "landweber" else args.method
            img, log = landweber(
                P, sino, gamma=args.gamma, stop=stop, variant=variant,
                sparsity_weight=args.sparsity_weight,
            )

    prov = _provenance(args, [args.input], [f"method={args.method}"])
    write_image(args.output, img, prov, fmt=args.format)
    if args.preview:
        write_pgm(args.preview, img.values)
    if args.log_csv and log is not None:
        with open(args.log_csv, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["k", "residual", "stepsize"])
            for k, r in enumerate(log.residuals):
                step = log.stepsizes[k] if k < len(log.stepsizes) else ""
                wr.writerow([k, repr(r), step])
    if log is not None:
        print(f"stopped after {log.k_star} iterations ({log.stop_reason})")
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify / info
# ---------------------------------------------------------------------------

def cmd_verify(args) -> int:
    results = run_checks(args.only)
    print(format_report(results))
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY


def cmd_info(args) -> int:
    kind, obj, header = read_dataset(args.input)
    print(f"kind: {kind}")
    if kind == "image":
        g = obj.grid
        print(f"grid: {g.n_pixels}x{g.n_pixels}, extent {g.extent}")
        print(f"value range: [{obj.values.min():.6g}, {obj.values.max():.6g}]")
    elif kind == "sinogram":
        geom = obj.geometry
        print(f"geometry: {geom.n_angles} angles x {geom.n_offsets} offsets")
        print(f"data_kind: {header.get('data_kind', '?')}")
        if "noise_delta" in header:
            print(f"noise_delta: {header['noise_delta']}")
        print(f"value range: [{obj.values.min():.6g}, {obj.values.max():.6g}]")
    else:
        geom = obj.geometry
        tb = header["time_base"]
        print(f"geometry: {geom.n_angles} angles x {geom.n_offsets} offsets")
        print(f"time base: t0={tb['t0']}, dt={tb['dt']}, {tb['n_samples']} samples")
    prov = header.get("provenance") or {}
    if prov.get("command"):
        print(f"produced by: {prov.get('tool', '?')} {prov['command']}")
        for step in prov.get("steps", []):
            print(f"  step: {step}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _add_output_flags(p, preview=True):
    p.add_argument("-o", "--output", required=True, help="output dataset file (JSON)")
    p.add_argument("--format", choices=("binary", "csv"), default="binary",
                   help="payload format (default: binary sidecar)")
    if preview:
        p.add_argument("--preview", help="optional PGM preview path")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="thztomo", description="Terahertz tomography toolkit"
    )
    ap.add_argument("--version", action="version", version=f"thztomo {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phantom", help="generate a synthetic phantom image")
    p.add_argument("--shape", choices=("triangle", "disk"), required=True)
    p.add_argument("--n", type=int, default=81, help="grid size (default 81)")
    p.add_argument("--extent", type=float, default=1.0)
    p.add_argument("--value", type=float, default=1.0, help="material density level")
    p.add_argument("--circumradius", type=float, default=0.7)
    p.add_argument("--rotation", type=float, default=0.0, help="rotation in radians")
    p.add_argument("--side-wall", type=float, default=0.08)
    p.add_argument("--top-wall", type=float, default=0.16)
    p.add_argument("--radius", type=float, default=0.5, help="disk radius")
    p.add_argument("--cx", type=float, default=0.0)
    p.add_argument("--cy", type=float, default=0.0)
    _add_output_flags(p)
    p.set_defaults(func=cmd_phantom)

    p = sub.add_parser("simulate", help="simulate scan data from a phantom")
    p.add_argument("--input", required=True, help="phantom image dataset")
    p.add_argument("--model", choices=("full-beam", "single-ray", "time-domain"),
                   default="full-beam")
    p.add_argument("--mode", choices=("P", "I"), default="P")
    p.add_argument("--angles", type=int, default=360)
    p.add_argument("--offsets", type=int, default=71)
    p.add_argument("--offset-max", type=float, default=1.0)
    p.add_argument("--fwhm", type=float, default=0.05, help="beam FWHM (<=0: delta)")
    p.add_argument("--oversampling", type=int, default=4)
    p.add_argument("--noise", type=float, default=0.0, help="relative noise level")
    p.add_argument("--noise-kind", choices=("gaussian", "uniform"), default="gaussian")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--material-n", type=float, default=1.5)
    p.add_argument("--material-n0", type=float, default=1.0)
    p.add_argument("--alpha-m", type=float, default=1.0)
    p.add_argument("--c0", type=float, default=1.0)
    _add_output_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("preprocess", help="turn raw data into reconstruction input")
    p.add_argument("--input", required=True)
    p.add_argument("--mode", choices=("P", "I"), default=None,
                   help="data mode (default: taken from input header)")
    p.add_argument("--peak-window", type=float, default=0.0,
                   help="half-width of the main-peak window (0: keep full traces)")
    p.add_argument("--clip-max", type=float, default=1.5)
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--sigma-s", type=float, default=0.0)
    p.add_argument("--sigma-theta", type=float, default=0.0)
    p.add_argument("--log", action="store_true",
                   help="apply the log transform (ratio -> radon data)")
    _add_output_flags(p)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("reconstruct", help="reconstruct an image from a sinogram")
    p.add_argument("--input", required=True)
    p.add_argument("--method", required=True,
                   choices=_LINEAR_METHODS + ("nonlinear-landweber",))
    p.add_argument("--n", type=int, default=81, help="reconstruction grid size")
    p.add_argument("--extent", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=500.0, help="Tikhonov weight")
    p.add_argument("--iters", type=int, default=100, help="iteration cap")
    p.add_argument("--gamma", type=float, default=None, help="fixed stepsize")
    p.add_argument("--tau", type=float, default=1.5)
    p.add_argument("--delta", type=float, default=None,
                   help="noise level (default: noise_delta from the input header)")
    p.add_argument("--sparsity-weight", type=float, default=0.0)
    p.add_argument("--filter", choices=("ramlak", "hann"), default="ramlak")
    p.add_argument("--cutoff", type=float, default=1.0)
    p.add_argument("--fwhm", type=float, default=0.05)
    p.add_argument("--oversampling", type=int, default=4)
    p.add_argument("--nonneg", action="store_true")
    p.add_argument("--log-csv", help="write the iteration log (k,residual,stepsize)")
    _add_output_flags(p)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("verify", help="run the built-in verification suite")
    p.add_argument("--only", default=None, help="run a single named check")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("info", help="describe a dataset file")
    p.add_argument("input")
    p.set_defaults(func=cmd_info)
    return ap


def main(argv: list[str] | None = None) -> int:
    try:
        _apply_thread_cap()
    except MismatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors; remap to our convention.
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        return args.func(args)
    except MismatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    except DatasetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
