"""Dataset files: JSON header plus float64 payload, and PGM previews.

The canonical format is a JSON header with a sidecar binary file of
little-endian float64 values (bit-exact round-trips); an inline-CSV payload
is available as a human-inspectable debug alternative (15 significant
digits).  Every header records the producing command's flag set and the
SHA-256 hashes of its input files, forming a provenance chain.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .beam import MaterialParams
from .geometry import DensityImage, ImageGrid, ScanGeometry, Sinogram
from .pulses import PulseTrace, RawDataSet

__all__ = [
    "SCHEMA_VERSION",
    "DatasetError",
    "file_sha256",
    "write_image",
    "write_sinogram",
    "write_traces",
    "read_dataset",
    "write_pgm",
]

SCHEMA_VERSION = "1"


class DatasetError(Exception):
    """Malformed or inconsistent dataset file."""


def file_sha256(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _payload_to_header(values: np.ndarray, path: Path, fmt: str) -> dict:
    flat = np.ascontiguousarray(values, dtype="<f8").ravel()
    if fmt == "binary":
        sidecar = path.with_suffix(".bin")
        sidecar.write_bytes(flat.tobytes())
        return {"format": "binary", "file": sidecar.name, "count": int(flat.size)}
    if fmt == "csv":
        data = ",".join("%.15g" % v for v in flat)
        return {"format": "csv", "data": data, "count": int(flat.size)}
    raise ValueError(f"unknown payload format {fmt!r}")


def _payload_from_header(header: dict, path: Path) -> np.ndarray:
    payload = header.get("payload")
    if not isinstance(payload, dict):
        raise DatasetError("missing payload section")
    count = payload.get("count")
    if payload.get("format") == "binary":
        sidecar = path.parent / payload["file"]
        if not sidecar.exists():
            raise DatasetError(f"missing payload sidecar {sidecar}")
        flat = np.frombuffer(sidecar.read_bytes(), dtype="<f8").astype(float)
    elif payload.get("format") == "csv":
        data = payload.get("data", "")
        flat = np.array([float(v) for v in data.split(",")] if data else [])
    else:
        raise DatasetError(f"unknown payload format {payload.get('format')!r}")
    if count is not None and flat.size != count:
        raise DatasetError(
            f"payload length {flat.size} does not match declared count {count}"
        )
    return flat


def _write_header(path: Path, header: dict) -> None:
    path.write_text(json.dumps(header, indent=2) + "\n")


def _base_header(kind: str, provenance: dict | None) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": kind,
        "provenance": provenance or {},
    }


def write_image(
    path: str | Path,
    img: DensityImage,
    provenance: dict | None = None,
    fmt: str = "binary",
) -> None:
    path = Path(path)
    header = _base_header("image", provenance)
    header["grid"] = {"n_pixels": img.grid.n_pixels, "extent": img.grid.extent}
    header["payload"] = _payload_to_header(img.ravel(), path, fmt)
    _write_header(path, header)


def _geometry_header(geom: ScanGeometry) -> dict:
    return {"angles": geom.angles.tolist(), "offsets": geom.offsets.tolist()}


def _geometry_from_header(d: dict) -> ScanGeometry:
    return ScanGeometry(np.asarray(d["angles"]), np.asarray(d["offsets"]))


def write_sinogram(
    path: str | Path,
    sino: Sinogram,
    data_kind: str,
    provenance: dict | None = None,
    fmt: str = "binary",
    noise_delta: float | None = None,
) -> None:
    """``data_kind`` tags the values: "ratio-P", "ratio-I", "radon", "delay"."""
    path = Path(path)
    header = _base_header("sinogram", provenance)
    header["geometry"] = _geometry_header(sino.geometry)
    header["data_kind"] = data_kind
    if noise_delta is not None:
        header["noise_delta"] = noise_delta
    header["payload"] = _payload_to_header(sino.ravel(), path, fmt)
    _write_header(path, header)


def write_traces(
    path: str | Path,
    data: RawDataSet,
    material: MaterialParams | None = None,
    provenance: dict | None = None,
    fmt: str = "binary",
) -> None:
    """Trace bundle: reference first, then traces in offset-fastest order.

    All traces must share the reference's time base.
    """
    path = Path(path)
    ref = data.reference
    for tr in data.traces:
        if tr.n_samples != ref.n_samples or tr.t0 != ref.t0 or tr.dt != ref.dt:
            raise DatasetError("trace bundle requires a common time base")
    header = _base_header("traces", provenance)
    header["geometry"] = _geometry_header(data.geometry)
    header["time_base"] = {"t0": ref.t0, "dt": ref.dt, "n_samples": ref.n_samples}
    if material is not None:
        header["material"] = {
            "n": material.n,
            "n0": material.n0,
            "alpha_M": material.alpha_M,
            "c0": material.c0,
        }
    stacked = np.concatenate([ref.samples] + [tr.samples for tr in data.traces])
    header["payload"] = _payload_to_header(stacked, path, fmt)
    _write_header(path, header)


def read_dataset(path: str | Path):
    """Read any dataset file; returns ``(kind, obj, header)``.

    ``obj`` is a :class:`DensityImage`, ``Sinogram``, or ``RawDataSet``
    depending on the header kind.
    """
    path = Path(path)
    try:
        header = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DatasetError(f"cannot read dataset header {path}: {exc}") from exc
    if header.get("schema_version") != SCHEMA_VERSION:
        raise DatasetError(
            f"unsupported schema_version {header.get('schema_version')!r}"
        )
    kind = header.get("kind")
    flat = _payload_from_header(header, path)

    if kind == "image":
        grid = ImageGrid(
            int(header["grid"]["n_pixels"]), float(header["grid"]["extent"])
        )
        if flat.size != grid.n_values:
            raise DatasetError("payload length does not match grid")
        return kind, DensityImage(grid, flat), header
    if kind == "sinogram":
        geom = _geometry_from_header(header["geometry"])
        if flat.size != geom.n_rays:
            raise DatasetError("payload length does not match geometry")
        return kind, Sinogram.from_flat(geom, flat), header
    if kind == "traces":
        geom = _geometry_from_header(header["geometry"])
        tb = header["time_base"]
        n_t = int(tb["n_samples"])
        if flat.size != (geom.n_rays + 1) * n_t:
            raise DatasetError("payload length does not match trace bundle")
        blocks = flat.reshape(geom.n_rays + 1, n_t)
        ref = PulseTrace(float(tb["t0"]), float(tb["dt"]), blocks[0])
        traces = [
            PulseTrace(float(tb["t0"]), float(tb["dt"]), blocks[k + 1])
            for k in range(geom.n_rays)
        ]
        return kind, RawDataSet(geom, traces, ref), header
    raise DatasetError(f"unknown dataset kind {kind!r}")


def write_pgm(path: str | Path, values: np.ndarray) -> None:
    """8-bit binary PGM (P5) preview with linear min-max scaling.

    Rows are flipped so increasing y in the image plane points up on
    screen.
    """
    v = np.asarray(values, dtype=float)
    lo, hi = float(v.min()), float(v.max())
    if hi > lo:
        scaled = np.round((v - lo) / (hi - lo) * 255.0)
    else:
        scaled = np.zeros_like(v)
    img = scaled.astype(np.uint8)[::-1, :]
    head = f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii")
    Path(path).write_bytes(head + img.tobytes())
