"""Bit-exact reading and writing of volumes and metric reports.

Volumes are stored as a small text header next to a raw little-endian
payload (MetaImage-style key = value lines). The payload is x-fastest
with channels interleaved per voxel, matching the package-wide linear
order. Writers are deterministic byte for byte and atomic: content goes
to a temporary file that is renamed into place, so a failed write never
leaves a partial output.

Header keys, in fixed order:

    NDims = 3
    DimSize = nx ny nz
    ElementSpacing = sx sy sz
    ElementType = MET_UCHAR | MET_FLOAT
    ElementNumberOfChannels = 1 | 3
    ElementDataFile = <name>.raw

MET_UCHAR with 1 channel is a label volume (values 0/1 enforced),
MET_FLOAT with 1 channel a scalar volume, MET_FLOAT with 3 channels a
probability volume with channel order (p0, p1, pe). MET_UCHAR with 3
channels is rejected.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, HeaderError
from .metrics import MetricsReport
from .volume import LabelVolume, ProbabilityVolume, ScalarVolume, Volume

__all__ = ["VolumeHeader", "read_volume", "write_volume", "write_report"]

_HEADER_KEYS = (
    "NDims",
    "DimSize",
    "ElementSpacing",
    "ElementType",
    "ElementNumberOfChannels",
    "ElementDataFile",
)

_ELEMENT_TYPES = {"MET_UCHAR": np.dtype("<u1"), "MET_FLOAT": np.dtype("<f4")}


@dataclass(frozen=True)
class VolumeHeader:
    """Validated header of one stored volume. Byte order is always little."""

    dims: tuple[int, int, int]
    spacing: tuple[float, float, float]
    element_type: str
    channels: int
    data_file: str

    @property
    def dtype(self) -> np.dtype:
        return _ELEMENT_TYPES[self.element_type]

    @property
    def payload_bytes(self) -> int:
        nx, ny, nz = self.dims
        return nx * ny * nz * self.channels * self.dtype.itemsize


def _atomic_write_bytes(path: Path, payload: bytes):
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(payload)
    os.replace(tmp, path)


def _raw_path(header_path: Path) -> Path:
    return header_path.with_suffix(".raw")


def write_volume(v: Volume, path) -> None:
    """Write a volume as header + raw payload.

    ``path`` names the header file; the payload lands next to it with a
    .raw suffix. Bytes are deterministic: writing the same volume twice
    yields identical files.
    """
    path = Path(path)
    raw = _raw_path(path)
    if raw == path:
        raise ValueError(f"header and data file would collide at {path}")

    if isinstance(v, LabelVolume):
        element_type, channels = "MET_UCHAR", 1
        payload = v.data.flatten(order="F").astype("<u1").tobytes()
    elif isinstance(v, ProbabilityVolume):
        element_type, channels = "MET_FLOAT", 3
        stacked = np.stack([v.p0, v.p1, v.pe], axis=0)
        payload = stacked.flatten(order="F").astype("<f4").tobytes()
    elif isinstance(v, ScalarVolume):
        element_type, channels = "MET_FLOAT", 1
        payload = v.data.flatten(order="F").astype("<f4").tobytes()
    else:
        raise TypeError(f"cannot write volume of type {type(v).__name__}")

    nx, ny, nz = v.dims
    sx, sy, sz = v.spacing
    lines = [
        "NDims = 3",
        f"DimSize = {nx} {ny} {nz}",
        f"ElementSpacing = {sx:.17g} {sy:.17g} {sz:.17g}",
        f"ElementType = {element_type}",
        f"ElementNumberOfChannels = {channels}",
        f"ElementDataFile = {raw.name}",
    ]
    _atomic_write_bytes(raw, payload)
    _atomic_write_bytes(path, ("\n".join(lines) + "\n").encode("ascii"))


def read_header(path) -> VolumeHeader:
    """Parse and validate a volume header file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="ascii")
    except UnicodeDecodeError as exc:
        raise HeaderError(f"{path}: header is not ASCII text: {exc}") from None
    fields = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        if "=" not in line:
            raise HeaderError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        fields[key.strip()] = value.strip()
    missing = [k for k in _HEADER_KEYS if k not in fields]
    if missing:
        raise HeaderError(f"{path}: missing header keys {missing}")

    if fields["NDims"] != "3":
        raise HeaderError(f"{path}: NDims must be 3, got {fields['NDims']}")
    try:
        dims = tuple(int(t) for t in fields["DimSize"].split())
        spacing = tuple(float(t) for t in fields["ElementSpacing"].split())
        channels = int(fields["ElementNumberOfChannels"])
    except ValueError as exc:
        raise HeaderError(f"{path}: malformed numeric header field: {exc}") from None
    if len(dims) != 3 or any(d < 1 for d in dims):
        raise HeaderError(f"{path}: DimSize must be 3 positive integers, got {fields['DimSize']}")
    if len(spacing) != 3 or any(not np.isfinite(s) or s <= 0 for s in spacing):
        raise HeaderError(f"{path}: ElementSpacing must be 3 positive reals, got {fields['ElementSpacing']}")
    element_type = fields["ElementType"]
    if element_type not in _ELEMENT_TYPES:
        raise HeaderError(f"{path}: unsupported ElementType {element_type}")
    if channels not in (1, 3):
        raise HeaderError(f"{path}: ElementNumberOfChannels must be 1 or 3, got {channels}")
    if channels == 3 and element_type != "MET_FLOAT":
        raise HeaderError(f"{path}: 3-channel volumes must be MET_FLOAT, got {element_type}")
    return VolumeHeader(
        dims=dims, spacing=spacing, element_type=element_type,
        channels=channels, data_file=fields["ElementDataFile"],
    )


def read_volume(path) -> Volume:
    """Read a volume written by :func:`write_volume`.

    Dispatches on element type and channel count; label payloads are
    validated to {0, 1} and float payloads to finite values. Size
    mismatches between header and raw file are rejected with the expected
    and actual byte counts.
    """
    path = Path(path)
    header = read_header(path)

    raw = path.parent / header.data_file
    payload = raw.read_bytes()
    if len(payload) != header.payload_bytes:
        raise DataError(
            f"{raw}: payload size mismatch: expected {header.payload_bytes} bytes "
            f"for dims {header.dims} x {header.channels} channel(s), found {len(payload)}"
        )

    flat = np.frombuffer(payload, dtype=header.dtype)
    if header.element_type == "MET_FLOAT" and not np.isfinite(flat).all():
        raise DataError(f"{raw}: payload holds non-finite float values")

    if header.channels == 3:
        arr = flat.reshape((3,) + header.dims, order="F")
        return ProbabilityVolume(
            p0=np.ascontiguousarray(arr[0]),
            p1=np.ascontiguousarray(arr[1]),
            pe=np.ascontiguousarray(arr[2]),
            spacing=header.spacing,
        )
    arr = np.ascontiguousarray(flat.reshape(header.dims, order="F"))
    if header.element_type == "MET_UCHAR":
        bad = (arr != 0) & (arr != 1)
        if bad.any():
            idx = np.argwhere(bad)[0]
            raise DataError(
                f"{raw}: label value {arr[tuple(idx)]} at voxel "
                f"{tuple(int(i) for i in idx)} is outside {{0, 1}}"
            )
        return LabelVolume(arr, header.spacing)
    return ScalarVolume(arr, header.spacing)


# ---------------------------------------------------------------------------
# Metric reports
# ---------------------------------------------------------------------------

def _sig6(x: float) -> float:
    return float(f"{x:.6g}")


def report_to_json(r: MetricsReport) -> str:
    """Serialize a report with the fixed key set and 6 significant digits."""
    doc = {
        "vdc": _sig6(r.vdc),
        "sdc": _sig6(r.sdc),
        "msd_mm": None if r.msd_mm is None else _sig6(r.msd_mm),
        "tp": int(r.counts.tp),
        "fp": int(r.counts.fp),
        "fn": int(r.counts.fn),
        "tolerance_mm": _sig6(r.tolerance_mm),
        "spacing_mm": [_sig6(s) for s in r.spacing_mm],
    }
    if r.error is not None:
        doc["error"] = r.error
    return json.dumps(doc, indent=2) + "\n"


def write_report(r: MetricsReport, path) -> None:
    """Write the JSON metrics report; identical reports give identical bytes."""
    _atomic_write_bytes(Path(path), report_to_json(r).encode("ascii"))
