"""Voxel-grid containers and per-voxel operations.

Volumes are immutable wrappers around numpy arrays indexed ``[x, y, z]``
with physical spacing in mm per voxel. The linear (serialized) order is
x-fastest throughout the package; in-memory layout is an implementation
detail of this module and the io module.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import InvalidProbabilityError, ShapeMismatchError

Spacing = tuple[float, float, float]

SOFTMAX_TOLERANCE = 1e-4


def _check_spacing(spacing) -> Spacing:
    s = tuple(float(c) for c in spacing)
    if len(s) != 3:
        raise ValueError(f"spacing must have 3 components, got {len(s)}")
    if not all(np.isfinite(c) and c > 0 for c in s):
        raise ValueError(f"spacing components must be positive and finite, got {s}")
    return s


def _freeze(arr: np.ndarray) -> np.ndarray:
    if arr.ndim != 3:
        raise ShapeMismatchError(f"expected a 3-D array, got shape {arr.shape}")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class ScalarVolume:
    """3-D grid of real values with physical spacing (mm per voxel)."""

    data: np.ndarray
    spacing: Spacing

    def __post_init__(self):
        arr = np.ascontiguousarray(np.asarray(self.data, dtype=np.float32))
        object.__setattr__(self, "data", _freeze(arr))
        object.__setattr__(self, "spacing", _check_spacing(self.spacing))

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape

    @property
    def n_voxels(self) -> int:
        return self.data.size


@dataclass(frozen=True)
class LabelVolume:
    """3-D grid of binary labels: 1 = object, 0 = background."""

    data: np.ndarray
    spacing: Spacing

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 3:
            raise ShapeMismatchError(f"expected a 3-D array, got shape {arr.shape}")
        bad = (arr != 0) & (arr != 1)
        if bad.any():
            idx = np.argwhere(bad)[0]
            raise ValueError(
                f"label volume holds value {arr[tuple(idx)]} at voxel "
                f"{tuple(int(i) for i in idx)}; only 0 and 1 are allowed"
            )
        arr = np.ascontiguousarray(arr.astype(np.uint8))
        object.__setattr__(self, "data", _freeze(arr))
        object.__setattr__(self, "spacing", _check_spacing(self.spacing))

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape

    @property
    def n_voxels(self) -> int:
        return self.data.size

    def count(self) -> int:
        """Number of object voxels."""
        return int(self.data.sum(dtype=np.int64))


class EdgeLabelVolume(LabelVolume):
    """Label volume whose object voxels mark a single-voxel-thick edge shell.

    Edge voxels are always background voxels of the label volume the shell
    was derived from; see :func:`edge_map`.
    """


@dataclass(frozen=True)
class ProbabilityVolume:
    """Three probability fields per voxel: background p0, object p1, edge pe.

    (p0, p1) form a softmax pair; pe is independent of it and lives in
    [0, 1] on its own. Use :func:`validate_probability` to check the
    numeric invariants; construction only enforces structure.
    """

    p0: np.ndarray
    p1: np.ndarray
    pe: np.ndarray
    spacing: Spacing

    def __post_init__(self):
        arrs = []
        for name in ("p0", "p1", "pe"):
            arr = np.ascontiguousarray(np.asarray(getattr(self, name), dtype=np.float32))
            if arr.ndim != 3:
                raise ShapeMismatchError(f"channel {name} must be 3-D, got shape {arr.shape}")
            arrs.append(arr)
        if not (arrs[0].shape == arrs[1].shape == arrs[2].shape):
            raise ShapeMismatchError(
                "channel shapes differ: "
                f"p0 {arrs[0].shape}, p1 {arrs[1].shape}, pe {arrs[2].shape}"
            )
        for name, arr in zip(("p0", "p1", "pe"), arrs):
            object.__setattr__(self, name, _freeze(arr))
        object.__setattr__(self, "spacing", _check_spacing(self.spacing))

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.p0.shape

    @property
    def n_voxels(self) -> int:
        return self.p0.size


Volume = Union[ScalarVolume, LabelVolume, ProbabilityVolume]


@dataclass(frozen=True)
class ValidationResult:
    """Outcome of a probability-volume check.

    On failure, ``linear_index`` is the first offending voxel in x-fastest
    order, ``voxel`` its (x, y, z) coordinates, and ``reason`` names the
    broken invariant.
    """

    ok: bool
    linear_index: int | None = None
    voxel: tuple[int, int, int] | None = None
    reason: str | None = None

    def __bool__(self) -> bool:
        return self.ok


def _first_bad_voxel(mask: np.ndarray) -> tuple[int, tuple[int, int, int]]:
    # First True in x-fastest linear order, i.e. Fortran flattening of [x,y,z].
    flat = mask.flatten(order="F")
    idx = int(np.argmax(flat))
    nx, ny, _ = mask.shape
    x = idx % nx
    y = (idx // nx) % ny
    z = idx // (nx * ny)
    return idx, (x, y, z)


def validate_probability(v: ProbabilityVolume) -> ValidationResult:
    """Check the numeric invariants of a probability volume.

    Verifies that every voxel has finite channels, nonnegative p0/p1 that
    sum to 1 within SOFTMAX_TOLERANCE, and pe within [0, 1]. Returns an
    ok result or the first offending voxel with the invariant it broke.
    """
    finite = np.isfinite(v.p0) & np.isfinite(v.p1) & np.isfinite(v.pe)
    negative = (v.p0 < 0) | (v.p1 < 0)
    p_sum = v.p0.astype(np.float64) + v.p1.astype(np.float64)
    off_simplex = np.abs(p_sum - 1.0) > SOFTMAX_TOLERANCE
    pe_range = (v.pe < 0) | (v.pe > 1)

    bad = ~finite | negative | off_simplex | pe_range
    if not bad.any():
        return ValidationResult(ok=True)

    idx, voxel = _first_bad_voxel(bad)
    x, y, z = voxel
    if not finite[x, y, z]:
        reason = "non-finite channel value"
    elif negative[x, y, z]:
        reason = "negative class probability"
    elif off_simplex[x, y, z]:
        reason = f"p0 + p1 deviates from 1 by more than {SOFTMAX_TOLERANCE}"
    else:
        reason = "edge probability outside [0, 1]"
    return ValidationResult(ok=False, linear_index=idx, voxel=voxel, reason=reason)


def require_valid_probability(v: ProbabilityVolume) -> None:
    """Raise InvalidProbabilityError unless ``validate_probability`` passes."""
    result = validate_probability(v)
    if not result.ok:
        raise InvalidProbabilityError(
            f"invalid probability volume at voxel {result.voxel} "
            f"(linear index {result.linear_index}): {result.reason}"
        )


def argmax_labels(v: ProbabilityVolume) -> LabelVolume:
    """Per-voxel winner of the (p0, p1) pair; ties go to background."""
    require_valid_probability(v)
    return LabelVolume((v.p1 > v.p0).astype(np.uint8), v.spacing)


def dilate6(l: LabelVolume) -> LabelVolume:
    """Binary dilation with the 6-connected cross (face neighbors).

    An output voxel is set iff it or any of its in-bounds face neighbors
    is set in the input. No padding or wraparound at the borders.
    """
    src = l.data.astype(bool)
    out = src.copy()
    out[:-1] |= src[1:]
    out[1:] |= src[:-1]
    out[:, :-1] |= src[:, 1:]
    out[:, 1:] |= src[:, :-1]
    out[:, :, :-1] |= src[:, :, 1:]
    out[:, :, 1:] |= src[:, :, :-1]
    return LabelVolume(out.astype(np.uint8), l.spacing)


def edge_map(l: LabelVolume) -> EdgeLabelVolume:
    """Single-voxel-thick shell of background voxels adjacent to the object.

    Computed as dilate6(l) minus l, so every edge voxel lies on the
    background side and touches the object across at least one face.
    """
    dil = dilate6(l).data.astype(bool)
    edge = dil & ~l.data.astype(bool)
    return EdgeLabelVolume(edge.astype(np.uint8), l.spacing)


# ---------------------------------------------------------------------------
# Resampling
# ---------------------------------------------------------------------------

def _sample_positions(n_in: int, s_in: float, n_out: int, s_out: float) -> np.ndarray:
    # Output voxel centers mapped to continuous input indices, clamped so
    # out-of-range samples stick to the boundary voxel.
    u = (np.arange(n_out, dtype=np.float64) + 0.5) * (s_out / s_in) - 0.5
    return np.clip(u, 0.0, n_in - 1)


def resample(
    v: ScalarVolume | LabelVolume,
    target_spacing,
    mode: str = "linear",
):
    """Resample a volume onto a grid with the given spacing.

    Output dims are round(dims * spacing / target_spacing), half-to-even,
    with a minimum of 1 per axis. Samples are taken at output-voxel
    centers mapped into input physical space; positions outside the input
    grid clamp to the boundary voxel.

    Args:
        v: scalar or label volume.
        target_spacing: (mm, mm, mm) of the output grid, each > 0.
        mode: "linear" (trilinear) or "nearest". Label volumes only
            support "nearest"; a nearest-tie at an exact half index
            resolves to the higher index.

    Returns:
        A volume of the same kind as ``v`` with spacing ``target_spacing``.
    """
    target = _check_spacing(target_spacing)
    if mode not in ("linear", "nearest"):
        raise ValueError(f"unknown interpolation mode {mode!r}")
    is_label = isinstance(v, LabelVolume)
    if is_label and mode != "nearest":
        raise ValueError("label volumes must be resampled with mode='nearest'")

    dims_out = tuple(
        max(1, int(round(n * s / t)))
        for n, s, t in zip(v.dims, v.spacing, target)
    )
    pos = [
        _sample_positions(v.dims[a], v.spacing[a], dims_out[a], target[a])
        for a in range(3)
    ]

    if mode == "nearest":
        idx = [
            np.clip(np.floor(p + 0.5).astype(np.intp), 0, v.dims[a] - 1)
            for a, p in enumerate(pos)
        ]
        out = v.data[np.ix_(*idx)]
        return type(v)(out, target)

    data = v.data.astype(np.float64)
    lo, frac = [], []
    for a, p in enumerate(pos):
        n = v.dims[a]
        i0 = np.clip(np.floor(p).astype(np.intp), 0, max(n - 2, 0))
        lo.append(i0)
        frac.append(p - i0 if n > 1 else np.zeros_like(p))
    hi = [np.minimum(lo[a] + 1, v.dims[a] - 1) for a in range(3)]

    out = np.zeros(dims_out, dtype=np.float64)
    for cx in (0, 1):
        wx = (frac[0] if cx else 1.0 - frac[0])[:, None, None]
        ix = hi[0] if cx else lo[0]
        for cy in (0, 1):
            wy = (frac[1] if cy else 1.0 - frac[1])[None, :, None]
            iy = hi[1] if cy else lo[1]
            for cz in (0, 1):
                wz = (frac[2] if cz else 1.0 - frac[2])[None, None, :]
                iz = hi[2] if cz else lo[2]
                w = wx * wy * wz
                if np.all(w == 0.0):
                    continue
                out += w * data[np.ix_(ix, iy, iz)]
    return ScalarVolume(out.astype(np.float32), target)
