"""Deterministic synthetic test volumes: a spherical shell with a defect,
an adjacent distractor blob, and simulated per-voxel probability maps.

The generated probabilities mimic a classifier that is confident on the
true object, detects the true object boundary in the edge channel, and
sees the distractor only faintly. corrupt_probabilities then raises the
object probability inside the distractor, reproducing the failure mode
where a thresholded labeling swallows the blob: because no detected edge
encloses it, cutting around the corrupted blob stays expensive and the
min-cut segmentation flips it back to background, while the true shell
keeps its cheap, fully detected boundary.

All randomness comes from one seeded PCG64 stream (numpy default_rng)
with a fixed draw order, so equal specs give bitwise-equal cases on any
platform.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .volume import LabelVolume, ProbabilityVolume, dilate6, edge_map

__all__ = [
    "DefectSpec",
    "DistractorSpec",
    "PhantomSpec",
    "PhantomCase",
    "generate_phantom",
    "corrupt_probabilities",
]


@dataclass(frozen=True)
class DefectSpec:
    """Spherical-cap hole cut out of the shell.

    Shell voxels whose direction from the volume center lies within
    angular_radius_deg of ``direction`` are removed.
    """

    direction: tuple[float, float, float] = (0.0, 0.0, 1.0)
    angular_radius_deg: float = 20.0

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=np.float64)
        if d.shape != (3,) or not np.isfinite(d).all() or np.linalg.norm(d) == 0:
            raise ValueError(f"defect direction must be a nonzero 3-vector, got {self.direction}")
        if not (0 < self.angular_radius_deg < 90):
            raise ValueError(f"angular radius must lie in (0, 90) deg, got {self.angular_radius_deg}")


@dataclass(frozen=True)
class DistractorSpec:
    """Spherical blob near, but never touching, the shell.

    center_mm None places the blob along the (1,1,1) diagonal at
    outer_radius + gap_mm + radius_mm from the volume center. bias is the
    object-probability lift the blob receives at generation time (kept
    below 0.5 so the clean case stays background).
    """

    center_mm: tuple[float, float, float] | None = None
    radius_mm: float = 2.0
    gap_mm: float = 3.0
    bias: float = 0.2

    def __post_init__(self):
        if not (self.radius_mm > 0):
            raise ValueError(f"distractor radius must be > 0, got {self.radius_mm}")
        if not (self.gap_mm > 0):
            raise ValueError(f"distractor gap must be > 0, got {self.gap_mm}")
        if not (0 <= self.bias <= 1):
            raise ValueError(f"distractor bias must lie in [0, 1], got {self.bias}")


@dataclass(frozen=True)
class PhantomSpec:
    """Geometry, probability corruption knobs and RNG seed of one case."""

    size: int = 64
    spacing_mm: float = 1.0
    outer_radius_mm: float = 24.0
    inner_radius_mm: float = 20.0
    defect: DefectSpec | None = DefectSpec()
    distractor: DistractorSpec | None = DistractorSpec()
    noise_sigma: float = 0.02
    seed: int = 0

    def __post_init__(self):
        if self.size < 2:
            raise ValueError(f"size must be >= 2, got {self.size}")
        if not (self.spacing_mm > 0):
            raise ValueError(f"spacing must be > 0, got {self.spacing_mm}")
        half_extent = self.size * self.spacing_mm / 2
        if not (0 < self.inner_radius_mm < self.outer_radius_mm < half_extent):
            raise ValueError(
                "radii must satisfy 0 < inner < outer < size*spacing/2, got "
                f"inner={self.inner_radius_mm}, outer={self.outer_radius_mm}, "
                f"half extent={half_extent}"
            )
        if self.noise_sigma < 0:
            raise ValueError(f"noise_sigma must be >= 0, got {self.noise_sigma}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "PhantomSpec":
        d = dict(d)
        for key, sub in (("defect", DefectSpec), ("distractor", DistractorSpec)):
            if d.get(key) is not None:
                sub_d = dict(d[key])
                for k, v in sub_d.items():
                    if isinstance(v, list):
                        sub_d[k] = tuple(v)
                d[key] = sub(**sub_d)
        return cls(**d)


@dataclass(frozen=True)
class PhantomCase:
    """Ground truth, simulated probabilities and the distractor mask."""

    gt: LabelVolume
    probs: ProbabilityVolume
    distractor_mask: LabelVolume
    spec: PhantomSpec


def _voxel_center_offsets(spec: PhantomSpec):
    # Physical offsets of voxel centers from the volume center, per axis.
    c = (np.arange(spec.size, dtype=np.float64) + 0.5) * spec.spacing_mm
    c -= spec.size * spec.spacing_mm / 2
    return c[:, None, None], c[None, :, None], c[None, None, :]


def _shell_mask(spec: PhantomSpec):
    x, y, z = _voxel_center_offsets(spec)
    r = np.sqrt(x * x + y * y + z * z)
    shell = (r >= spec.inner_radius_mm) & (r <= spec.outer_radius_mm)
    if spec.defect is not None:
        d = np.asarray(spec.defect.direction, dtype=np.float64)
        d /= np.linalg.norm(d)
        with np.errstate(invalid="ignore"):
            cos_angle = (x * d[0] + y * d[1] + z * d[2]) / np.where(r > 0, r, 1.0)
        cap = cos_angle >= np.cos(np.deg2rad(spec.defect.angular_radius_deg))
        shell &= ~cap
    return shell


def _distractor_mask(spec: PhantomSpec):
    if spec.distractor is None:
        return np.zeros((spec.size,) * 3, dtype=bool)
    d = spec.distractor
    if d.center_mm is None:
        dist = spec.outer_radius_mm + d.gap_mm + d.radius_mm
        center = np.full(3, dist / np.sqrt(3.0))
    else:
        center = np.asarray(d.center_mm, dtype=np.float64)
    x, y, z = _voxel_center_offsets(spec)
    rr = (x - center[0]) ** 2 + (y - center[1]) ** 2 + (z - center[2]) ** 2
    return rr <= d.radius_mm**2


def generate_phantom(spec: PhantomSpec) -> PhantomCase:
    """Build one deterministic phantom case from its spec.

    gt is the shell minus the defect cap. p1 = clamp(gt + bias * distractor
    + noise, 0, 1) with p0 = 1 - p1, and pe is the one-hot edge shell of gt
    smeared by the same seeded noise stream. The distractor must not touch
    the shell (no shared faces); overlap is rejected.
    """
    shell = _shell_mask(spec)
    distractor = _distractor_mask(spec)
    gt = LabelVolume(shell.astype(np.uint8), (spec.spacing_mm,) * 3)

    if spec.distractor is not None:
        touching = distractor & dilate6(gt).data.astype(bool)
        if touching.any():
            raise ValueError("distractor touches or overlaps the shell; adjust its placement")

    rng = np.random.default_rng(spec.seed)
    bias = spec.distractor.bias if spec.distractor is not None else 0.0
    noise_p1 = rng.normal(0.0, spec.noise_sigma, shell.shape) if spec.noise_sigma > 0 else 0.0
    noise_pe = rng.normal(0.0, spec.noise_sigma, shell.shape) if spec.noise_sigma > 0 else 0.0

    p1 = np.clip(shell.astype(np.float64) + bias * distractor + noise_p1, 0.0, 1.0)
    p0 = 1.0 - p1
    edge = edge_map(gt).data.astype(np.float64)
    pe = np.clip(edge + noise_pe, 0.0, 1.0)

    probs = ProbabilityVolume(
        p0=p0.astype(np.float32),
        p1=p1.astype(np.float32),
        pe=pe.astype(np.float32),
        spacing=(spec.spacing_mm,) * 3,
    )
    return PhantomCase(
        gt=gt,
        probs=probs,
        distractor_mask=LabelVolume(distractor.astype(np.uint8), (spec.spacing_mm,) * 3),
        spec=spec,
    )


def corrupt_probabilities(case: PhantomCase, artifact_bias: float) -> PhantomCase:
    """Raise p1 toward artifact_bias inside the distractor, p0 renormalized.

    p1 becomes max(p1, artifact_bias) on the mask, so bias 0 is the
    identity. The edge channel is left untouched: the corrupted blob still
    has no detected boundary of its own, which is what lets the min cut
    recover while the argmax labeling absorbs the blob.
    """
    if not (0 <= artifact_bias <= 1):
        raise ValueError(f"artifact_bias must lie in [0, 1], got {artifact_bias}")
    mask = case.distractor_mask.data.astype(bool)
    p1 = case.probs.p1
    raised = mask & (p1 < artifact_bias)
    if not raised.any():
        return case
    p1_new = np.where(raised, np.float32(artifact_bias), p1)
    p0_new = np.where(raised, np.float32(1.0) - np.float32(artifact_bias), case.probs.p0)
    probs = ProbabilityVolume(p0=p0_new, p1=p1_new, pe=case.probs.pe, spacing=case.probs.spacing)
    return PhantomCase(
        gt=case.gt, probs=probs, distractor_mask=case.distractor_mask, spec=case.spec
    )
