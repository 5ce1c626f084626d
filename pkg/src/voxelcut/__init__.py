"""voxelcut: globally optimal binary segmentation of voxel probability maps.

Probability volumes (background / object / edge channels) become a
6-connected flow network whose exact min cut is the minimum-energy binary
labeling. The package also ships the surrounding machinery: edge-shell
derivation, isometric resampling, volumetric and surface evaluation
metrics, the 3-class overlap loss, deterministic synthetic phantoms, and
bit-exact volume I/O with a batch CLI.
"""

from .errors import (
    CapacityError,
    DataError,
    EmptySurfaceError,
    HeaderError,
    InvalidProbabilityError,
    ShapeMismatchError,
    VoxelCutError,
)
from .graphcut import (
    CutResult,
    GridGraph,
    SegmentParams,
    build_graph,
    labeling_energy,
    max_flow_min_cut,
    segment,
)
from .io import VolumeHeader, read_header, read_volume, write_report, write_volume
from .maxflow import CAP_MAX
from .metrics import (
    ConfusionCounts,
    MetricParams,
    MetricsReport,
    SurfaceCellSet,
    dice_loss_3class,
    evaluate,
    extract_surface,
    mean_surface_distance,
    surface_dice,
    volumetric_dice,
)
from .phantom import (
    DefectSpec,
    DistractorSpec,
    PhantomCase,
    PhantomSpec,
    corrupt_probabilities,
    generate_phantom,
)
from .volume import (
    EdgeLabelVolume,
    LabelVolume,
    ProbabilityVolume,
    ScalarVolume,
    ValidationResult,
    argmax_labels,
    dilate6,
    edge_map,
    resample,
    validate_probability,
)

__version__ = "0.1.0"

__all__ = [
    "CAP_MAX",
    "CapacityError",
    "ConfusionCounts",
    "CutResult",
    "DataError",
    "DefectSpec",
    "DistractorSpec",
    "EdgeLabelVolume",
    "EmptySurfaceError",
    "GridGraph",
    "HeaderError",
    "InvalidProbabilityError",
    "LabelVolume",
    "MetricParams",
    "MetricsReport",
    "PhantomCase",
    "PhantomSpec",
    "ProbabilityVolume",
    "ScalarVolume",
    "SegmentParams",
    "ShapeMismatchError",
    "SurfaceCellSet",
    "ValidationResult",
    "VolumeHeader",
    "VoxelCutError",
    "argmax_labels",
    "build_graph",
    "corrupt_probabilities",
    "dice_loss_3class",
    "dilate6",
    "edge_map",
    "evaluate",
    "extract_surface",
    "generate_phantom",
    "labeling_energy",
    "max_flow_min_cut",
    "mean_surface_distance",
    "read_header",
    "read_volume",
    "resample",
    "segment",
    "surface_dice",
    "validate_probability",
    "volumetric_dice",
    "write_report",
    "write_volume",
]
