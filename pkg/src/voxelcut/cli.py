"""Command line entry points wiring the pipeline end to end.

Subcommands:

    segment    probability volume -> min-cut labeling (+ energy printout)
    edges      label volume -> single-voxel edge shell
    eval       prediction + ground truth -> metrics report (JSON, optional figures)
    loss       probability volume + ground truth -> 3-class overlap loss
    phantom    synthetic case -> gt / probs / distractor volumes + spec echo
    resample   any volume -> new isotropic or anisotropic grid

The classifier inference stage is replaced by a precomputed probability
volume on disk; see the file format notes in the io module. Every flag
can also come from a JSON config file (--config); explicit command line
values win. Outputs are written atomically, so a failing run never leaves
a partial file. Exit codes are stable per error category:

    0 success, 2 usage or invalid parameter, 3 malformed volume header,
    4 bad payload data, 5 invalid probability field, 6 shape mismatch,
    7 file system error, 8 capacity overflow, 70 internal error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import io as vio
from .errors import (
    CapacityError,
    DataError,
    HeaderError,
    InvalidProbabilityError,
    ShapeMismatchError,
)
from .graphcut import SegmentParams, segment
from .metrics import MetricParams, evaluate, extract_surface, dice_loss_3class
from .phantom import PhantomSpec, corrupt_probabilities, generate_phantom
from .volume import LabelVolume, ProbabilityVolume, edge_map, resample

_EXIT_CODES = [
    ((ValueError, TypeError), 2, "parameter"),
    (HeaderError, 3, "header"),
    (DataError, 4, "data"),
    (InvalidProbabilityError, 5, "probability"),
    (ShapeMismatchError, 6, "shape"),
    (OSError, 7, "io"),
    (CapacityError, 8, "capacity"),
]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="voxelcut",
        description=(
            "Globally optimal binary segmentation of voxel probability maps "
            "via min-cut on a 6-connected grid, plus edge maps, metrics, "
            "phantoms and resampling. The inference stage that would produce "
            "the probability maps is replaced by a file input."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", type=Path, default=None,
                       help="JSON file supplying any flag; command line wins")

    p = sub.add_parser("segment", help="min-cut segmentation of a probability volume")
    add_common(p)
    p.add_argument("--probs", type=Path, help="input probability volume header (.mhd)")
    p.add_argument("--out", type=Path, help="output label volume header (.mhd)")
    p.add_argument("--lambda", dest="lam", type=float, default=None,
                   help="boundary term weight (default 1)")
    p.add_argument("--epsilon", type=float, default=None,
                   help="probability clamp floor before logs (default 1e-6)")
    p.add_argument("--capacity-scale", type=int, default=None,
                   help="integer quantization factor (default 65536)")

    p = sub.add_parser("edges", help="derive the single-voxel edge shell of a labeling")
    add_common(p)
    p.add_argument("--in", dest="input", type=Path, help="input label volume header")
    p.add_argument("--out", type=Path, help="output edge label volume header")

    p = sub.add_parser("eval", help="compare a predicted labeling against ground truth")
    add_common(p)
    p.add_argument("--pred", type=Path, help="predicted label volume header")
    p.add_argument("--gt", type=Path, help="ground-truth label volume header")
    p.add_argument("--report", type=Path, help="output JSON report path")
    p.add_argument("--tolerance-mm", type=float, default=None,
                   help="surface agreement tolerance (default: voxel size)")
    p.add_argument("--figures", type=Path, default=None,
                   help="directory for rendered PNG figures (optional)")

    p = sub.add_parser("loss", help="3-class overlap loss of probabilities vs ground truth")
    add_common(p)
    p.add_argument("--probs", type=Path, help="probability volume header")
    p.add_argument("--gt", type=Path, help="ground-truth label volume header")

    p = sub.add_parser("phantom", help="generate a synthetic shell + distractor case")
    add_common(p)
    p.add_argument("--out-dir", type=Path, help="directory for gt/probs/distractor volumes")
    p.add_argument("--seed", type=int, default=None, help="RNG seed (default 0)")
    p.add_argument("--size", type=int, default=None, help="voxels per axis (default 64)")
    p.add_argument("--noise-sigma", type=float, default=None,
                   help="probability noise sigma (default 0.02)")
    p.add_argument("--artifact-bias", type=float, default=None,
                   help="if set, corrupt the distractor object probability toward this value")

    p = sub.add_parser("resample", help="resample a volume to a new spacing")
    add_common(p)
    p.add_argument("--in", dest="input", type=Path, help="input volume header")
    p.add_argument("--out", type=Path, help="output volume header")
    p.add_argument("--spacing", type=str, default=None,
                   help="target spacing mm, e.g. '1,1,1' or a single value")
    p.add_argument("--interp", choices=("linear", "nearest"), default=None,
                   help="interpolation mode (default linear; labels require nearest)")

    return parser


def _merge_config(args: argparse.Namespace) -> argparse.Namespace:
    """Fill unset flags from the JSON config file, if any."""
    if getattr(args, "config", None) is None:
        return args
    with open(args.config, "r", encoding="utf-8") as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise ValueError(f"{args.config}: config must be a JSON object")
    for key, value in cfg.items():
        if key == "phantom_spec":
            continue  # consumed by the phantom subcommand itself
        attr = key.replace("-", "_")
        if attr == "lambda":
            attr = "lam"
        if attr in ("in", "input"):
            attr = "input"
        if not hasattr(args, attr):
            raise ValueError(f"{args.config}: unknown config key {key!r}")
        if getattr(args, attr) is None:
            if attr in ("probs", "out", "input", "pred", "gt", "report",
                        "figures", "out_dir"):
                value = Path(value)
            setattr(args, attr, value)
    return args


def _require(args, *names):
    for name in names:
        if getattr(args, name) is None:
            flag = "--" + name.replace("_", "-").replace("input", "in")
            raise ValueError(f"missing required option {flag}")


def _segment_params(args) -> SegmentParams:
    kwargs = {}
    if args.lam is not None:
        kwargs["lam"] = args.lam
    if args.epsilon is not None:
        kwargs["epsilon"] = args.epsilon
    if args.capacity_scale is not None:
        kwargs["capacity_scale"] = args.capacity_scale
    return SegmentParams(**kwargs)


def _cmd_segment(args) -> int:
    _require(args, "probs", "out")
    v = vio.read_volume(args.probs)
    if not isinstance(v, ProbabilityVolume):
        raise ShapeMismatchError(f"{args.probs}: segment expects a 3-channel probability volume")
    result = segment(v, _segment_params(args))
    vio.write_volume(result.labels, args.out)
    n_obj = result.labels.count()
    print(f"energy {result.energy} (real {result.energy_real:.6f}) "
          f"max_flow {result.max_flow_value}")
    print(f"object_voxels {n_obj} background_voxels {result.labels.n_voxels - n_obj}")
    return 0


def _cmd_edges(args) -> int:
    _require(args, "input", "out")
    v = vio.read_volume(args.input)
    if not isinstance(v, LabelVolume):
        raise ShapeMismatchError(f"{args.input}: edges expects a label volume")
    vio.write_volume(edge_map(v), args.out)
    return 0


def _cmd_eval(args) -> int:
    _require(args, "pred", "gt", "report")
    pred = vio.read_volume(args.pred)
    gt = vio.read_volume(args.gt)
    if not isinstance(pred, LabelVolume) or not isinstance(gt, LabelVolume):
        raise ShapeMismatchError("eval expects two label volumes")
    tolerance = args.tolerance_mm if args.tolerance_mm is not None else max(gt.spacing)
    report = evaluate(pred, gt, MetricParams(tolerance_mm=tolerance))
    vio.write_report(report, args.report)
    msd_txt = "null" if report.msd_mm is None else f"{report.msd_mm:.6g}"
    print("vdc\tsdc\tmsd_mm\ttp\tfp\tfn")
    print(f"{report.vdc:.6g}\t{report.sdc:.6g}\t{msd_txt}\t"
          f"{int(report.counts.tp)}\t{int(report.counts.fp)}\t{int(report.counts.fn)}")
    if args.figures is not None:
        from .figures import render_eval_figures

        paths = render_eval_figures(
            pred, gt, extract_surface(pred), extract_surface(gt), report, args.figures
        )
        for p in paths:
            print(f"figure {p}")
    return 0


def _cmd_loss(args) -> int:
    _require(args, "probs", "gt")
    v = vio.read_volume(args.probs)
    gt = vio.read_volume(args.gt)
    if not isinstance(v, ProbabilityVolume) or not isinstance(gt, LabelVolume):
        raise ShapeMismatchError("loss expects a probability volume and a label volume")
    print(f"{dice_loss_3class(v, gt):.9g}")
    return 0


def _cmd_phantom(args) -> int:
    _require(args, "out_dir")
    spec_kwargs = {}
    if args.config is not None:
        with open(args.config, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
        spec_kwargs = dict(cfg.get("phantom_spec", {}))
    if args.seed is not None:
        spec_kwargs["seed"] = args.seed
    if args.size is not None:
        spec_kwargs["size"] = args.size
    if args.noise_sigma is not None:
        spec_kwargs["noise_sigma"] = args.noise_sigma
    spec = PhantomSpec.from_dict(spec_kwargs) if spec_kwargs else PhantomSpec()

    case = generate_phantom(spec)
    if args.artifact_bias is not None:
        case = corrupt_probabilities(case, args.artifact_bias)

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    vio.write_volume(case.gt, out / "gt.mhd")
    vio.write_volume(case.probs, out / "probs.mhd")
    vio.write_volume(case.distractor_mask, out / "distractor.mhd")
    echo = {"phantom_spec": spec.to_dict()}
    if args.artifact_bias is not None:
        echo["artifact_bias"] = args.artifact_bias
    (out / "spec.json.tmp").write_text(json.dumps(echo, indent=2) + "\n", encoding="ascii")
    (out / "spec.json.tmp").replace(out / "spec.json")
    print(f"phantom written to {out} (gt voxels {case.gt.count()}, "
          f"distractor voxels {case.distractor_mask.count()})")
    return 0


def _cmd_resample(args) -> int:
    _require(args, "input", "out", "spacing")
    v = vio.read_volume(args.input)
    if isinstance(v, ProbabilityVolume):
        raise ShapeMismatchError("resample expects a scalar or label volume")
    parts = [float(t) for t in str(args.spacing).replace(",", " ").split()]
    if len(parts) == 1:
        parts = parts * 3
    if len(parts) != 3:
        raise ValueError(f"--spacing needs 1 or 3 components, got {args.spacing!r}")
    mode = args.interp
    if mode is None:
        mode = "nearest" if isinstance(v, LabelVolume) else "linear"
    vio.write_volume(resample(v, tuple(parts), mode=mode), args.out)
    return 0


_COMMANDS = {
    "segment": _cmd_segment,
    "edges": _cmd_edges,
    "eval": _cmd_eval,
    "loss": _cmd_loss,
    "phantom": _cmd_phantom,
    "resample": _cmd_resample,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args = _merge_config(args)
        return _COMMANDS[args.command](args)
    except Exception as exc:  # noqa: BLE001 - mapped to stable exit codes
        for types, code, category in _EXIT_CODES:
            if isinstance(exc, types):
                print(f"error: {category}: {exc}", file=sys.stderr)
                return code
        print(f"error: internal: {exc}", file=sys.stderr)
        return 70


if __name__ == "__main__":
    sys.exit(main())
