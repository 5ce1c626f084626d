"""Figure rendering for the evaluation path.

Writes PNGs next to the delimited/JSON report output: orthogonal
mid-slice overlays of prediction vs ground truth, and histograms of the
directed surface distances. Rendering is deterministic (Agg backend,
fixed dpi, no timestamps in metadata).
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from matplotlib.colors import ListedColormap

from .metrics import MetricsReport, SurfaceCellSet, nearest_distances
from .volume import LabelVolume

_DPI = 110


def _overlay_slice(ax, pred_sl, gt_sl, title):
    # 0 both bg, 1 gt only (missed), 2 pred only (extra), 3 both (agree)
    combo = gt_sl.astype(np.uint8) + 2 * pred_sl.astype(np.uint8)
    cmap = ListedColormap(["black", "orange", "red", "white"])
    ax.imshow(combo.T, cmap=cmap, vmin=0, vmax=3, origin="lower", interpolation="nearest")
    ax.set_title(title, fontsize=9)
    ax.set_xticks([])
    ax.set_yticks([])


def render_eval_figures(
    pred: LabelVolume,
    gt: LabelVolume,
    pred_s: SurfaceCellSet,
    gt_s: SurfaceCellSet,
    report: MetricsReport,
    out_dir,
) -> list[Path]:
    """Render the evaluation figures into ``out_dir``; returns written paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    nx, ny, nz = gt.dims
    fig, axes = plt.subplots(1, 3, figsize=(9.6, 3.4))
    _overlay_slice(axes[0], pred.data[nx // 2], gt.data[nx // 2], f"x = {nx // 2}")
    _overlay_slice(axes[1], pred.data[:, ny // 2], gt.data[:, ny // 2], f"y = {ny // 2}")
    _overlay_slice(axes[2], pred.data[:, :, nz // 2], gt.data[:, :, nz // 2], f"z = {nz // 2}")
    msd_txt = "undefined" if report.msd_mm is None else f"{report.msd_mm:.3f} mm"
    fig.suptitle(
        f"vdc {report.vdc:.4f}   sdc {report.sdc:.4f}   msd {msd_txt}"
        "   (white agree, red extra, orange missed)",
        fontsize=9,
    )
    slices_path = out_dir / "slices.png"
    fig.savefig(slices_path, dpi=_DPI)
    plt.close(fig)
    written.append(slices_path)

    if len(pred_s) and len(gt_s):
        d_pred = nearest_distances(pred_s, gt_s)
        d_gt = nearest_distances(gt_s, pred_s)
        hi = max(float(d_pred.max()), float(d_gt.max()), report.tolerance_mm) * 1.05
        bins = np.linspace(0.0, hi if hi > 0 else 1.0, 40)
        fig, ax = plt.subplots(figsize=(6.0, 3.4))
        ax.hist(d_pred, bins=bins, alpha=0.6, label="pred to gt")
        ax.hist(d_gt, bins=bins, alpha=0.6, label="gt to pred")
        ax.axvline(report.tolerance_mm, color="k", linestyle="--", linewidth=1,
                   label=f"tolerance {report.tolerance_mm:g} mm")
        ax.set_xlabel("nearest surfel distance [mm]")
        ax.set_ylabel("surfels")
        ax.legend(fontsize=8)
        fig.tight_layout()
        hist_path = out_dir / "surface_distances.png"
        fig.savefig(hist_path, dpi=_DPI)
        plt.close(fig)
        written.append(hist_path)

    return written
