"""Figure and delimited-output rendering for the CLI (Agg backend only)."""

from __future__ import annotations

import csv
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
from matplotlib.colors import LinearSegmentedColormap

import numpy as np

# Two-color scheme along the thread parameter: needle end cyan, tail end red.
THREAD_CMAP = LinearSegmentedColormap.from_list("thread", ["#00b4ff", "#ff3030"])


def save_overlay(path: str | Path, gray_field: np.ndarray, sampled=None) -> Path:
    """Reconstruction overlay: fused field with parameter-colored samples."""
    h, w = gray_field.shape
    fig, ax = plt.subplots(figsize=(w / 96, h / 96), dpi=96)
    ax.imshow(gray_field, cmap="gray", vmin=0.0, vmax=1.0, interpolation="nearest")
    if sampled is not None and len(sampled) > 0:
        params = (
            sampled.params
            if sampled.params is not None
            else np.linspace(0.0, 1.0, len(sampled))
        )
        ax.scatter(
            sampled.points[:, 0],
            sampled.points[:, 1],
            c=params,
            cmap=THREAD_CMAP,
            s=6,
            linewidths=0,
        )
        ax.plot(*sampled.points[0], marker="o", mfc="none", mec="#00b4ff", ms=10)
        ax.plot(*sampled.points[-1], marker="s", mfc="none", mec="#ff3030", ms=10)
    ax.set_axis_off()
    ax.set_xlim(-0.5, w - 0.5)
    ax.set_ylim(h - 0.5, -0.5)
    fig.tight_layout(pad=0)
    out = Path(path)
    fig.savefig(out)
    plt.close(fig)
    return out


def write_per_frame_csv(path: str | Path, frames: list[dict]) -> Path:
    """Delimited per-frame results next to the aggregate JSON."""
    out = Path(path)
    fields = [
        "index",
        "seed",
        "detected",
        "psnr_db",
        "ottp_overall",
        "ottp_needle_end",
        "ottp_tail_end",
        "reconstruct_ms",
    ]
    with out.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for frame in frames:
            row = {k: frame.get(k) for k in fields}
            if row["psnr_db"] is not None and math.isinf(row["psnr_db"]):
                row["psnr_db"] = "inf"
            writer.writerow(row)
    return out


def save_eval_figures(out_dir: str | Path, frames: list[dict]) -> list[Path]:
    """OTTP histogram and per-frame chart for an evaluation run."""
    out = Path(out_dir)
    detected = [f for f in frames if f.get("ottp_overall") is not None]
    values = [f["ottp_overall"] for f in detected]
    indices = [f["index"] for f in detected]
    paths = []

    fig, ax = plt.subplots(figsize=(6, 4))
    if values:
        ax.hist(values, bins=min(30, max(5, len(values) // 4)), color="#4878cf")
    ax.set_xlabel("OTTP overall (px)")
    ax.set_ylabel("frames")
    ax.set_title("Per-frame OTTP distribution")
    fig.tight_layout()
    hist_path = out / "ottp_hist.png"
    fig.savefig(hist_path)
    plt.close(fig)
    paths.append(hist_path)

    fig, ax = plt.subplots(figsize=(8, 4))
    if values:
        ax.plot(indices, values, marker=".", linestyle="-", color="#d65f5f", lw=0.8)
    ax.set_xlabel("frame")
    ax.set_ylabel("OTTP overall (px)")
    ax.set_title("OTTP per frame")
    fig.tight_layout()
    frame_path = out / "ottp_per_frame.png"
    fig.savefig(frame_path)
    plt.close(fig)
    paths.append(frame_path)
    return paths
