"""Render comparison figures from a benchmark CSV."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def read_rows(csv_path) -> list[dict]:
    with open(csv_path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"no data rows in {csv_path}")
    return rows


def _by_image(rows):
    images = sorted({row["image_name"] for row in rows})
    strategies = sorted(
        {row["strategy"] for row in rows},
        key=lambda s: int(next(r["strategy_id"] for r in rows if r["strategy"] == s)),
    )
    return images, strategies


def _lookup(rows, image, strategy, column):
    for row in rows:
        if row["image_name"] == image and row["strategy"] == strategy:
            value = row[column]
            return float(value) if value else np.nan
    return np.nan


def render_report(csv_path, out_dir) -> list[Path]:
    """Write encode-time, pool-fraction, and quality figures next to the CSV data."""
    rows = read_rows(csv_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    images, strategies = _by_image(rows)
    paths = []

    fig, ax = plt.subplots(figsize=(1.8 + 1.1 * len(images), 4.2))
    width = 0.8 / len(strategies)
    xs = np.arange(len(images))
    for k, strategy in enumerate(strategies):
        times = [_lookup(rows, img, strategy, "encode_seconds") for img in images]
        ax.bar(xs + k * width, times, width, label=strategy)
    ax.set_yscale("log")
    ax.set_xticks(xs + 0.4 - width / 2, images, rotation=30, ha="right")
    ax.set_ylabel("encode seconds (log)")
    ax.set_title("Encoding time by strategy")
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = out / "encode_times.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    paths.append(path)

    fig, ax = plt.subplots(figsize=(1.8 + 1.1 * len(images), 4.2))
    for k, strategy in enumerate(strategies):
        fractions = []
        for img in images:
            pool = _lookup(rows, img, strategy, "mean_pool_size")
            total = _lookup(rows, img, strategy, "domain_count")
            fractions.append(pool / total if total else np.nan)
        ax.bar(xs + k * width, fractions, width, label=strategy)
    ax.axhline(1 / 3, color="gray", linestyle="--", linewidth=1, label="1/3 target")
    ax.axhline(0.5, color="red", linestyle=":", linewidth=1, label="1/2 ceiling")
    ax.set_xticks(xs + 0.4 - width / 2, images, rotation=30, ha="right")
    ax.set_ylabel("mean pool / domain count")
    ax.set_title("Candidate pool fraction by strategy")
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = out / "pool_fractions.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    paths.append(path)

    fig, ax = plt.subplots(figsize=(6, 4.5))
    markers = "os^Dv<>P"
    for k, strategy in enumerate(strategies):
        ts = [_lookup(rows, img, strategy, "encode_seconds") for img in images]
        qs = [_lookup(rows, img, strategy, "psnr_db") for img in images]
        ax.scatter(ts, qs, label=strategy, marker=markers[k % len(markers)])
    ax.set_xscale("log")
    ax.set_xlabel("encode seconds (log)")
    ax.set_ylabel("PSNR (dB)")
    ax.set_title("Quality against encoding time")
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = out / "psnr_vs_time.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    paths.append(path)

    return paths
