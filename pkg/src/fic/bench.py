"""Benchmark harness: corpus preparation, strategy comparison runs, CSV output."""

from __future__ import annotations

import csv
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import codec
from .blocks import downsample2
from .image import fidelity, load_pgm, save_pgm

CSV_COLUMNS = [
    "image_name",
    "image_size",
    "range_size",
    "domain_size",
    "stride",
    "isometries",
    "strategy",
    "strategy_id",
    "encode_seconds",
    "fd_overhead_seconds",
    "comparisons",
    "mean_pool_size",
    "domain_count",
    "compressed_bytes",
    "pre_rms_mean",
    "post_rms_mean",
    "psnr_db",
    "decode_iterations",
]

TIMING_COLUMNS = ("encode_seconds", "fd_overhead_seconds")


@dataclass
class RunRecord:
    image_name: str
    image_size: int
    range_size: int
    domain_size: int
    stride: int
    isometries: bool
    strategy: str
    strategy_id: int
    encode_seconds: float
    fd_overhead_seconds: float
    comparisons: int
    mean_pool_size: float
    domain_count: int
    compressed_bytes: int
    pre_rms_mean: float
    post_rms_mean: float
    psnr_db: float | None  # None when no decode was performed
    decode_iterations: int | None

    def to_row(self) -> list[str]:
        return [
            self.image_name,
            str(self.image_size),
            str(self.range_size),
            str(self.domain_size),
            str(self.stride),
            str(int(self.isometries)),
            self.strategy,
            str(self.strategy_id),
            f"{self.encode_seconds:.6f}",
            f"{self.fd_overhead_seconds:.6f}",
            str(self.comparisons),
            f"{self.mean_pool_size:.4f}",
            str(self.domain_count),
            str(self.compressed_bytes),
            f"{self.pre_rms_mean:.6f}",
            f"{self.post_rms_mean:.6f}",
            "" if self.psnr_db is None else f"{self.psnr_db:.4f}",
            "" if self.decode_iterations is None else str(self.decode_iterations),
        ]


def write_csv(records: list[RunRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for rec in records:
            writer.writerow(rec.to_row())


def count_table(
    sizes=(64, 128, 256, 512, 1024),
    range_size: int = 8,
    domain_size: int = 16,
    stride: int = 1,
) -> list[dict]:
    """Closed-form range/domain/comparison counts per image size.

    Computed analytically so the largest sizes never have to be executed.
    """
    rows = []
    for size in sizes:
        ranges = (size // range_size) ** 2
        per_axis = (size - domain_size) // stride + 1
        domains = per_axis**2
        rows.append(
            {
                "image_size": size,
                "range_count": ranges,
                "domain_count": domains,
                "comparisons": ranges * domains,
            }
        )
    return rows


# --- corpus -----------------------------------------------------------------


def synth_quadnoise(size: int = 256, seed: int = 0) -> np.ndarray:
    """Four quadrants of mid-gray noise with increasing amplitude."""
    rng = np.random.default_rng([seed, 1])
    img = np.empty((size, size), dtype=np.float64)
    half = size // 2
    corners = [(0, 0), (0, half), (half, 0), (half, half)]
    for amp, (y, x) in zip((6, 40, 90, 200), corners):
        img[y : y + half, x : x + half] = 128 + rng.uniform(
            -amp / 2, amp / 2, (half, half)
        )
    return np.clip(img, 0, 255).astype(np.uint8)


def synth_collage(size: int = 256, seed: int = 0) -> np.ndarray:
    """Vertical thirds: near-flat, moderate noise, full-range noise."""
    rng = np.random.default_rng([seed, 2])
    img = np.empty((size, size), dtype=np.float64)
    third = size // 3
    img[:, :third] = 128 + rng.normal(0, 2, (size, third))
    img[:, third : 2 * third] = 128 + rng.uniform(-24, 24, (size, third))
    img[:, 2 * third :] = rng.uniform(0, 255, (size, size - 2 * third))
    return np.clip(img, 0, 255).astype(np.uint8)


def synth_plasma(size: int = 256, seed: int = 0, roughness: float = 0.55) -> np.ndarray:
    """Midpoint-displacement style texture via repeated upsample-plus-noise."""
    rng = np.random.default_rng([seed, 3])
    img = rng.normal(0, 1, (2, 2))
    amp = 1.0
    while img.shape[0] < size:
        img = np.kron(img, np.ones((2, 2)))
        amp *= roughness
        img = img + rng.normal(0, amp, img.shape)
    img = img[:size, :size]
    img = (img - img.min()) / (img.max() - img.min() + 1e-12)
    return np.rint(img * 255).astype(np.uint8)


def synthetic_corpus(size: int = 256, seed: int = 0) -> dict[str, np.ndarray]:
    return {
        "quadnoise": synth_quadnoise(size, seed),
        "collage": synth_collage(size, seed),
        "plasma": synth_plasma(size, seed),
    }


def standard_corpus(size: int = 256) -> dict[str, np.ndarray]:
    """Classic public test images at 256x256, via scikit-image's bundled data.

    Returns an empty dict (with a stderr note) when scikit-image is missing.
    """
    try:
        from skimage import data as skdata
    except ImportError:
        print(
            "note: scikit-image not installed; standard test images skipped",
            file=sys.stderr,
        )
        return {}
    if size != 256:
        raise ValueError("standard corpus preparation is defined for 256x256")
    from skimage.color import rgb2gray

    astro = np.rint(rgb2gray(skdata.astronaut()) * 255.0).astype(np.uint8)
    images = {
        "camera": downsample2(skdata.camera()),  # 512 -> 256
        "portrait": astro[30:286, 150:406],  # face region of the astronaut
        "cell": np.asarray(skdata.cell())[100:356, 100:356],
        "grass": downsample2(np.asarray(skdata.grass())),
        "moon": np.asarray(skdata.moon())[128:384, 128:384],
    }
    return {name: np.ascontiguousarray(img) for name, img in images.items()}


def default_corpus(seed: int = 0, size: int = 256) -> dict[str, np.ndarray]:
    corpus = dict(standard_corpus(size))
    corpus.update(synthetic_corpus(size, seed))
    return corpus


def load_corpus_dir(path, log=print) -> dict[str, np.ndarray]:
    """Load every .pgm in a directory; unreadable files are logged and skipped."""
    corpus = {}
    for pgm in sorted(Path(path).glob("*.pgm")):
        try:
            corpus[pgm.stem] = load_pgm(pgm)
        except (OSError, ValueError) as exc:
            log(f"skip {pgm.name}: {exc}")
    return corpus


# --- benchmark driver --------------------------------------------------------


def run_single(
    name: str,
    image: np.ndarray,
    strategy: str,
    *,
    range_size: int = 8,
    domain_size: int = 16,
    stride: int = 4,
    isometries: bool = False,
    iterations: int = 10,
    workers: int = 1,
    decode_output: bool = True,
):
    """Encode one image with one strategy; optionally decode and score it.

    Returns (RunRecord, FractalCode, reconstruction or None).
    """
    code, stats = codec.encode(
        image,
        strategy,
        range_size=range_size,
        domain_size=domain_size,
        stride=stride,
        isometries=isometries,
        workers=workers,
    )
    blob = codec.serialize(code)
    n_domain_axis = (image.shape[0] - domain_size) // stride + 1
    recon = None
    psnr = None
    if decode_output:
        recon = codec.decode(code, iterations=iterations)
        psnr = fidelity(image, recon).psnr
    record = RunRecord(
        image_name=name,
        image_size=image.shape[0],
        range_size=range_size,
        domain_size=domain_size,
        stride=stride,
        isometries=isometries,
        strategy=strategy,
        strategy_id=stats.strategy_id,
        encode_seconds=stats.wall_time,
        fd_overhead_seconds=stats.fd_overhead_time,
        comparisons=stats.comparisons,
        mean_pool_size=stats.mean_pool_size,
        domain_count=n_domain_axis * ((image.shape[1] - domain_size) // stride + 1),
        compressed_bytes=len(blob),
        pre_rms_mean=float(stats.pre_rms.mean()),
        post_rms_mean=float(stats.post_rms.mean()),
        psnr_db=psnr,
        decode_iterations=iterations if decode_output else None,
    )
    return record, code, recon


def run_bench(
    images,
    strategies=codec.STRATEGIES,
    *,
    range_size: int = 8,
    domain_size: int = 16,
    stride: int = 4,
    isometries: bool = False,
    iterations: int = 10,
    csv_path=None,
    out_dir=None,
    max_exhaustive_size: int = 512,
    parallel: int = 1,
    log=print,
) -> list[RunRecord]:
    """Run every (image, strategy) pair; failures are logged and skipped.

    Serial by default so timings stay honest; `parallel` > 1 runs pairs
    concurrently but makes the timing columns unreliable.
    """
    if isinstance(images, dict):
        images = list(images.items())
    tasks = []
    for name, img in images:
        for strategy in strategies:
            if strategy == "exhaustive" and max(img.shape) > max_exhaustive_size:
                log(
                    f"skip {name}/exhaustive: {img.shape[1]}x{img.shape[0]} "
                    f"exceeds the {max_exhaustive_size} exhaustive cap"
                )
                continue
            tasks.append((name, img, strategy))

    def run_task(task):
        name, img, strategy = task
        try:
            record, _code, recon = run_single(
                name,
                img,
                strategy,
                range_size=range_size,
                domain_size=domain_size,
                stride=stride,
                isometries=isometries,
                iterations=iterations,
            )
        except Exception as exc:  # per-pair skip semantics
            log(f"skip {name}/{strategy}: {exc}")
            return None
        if out_dir is not None:
            save_pgm(recon, Path(out_dir) / f"{name}_{strategy}.pgm")
        log(
            f"{name:>12s} {strategy:<10s} {record.encode_seconds:8.3f}s "
            f"pool {record.mean_pool_size:9.1f} "
            f"psnr {record.psnr_db:7.2f} dB"
        )
        return record

    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
    if parallel > 1:
        log(
            "warning: parallel corpus processing enabled; timing columns "
            "are unreliable"
        )
        with ThreadPoolExecutor(max_workers=parallel) as pool:
            results = list(pool.map(run_task, tasks))
    else:
        results = [run_task(task) for task in tasks]
    records = [rec for rec in results if rec is not None]
    if csv_path is not None:
        write_csv(records, csv_path)
    return records
