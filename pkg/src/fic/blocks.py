"""Block geometry: range partition, domain enumeration, downsampling, isometries."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ISOMETRY_COUNT = 8


@dataclass
class RangeBlock:
    index: int
    x: int
    y: int
    size: int
    pixels: np.ndarray  # (size, size) uint8


@dataclass
class DomainEntry:
    index: int
    x: int
    y: int
    size: int
    stride: int
    down_pixels: np.ndarray  # (size/2, size/2) uint8, floor of 2x2 mean
    fd: float | None = field(default=None)


def partition_ranges(image: np.ndarray, range_size: int) -> list[RangeBlock]:
    """Tile the image into non-overlapping range blocks in raster order."""
    height, width = image.shape
    if range_size <= 0:
        raise ValueError("range_size must be positive")
    if height % range_size or width % range_size:
        raise ValueError(
            f"image {width}x{height} not divisible by range size {range_size}"
        )
    blocks = []
    index = 0
    for y in range(0, height, range_size):
        for x in range(0, width, range_size):
            blocks.append(
                RangeBlock(
                    index=index,
                    x=x,
                    y=y,
                    size=range_size,
                    pixels=image[y : y + range_size, x : x + range_size],
                )
            )
            index += 1
    return blocks


def domain_positions(
    image_shape: tuple[int, int], domain_size: int, stride: int
) -> tuple[np.ndarray, np.ndarray]:
    """Top-left (ys, xs) of every domain placement, raster order."""
    height, width = image_shape
    if stride < 1:
        raise ValueError("stride must be >= 1")
    if domain_size > min(width, height):
        raise ValueError(
            f"domain size {domain_size} exceeds image {width}x{height}"
        )
    ys = np.arange(0, height - domain_size + 1, stride)
    xs = np.arange(0, width - domain_size + 1, stride)
    grid_y, grid_x = np.meshgrid(ys, xs, indexing="ij")
    return grid_y.ravel(), grid_x.ravel()


def downsample2(block: np.ndarray) -> np.ndarray:
    """2x2 arithmetic mean with floor; preserves integer pixel type."""
    h, w = block.shape[-2:]
    if h % 2 or w % 2:
        raise ValueError("block sides must be even for 2x2 downsampling")
    grouped = block.reshape(*block.shape[:-2], h // 2, 2, w // 2, 2)
    sums = grouped.astype(np.uint32).sum(axis=(-3, -1))
    return (sums // 4).astype(block.dtype)


def downsample2_mean(block: np.ndarray) -> np.ndarray:
    """Exact (float) 2x2 mean, used on the decoder's float working image."""
    h, w = block.shape[-2:]
    grouped = block.reshape(*block.shape[:-2], h // 2, 2, w // 2, 2)
    return grouped.mean(axis=(-3, -1))


def enumerate_domains(
    image: np.ndarray, domain_size: int, stride: int
) -> list[DomainEntry]:
    """Enumerate overlapping domain blocks with downsampled pixels, fd unset."""
    ys, xs = domain_positions(image.shape, domain_size, stride)
    entries = []
    for index, (y, x) in enumerate(zip(ys.tolist(), xs.tolist())):
        window = image[y : y + domain_size, x : x + domain_size]
        entries.append(
            DomainEntry(
                index=index,
                x=x,
                y=y,
                size=domain_size,
                stride=stride,
                down_pixels=downsample2(window),
            )
        )
    return entries


def apply_isometry(block: np.ndarray, isometry: int) -> np.ndarray:
    """Apply one of the 8 dihedral symmetries to a square block.

    0 identity; 1-3 rotations by 90/180/270 degrees clockwise;
    4 horizontal flip; 5-7 flip followed by the rotations.
    """
    if not 0 <= isometry <= 7:
        raise ValueError(f"isometry {isometry} out of range [0, 7]")
    if block.shape[-2] != block.shape[-1]:
        raise ValueError("isometries are defined on square blocks")
    out = np.fliplr(block) if isometry >= 4 else block
    return np.rot90(out, k=-(isometry % 4))


def inverse_isometry(isometry: int) -> int:
    """Index j such that applying j after `isometry` restores the block."""
    if not 0 <= isometry <= 7:
        raise ValueError(f"isometry {isometry} out of range [0, 7]")
    if isometry < 4:
        return (4 - isometry) % 4
    return isometry  # every flip-composed element is an involution


def isometry_permutations(size: int) -> np.ndarray:
    """(8, size*size) gather indices: flat[perm[i]] == apply_isometry(block, i).ravel()."""
    idx = np.arange(size * size).reshape(size, size)
    return np.stack([apply_isometry(idx, i).ravel() for i in range(ISOMETRY_COUNT)])


# --- vectorized views used by the encoder hot path ---


def range_stack(image: np.ndarray, range_size: int) -> np.ndarray:
    """(n_ranges, size, size) stack of range blocks in raster order."""
    height, width = image.shape
    if height % range_size or width % range_size:
        raise ValueError(
            f"image {width}x{height} not divisible by range size {range_size}"
        )
    tiles = image.reshape(
        height // range_size, range_size, width // range_size, range_size
    )
    return tiles.swapaxes(1, 2).reshape(-1, range_size, range_size)


def domain_stack(image: np.ndarray, domain_size: int, stride: int) -> np.ndarray:
    """(n_domains, size, size) stack of original-size domain windows."""
    domain_positions(image.shape, domain_size, stride)  # validate geometry
    windows = np.lib.stride_tricks.sliding_window_view(
        image, (domain_size, domain_size)
    )[::stride, ::stride]
    return np.ascontiguousarray(windows.reshape(-1, domain_size, domain_size))
