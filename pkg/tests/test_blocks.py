"""Block geometry tests: partitions, domains, downsampling, isometries."""

import numpy as np
import pytest

from fic import blocks


def _random_image(shape, seed=0):
    return np.random.default_rng(seed).integers(0, 256, shape, dtype=np.uint8)


def test_partition_ranges_raster_order():
    image = _random_image((32, 48))
    ranges = blocks.partition_ranges(image, 8)
    assert len(ranges) == (32 // 8) * (48 // 8)
    assert [r.index for r in ranges] == list(range(len(ranges)))
    # first block sits at the origin, second advances along x
    assert (ranges[0].y, ranges[0].x) == (0, 0)
    assert (ranges[1].y, ranges[1].x) == (0, 8)
    assert (ranges[6].y, ranges[6].x) == (8, 0)
    for r in ranges:
        assert np.array_equal(r.pixels, image[r.y : r.y + 8, r.x : r.x + 8])


def test_partition_ranges_requires_divisible_sides():
    with pytest.raises(ValueError, match="not divisible"):
        blocks.partition_ranges(_random_image((33, 32)), 8)
    with pytest.raises(ValueError, match="positive"):
        blocks.partition_ranges(_random_image((32, 32)), 0)


@pytest.mark.parametrize("stride", [1, 2, 4, 7])
def test_domain_positions_counts_and_order(stride):
    shape = (64, 48)
    ys, xs = blocks.domain_positions(shape, 16, stride)
    per_y = (64 - 16) // stride + 1
    per_x = (48 - 16) // stride + 1
    assert len(ys) == len(xs) == per_y * per_x
    assert ys[0] == xs[0] == 0
    # raster order: x varies fastest
    assert xs[1] == stride and ys[1] == 0


def test_domain_positions_rejects_oversized_domain():
    with pytest.raises(ValueError, match="exceeds"):
        blocks.domain_positions((8, 8), 16, 1)
    with pytest.raises(ValueError, match="stride"):
        blocks.domain_positions((32, 32), 16, 0)


def test_downsample2_floor_mean():
    block = np.array([[0, 1], [2, 3]], dtype=np.uint8)
    assert blocks.downsample2(block)[0, 0] == 1  # (0+1+2+3)//4

    big = _random_image((16, 16), seed=3)
    down = blocks.downsample2(big)
    expected = np.floor(
        big.reshape(8, 2, 8, 2).astype(np.float64).mean(axis=(1, 3))
    ).astype(np.uint8)
    assert np.array_equal(down, expected)
    assert down.dtype == big.dtype


def test_downsample2_rejects_odd_sides():
    with pytest.raises(ValueError, match="even"):
        blocks.downsample2(np.zeros((3, 4), dtype=np.uint8))


def test_downsample2_mean_is_exact_float():
    block = np.array([[0, 1], [2, 3]], dtype=np.float64)
    assert blocks.downsample2_mean(block)[0, 0] == 1.5


def test_enumerate_domains_matches_stack():
    image = _random_image((40, 40), seed=1)
    entries = blocks.enumerate_domains(image, 16, 4)
    stack = blocks.domain_stack(image, 16, 4)
    assert len(entries) == stack.shape[0]
    for entry in entries[:: max(1, len(entries) // 9)]:
        window = image[entry.y : entry.y + 16, entry.x : entry.x + 16]
        assert np.array_equal(stack[entry.index], window)
        assert np.array_equal(entry.down_pixels, blocks.downsample2(window))
        assert entry.fd is None


def test_apply_isometry_distinct_and_invertible():
    block = np.arange(16, dtype=np.uint8).reshape(4, 4)
    variants = [blocks.apply_isometry(block, i).tobytes() for i in range(8)]
    assert len(set(variants)) == 8
    for iso in range(8):
        inv = blocks.inverse_isometry(iso)
        restored = blocks.apply_isometry(blocks.apply_isometry(block, iso), inv)
        assert np.array_equal(restored, block)


def test_apply_isometry_rotation_direction():
    block = np.array([[1, 2], [3, 4]], dtype=np.uint8)
    # one clockwise quarter turn: top row becomes right column
    assert np.array_equal(
        blocks.apply_isometry(block, 1), np.array([[3, 1], [4, 2]], np.uint8)
    )
    assert np.array_equal(
        blocks.apply_isometry(block, 4), np.array([[2, 1], [4, 3]], np.uint8)
    )


def test_apply_isometry_validation():
    with pytest.raises(ValueError, match="out of range"):
        blocks.apply_isometry(np.zeros((2, 2), np.uint8), 8)
    with pytest.raises(ValueError, match="square"):
        blocks.apply_isometry(np.zeros((2, 3), np.uint8), 1)


def test_isometry_permutations_match_apply():
    block = _random_image((8, 8), seed=5)
    flat = block.ravel()
    perms = blocks.isometry_permutations(8)
    for iso in range(8):
        assert np.array_equal(flat[perms[iso]], blocks.apply_isometry(block, iso).ravel())


def test_downsample_commutes_with_isometry():
    # the encoder relies on downsample(iso(domain)) == iso(downsample(domain))
    block = _random_image((16, 16), seed=8)
    for iso in range(8):
        a = blocks.downsample2(blocks.apply_isometry(block, iso))
        b = blocks.apply_isometry(blocks.downsample2(block), iso)
        assert np.array_equal(a, b)


def test_range_stack_matches_partition():
    image = _random_image((32, 32), seed=2)
    stack = blocks.range_stack(image, 8)
    ranges = blocks.partition_ranges(image, 8)
    assert stack.shape == (16, 8, 8)
    for r in ranges:
        assert np.array_equal(stack[r.index], r.pixels)


@pytest.mark.parametrize("stride", [1, 3, 4])
def test_domain_stack_matches_naive_slices(stride):
    image = _random_image((24, 32), seed=4)
    stack = blocks.domain_stack(image, 16, stride)
    ys, xs = blocks.domain_positions(image.shape, 16, stride)
    assert stack.shape[0] == len(ys)
    for i, (y, x) in enumerate(zip(ys, xs)):
        assert np.array_equal(stack[i], image[y : y + 16, x : x + 16])
