"""Codec tests: fits, quantizer, strategies, serialization, decoding."""

import math
import struct

import numpy as np
import pytest

from fic import blocks, codec, fdim
from fic.avltree import AvlTree
from fic.image import fidelity


def _random_image(shape, seed=0):
    return np.random.default_rng(seed).integers(0, 256, shape, dtype=np.uint8)


# --- fit_transform -----------------------------------------------------------


def test_fit_clamps_steep_slope():
    # unconstrained least squares wants s = 2 here; the clamp pins it at 1
    s, o, rms = codec.fit_transform([1, 3, 5, 7], [0, 1, 2, 3])
    assert s == 1.0
    assert o == pytest.approx(2.5)
    assert rms == pytest.approx(math.sqrt(1.25))


def test_fit_exact_affine_relation():
    d = np.linspace(10, 200, 64)
    r = 0.5 * d + 10.0
    s, o, rms = codec.fit_transform(r, d)
    assert s == pytest.approx(0.5, abs=1e-12)
    assert o == pytest.approx(10.0, abs=1e-9)
    assert rms < 1e-9


def test_fit_constant_domain_uses_mean_offset():
    s, o, rms = codec.fit_transform([10, 20, 30, 40], [7, 7, 7, 7])
    assert s == 0.0
    assert o == pytest.approx(25.0)
    assert rms == pytest.approx(math.sqrt(125.0))


def test_fit_validates_shapes():
    with pytest.raises(ValueError, match="match"):
        codec.fit_transform([1, 2, 3], [1, 2])
    with pytest.raises(ValueError, match="match"):
        codec.fit_transform([], [])


def test_fit_offset_can_leave_byte_range():
    # with s clamped at -1 the offset compensates beyond 255
    d = np.array([200.0, 220.0])
    r = np.array([100.0, 0.0])
    s, o, _ = codec.fit_transform(r, d)
    assert s == -1.0
    assert o == pytest.approx(260.0)


# --- quantizer ---------------------------------------------------------------


def test_quantizer_endpoints_exact():
    assert codec.quantize_so(-1.0, -255.0) == (0, 0)
    assert codec.quantize_so(1.0, 255.0) == (31, 127)
    assert codec.dequantize_so(0, 0) == (-1.0, -255.0)
    assert codec.dequantize_so(31, 127) == (1.0, 255.0)


def test_quantizer_round_trip_error_bounds():
    rng = np.random.default_rng(6)
    for _ in range(500):
        s = rng.uniform(-1.0, 1.0)
        o = rng.uniform(-255.0, 255.0)
        s_q, o_q = codec.quantize_so(s, o)
        assert 0 <= s_q <= 31 and 0 <= o_q <= 127
        s_hat, o_hat = codec.dequantize_so(s_q, o_q)
        assert abs(s_hat - s) <= 1.0 / 31.0 + 1e-12
        assert abs(o_hat - o) <= 255.0 / 127.0 + 1e-12


def test_quantizer_has_no_exact_zero_scale():
    # 32 even levels over [-1, 1] straddle zero; s = 0 maps to 1/31
    s_q, _ = codec.quantize_so(0.0, 0.0)
    s_hat, o_hat = codec.dequantize_so(s_q, 0)
    assert s_hat == pytest.approx(1.0 / 31.0)
    assert s_hat != 0.0


def test_quantizer_validates_inputs():
    with pytest.raises(ValueError):
        codec.quantize_so(1.5, 0.0)
    with pytest.raises(ValueError):
        codec.quantize_so(0.0, 300.0)
    with pytest.raises(ValueError):
        codec.dequantize_so(32, 0)
    with pytest.raises(ValueError):
        codec.dequantize_so(0, 128)


# --- encode ------------------------------------------------------------------


def test_encode_validations():
    image = _random_image((64, 64))
    with pytest.raises(ValueError, match="uint8"):
        codec.encode(image.astype(np.float32), "exhaustive")
    with pytest.raises(ValueError, match="unknown strategy"):
        codec.encode(image, "bogus")
    with pytest.raises(ValueError, match="twice"):
        codec.encode(image, "exhaustive", range_size=8, domain_size=24)


def test_exhaustive_comparisons_match_closed_form():
    image = _random_image((64, 64), seed=1)
    _, stats = codec.encode(image, "exhaustive", stride=1)
    assert stats.comparisons == 64 * 49 * 49  # Table row: 153664
    _, stats4 = codec.encode(image, "exhaustive", stride=4)
    assert stats4.comparisons == 64 * 13 * 13
    _, stats_iso = codec.encode(image, "exhaustive", stride=4, isometries=True)
    assert stats_iso.comparisons == 64 * 13 * 13 * 8
    assert stats4.mean_pool_size == 13 * 13


def test_nosearch_single_candidate_per_range():
    image = _random_image((64, 64), seed=2)
    code, stats = codec.encode(image, "nosearch", stride=4)
    assert stats.comparisons == 64
    assert stats.mean_pool_size == 1.0

    # oracle: per range, the domain whose center is nearest the range center,
    # ties resolved toward the lower domain index
    ys, xs = blocks.domain_positions(image.shape, 16, 4)
    centers = np.stack([ys + 8.0, xs + 8.0], axis=1)
    ranges = blocks.partition_ranges(image, 8)
    for r in ranges:
        target = np.array([r.y + 4.0, r.x + 4.0])
        d2 = ((centers - target) ** 2).sum(axis=1)
        best = int(np.flatnonzero(d2 == d2.min()).min())
        assert int(code.records["domain"][r.index]) == best


def test_selection_minimizes_quantized_error():
    # brute-force oracle over one small image, identity isometry
    image = _random_image((24, 24), seed=3)
    code, stats = codec.encode(image, "exhaustive", stride=2)
    d_stack = blocks.downsample2(blocks.domain_stack(image, 16, 2))
    r_stack = blocks.range_stack(image, 8)
    for r_idx in range(r_stack.shape[0]):
        r = r_stack[r_idx].astype(np.float64).ravel()
        best = (math.inf, -1)
        for d_idx in range(d_stack.shape[0]):
            d = d_stack[d_idx].astype(np.float64).ravel()
            s, o, _ = codec.fit_transform(r, d)
            s_q, o_q = codec.quantize_so(s, min(255.0, max(-255.0, o)))
            s_hat, o_hat = codec.dequantize_so(s_q, o_q)
            err = float(np.sum((s_hat * d + o_hat - r) ** 2))
            if err < best[0]:
                best = (err, d_idx)
        assert int(code.records["domain"][r_idx]) == best[1]
        assert stats.post_rms[r_idx] == pytest.approx(
            math.sqrt(best[0] / 64.0), abs=1e-9
        )


def test_static2_searches_matching_half():
    image = _random_image((96, 96), seed=4)
    code, _ = codec.encode(image, "static2", stride=4)
    d_stack = blocks.domain_stack(image, 16, 4)
    fd_dom = fdim.dbc_grid(d_stack)
    fd_rng = fdim.dbc_grid(blocks.range_stack(image, 8))
    stats = fdim.fd_stats(fd_dom)
    midpoint = (stats.f_min + stats.f_max) / 2.0
    below = fd_dom < midpoint
    for r_idx, chosen in enumerate(code.records["domain"]):
        side_has_domains = (
            below.any() if fd_rng[r_idx] < midpoint else (~below).any()
        )
        if side_has_domains:
            assert (fd_dom[chosen] < midpoint) == (fd_rng[r_idx] < midpoint)


def test_dynamic_pool_respects_window():
    image = _random_image((96, 96), seed=5)
    code, stats = codec.encode(image, "dynamic_fd", stride=4)
    d_stack = blocks.domain_stack(image, 16, 4)
    fd_dom = fdim.dbc_grid(d_stack)
    fd_rng = fdim.dbc_grid(blocks.range_stack(image, 8))
    d_f = fdim.fd_stats(fd_dom).d_f
    for r_idx, chosen in enumerate(code.records["domain"]):
        lo = fd_rng[r_idx] - d_f
        hi = fd_rng[r_idx] + d_f
        window = (fd_dom >= lo) & (fd_dom <= hi)
        if window.any():
            assert lo <= fd_dom[chosen] <= hi
            assert stats.pool_sizes[r_idx] == int(window.sum())
        else:
            # fallback: nearest key, ties toward the smaller domain index
            dist = np.abs(fd_dom - fd_rng[r_idx])
            nearest = np.flatnonzero(dist == dist.min())
            assert chosen == nearest.min()
            assert stats.pool_sizes[r_idx] == 1


def test_dynamic_pool_sizes_match_avl_queries():
    image = _random_image((64, 64), seed=6)
    _, stats = codec.encode(image, "dynamic_fd", stride=4)
    d_stack = blocks.domain_stack(image, 16, 4)
    fd_dom = fdim.dbc_grid(d_stack)
    fd_rng = fdim.dbc_grid(blocks.range_stack(image, 8))
    d_f = fdim.fd_stats(fd_dom).d_f
    tree = AvlTree.from_keys(fd_dom)
    for r_idx in range(len(fd_rng)):
        pool = tree.range_query(fd_rng[r_idx] - d_f, fd_rng[r_idx] + d_f)
        if pool:
            assert stats.pool_sizes[r_idx] == len(pool)


def test_isometry_candidates_never_hurt():
    image = _random_image((64, 64), seed=7)
    _, plain = codec.encode(image, "exhaustive", stride=4)
    _, iso = codec.encode(image, "exhaustive", stride=4, isometries=True)
    # identity isometry is evaluated with identical arithmetic, so the
    # 8-way search dominates per range, exactly
    assert np.all(iso.post_rms <= plain.post_rms)
    assert iso.post_rms.mean() < plain.post_rms.mean()


def test_isometry_encode_decode_round_trip():
    rng = np.random.default_rng(8)
    smooth = rng.integers(0, 256, (8, 8)).astype(np.float64)
    smooth = np.kron(smooth, np.ones((8, 8)))  # 64x64 blocky gradient field
    image = np.clip(smooth + rng.normal(0, 3, smooth.shape), 0, 255).astype(np.uint8)
    code, _ = codec.encode(image, "exhaustive", stride=2, isometries=True)
    assert code.isometries
    assert set(np.unique(code.records["isometry"])) <= set(range(8))
    recon = codec.decode(code, iterations=12)
    assert fidelity(image, recon).psnr > 25.0


def test_workers_do_not_change_output():
    image = _random_image((96, 96), seed=9)
    for strategy in codec.STRATEGIES:
        serial, _ = codec.encode(image, strategy, stride=4)
        threaded, _ = codec.encode(image, strategy, stride=4, workers=3)
        assert serial == threaded


# --- serialization -----------------------------------------------------------


def test_serialize_layout_and_length():
    image = _random_image((64, 64), seed=10)
    code, _ = codec.encode(image, "dynamic_fd", stride=4)
    blob = codec.serialize(code)
    assert len(blob) == 18 + 7 * code.n_ranges
    magic, version, strategy_id, width, height, range_size, domain_size, stride, flags, count = struct.unpack(
        "<4sBBHHBBBBI", blob[:18]
    )
    assert magic == b"FIC1"
    assert version == 1
    assert strategy_id == codec.STRATEGY_IDS["dynamic_fd"]
    assert (width, height) == (64, 64)
    assert (range_size, domain_size, stride) == (8, 16, 4)
    assert flags == 0
    assert count == 64


def test_serialize_round_trip_identity():
    image = _random_image((64, 64), seed=11)
    for strategy in codec.STRATEGIES:
        code, _ = codec.encode(image, strategy, stride=4, isometries=True)
        clone = codec.deserialize(codec.serialize(code))
        assert clone == code
        assert clone.isometries


@pytest.mark.parametrize(
    "mutate, message",
    [
        (lambda b: b[:10], "shorter than the fixed header"),
        (lambda b: b"XXXX" + b[4:], "magic"),
        (lambda b: b[:4] + bytes([9]) + b[5:], "version"),
        (lambda b: b[:-3], "fewer record bytes"),
        (lambda b: b + b"\x00", "trailing"),
    ],
)
def test_deserialize_rejects_malformed(mutate, message):
    image = _random_image((32, 32), seed=12)
    code, _ = codec.encode(image, "nosearch", stride=4)
    blob = codec.serialize(code)
    with pytest.raises(codec.FormatError, match=message):
        codec.deserialize(mutate(blob))


def test_deserialize_rejects_inconsistent_geometry():
    blob = struct.pack("<4sBBHHBBBBI", b"FIC1", 1, 0, 64, 64, 8, 16, 4, 0, 3)
    blob += bytes(7 * 3)
    with pytest.raises(codec.FormatError, match="record-count"):
        codec.deserialize(blob)


# --- decode ------------------------------------------------------------------


def test_decode_requires_valid_domain_indices():
    image = _random_image((32, 32), seed=13)
    code, _ = codec.encode(image, "exhaustive", stride=4)
    code.records["domain"][0] = 10_000
    with pytest.raises(ValueError, match="geometry"):
        codec.decode(code)


def test_decode_converges_to_stable_reconstruction():
    image = _random_image((64, 64), seed=14)
    code, _ = codec.encode(image, "exhaustive", stride=4)
    iterates = list(codec.decode_iterates(code, iterations=15))
    # successive-iterate RMS drops below one intensity unit within 15 passes
    tail_rms = fidelity(iterates[-2], iterates[-1]).rms
    assert tail_rms < 1.0
    # and the attractor no longer depends on the starting image
    from_black = codec.decode(code, iterations=15, initial=0)
    assert np.array_equal(iterates[-1], from_black) or (
        np.abs(iterates[-1].astype(int) - from_black.astype(int)).max() <= 1
    )


def test_decode_near_uniform_fixed_point():
    # flat inputs round-trip to a flat attractor; the offset quantizer has no
    # exact 128 level, so the constant settles a few levels away
    image = np.full((32, 32), 128, dtype=np.uint8)
    code, _ = codec.encode(image, "nosearch", stride=4)
    recon = codec.decode(code, iterations=10)
    assert recon.std() == 0.0
    assert abs(int(recon[0, 0]) - 128) <= 4


def test_decode_iterations_validation():
    image = _random_image((32, 32), seed=15)
    code, _ = codec.encode(image, "nosearch", stride=4)
    with pytest.raises(ValueError, match="iterations"):
        codec.decode(code, iterations=0)
    with pytest.raises(ValueError, match="initial"):
        codec.decode(code, initial=np.zeros((16, 16), dtype=np.uint8))


def test_decode_quality_tracks_search_effort():
    # a structured image: exhaustive should beat the fixed-candidate baseline
    rng = np.random.default_rng(16)
    base = np.kron(rng.integers(40, 216, (8, 8)), np.ones((8, 8)))
    image = np.clip(base + rng.normal(0, 2, base.shape), 0, 255).astype(np.uint8)
    psnr = {}
    for strategy in ("nosearch", "exhaustive"):
        code, _ = codec.encode(image, strategy, stride=1)
        psnr[strategy] = fidelity(image, codec.decode(code)).psnr
    assert psnr["exhaustive"] > psnr["nosearch"]
