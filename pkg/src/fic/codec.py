"""PIFS codec: affine fits, four search strategies, binary format, decoder."""

from __future__ import annotations

import math
import struct
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import blocks as bl
from . import fdim
from .avltree import AvlTree

STRATEGIES = ("exhaustive", "nosearch", "static2", "dynamic_fd")
STRATEGY_IDS = {name: i for i, name in enumerate(STRATEGIES)}

MAGIC = b"FIC1"
VERSION = 1
HEADER = struct.Struct("<4sBBHHBBBBI")  # magic, version, strategy, w, h, range,
# domain, stride, flags, record count
RECORD_DTYPE = np.dtype(
    [("domain", "<u4"), ("isometry", "u1"), ("s_q", "u1"), ("o_q", "u1")]
)

_S_STEPS = 31.0  # 32 levels over [-1, 1]
_O_STEPS = 127.0  # 128 levels over [-255, 255]


class FormatError(ValueError):
    """Raised when a compressed byte stream is malformed."""


@dataclass(eq=False)
class FractalCode:
    width: int
    height: int
    range_size: int
    domain_size: int
    stride: int
    strategy_id: int
    isometries: bool
    records: np.ndarray  # RECORD_DTYPE, one per range block in raster order

    @property
    def n_ranges(self) -> int:
        return (self.width // self.range_size) * (self.height // self.range_size)

    def __eq__(self, other) -> bool:
        if not isinstance(other, FractalCode):
            return NotImplemented
        return (
            (
                self.width,
                self.height,
                self.range_size,
                self.domain_size,
                self.stride,
                self.strategy_id,
                self.isometries,
            )
            == (
                other.width,
                other.height,
                other.range_size,
                other.domain_size,
                other.stride,
                other.strategy_id,
                other.isometries,
            )
            and np.array_equal(self.records, other.records)
        )


@dataclass
class EncodeStats:
    strategy_id: int
    comparisons: int
    mean_pool_size: float
    wall_time: float
    fd_overhead_time: float
    # per-range diagnostics (not part of the compressed artifact)
    pool_sizes: np.ndarray | None = field(default=None, repr=False)
    pre_rms: np.ndarray | None = field(default=None, repr=False)
    post_rms: np.ndarray | None = field(default=None, repr=False)


def fit_transform(range_pixels, domain_pixels) -> tuple[float, float, float]:
    """Least-squares (s, o) minimizing sum((s*d + o - r)^2), s clamped to [-1, 1].

    Returns (s, o, rms) with o and rms computed after the clamp.
    """
    r = np.asarray(range_pixels, dtype=np.float64).ravel()
    d = np.asarray(domain_pixels, dtype=np.float64).ravel()
    if r.shape != d.shape or r.size == 0:
        raise ValueError("range and domain pixel counts must match and be >= 1")
    n = float(r.size)
    sum_d = d.sum()
    sum_r = r.sum()
    sum_dd = float(np.einsum("i,i->", d, d))
    sum_dr = float(np.einsum("i,i->", d, r))
    den = n * sum_dd - sum_d * sum_d
    s = 0.0 if den == 0.0 else (n * sum_dr - sum_d * sum_r) / den
    s = min(1.0, max(-1.0, s))
    o = (sum_r - s * sum_d) / n
    resid = s * d + o - r
    rms = math.sqrt(float(np.einsum("i,i->", resid, resid)) / n)
    return s, o, rms


def quantize_so(s: float, o: float) -> tuple[int, int]:
    """Quantize contrast to 5 bits over [-1, 1] and brightness to 7 bits over
    [-255, 255], round-to-nearest; endpoints are exactly representable."""
    if not -1.0 <= s <= 1.0:
        raise ValueError(f"s {s} outside [-1, 1]")
    if not -255.0 <= o <= 255.0:
        raise ValueError(f"o {o} outside [-255, 255]")
    s_q = int(np.rint((s + 1.0) * (_S_STEPS / 2.0)))
    o_q = int(np.rint((o + 255.0) * (_O_STEPS / 510.0)))
    return s_q, o_q


def dequantize_so(s_q: int, o_q: int) -> tuple[float, float]:
    if not 0 <= s_q <= int(_S_STEPS):
        raise ValueError(f"s_q {s_q} outside [0, 31]")
    if not 0 <= o_q <= int(_O_STEPS):
        raise ValueError(f"o_q {o_q} outside [0, 127]")
    return s_q * (2.0 / _S_STEPS) - 1.0, o_q * (510.0 / _O_STEPS) - 255.0


class _SearchContext:
    """Immutable per-encode state shared by all range searches."""

    def __init__(self, d_matrix, iso_list, inv_perms):
        n = float(d_matrix.shape[1])
        self.d_orig = d_matrix  # (n_domains, n_pix) float64, raster order
        self.sum_d = d_matrix.sum(axis=1)
        self.sum_dd = np.einsum("ij,ij->i", d_matrix, d_matrix)
        den = n * self.sum_dd - self.sum_d * self.sum_d
        # constant-domain denominators are exactly zero; fits there use s = 0
        self.inv_den = np.divide(
            1.0, den, out=np.zeros_like(den), where=den != 0.0
        )
        self.iso_list = iso_list
        self.inv_perms = inv_perms
        # ordering used by slab queries; identity unless FD-sorted
        self.d_ord = self.d_orig
        self.sum_d_ord = self.sum_d
        self.sum_dd_ord = self.sum_dd
        self.inv_den_ord = self.inv_den
        self.ids_ord = np.arange(d_matrix.shape[0], dtype=np.int64)
        # per-range pools are slabs [lo, hi) of the ordering; single-candidate
        # pools (nosearch, empty-window fallbacks) are slabs of length one
        self.slab_lo = None
        self.slab_hi = None

    def use_order(self, order: np.ndarray) -> None:
        self.d_ord = self.d_orig[order]
        self.sum_d_ord = self.sum_d[order]
        self.sum_dd_ord = self.sum_dd[order]
        self.inv_den_ord = self.inv_den[order]
        self.ids_ord = order.astype(np.int64)


def _squared_error(s, o, sum_d, sum_dd, cross, sum_r, sum_rr, n, work, out):
    """sum((s*d + o - r)^2) expanded through the precomputed block sums."""
    np.multiply(o, sum_d, out=work)
    work -= cross
    work *= s
    work *= 2.0
    np.multiply(s, s, out=out)
    out *= sum_dd
    out += work
    np.multiply(o, o, out=work)
    work *= n
    out += work
    np.multiply(o, 2.0 * sum_r, out=work)
    out -= work
    out += sum_rr


def _search_chunk(ctx: _SearchContext, r_matrix, range_ids, out):
    """Find the best (domain, isometry, s_q, o_q) for each range in the chunk.

    Selection minimizes post-quantization squared error; ties break on the
    smallest domain index, then the smallest isometry. Pre-quantization RMS is
    tracked as the best least-squares fit over the pool (subset dominance).
    """
    n = float(r_matrix.shape[1])
    width = ctx.d_orig.shape[0]
    # reusable scratch keeps the per-range loop free of large allocations
    buf = np.empty((7, width), dtype=np.float64)
    for r_idx in range_ids:
        r_row = r_matrix[r_idx]
        sum_r = r_row.sum()
        sum_rr = float(np.einsum("i,i->", r_row, r_row))
        lo = ctx.slab_lo[r_idx]
        hi = ctx.slab_hi[r_idx]
        d_mat = ctx.d_ord[lo:hi]
        sum_d = ctx.sum_d_ord[lo:hi]
        sum_dd = ctx.sum_dd_ord[lo:hi]
        inv_den = ctx.inv_den_ord[lo:hi]
        ids = ctx.ids_ord[lo:hi]
        m = hi - lo
        cross, s, o, s_q, o_q, work, err = buf[:, :m]
        best_err = math.inf
        best_dom = -1
        best_iso = 0
        best_sq = 0
        best_oq = 0
        best_pre = math.inf
        for iso in ctx.iso_list:
            rv = r_row[ctx.inv_perms[iso]] if iso else r_row
            np.einsum("ij,j->i", d_mat, rv, out=cross)
            # least-squares s = (n*cross - sum_d*sum_r) / den, clamped
            np.multiply(sum_d, sum_r, out=work)
            np.multiply(cross, n, out=s)
            s -= work
            s *= inv_den
            np.clip(s, -1.0, 1.0, out=s)
            np.multiply(s, sum_d, out=o)
            np.subtract(sum_r, o, out=o)
            o /= n
            _squared_error(s, o, sum_d, sum_dd, cross, sum_r, sum_rr, n, work, err)
            pre_min = float(err.min())
            if pre_min < best_pre:
                best_pre = pre_min
            # quantize, then score the dequantized transform
            np.clip(o, -255.0, 255.0, out=o)
            np.add(s, 1.0, out=s_q)
            s_q *= _S_STEPS / 2.0
            np.rint(s_q, out=s_q)
            np.add(o, 255.0, out=o_q)
            o_q *= _O_STEPS / 510.0
            np.rint(o_q, out=o_q)
            np.multiply(s_q, 2.0 / _S_STEPS, out=s)
            s -= 1.0
            np.multiply(o_q, 510.0 / _O_STEPS, out=o)
            o -= 255.0
            _squared_error(s, o, sum_d, sum_dd, cross, sum_r, sum_rr, n, work, err)
            err_min = float(err.min())
            if err_min > best_err:
                continue
            masked = np.flatnonzero(err == err_min)
            pos = masked[np.argmin(ids[masked])]
            dom = int(ids[pos])
            if (
                err_min < best_err
                or dom < best_dom
                or (dom == best_dom and iso < best_iso)
            ):
                best_err = err_min
                best_dom = dom
                best_iso = iso
                best_sq = int(s_q[pos])
                best_oq = int(o_q[pos])
        out["domain"][r_idx] = best_dom
        out["isometry"][r_idx] = best_iso
        out["s_q"][r_idx] = best_sq
        out["o_q"][r_idx] = best_oq
        out["post_rms"][r_idx] = math.sqrt(max(best_err, 0.0) / n)
        out["pre_rms"][r_idx] = math.sqrt(max(best_pre, 0.0) / n)


def _nearest_fd_positions(
    keys: np.ndarray, ids: np.ndarray, values: np.ndarray
) -> np.ndarray:
    """Sorted-order position of the domain whose FD is nearest each value.

    Ties on distance, and duplicate keys, resolve to the smallest domain
    index, matching the encoder's global tie rule. Payload order within a
    key group is ascending, so a group's smallest index sits at its start.
    """
    n = len(keys)
    starts = np.flatnonzero(np.r_[True, keys[1:] != keys[:-1]])
    run_of = np.cumsum(np.r_[True, keys[1:] != keys[:-1]]) - 1
    pos = np.searchsorted(keys, values)
    left = starts[run_of[np.maximum(pos - 1, 0)]]
    right = starts[run_of[np.minimum(pos, n - 1)]]
    dist_lo = np.where(pos > 0, values - keys[np.maximum(pos - 1, 0)], np.inf)
    dist_hi = np.where(pos < n, keys[np.minimum(pos, n - 1)] - values, np.inf)
    tied = dist_lo == dist_hi
    prefer_left = dist_lo < dist_hi
    prefer_left |= tied & (ids[left] < ids[right])
    return np.where(prefer_left, left, right)


def encode(
    image: np.ndarray,
    strategy: str = "dynamic_fd",
    *,
    range_size: int = 8,
    domain_size: int = 16,
    stride: int = 1,
    isometries: bool = False,
    workers: int = 1,
    fd_source: str = "original",
) -> tuple[FractalCode, EncodeStats]:
    """Encode a grayscale image as one affine transform per range block.

    strategy:
      exhaustive  - every range compared with every domain.
      nosearch    - one fixed candidate per range, the center-nearest domain.
      static2     - domains split once at the midpoint of the FD span; each
                    range searches the half matching its own FD.
      dynamic_fd  - per-range pool from the FD index, window d_r +/- D_f with
                    D_f = (max - min)/3 over domain FDs; empty windows fall
                    back to the single nearest-FD domain.
    """
    t_start = time.perf_counter()
    image = np.asarray(image)
    if image.ndim != 2 or image.dtype != np.uint8:
        raise ValueError("image must be a 2-D uint8 array")
    if strategy not in STRATEGY_IDS:
        raise ValueError(f"unknown strategy {strategy!r}; use one of {STRATEGIES}")
    if domain_size != 2 * range_size:
        raise ValueError("domain_size must be exactly twice range_size")
    if fd_source not in ("original", "downsampled"):
        raise ValueError("fd_source must be 'original' or 'downsampled'")
    height, width = image.shape

    r_stack = bl.range_stack(image, range_size)
    n_ranges = r_stack.shape[0]
    r_matrix = r_stack.reshape(n_ranges, -1).astype(np.float64)

    d_stack = bl.domain_stack(image, domain_size, stride)
    n_domains = d_stack.shape[0]
    if n_domains == 0:
        raise ValueError("empty domain set")
    d_down = bl.downsample2(d_stack)
    d_matrix = d_down.reshape(n_domains, -1).astype(np.float64)

    n_pix = range_size * range_size
    perms = bl.isometry_permutations(range_size)
    inv_perms = [np.argsort(perms[i]) for i in range(bl.ISOMETRY_COUNT)]
    iso_list = list(range(bl.ISOMETRY_COUNT)) if isometries else [0]

    ctx = _SearchContext(d_matrix, iso_list, inv_perms)
    fd_overhead = 0.0

    if strategy == "exhaustive":
        ctx.slab_lo = np.zeros(n_ranges, dtype=np.int64)
        ctx.slab_hi = np.full(n_ranges, n_domains, dtype=np.int64)
    elif strategy == "nosearch":
        cand = _nosearch_candidates(image.shape, range_size, domain_size, stride)
        ctx.slab_lo = cand
        ctx.slab_hi = cand + 1
    else:
        t_fd = time.perf_counter()
        fd_blocks = d_stack if fd_source == "original" else d_down
        fd_dom = fdim.dbc_grid(fd_blocks)
        fd_rng = fdim.dbc_grid(r_stack)
        tree = AvlTree.from_keys(fd_dom)
        keys, ids = tree.as_sorted_arrays()
        stats = fdim.fd_stats(fd_dom)
        order = ids  # in-order traversal of the index, grouped by key
        ctx.use_order(order)
        ctx.slab_lo = np.empty(n_ranges, dtype=np.int64)
        ctx.slab_hi = np.empty(n_ranges, dtype=np.int64)
        if strategy == "static2":
            midpoint = (stats.f_min + stats.f_max) / 2.0
            boundary = int(np.searchsorted(keys, midpoint, "left"))
            below = fd_rng < midpoint
            ctx.slab_lo[:] = np.where(below, 0, boundary)
            ctx.slab_hi[:] = np.where(below, boundary, n_domains)
        else:  # dynamic_fd
            ctx.slab_lo[:] = np.searchsorted(keys, fd_rng - stats.d_f, "left")
            ctx.slab_hi[:] = np.searchsorted(keys, fd_rng + stats.d_f, "right")
        empty = np.flatnonzero(ctx.slab_hi <= ctx.slab_lo)
        if len(empty):
            pos = _nearest_fd_positions(keys, ids, fd_rng[empty])
            ctx.slab_lo[empty] = pos
            ctx.slab_hi[empty] = pos + 1
        fd_overhead = time.perf_counter() - t_fd

    out = {
        "domain": np.zeros(n_ranges, dtype=np.int64),
        "isometry": np.zeros(n_ranges, dtype=np.int64),
        "s_q": np.zeros(n_ranges, dtype=np.int64),
        "o_q": np.zeros(n_ranges, dtype=np.int64),
        "pre_rms": np.zeros(n_ranges, dtype=np.float64),
        "post_rms": np.zeros(n_ranges, dtype=np.float64),
    }
    if workers > 1:
        chunks = np.array_split(np.arange(n_ranges), workers * 4)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_search_chunk, ctx, r_matrix, chunk, out)
                for chunk in chunks
                if len(chunk)
            ]
            for fut in futures:
                fut.result()
    else:
        _search_chunk(ctx, r_matrix, np.arange(n_ranges), out)

    pool_sizes = (ctx.slab_hi - ctx.slab_lo).astype(np.int64)

    records = np.empty(n_ranges, dtype=RECORD_DTYPE)
    records["domain"] = out["domain"]
    records["isometry"] = out["isometry"]
    records["s_q"] = out["s_q"]
    records["o_q"] = out["o_q"]

    code = FractalCode(
        width=width,
        height=height,
        range_size=range_size,
        domain_size=domain_size,
        stride=stride,
        strategy_id=STRATEGY_IDS[strategy],
        isometries=isometries,
        records=records,
    )
    stats = EncodeStats(
        strategy_id=STRATEGY_IDS[strategy],
        comparisons=int(pool_sizes.sum()) * len(iso_list),
        mean_pool_size=float(pool_sizes.mean()),
        wall_time=time.perf_counter() - t_start,
        fd_overhead_time=fd_overhead,
        pool_sizes=pool_sizes,
        pre_rms=out["pre_rms"],
        post_rms=out["post_rms"],
    )
    return code, stats


def _nosearch_candidates(image_shape, range_size, domain_size, stride):
    """Center-nearest domain index for every range, clipped to the image."""
    height, width = image_shape

    def axis_nearest(extent: int) -> np.ndarray:
        n_pos = (extent - domain_size) // stride + 1
        tops = np.arange(0, extent, range_size, dtype=np.int64)
        target = tops - range_size // 2  # aligns domain center on range center
        k0 = np.clip(target // stride, 0, n_pos - 1)
        k1 = np.clip(k0 + 1, 0, n_pos - 1)
        pick_hi = np.abs(k1 * stride - target) < np.abs(k0 * stride - target)
        return np.where(pick_hi, k1, k0)

    ky = axis_nearest(height)
    kx = axis_nearest(width)
    n_pos_x = (width - domain_size) // stride + 1
    grid = ky[:, None] * n_pos_x + kx[None, :]
    return grid.ravel()


def serialize(code: FractalCode) -> bytes:
    """Pack a FractalCode into the little-endian FIC1 byte format."""
    if len(code.records) != code.n_ranges:
        raise FormatError(
            f"record-count mismatch: {len(code.records)} records for "
            f"{code.n_ranges} ranges"
        )
    if code.records.dtype != RECORD_DTYPE:
        raise ValueError("records must use the codec record dtype")
    header = HEADER.pack(
        MAGIC,
        VERSION,
        code.strategy_id,
        code.width,
        code.height,
        code.range_size,
        code.domain_size,
        code.stride,
        1 if code.isometries else 0,
        len(code.records),
    )
    return header + code.records.tobytes()


def deserialize(data: bytes) -> FractalCode:
    if len(data) < HEADER.size:
        raise FormatError("truncated: shorter than the fixed header")
    (
        magic,
        version,
        strategy_id,
        width,
        height,
        range_size,
        domain_size,
        stride,
        flags,
        count,
    ) = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"version mismatch: file {version}, supported {VERSION}")
    body = data[HEADER.size :]
    expected = count * RECORD_DTYPE.itemsize
    if len(body) < expected:
        raise FormatError("truncated: fewer record bytes than the header count")
    if len(body) > expected:
        raise FormatError("record-count mismatch: trailing bytes after records")
    if range_size == 0 or width % range_size or height % range_size:
        raise FormatError("header geometry invalid for the stated range size")
    if count != (width // range_size) * (height // range_size):
        raise FormatError("record-count mismatch: header count vs geometry")
    records = np.frombuffer(body, dtype=RECORD_DTYPE, count=count).copy()
    return FractalCode(
        width=width,
        height=height,
        range_size=range_size,
        domain_size=domain_size,
        stride=stride,
        strategy_id=strategy_id,
        isometries=bool(flags & 1),
        records=records,
    )


def decode(
    code: FractalCode,
    iterations: int = 10,
    initial: np.ndarray | float | None = None,
) -> np.ndarray:
    """Iterate the stored transforms from an initial image (default mid-gray).

    `initial` may be a full image or a single gray level to fill with.

    Each iteration rebuilds every range as clamp(s * downsample(isometry(
    domain)) + o) from the previous iterate; the result converges toward the
    attractor regardless of the starting image.
    """
    for snapshot in decode_iterates(code, iterations, initial):
        result = snapshot
    return result


def decode_iterates(
    code: FractalCode,
    iterations: int = 10,
    initial: np.ndarray | float | None = None,
):
    """Yield the decoded uint8 image after each of `iterations` passes."""
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    height, width = code.height, code.width
    rs = code.range_size
    ds = code.domain_size
    dom_y, dom_x = bl.domain_positions((height, width), ds, code.stride)
    n_domains = len(dom_y)
    records = code.records
    if len(records) != code.n_ranges:
        raise FormatError("record-count mismatch: records vs geometry")
    if records["domain"].size and int(records["domain"].max()) >= n_domains:
        raise ValueError(
            "record references a domain outside the current image geometry"
        )

    flat_index = np.arange(height * width, dtype=np.int64).reshape(height, width)
    scatter = bl.range_stack(flat_index, rs).reshape(-1, rs * rs)

    rec_y = dom_y[records["domain"]]
    rec_x = dom_x[records["domain"]]
    down_v, down_u = np.meshgrid(np.arange(rs), np.arange(rs), indexing="ij")
    down_v = down_v.ravel() * 2
    down_u = down_u.ravel() * 2
    base_y = rec_y[:, None] + down_v[None, :]
    base_x = rec_x[:, None] + down_u[None, :]
    gather = base_y * width + base_x  # top-left of each 2x2 mean group

    perms = bl.isometry_permutations(rs)
    iso_rows = [np.flatnonzero(records["isometry"] == i) for i in range(8)]

    s_hat = records["s_q"].astype(np.float64) * (2.0 / _S_STEPS) - 1.0
    o_hat = records["o_q"].astype(np.float64) * (510.0 / _O_STEPS) - 255.0

    if initial is None:
        work = np.full(height * width, 128.0, dtype=np.float64)
    elif np.ndim(initial) == 0:
        work = np.full(height * width, float(initial), dtype=np.float64)
    else:
        initial = np.asarray(initial)
        if initial.shape != (height, width):
            raise ValueError("initial image does not match the encoded geometry")
        work = initial.astype(np.float64).ravel().copy()

    for _ in range(iterations):
        domains = 0.25 * (
            work[gather]
            + work[gather + 1]
            + work[gather + width]
            + work[gather + width + 1]
        )
        for iso, rows in enumerate(iso_rows):
            if iso and len(rows):
                domains[rows] = domains[rows][:, perms[iso]]
        values = s_hat[:, None] * domains + o_hat[:, None]
        np.clip(values, 0.0, 255.0, out=values)
        new = np.empty_like(work)
        new[scatter] = values
        work = new
        yield np.rint(work).astype(np.uint8).reshape(height, width)
