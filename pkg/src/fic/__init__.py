"""Fractal (PIFS) image codec with FD-guided domain search."""

from .avltree import AvlTree, build_index
from .blocks import (
    DomainEntry,
    RangeBlock,
    apply_isometry,
    downsample2,
    enumerate_domains,
    partition_ranges,
)
from .codec import (
    EncodeStats,
    FormatError,
    FractalCode,
    decode,
    dequantize_so,
    deserialize,
    encode,
    fit_transform,
    quantize_so,
    serialize,
)
from .fdim import FdStats, dbc_dimension, dbc_dimension_raw, fd_stats
from .image import FidelityReport, PgmError, fidelity, load_pgm, save_pgm

__version__ = "0.1.0"

__all__ = [
    "AvlTree",
    "DomainEntry",
    "EncodeStats",
    "FdStats",
    "FidelityReport",
    "FormatError",
    "FractalCode",
    "PgmError",
    "RangeBlock",
    "apply_isometry",
    "build_index",
    "dbc_dimension",
    "dbc_dimension_raw",
    "decode",
    "dequantize_so",
    "deserialize",
    "downsample2",
    "encode",
    "enumerate_domains",
    "fd_stats",
    "fidelity",
    "fit_transform",
    "load_pgm",
    "partition_ranges",
    "quantize_so",
    "save_pgm",
    "serialize",
]
