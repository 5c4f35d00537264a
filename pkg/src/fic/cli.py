"""Command-line interface: encode, decode, bench, report."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import bench, codec
from .image import load_pgm, save_pgm

# CLI strategy names; "dynamic" selects the FD-indexed per-range pool method
STRATEGY_CHOICES = {
    "exhaustive": "exhaustive",
    "nosearch": "nosearch",
    "static2": "static2",
    "dynamic": "dynamic_fd",
}


def _add_block_flags(parser: argparse.ArgumentParser, default_stride: int) -> None:
    parser.add_argument("--range-size", type=int, default=8)
    parser.add_argument("--domain-size", type=int, default=16)
    parser.add_argument("--stride", type=int, default=default_stride)
    parser.add_argument(
        "--isometries",
        action="store_true",
        help="search the 8 dihedral block symmetries (default: identity only)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fic",
        description="Fractal (PIFS) image codec and strategy benchmark",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    enc = sub.add_parser("encode", help="compress a PGM image")
    enc.add_argument("input", type=Path)
    enc.add_argument("output", type=Path)
    enc.add_argument(
        "--strategy",
        choices=sorted(STRATEGY_CHOICES),
        default="dynamic",
    )
    _add_block_flags(enc, default_stride=1)
    enc.add_argument("--workers", type=int, default=1)

    dec = sub.add_parser("decode", help="reconstruct a PGM from a compressed file")
    dec.add_argument("input", type=Path)
    dec.add_argument("output", type=Path)
    dec.add_argument("--iterations", type=int, default=10)
    dec.add_argument(
        "--initial",
        type=Path,
        default=None,
        help="starting PGM for the iteration (default: uniform mid-gray)",
    )

    ben = sub.add_parser("bench", help="compare strategies over an image corpus")
    ben.add_argument("--csv", type=Path, default=None, help="output CSV path")
    ben.add_argument(
        "--out", type=Path, default=Path("bench_out"), help="artifact directory"
    )
    ben.add_argument(
        "--corpus",
        type=Path,
        default=None,
        help="directory of PGM inputs (default: built-in corpus)",
    )
    ben.add_argument(
        "--strategies",
        default="all",
        help="comma-separated subset of: " + ",".join(sorted(STRATEGY_CHOICES)),
    )
    _add_block_flags(ben, default_stride=4)
    ben.add_argument("--iterations", type=int, default=10)
    ben.add_argument("--seed", type=int, default=0, help="synthetic corpus seed")
    ben.add_argument("--size", type=int, default=256, help="built-in corpus size")
    ben.add_argument(
        "--synthetic-only",
        action="store_true",
        help="skip the standard public test images",
    )
    ben.add_argument("--max-exhaustive-size", type=int, default=512)
    ben.add_argument(
        "--parallel",
        type=int,
        default=1,
        help="concurrent image/strategy pairs (makes timings unreliable)",
    )

    rep = sub.add_parser("report", help="render figures from a bench CSV")
    rep.add_argument("csv", type=Path)
    rep.add_argument("--out", type=Path, default=None, help="figure directory")
    return parser


def cmd_encode(args) -> int:
    image = load_pgm(args.input)
    record, code, _ = bench.run_single(
        args.input.stem,
        image,
        STRATEGY_CHOICES[args.strategy],
        range_size=args.range_size,
        domain_size=args.domain_size,
        stride=args.stride,
        isometries=args.isometries,
        workers=args.workers,
        decode_output=False,
    )
    args.output.write_bytes(codec.serialize(code))
    print(",".join(record.to_row()))
    return 0


def cmd_decode(args) -> int:
    code = codec.deserialize(args.input.read_bytes())
    initial = load_pgm(args.initial) if args.initial is not None else None
    image = codec.decode(code, iterations=args.iterations, initial=initial)
    save_pgm(image, args.output)
    return 0


def cmd_bench(args) -> int:
    if args.strategies == "all":
        strategies = [STRATEGY_CHOICES[k] for k in sorted(STRATEGY_CHOICES)]
    else:
        try:
            strategies = [
                STRATEGY_CHOICES[name] for name in args.strategies.split(",") if name
            ]
        except KeyError as exc:
            raise ValueError(f"unknown strategy {exc.args[0]!r}") from None

    print("analytic counts (range 8, domain 16, stride 1):")
    print(f"{'size':>6} {'ranges':>8} {'domains':>9} {'comparisons':>13}")
    for row in bench.count_table():
        print(
            f"{row['image_size']:>6} {row['range_count']:>8} "
            f"{row['domain_count']:>9} {row['comparisons']:>13}"
        )

    if args.corpus is not None:
        corpus = bench.load_corpus_dir(args.corpus)
    elif args.synthetic_only or args.size != 256:
        corpus = bench.synthetic_corpus(args.size, args.seed)
    else:
        corpus = bench.default_corpus(args.seed, args.size)
    if not corpus:
        print("error: empty corpus", file=sys.stderr)
        return 1

    csv_path = args.csv if args.csv is not None else args.out / "bench.csv"
    args.out.mkdir(parents=True, exist_ok=True)
    records = bench.run_bench(
        corpus,
        strategies,
        range_size=args.range_size,
        domain_size=args.domain_size,
        stride=args.stride,
        isometries=args.isometries,
        iterations=args.iterations,
        csv_path=csv_path,
        out_dir=args.out,
        max_exhaustive_size=args.max_exhaustive_size,
        parallel=args.parallel,
    )
    if not records:
        print("error: every run failed", file=sys.stderr)
        return 1
    print(f"wrote {csv_path}")
    return 0


def cmd_report(args) -> int:
    from . import report  # matplotlib import deferred to the report path

    out_dir = args.out if args.out is not None else args.csv.parent
    for path in report.render_report(args.csv, out_dir):
        print(f"wrote {path}")
    return 0


_COMMANDS = {
    "encode": cmd_encode,
    "decode": cmd_decode,
    "bench": cmd_bench,
    "report": cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
