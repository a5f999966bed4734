"""Command-line interface.

Exit codes: 0 on success, 1 on validation or domain errors (including bad
flags), 2 on I/O errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import __version__
from .bias import bootstrap_bias, validation_scatter
from .errors import FeedAuditError
from .ingest import Report, generate_synthetic, read_catalog, read_snapshots, write_report
from .metrics import exposure_table, occupancy_curve
from .sim import U64_MAX, SimConfig

log = logging.getLogger("feedaudit")

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2

EXPOSURE_COLUMNS = (
    "bot_id",
    "publisher_id",
    "K",
    "occupancy",
    "visibility",
    "normalized_occupancy",
    "impressions",
    "unique_posts",
    "snapshots",
)
CURVE_COLUMNS = ("bot_id", "publisher_id", "K", "normalized_occupancy")
SCATTER_COLUMNS = ("bot_id", "publisher_id", "K", "N_measured", "N_model", "deviation")
BIAS_COLUMNS = (
    "bot_id",
    "publisher_id",
    "K",
    "N_model",
    "N_unfiltered",
    "bias",
    "boot_mean",
    "ci_low",
    "ci_high",
    "replicates",
    "level",
    "note",
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value <= U64_MAX:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text}")
    return value


def cmd_simulate(args) -> int:
    with open(args.config, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FeedAuditError(f"{args.config}: malformed JSON: {exc}") from None
    config = SimConfig.from_dict(data).with_seed(args.seed)
    manifest = generate_synthetic(config, args.out)
    total = sum(manifest.counts["snapshots"].values())
    print(f"wrote {total} snapshots and {manifest.counts['catalog']} posts to {args.out}")
    return EXIT_OK


def cmd_metrics(args) -> int:
    snapshots = read_snapshots(args.snapshots)
    rows = exposure_table(snapshots, args.k)
    write_report(Report.from_records(EXPOSURE_COLUMNS, rows), args.out)
    return EXIT_OK


def cmd_validate(args) -> int:
    snapshots = read_snapshots(args.snapshots)
    table = validation_scatter(snapshots, args.k)
    write_report(Report.from_records(SCATTER_COLUMNS, table.rows), args.out)
    print(
        f"points={len(table.rows)} max_abs_deviation={float(table.max_abs_deviation):.6g} "
        f"mean_abs_deviation={float(table.mean_abs_deviation):.6g}"
    )
    return EXIT_OK


def cmd_bias(args) -> int:
    if not 0.0 < args.level < 1.0:
        raise FeedAuditError(f"--level must lie in (0, 1), got {args.level}")
    if args.replicates < 1:
        raise FeedAuditError(f"--replicates must be >= 1, got {args.replicates}")
    snapshots = read_snapshots(args.snapshots)
    catalog = read_catalog(args.catalog)
    rows = []
    for stream, bot in enumerate(snapshots.bot_ids):
        rows += bootstrap_bias(
            snapshots, catalog, bot, K=args.k, B=args.replicates, level=args.level, seed=args.seed, stream=stream
        )
    write_report(Report.from_records(BIAS_COLUMNS, rows), args.out)
    return EXIT_OK


def cmd_curve(args) -> int:
    snapshots = read_snapshots(args.snapshots)
    points = []
    for bot in snapshots.bot_ids:
        points += occupancy_curve(snapshots, bot, args.k_max)
    write_report(Report.from_records(CURVE_COLUMNS, points), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="feedaudit", description="Audit FIFO news feeds for exposure bias.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="generate a synthetic snapshot dataset")
    p.add_argument("--config", required=True, help="JSON simulation config")
    p.add_argument("--seed", required=True, type=_seed, help="RNG seed (unsigned 64-bit); overrides the config")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("metrics", help="measured occupancy, visibility and rates per bot and publisher")
    p.add_argument("--snapshots", required=True, help="snapshot file (JSON lines)")
    p.add_argument("--k", type=int, default=1, help="feed positions considered (default: 1)")
    p.add_argument("--out", required=True, help="output CSV report")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("validate", help="model-predicted against measured occupancy")
    p.add_argument("--snapshots", required=True, help="snapshot file (JSON lines)")
    p.add_argument("--k", type=int, default=1, help="feed positions considered (default: 1)")
    p.add_argument("--out", required=True, help="output CSV report")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("bias", help="bias against the unfiltered baseline with bootstrap intervals")
    p.add_argument("--snapshots", required=True, help="snapshot file (JSON lines)")
    p.add_argument("--catalog", required=True, help="catalog of published posts (JSON lines)")
    p.add_argument("--k", type=int, default=1, help="feed positions considered (default: 1)")
    p.add_argument("--replicates", type=int, default=1000, help="bootstrap replicates (default: 1000)")
    p.add_argument("--level", type=float, default=0.95, help="confidence level in (0, 1) (default: 0.95)")
    p.add_argument("--seed", required=True, type=_seed, help="RNG seed (unsigned 64-bit)")
    p.add_argument("--out", required=True, help="output CSV report")
    p.set_defaults(func=cmd_bias)

    p = sub.add_parser("curve", help="normalized occupancy for K = 1..k-max")
    p.add_argument("--snapshots", required=True, help="snapshot file (JSON lines)")
    p.add_argument("--k-max", type=int, required=True, help="largest feed size")
    p.add_argument("--out", required=True, help="output CSV report")
    p.set_defaults(func=cmd_curve)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s", stream=sys.stderr)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        return args.func(args)
    except FeedAuditError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except KeyError as exc:
        print(f"error: {exc.args[0] if exc.args else exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
