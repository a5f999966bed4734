"""Dataset and report file formats.

Snapshots and catalogs are line-delimited JSON, one record per line,
preceded by a header line ``{"format": ..., "format_version": "1"}``.
A header is optional on input. Timestamps are RFC 3339 UTC strings with
nanosecond precision, e.g. ``2018-01-10T07:00:00.000000000Z``.

Snapshot record::

    {"bot_id": "b1", "snapshot_time": "...",
     "entries": [{"position": 1, "post_id": "p9", "publisher_id": "A",
                  "publication_time": "...", "likes": 3, "shares": 0}]}

``likes`` and ``shares`` are optional. Catalog record::

    {"post_id": "p9", "publisher_id": "A", "publication_time": "..."}

Reports are comma-separated with a header row, LF line endings, rows
sorted by (bot_id, publisher_id, K), and numbers printed positionally with
at most 12 significant digits.
"""

from __future__ import annotations

import csv
import io
import json
import os
import re
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from decimal import Context, Decimal, ROUND_HALF_EVEN
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from . import __version__
from .errors import FormatVersionError, ValidationError
from .records import PostRecord, Snapshot, SnapshotEntry, SnapshotSet
from .sim import RNG_ALGORITHM, SimConfig, SimResult, run_simulation

__all__ = [
    "FORMAT_VERSION",
    "Report",
    "DatasetManifest",
    "format_timestamp",
    "parse_timestamp",
    "format_number",
    "read_snapshots",
    "write_snapshots",
    "read_catalog",
    "write_catalog",
    "read_report",
    "write_report",
    "generate_synthetic",
]

FORMAT_VERSION = "1"
SUPPORTED_VERSIONS = {"1"}
SNAPSHOTS_FORMAT = "feedaudit.snapshots"
CATALOG_FORMAT = "feedaudit.catalog"

SNAPSHOTS_FILE = "snapshots.jsonl"
CATALOG_FILE = "catalog.jsonl"
TRUTH_FILE = "truth.csv"
MANIFEST_FILE = "manifest.json"

_EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)
_TS_RE = re.compile(
    r"^(\d{4})-(\d{2})-(\d{2})T(\d{2}):(\d{2}):(\d{2})(?:\.(\d{1,9}))?(Z|\+00:00|-00:00)$"
)
_DIGITS = Context(prec=12, rounding=ROUND_HALF_EVEN)


# -- timestamps ------------------------------------------------------------


def format_timestamp(ns: int) -> str:
    seconds, frac = divmod(int(ns), 1_000_000_000)
    moment = _EPOCH + timedelta(seconds=seconds)
    return f"{moment:%Y-%m-%dT%H:%M:%S}.{frac:09d}Z"


def parse_timestamp(text: str) -> int:
    """RFC 3339 UTC timestamp to integer nanoseconds since the epoch."""
    if not isinstance(text, str):
        raise ValueError("timestamp must be a string")
    m = _TS_RE.match(text)
    if m is None:
        raise ValueError(f"not an RFC 3339 UTC timestamp: {text!r}")
    year, month, day, hour, minute, second = (int(g) for g in m.groups()[:6])
    moment = datetime(year, month, day, hour, minute, second, tzinfo=timezone.utc)
    frac = int((m.group(7) or "").ljust(9, "0"))
    delta = moment - _EPOCH
    return (delta.days * 86400 + delta.seconds) * 1_000_000_000 + frac


# -- numbers -----------------------------------------------------------------


def format_number(value) -> str:
    """Positional decimal with at most 12 significant digits.

    Fractions are rounded exactly (no binary detour); trailing zeros are
    dropped.
    """
    if isinstance(value, bool):
        raise TypeError("booleans are not report numbers")
    if isinstance(value, int):
        return str(value)
    if isinstance(value, Fraction):
        d = _DIGITS.divide(Decimal(value.numerator), Decimal(value.denominator))
    else:
        f = float(value)
        if f != f:
            return "nan"
        if f in (float("inf"), float("-inf")):
            return "inf" if f > 0 else "-inf"
        d = _DIGITS.create_decimal(f)
    text = format(d, "f")
    if "." in text:
        text = text.rstrip("0").rstrip(".")
    if text in ("-0", ""):
        text = "0"
    return text


# -- line-delimited records ---------------------------------------------------


def _dump(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def _write_lines(path, lines: Iterable[str]):
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for line in lines:
            fh.write(line)
            fh.write("\n")


def _records(path, expected_format: str):
    """Yield ``(line_number, dict)`` for every data line, checking the header."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        first = True
        for number, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"malformed JSON: {exc.msg}", line=number) from None
            if not isinstance(obj, dict):
                raise ValidationError("record must be a JSON object", line=number)
            if first and "format_version" in obj:
                first = False
                version = obj["format_version"]
                if version not in SUPPORTED_VERSIONS:
                    raise FormatVersionError(
                        f"unsupported format_version {version!r} (supported: {sorted(SUPPORTED_VERSIONS)})",
                        line=number,
                        field="format_version",
                    )
                fmt = obj.get("format", expected_format)
                if fmt != expected_format:
                    raise ValidationError(
                        f"expected a {expected_format} file, got {fmt!r}", line=number, field="format"
                    )
                continue
            first = False
            yield number, obj


def _check_keys(obj: Mapping, required: Sequence[str], optional: Sequence[str], line: int):
    for key in required:
        if key not in obj:
            raise ValidationError("missing field", line=line, field=key)
    allowed = set(required) | set(optional)
    for key in obj:
        if key not in allowed:
            raise ValidationError("unknown field", line=line, field=key)


def _string(obj, key, line) -> str:
    value = obj[key]
    if not isinstance(value, str) or not value:
        raise ValidationError("must be a non-empty string", line=line, field=key)
    return value


def _time(obj, key, line) -> int:
    try:
        return parse_timestamp(obj[key])
    except ValueError as exc:
        raise ValidationError(str(exc), line=line, field=key) from None


def _count(obj, key, line):
    value = obj.get(key)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, int) or value < 0:
        raise ValidationError("must be a non-negative integer", line=line, field=key)
    return value


def _entry_to_dict(e: SnapshotEntry) -> dict:
    d = {
        "position": e.position,
        "post_id": e.post_id,
        "publisher_id": e.publisher_id,
        "publication_time": format_timestamp(e.publication_time),
    }
    if e.likes is not None:
        d["likes"] = e.likes
    if e.shares is not None:
        d["shares"] = e.shares
    return d


def write_snapshots(snapshots: SnapshotSet | Iterable[Snapshot], path) -> None:
    """Write snapshots grouped by bot (sorted ids), in time order."""
    if not isinstance(snapshots, SnapshotSet):
        snapshots = SnapshotSet.from_snapshots(snapshots)
    header = _dump({"format": SNAPSHOTS_FORMAT, "format_version": FORMAT_VERSION})

    def lines():
        yield header
        for snap in snapshots:
            yield _dump(
                {
                    "bot_id": snap.bot_id,
                    "snapshot_time": format_timestamp(snap.snapshot_time),
                    "entries": [_entry_to_dict(e) for e in snap.entries],
                }
            )

    _write_lines(path, lines())


def _parse_snapshot(obj: Mapping, line: int) -> Snapshot:
    _check_keys(obj, ("bot_id", "snapshot_time", "entries"), (), line)
    bot = _string(obj, "bot_id", line)
    when = _time(obj, "snapshot_time", line)
    raw_entries = obj["entries"]
    if not isinstance(raw_entries, list):
        raise ValidationError("must be a list", line=line, field="entries")
    entries = []
    seen_positions = set()
    seen_posts = set()
    for raw in raw_entries:
        if not isinstance(raw, dict):
            raise ValidationError("entry must be a JSON object", line=line, field="entries")
        _check_keys(raw, ("position", "post_id", "publisher_id", "publication_time"), ("likes", "shares"), line)
        pos = raw["position"]
        if isinstance(pos, bool) or not isinstance(pos, int):
            raise ValidationError("position must be an integer", line=line, field="position")
        if pos < 1:
            raise ValidationError("position must be ≥ 1", line=line, field="position")
        if pos in seen_positions:
            raise ValidationError(f"duplicate position {pos}", line=line, field="position")
        seen_positions.add(pos)
        if pos != len(entries) + 1:
            raise ValidationError(
                f"positions must be contiguous from 1 and listed in order; expected {len(entries) + 1}, got {pos}",
                line=line,
                field="position",
            )
        post_id = _string(raw, "post_id", line)
        if post_id in seen_posts:
            raise ValidationError(f"duplicate post_id {post_id!r} within snapshot", line=line, field="post_id")
        seen_posts.add(post_id)
        entries.append(
            SnapshotEntry(
                position=pos,
                post_id=post_id,
                publisher_id=_string(raw, "publisher_id", line),
                publication_time=_time(raw, "publication_time", line),
                likes=_count(raw, "likes", line),
                shares=_count(raw, "shares", line),
            )
        )
    return Snapshot(bot, when, tuple(entries))


def read_snapshots(path) -> SnapshotSet:
    """Read and validate a snapshot file."""
    snaps = [_parse_snapshot(obj, number) for number, obj in _records(path, SNAPSHOTS_FORMAT)]
    if not snaps:
        raise ValidationError("no snapshots")
    return SnapshotSet.from_snapshots(snaps)


def write_catalog(records: Iterable[PostRecord], path) -> None:
    header = _dump({"format": CATALOG_FORMAT, "format_version": FORMAT_VERSION})

    def lines():
        yield header
        for rec in records:
            yield _dump(
                {
                    "post_id": rec.post_id,
                    "publisher_id": rec.publisher_id,
                    "publication_time": format_timestamp(rec.publication_time),
                }
            )

    _write_lines(path, lines())


def read_catalog(path) -> list[PostRecord]:
    """Read and validate a catalog of published posts, preserving file order."""
    out = []
    seen: dict[str, int] = {}
    for number, obj in _records(path, CATALOG_FORMAT):
        _check_keys(obj, ("post_id", "publisher_id", "publication_time"), (), number)
        post_id = _string(obj, "post_id", number)
        if post_id in seen:
            raise ValidationError(
                f"duplicate post_id {post_id!r} (first on line {seen[post_id]})", line=number, field="post_id"
            )
        seen[post_id] = number
        out.append(PostRecord(post_id, _string(obj, "publisher_id", number), _time(obj, "publication_time", number)))
    if not out:
        raise ValidationError("no posts")
    return out


# -- reports ----------------------------------------------------------------

STRING_COLUMNS = {"bot_id", "publisher_id", "note"}
INT_COLUMNS = {"K", "impressions", "unique_posts", "snapshots", "replicates"}
SORT_COLUMNS = ("bot_id", "publisher_id", "K")


@dataclass
class Report:
    """A delimited table. Cells are str, int, float or Fraction."""

    columns: tuple[str, ...]
    rows: list[tuple] = field(default_factory=list)

    def __post_init__(self):
        self.columns = tuple(self.columns)
        self.rows = [tuple(r) for r in self.rows]
        for r in self.rows:
            if len(r) != len(self.columns):
                raise ValueError(f"row {r!r} does not match columns {self.columns}")

    @classmethod
    def from_records(cls, columns: Sequence[str], records: Iterable[Any]) -> "Report":
        return cls(tuple(columns), [tuple(getattr(rec, c) for c in columns) for rec in records])

    def column(self, name: str) -> list:
        k = self.columns.index(name)
        return [r[k] for r in self.rows]

    def sorted_rows(self) -> list[tuple]:
        keys = [self.columns.index(c) for c in SORT_COLUMNS if c in self.columns]
        return sorted(self.rows, key=lambda r: tuple(r[k] for k in keys))


def _cell(value) -> str:
    if isinstance(value, str):
        return value
    return format_number(value)


def write_report(table: Report, path) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(table.columns)
    for row in table.sorted_rows():
        writer.writerow([_cell(v) for v in row])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def read_report(path) -> Report:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            columns = tuple(next(reader))
        except StopIteration:
            raise ValidationError("empty report (no header)") from None
        rows = []
        for number, raw in enumerate(reader, start=2):
            if len(raw) != len(columns):
                raise ValidationError(f"expected {len(columns)} cells, got {len(raw)}", line=number)
            row = []
            for name, text in zip(columns, raw):
                if name in STRING_COLUMNS:
                    row.append(text)
                    continue
                try:
                    row.append(int(text) if name in INT_COLUMNS else float(text))
                except ValueError:
                    raise ValidationError(f"not a number: {text!r}", line=number, field=name) from None
            rows.append(tuple(row))
    return Report(columns, rows)


# -- synthetic datasets -----------------------------------------------------


@dataclass(frozen=True)
class DatasetManifest:
    format_version: str
    generator: str
    time_zone: str
    counts: dict
    files: dict
    config: dict

    def to_dict(self) -> dict:
        return {
            "format_version": self.format_version,
            "generator": self.generator,
            "time_zone": self.time_zone,
            "counts": self.counts,
            "files": self.files,
            "config": self.config,
        }

    @classmethod
    def read(cls, path) -> "DatasetManifest":
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        if data.get("format_version") not in SUPPORTED_VERSIONS:
            raise FormatVersionError(f"unsupported format_version {data.get('format_version')!r}", field="format_version")
        return cls(**data)


TRUTH_COLUMNS = ("bot_id", "publisher_id", "acceptance", "creation_rate", "effective_rate")


def config_to_dict(config: SimConfig) -> dict:
    return {
        "publishers": [{"id": p, "rate": r} for p, r in config.publishers],
        "bots": [{"id": b, "acceptance": dict(sorted(acc.items()))} for b, acc in config.bots],
        "K": config.K,
        "snapshot_interval": config.snapshot_interval,
        "snapshot_count": config.snapshot_count,
        "warmup": config.warmup,
        "seed": config.seed,
    }


def write_dataset(result: SimResult, out_dir) -> DatasetManifest:
    """Write a simulation result as snapshots, catalog, truth and manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_snapshots(result.snapshot_set, out / SNAPSHOTS_FILE)
    write_catalog(result.catalog, out / CATALOG_FILE)
    write_report(Report.from_records(TRUTH_COLUMNS, result.truth), out / TRUTH_FILE)
    config = result.config
    manifest = DatasetManifest(
        format_version=FORMAT_VERSION,
        generator=f"feedaudit {__version__}; rng={RNG_ALGORITHM}; seed={config.seed}",
        time_zone="UTC",
        counts={
            "snapshots": {b: result.snapshot_set.n_snapshots(b) for b in result.snapshot_set.bot_ids},
            "catalog": len(result.catalog),
        },
        files={
            "snapshots": SNAPSHOTS_FILE,
            "catalog": CATALOG_FILE,
            "truth": TRUTH_FILE,
        },
        config=config_to_dict(config),
    )
    with open(out / MANIFEST_FILE, "w", encoding="utf-8", newline="") as fh:
        fh.write(json.dumps(manifest.to_dict(), ensure_ascii=False, indent=2))
        fh.write("\n")
    return manifest


def generate_synthetic(config: SimConfig, out_dir: str | os.PathLike) -> DatasetManifest:
    """Simulate ``config`` and write the dataset files into ``out_dir``."""
    return write_dataset(run_simulation(config), out_dir)
