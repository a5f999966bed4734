"""Discrete-event simulation of publishers feeding FIFO timelines.

Publishers emit posts as independent Poisson processes, realised as one
merged exponential clock with a categorical choice of publisher. Each bot
keeps every post independently with its acceptance probability (Poisson
thinning), pushes accepted posts on top of a size-K FIFO timeline and is
sampled every ``snapshot_interval`` time units after a warm-up.

One time unit is one second in the timestamps written to files.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from collections.abc import Sequence
from typing import Mapping, Optional

import numpy as np

from .errors import ConfigError, DomainError
from .records import PostRecord, Snapshot, SnapshotSet

__all__ = [
    "RNG_ALGORITHM",
    "SimConfig",
    "TruthRow",
    "SimResult",
    "make_rng",
    "generate_event_times",
    "run_simulation",
]

RNG_ALGORITHM = "numpy.PCG64"
NS_PER_UNIT = 1_000_000_000
U64_MAX = 2**64 - 1


def make_rng(seed: int, *spawn_key: int) -> np.random.Generator:
    """PCG64 generator for ``seed``; ``spawn_key`` derives independent streams
    (e.g. one per replication index)."""
    if not 0 <= seed <= U64_MAX:
        raise DomainError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=spawn_key)))


@dataclass(frozen=True)
class SimConfig:
    """Publishers, bots and sampling plan of one simulation run.

    ``acceptance`` maps publisher ids to keep-probabilities; publishers a
    bot does not list are kept with probability 1. ``warmup=None`` selects
    ten expected feed turnovers of the slowest bot.
    """

    publishers: Sequence[tuple[str, float]]
    bots: Sequence[tuple[str, Mapping[str, float]]]
    K: int
    snapshot_interval: float
    snapshot_count: int
    warmup: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "publishers", tuple((str(p), float(r)) for p, r in self.publishers))
        object.__setattr__(self, "bots", tuple((str(b), dict(acc)) for b, acc in self.bots))
        self.validate()

    def validate(self):
        if not self.publishers:
            raise ConfigError("at least one publisher is required")
        ids = [p for p, _ in self.publishers]
        if len(set(ids)) != len(ids):
            raise ConfigError("publisher ids must be unique")
        for pub, rate in self.publishers:
            if not math.isfinite(rate) or rate < 0:
                raise ConfigError(f"publisher {pub!r}: rate must be finite and >= 0, got {rate}")
        if not self.bots:
            raise ConfigError("at least one bot is required")
        bot_ids = [b for b, _ in self.bots]
        if len(set(bot_ids)) != len(bot_ids):
            raise ConfigError("bot ids must be unique")
        if isinstance(self.K, bool) or not isinstance(self.K, int) or self.K < 1:
            raise ConfigError(f"K must be an integer >= 1, got {self.K!r}")
        if not (math.isfinite(self.snapshot_interval) and self.snapshot_interval > 0):
            raise ConfigError(f"snapshot_interval must be > 0, got {self.snapshot_interval}")
        if isinstance(self.snapshot_count, bool) or not isinstance(self.snapshot_count, int) or self.snapshot_count < 1:
            raise ConfigError(f"snapshot_count must be an integer >= 1, got {self.snapshot_count!r}")
        if self.warmup is not None and not (math.isfinite(self.warmup) and self.warmup >= 0):
            raise ConfigError(f"warmup must be >= 0, got {self.warmup}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or not 0 <= self.seed <= U64_MAX:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        known = set(ids)
        for bot, acc in self.bots:
            for pub, p in acc.items():
                if pub not in known:
                    raise ConfigError(f"bot {bot!r}: acceptance names unknown publisher {pub!r}")
                if not 0.0 <= p <= 1.0:
                    raise ConfigError(f"bot {bot!r}: acceptance of {pub!r} must lie in [0, 1], got {p}")
            if self.effective_total(bot) <= 0:
                raise ConfigError(f"bot {bot!r} accepts no publisher with a positive rate")

    def acceptance(self, bot: str, publisher: str) -> float:
        return dict(self.bots)[bot].get(publisher, 1.0)

    def effective_total(self, bot: str) -> float:
        acc = dict(self.bots)[bot]
        return sum(rate * acc.get(pub, 1.0) for pub, rate in self.publishers)

    @property
    def creation_total(self) -> float:
        return sum(rate for _, rate in self.publishers)

    @property
    def resolved_warmup(self) -> float:
        if self.warmup is not None:
            return self.warmup
        return max(10.0 * self.K / self.effective_total(b) for b, _ in self.bots)

    @property
    def horizon(self) -> float:
        return self.resolved_warmup + self.snapshot_count * self.snapshot_interval

    def with_seed(self, seed: int) -> "SimConfig":
        return SimConfig(
            self.publishers, self.bots, self.K, self.snapshot_interval, self.snapshot_count, self.warmup, seed
        )

    @classmethod
    def from_dict(cls, data: Mapping) -> "SimConfig":
        """Build from the JSON config layout used by the CLI::

            {"publishers": [{"id": "A", "rate": 1.0}, ...],
             "bots": [{"id": "b1", "acceptance": {"A": 0.5}}, ...],
             "K": 1, "snapshot_interval": 10, "snapshot_count": 1000,
             "warmup": null, "seed": 0}
        """
        try:
            publishers = [(p["id"], p["rate"]) for p in data["publishers"]]
            bots = [(b["id"], b.get("acceptance", {})) for b in data["bots"]]
            return cls(
                publishers=publishers,
                bots=bots,
                K=data.get("K", 1),
                snapshot_interval=data["snapshot_interval"],
                snapshot_count=data["snapshot_count"],
                warmup=data.get("warmup"),
                seed=data.get("seed", 0),
            )
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed simulation config: missing or invalid {exc}") from exc


@dataclass(frozen=True)
class TruthRow:
    bot_id: str
    publisher_id: str
    acceptance: float
    creation_rate: float
    effective_rate: float


class _PostIds(Sequence):
    """Sequential post ids ``post-0001``... generated on demand."""

    def __init__(self, n: int):
        self._n = n
        self._width = len(str(max(n, 1)))

    def __len__(self):
        return self._n

    def __getitem__(self, k):
        if isinstance(k, slice):
            return [self[i] for i in range(*k.indices(self._n))]
        k = int(k)
        if not -self._n <= k < self._n:
            raise IndexError(k)
        return f"post-{k % self._n + 1:0{self._width}d}"


@dataclass(frozen=True)
class SimResult:
    config: SimConfig
    snapshot_set: SnapshotSet
    truth: list[TruthRow] = field(repr=False)
    _post_ids: Sequence[str] = field(repr=False)
    _labels: np.ndarray = field(repr=False)
    _times: np.ndarray = field(repr=False)

    @cached_property
    def catalog(self) -> list[PostRecord]:
        """Every published post, in publication order."""
        pub_ids = [p for p, _ in self.config.publishers]
        return [
            PostRecord(self._post_ids[k], pub_ids[c], t)
            for k, (c, t) in enumerate(zip(self._labels.tolist(), self._times.tolist()))
        ]

    @cached_property
    def snapshots(self) -> list[Snapshot]:
        return list(self.snapshot_set)


def generate_event_times(rate: float, horizon: float, rng: np.random.Generator) -> np.ndarray:
    """Arrival times of a Poisson process of ``rate`` on ``(0, horizon]``.

    Exponential gaps are drawn in blocks sized to the expected count, so the
    stream consumed from ``rng`` depends only on ``rate`` and ``horizon``.
    """
    if not rate >= 0 or not math.isfinite(rate):
        raise DomainError(f"rate must be finite and >= 0, got {rate}")
    if not horizon > 0:
        raise DomainError(f"horizon must be > 0, got {horizon}")
    if rate == 0:
        return np.empty(0)
    block = max(16, int(rate * horizon + 4 * math.sqrt(rate * horizon)) + 1)
    chunks = []
    t = 0.0
    while t <= horizon:
        times = t + np.cumsum(rng.exponential(1.0 / rate, size=block))
        chunks.append(times)
        t = times[-1]
    times = np.concatenate(chunks)
    times = times[times <= horizon]
    # cumsum of positive gaps can still collide in floating point
    return times[np.concatenate(([True], np.diff(times) > 0))] if len(times) else times


def _to_ns(times: np.ndarray) -> np.ndarray:
    """Round to nanoseconds, nudging collisions forward so order is kept."""
    ns = np.rint(np.asarray(times) * NS_PER_UNIT).astype(np.int64)
    if len(ns) == 0:
        return ns
    offset = np.arange(len(ns), dtype=np.int64)
    return np.maximum.accumulate(ns - offset) + offset


def run_simulation(config: SimConfig) -> SimResult:
    """Simulate the configured publishers, filters and snapshot sampler.

    Random draws happen in a fixed order from one PCG64 stream: merged
    arrival times, then publisher labels, then one uniform per
    (arrival, bot) for thinning. Identical configs give identical results.
    """
    config.validate()
    rng = make_rng(config.seed)
    pub_ids = [p for p, _ in config.publishers]
    rates = np.array([r for _, r in config.publishers])
    total = rates.sum()
    horizon = config.horizon

    times = generate_event_times(total, horizon, rng)
    n = len(times)
    labels = rng.choice(len(pub_ids), size=n, p=rates / total) if n else np.empty(0, dtype=np.int64)
    bot_ids = [b for b, _ in config.bots]
    accept_p = np.array([[config.acceptance(b, p) for p in pub_ids] for b in bot_ids])
    draws = rng.random((n, len(bot_ids)))
    accepted = draws < accept_p[:, labels].T

    ns = _to_ns(times)
    post_ids = _PostIds(n)

    m = np.arange(1, config.snapshot_count + 1)
    snap_ns = np.rint((config.resolved_warmup + m * config.snapshot_interval) * NS_PER_UNIT).astype(np.int64)
    K = config.K
    columns = {}
    for b, bot in enumerate(bot_ids):
        kept = np.flatnonzero(accepted[:, b])
        filled = np.searchsorted(ns[kept], snap_ns, side="right")
        slot = filled[:, None] - 1 - np.arange(K)[None, :]
        posts = np.where(slot >= 0, kept[np.maximum(slot, 0)] if len(kept) else -1, -1)
        columns[bot] = (snap_ns, posts.astype(np.int64))
    snapshot_set = SnapshotSet.from_columns(post_ids, np.asarray(pub_ids)[labels] if n else [], ns, columns)

    truth = [
        TruthRow(bot, pub, float(accept_p[b, j]), float(rates[j]), float(accept_p[b, j] * rates[j]))
        for b, bot in enumerate(bot_ids)
        for j, pub in enumerate(pub_ids)
    ]
    return SimResult(config, snapshot_set, truth, post_ids, labels, ns)
