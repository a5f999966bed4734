"""Model-based bias of a filtered feed against the unfiltered baseline.

The FIFO occupancy of publisher j at a bot is predicted from measured
effective rates, ``N_model = rate_j * K / sum(rates)``, and compared with
the occupancy the same feed would have if every published post entered it,
``N_unfiltered = creation_j * K / sum(creation)``. Their difference is the
bias. Bootstrap intervals come from resampling snapshots and catalog posts.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import DegenerateDatasetError, DomainError
from .metrics import _check_K, impressions, unique_posts
from .records import PostRecord, SnapshotSet
from .sim import make_rng

__all__ = [
    "BiasRow",
    "ScatterRow",
    "ScatterTable",
    "model_occupancy_from_measurements",
    "unfiltered_from_catalog",
    "bias",
    "bootstrap_bias",
    "validation_scatter",
]

log = logging.getLogger(__name__)

NOT_IN_CATALOG = "not_in_catalog"


@dataclass(frozen=True)
class BiasRow:
    bot_id: str
    publisher_id: str
    K: int
    N_model: Fraction
    N_unfiltered: Fraction
    bias: Fraction
    boot_mean: float
    ci_low: float
    ci_high: float
    replicates: int
    level: float
    note: str = ""


@dataclass(frozen=True)
class ScatterRow:
    bot_id: str
    publisher_id: str
    K: int
    N_measured: Fraction
    N_model: Fraction

    @property
    def deviation(self) -> Fraction:
        return abs(self.N_measured - self.N_model)


@dataclass(frozen=True)
class ScatterTable:
    rows: list[ScatterRow]

    @property
    def max_abs_deviation(self) -> Fraction:
        return max((r.deviation for r in self.rows), default=Fraction(0))

    @property
    def mean_abs_deviation(self) -> Fraction:
        if not self.rows:
            return Fraction(0)
        return sum((r.deviation for r in self.rows), Fraction(0)) / len(self.rows)


def model_occupancy_from_measurements(snapshots: SnapshotSet, bot: str, K: int = 1) -> dict[str, Fraction]:
    """FIFO occupancy predicted from the effective rates measured at ``bot``.

    Publishers never seen at the bot get zero; the values sum to K.
    """
    K = _check_K(K)
    Q = unique_posts(snapshots, bot, K)
    total = int(Q.sum())
    if total == 0:
        raise DegenerateDatasetError(f"bot {bot!r} has no posts in its top {K} positions")
    return {pub: Fraction(int(Q[j]) * K, total) for j, pub in enumerate(snapshots.publishers)}


def _catalog_counts(catalog: Sequence[PostRecord]) -> Counter:
    if not catalog:
        raise DomainError("catalog is empty")
    return Counter(rec.publisher_id for rec in catalog)


def unfiltered_from_catalog(catalog: Sequence[PostRecord], K: int = 1) -> dict[str, Fraction]:
    """Unfiltered occupancy with creation rates estimated by catalog shares."""
    K = _check_K(K)
    counts = _catalog_counts(catalog)
    M = sum(counts.values())
    return {pub: Fraction(c * K, M) for pub, c in sorted(counts.items())}


def _universe(snapshots: SnapshotSet, counts: Counter) -> list[str]:
    return sorted(set(snapshots.publishers) | set(counts))


def bias(snapshots: SnapshotSet, catalog: Sequence[PostRecord], bot: str, K: int = 1) -> dict[str, Fraction]:
    """Bias ``N_model - N_unfiltered`` of every publisher at ``bot``.

    Publishers seen in snapshots but missing from the catalog get a zero
    baseline and a logged warning.
    """
    K = _check_K(K)
    counts = _catalog_counts(catalog)
    n_model = model_occupancy_from_measurements(snapshots, bot, K)
    n_unf = unfiltered_from_catalog(catalog, K)
    out = {}
    for pub in _universe(snapshots, counts):
        if pub not in counts:
            log.warning("publisher %r appears in snapshots but not in the catalog", pub)
        out[pub] = n_model.get(pub, Fraction(0)) - n_unf.get(pub, Fraction(0))
    return out


def bootstrap_bias(
    snapshots: SnapshotSet,
    catalog: Sequence[PostRecord],
    bot: str,
    K: int = 1,
    B: int = 1000,
    level: float = 0.95,
    seed: int = 0,
    stream: int = 0,
) -> list[BiasRow]:
    """Bias point estimates with percentile bootstrap intervals.

    Replicate ``r`` draws from its own generator, keyed by
    ``(seed, stream, r)``. It resamples the bot's S snapshots with
    replacement and, independently, the M catalog posts with replacement
    (as a multinomial draw over publisher shares, which has the same
    law). A post shown in n snapshots credits 1/n of a distinct post to
    each, so replicate counts sum back to the measured ones and a snapshot
    drawn twice counts twice.

    The interval bounds are the ``(1 - level) / 2`` and ``(1 + level) / 2``
    quantiles of the replicate biases, interpolated linearly at index
    ``(B - 1) * q`` of the sorted replicates.
    """
    K = _check_K(K)
    if isinstance(B, bool) or int(B) != B or B < 1:
        raise DomainError(f"replicate count B must be >= 1, got {B}")
    if not 0.0 < level < 1.0:
        raise DomainError(f"confidence level must lie in (0, 1), got {level}")
    B = int(B)
    counts = _catalog_counts(catalog)
    pubs = _universe(snapshots, counts)
    n_model = model_occupancy_from_measurements(snapshots, bot, K)
    n_unf = unfiltered_from_catalog(catalog, K)

    credit = snapshots.post_credit(bot, K)
    S = credit.shape[0]
    snap_cols = np.array([pubs.index(p) for p in snapshots.publishers], dtype=np.int64)
    cat_pubs = sorted(counts)
    cat_cols = np.array([pubs.index(p) for p in cat_pubs], dtype=np.int64)
    cat_counts = np.array([counts[p] for p in cat_pubs], dtype=np.float64)
    M = int(cat_counts.sum())
    shares = cat_counts / M

    boot = np.full((B, len(pubs)), np.nan)
    for r in range(B):
        rng = make_rng(seed, stream, r)
        draws = np.bincount(rng.integers(0, S, size=S), minlength=S)
        q = draws @ credit
        q_total = q.sum()
        cat = rng.multinomial(M, shares)
        n_u = np.zeros(len(pubs))
        n_u[cat_cols] = cat * K / M
        if q_total <= 0:
            continue
        n_m = np.zeros(len(pubs))
        n_m[snap_cols] = q * K / q_total
        boot[r] = n_m - n_u
    degenerate = int(np.isnan(boot[:, 0]).sum())
    if degenerate:
        log.warning("%d of %d replicates drew no posts at bot %r and were dropped", degenerate, B, bot)
    lo_q, hi_q = (1.0 - level) / 2.0, (1.0 + level) / 2.0
    mean = np.nanmean(boot, axis=0)
    lo = np.nanquantile(boot, lo_q, axis=0, method="linear")
    hi = np.nanquantile(boot, hi_q, axis=0, method="linear")

    rows = []
    for c, pub in enumerate(pubs):
        m = n_model.get(pub, Fraction(0))
        u = n_unf.get(pub, Fraction(0))
        note = ""
        if pub not in counts:
            note = NOT_IN_CATALOG
            log.warning("publisher %r appears in snapshots but not in the catalog", pub)
        rows.append(
            BiasRow(
                bot_id=bot,
                publisher_id=pub,
                K=K,
                N_model=m,
                N_unfiltered=u,
                bias=m - u,
                boot_mean=float(mean[c]),
                ci_low=float(lo[c]),
                ci_high=float(hi[c]),
                replicates=B,
                level=float(level),
                note=note,
            )
        )
    return rows


def validation_scatter(snapshots: SnapshotSet, K: int = 1) -> ScatterTable:
    """Pair measured and model-predicted occupancy for each (bot, publisher)
    seen at that bot. Bots whose top K is always empty are skipped."""
    K = _check_K(K)
    rows = []
    for bot in snapshots.bot_ids:
        S = snapshots.n_snapshots(bot)
        I = impressions(snapshots, bot, K)
        try:
            n_model = model_occupancy_from_measurements(snapshots, bot, K)
        except DegenerateDatasetError:
            continue
        for j, pub in enumerate(snapshots.publishers):
            if I[j] == 0:
                continue
            rows.append(ScatterRow(bot, pub, K, Fraction(int(I[j]), S), n_model[pub]))
    return ScatterTable(rows)
