"""Measured feed metrics computed from snapshot datasets.

All values are exact ratios (``fractions.Fraction``) of integer counts:

* effective rate    Q / S   (distinct posts seen in the top K per snapshot)
* occupancy         I / S   (impressions in the top K per snapshot)
* visibility        fraction of snapshots with at least one top-K post
* normalized occupancy  occupancy / K
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import DomainError
from .records import SnapshotSet

__all__ = [
    "ExposureRow",
    "CurvePoint",
    "effective_rate",
    "occupancy",
    "visibility",
    "exposure_table",
    "occupancy_curve",
]


@dataclass(frozen=True)
class ExposureRow:
    bot_id: str
    publisher_id: str
    K: int
    occupancy: Fraction
    visibility: Fraction
    normalized_occupancy: Fraction
    impressions: int
    unique_posts: int
    snapshots: int


@dataclass(frozen=True)
class CurvePoint:
    bot_id: str
    publisher_id: str
    K: int
    normalized_occupancy: Fraction


def _check_K(K):
    if isinstance(K, bool) or int(K) != K or K < 1:
        raise DomainError(f"K must be ≥ 1, got {K}")
    return int(K)


def _pub_code(snapshots: SnapshotSet, publisher: str):
    try:
        return snapshots.publishers.index(publisher)
    except ValueError:
        return None


def unique_posts(snapshots: SnapshotSet, bot: str, K: int) -> np.ndarray:
    """Distinct posts per publisher seen in the top K at ``bot``."""
    return snapshots.distinct_posts(bot, _check_K(K))


def impressions(snapshots: SnapshotSet, bot: str, K: int) -> np.ndarray:
    return snapshots.publisher_counts(bot, _check_K(K)).sum(axis=0)


def _visible_snapshots(snapshots: SnapshotSet, bot: str, K: int) -> np.ndarray:
    return (snapshots.publisher_counts(bot, _check_K(K)) > 0).sum(axis=0)


def effective_rate(snapshots: SnapshotSet, bot: str, publisher: str, K: int = 1) -> Fraction:
    """Distinct posts of ``publisher`` in the top K per snapshot at ``bot``."""
    K = _check_K(K)
    S = snapshots.n_snapshots(bot)
    j = _pub_code(snapshots, publisher)
    return Fraction(0) if j is None else Fraction(int(unique_posts(snapshots, bot, K)[j]), S)


def occupancy(snapshots: SnapshotSet, bot: str, publisher: str, K: int = 1) -> Fraction:
    """Mean number of ``publisher``'s posts in the top K at ``bot``."""
    K = _check_K(K)
    S = snapshots.n_snapshots(bot)
    j = _pub_code(snapshots, publisher)
    return Fraction(0) if j is None else Fraction(int(impressions(snapshots, bot, K)[j]), S)


def visibility(snapshots: SnapshotSet, bot: str, publisher: str, K: int = 1) -> Fraction:
    """Fraction of ``bot``'s snapshots showing ``publisher`` in the top K."""
    K = _check_K(K)
    S = snapshots.n_snapshots(bot)
    j = _pub_code(snapshots, publisher)
    return Fraction(0) if j is None else Fraction(int(_visible_snapshots(snapshots, bot, K)[j]), S)


def exposure_table(snapshots: SnapshotSet, K: int = 1, bots=None) -> list[ExposureRow]:
    """One row per (bot, publisher) over every publisher in the dataset."""
    K = _check_K(K)
    rows = []
    for bot in bots if bots is not None else snapshots.bot_ids:
        S = snapshots.n_snapshots(bot)
        I = impressions(snapshots, bot, K)
        Q = unique_posts(snapshots, bot, K)
        V = _visible_snapshots(snapshots, bot, K)
        for j, pub in enumerate(snapshots.publishers):
            N = Fraction(int(I[j]), S)
            rows.append(
                ExposureRow(
                    bot_id=bot,
                    publisher_id=pub,
                    K=K,
                    occupancy=N,
                    visibility=Fraction(int(V[j]), S),
                    normalized_occupancy=N / K,
                    impressions=int(I[j]),
                    unique_posts=int(Q[j]),
                    snapshots=S,
                )
            )
    return rows


def occupancy_curve(snapshots: SnapshotSet, bot: str, K_max: int) -> list[CurvePoint]:
    """Normalized occupancy of every publisher for K = 1..K_max.

    Positions missing from short snapshots count as empty, and the divisor
    is always K (not the observed snapshot length).
    """
    if isinstance(K_max, bool) or int(K_max) != K_max or K_max < 1:
        raise DomainError(f"K_max must be ≥ 1, got {K_max}")
    K_max = int(K_max)
    S = snapshots.n_snapshots(bot)
    _, pubs = snapshots.top_k(bot, K_max)
    J = len(snapshots.publishers)
    # per-position impression counts, then running totals over positions
    per_position = np.zeros((K_max, J), dtype=np.int64)
    for k in range(K_max):
        col = pubs[:, k]
        per_position[k] = np.bincount(col[col >= 0], minlength=J)
    cumulative = np.cumsum(per_position, axis=0)
    return [
        CurvePoint(bot, pub, k, Fraction(int(cumulative[k - 1, j]), S * k))
        for k in range(1, K_max + 1)
        for j, pub in enumerate(snapshots.publishers)
    ]
