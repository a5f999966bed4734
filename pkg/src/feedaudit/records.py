"""Core records: published posts, feed snapshots and snapshot datasets.

Timestamps are integer nanoseconds since the Unix epoch (UTC).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import ValidationError

__all__ = ["PostRecord", "SnapshotEntry", "Snapshot", "SnapshotSet"]


@dataclass(frozen=True, slots=True)
class PostRecord:
    post_id: str
    publisher_id: str
    publication_time: int


@dataclass(frozen=True, slots=True)
class SnapshotEntry:
    position: int
    post_id: str
    publisher_id: str
    publication_time: int
    likes: Optional[int] = None
    shares: Optional[int] = None


@dataclass(frozen=True, slots=True)
class Snapshot:
    bot_id: str
    snapshot_time: int
    entries: tuple[SnapshotEntry, ...]

    def __post_init__(self):
        seen = set()
        for k, entry in enumerate(self.entries, start=1):
            if entry.position != k:
                raise ValidationError(
                    f"positions must run 1..n in order; expected {k}, got {entry.position}", field="position"
                )
            if entry.post_id in seen:
                raise ValidationError(f"duplicate post_id {entry.post_id!r} within snapshot", field="post_id")
            seen.add(entry.post_id)


_MISSING = -1


class _Subset(Sequence):
    """Read-only view of ``base`` restricted to the positions in ``index``."""

    def __init__(self, base: Sequence, index: np.ndarray):
        self._base = base
        self._index = index

    def __len__(self):
        return len(self._index)

    def __getitem__(self, k):
        if isinstance(k, slice):
            return [self._base[int(i)] for i in self._index[k]]
        return self._base[int(self._index[k])]


@dataclass(frozen=True)
class _BotColumns:
    times: np.ndarray  # (S,) int64
    posts: np.ndarray  # (S, L) int64 index into the post table, -1 padded
    likes: np.ndarray  # (S, L) int64, -1 when absent
    shares: np.ndarray  # (S, L) int64, -1 when absent

    @property
    def n_snapshots(self) -> int:
        return len(self.times)


class SnapshotSet:
    """Immutable collection of snapshots grouped by bot.

    Stored column-wise: every bot owns a padded matrix of post indices
    (rows are snapshots sorted by time, columns are positions) that refers
    to a shared post table. ``snapshots(bot)`` rebuilds record objects.
    """

    def __init__(self, post_ids, post_publishers, post_times, publishers, bots):
        self._post_ids: Sequence[str] = post_ids if isinstance(post_ids, Sequence) else list(post_ids)
        self._post_publisher = np.asarray(post_publishers, dtype=np.int64)
        self._post_time = np.asarray(post_times, dtype=np.int64)
        self.publishers: tuple[str, ...] = tuple(publishers)
        self._bots: dict[str, _BotColumns] = dict(bots)
        self.bot_ids: tuple[str, ...] = tuple(sorted(self._bots))
        self._cache: dict = {}
        if not self._bots:
            raise ValidationError("no snapshots")

    # -- construction -----------------------------------------------------

    @classmethod
    def from_snapshots(cls, snapshots: Iterable[Snapshot]) -> "SnapshotSet":
        post_index: dict[str, int] = {}
        post_pub: list[str] = []
        post_time: list[int] = []
        grouped: dict[str, list[Snapshot]] = {}
        for snap in snapshots:
            grouped.setdefault(snap.bot_id, []).append(snap)
            for e in snap.entries:
                k = post_index.get(e.post_id)
                if k is None:
                    post_index[e.post_id] = len(post_pub)
                    post_pub.append(e.publisher_id)
                    post_time.append(e.publication_time)
                elif post_pub[k] != e.publisher_id or post_time[k] != e.publication_time:
                    raise ValidationError(
                        f"post {e.post_id!r} appears with conflicting publisher or publication_time",
                        field="post_id",
                    )
        if not grouped:
            raise ValidationError("no snapshots")
        publishers = sorted(set(post_pub))
        pub_code = {p: c for c, p in enumerate(publishers)}
        bots = {}
        for bot, snaps in grouped.items():
            snaps = sorted(snaps, key=lambda s: s.snapshot_time)
            width = max((len(s.entries) for s in snaps), default=0)
            shape = (len(snaps), width)
            posts = np.full(shape, _MISSING, dtype=np.int64)
            likes = np.full(shape, _MISSING, dtype=np.int64)
            shares = np.full(shape, _MISSING, dtype=np.int64)
            for r, s in enumerate(snaps):
                for c, e in enumerate(s.entries):
                    posts[r, c] = post_index[e.post_id]
                    if e.likes is not None:
                        likes[r, c] = e.likes
                    if e.shares is not None:
                        shares[r, c] = e.shares
            times = np.array([s.snapshot_time for s in snaps], dtype=np.int64)
            bots[bot] = _BotColumns(times, posts, likes, shares)
        return cls(
            list(post_index),
            [pub_code[p] for p in post_pub],
            post_time,
            publishers,
            bots,
        )

    @classmethod
    def from_columns(
        cls,
        post_ids: Sequence[str],
        post_publisher_ids: Sequence[str],
        post_times: np.ndarray,
        bot_columns: dict[str, tuple[np.ndarray, np.ndarray]],
    ) -> "SnapshotSet":
        """Build from a post table and per-bot ``(times, post_matrix)`` pairs.

        Post and publisher tables are compacted to what the snapshots
        reference, so the result equals one read back from a file.
        Time order within each post matrix row must be newest first.
        """
        used = np.zeros(len(post_ids), dtype=bool)
        for times, posts in bot_columns.values():
            used[posts[posts >= 0]] = True
        kept = np.flatnonzero(used)
        remap = np.full(len(post_ids), _MISSING, dtype=np.int64)
        remap[kept] = np.arange(len(kept))
        kept_pubs = np.asarray(post_publisher_ids, dtype=str)[kept] if len(kept) else np.empty(0, dtype=str)
        publishers, codes = np.unique(kept_pubs, return_inverse=True)
        bots = {}
        for bot, (times, posts) in bot_columns.items():
            order = np.argsort(times, kind="stable")
            times = np.asarray(times, dtype=np.int64)[order]
            posts = posts[order]
            mapped = np.where(posts >= 0, remap[np.maximum(posts, 0)], _MISSING)
            blank = np.full(mapped.shape, _MISSING, dtype=np.int64)
            bots[bot] = _BotColumns(times, mapped, blank, blank.copy())
        return cls(
            post_ids if len(kept) == len(post_ids) else _Subset(post_ids, kept),
            codes.reshape(-1),
            np.asarray(post_times, dtype=np.int64)[kept],
            [str(p) for p in publishers],
            bots,
        )

    # -- access -------------------------------------------------------------

    def _columns(self, bot: str) -> _BotColumns:
        try:
            return self._bots[bot]
        except KeyError:
            raise KeyError(f"unknown bot {bot!r}") from None

    def n_snapshots(self, bot: str) -> int:
        return self._columns(bot).n_snapshots

    def snapshots(self, bot: str) -> list[Snapshot]:
        cols = self._columns(bot)
        out = []
        for r in range(cols.n_snapshots):
            entries = []
            for c in range(cols.posts.shape[1]):
                p = int(cols.posts[r, c])
                if p < 0:
                    break
                likes = int(cols.likes[r, c])
                shares = int(cols.shares[r, c])
                entries.append(
                    SnapshotEntry(
                        position=c + 1,
                        post_id=self._post_ids[p],
                        publisher_id=self.publishers[self._post_publisher[p]],
                        publication_time=int(self._post_time[p]),
                        likes=None if likes < 0 else likes,
                        shares=None if shares < 0 else shares,
                    )
                )
            out.append(Snapshot(bot, int(cols.times[r]), tuple(entries)))
        return out

    def __iter__(self):
        for bot in self.bot_ids:
            yield from self.snapshots(bot)

    def __len__(self) -> int:
        return sum(c.n_snapshots for c in self._bots.values())

    def __eq__(self, other) -> bool:
        if not isinstance(other, SnapshotSet):
            return NotImplemented
        return self.bot_ids == other.bot_ids and all(
            self.snapshots(b) == other.snapshots(b) for b in self.bot_ids
        )

    def __repr__(self) -> str:
        counts = ", ".join(f"{b}: {self.n_snapshots(b)}" for b in self.bot_ids)
        return f"SnapshotSet({{{counts}}}, publishers={len(self.publishers)})"

    # -- numeric views used by metrics and bias -------------------------------

    def top_k(self, bot: str, K: int) -> tuple[np.ndarray, np.ndarray]:
        """Post and publisher codes in positions 1..K, shape (S, K), -1 padded."""
        key = ("top", bot, K)
        if key not in self._cache:
            cols = self._columns(bot)
            posts = np.full((cols.n_snapshots, K), _MISSING, dtype=np.int64)
            width = min(K, cols.posts.shape[1])
            posts[:, :width] = cols.posts[:, :width]
            if len(self._post_publisher):
                pubs = np.where(posts >= 0, self._post_publisher[np.maximum(posts, 0)], _MISSING)
            else:
                pubs = posts.copy()
            self._cache[key] = (posts, pubs)
        return self._cache[key]

    def publisher_counts(self, bot: str, K: int) -> np.ndarray:
        """Per-snapshot count of each publisher's posts in the top K, shape (S, J)."""
        key = ("counts", bot, K)
        if key not in self._cache:
            _, pubs = self.top_k(bot, K)
            S, J = pubs.shape[0], len(self.publishers)
            rows = np.broadcast_to(np.arange(S)[:, None], pubs.shape)
            valid = pubs >= 0
            flat = rows[valid] * J + pubs[valid]
            self._cache[key] = np.bincount(flat, minlength=S * J).reshape(S, J)
        return self._cache[key]

    def post_credit(self, bot: str, K: int) -> np.ndarray:
        """Per-snapshot share of each publisher's distinct top-K posts, shape (S, J).

        A post shown in n snapshots credits 1/n to each of them, so column
        sums are the distinct-post counts and every snapshot carries its own
        weight when snapshots are resampled.
        """
        key = ("credit", bot, K)
        if key not in self._cache:
            posts, pubs = self.top_k(bot, K)
            S, J = posts.shape[0], len(self.publishers)
            valid = posts >= 0
            flat_posts = posts[valid]
            appearances = np.bincount(flat_posts, minlength=len(self._post_ids))
            rows = np.broadcast_to(np.arange(S)[:, None], posts.shape)[valid]
            self._cache[key] = np.bincount(
                rows * J + pubs[valid], weights=1.0 / appearances[flat_posts], minlength=S * J
            ).reshape(S, J)
        return self._cache[key]

    def distinct_posts(self, bot: str, K: int) -> np.ndarray:
        """Distinct posts of each publisher seen in the top K, shape (J,)."""
        key = ("distinct", bot, K)
        if key not in self._cache:
            posts, pubs = self.top_k(bot, K)
            valid = posts >= 0
            unique, first = np.unique(posts[valid], return_index=True)
            self._cache[key] = np.bincount(pubs[valid][first], minlength=len(self.publishers))
        return self._cache[key]
