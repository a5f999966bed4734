from pathlib import Path

import pytest

from feedaudit.records import PostRecord, Snapshot, SnapshotEntry, SnapshotSet
from feedaudit.sim import SimConfig, run_simulation

DATA = Path(__file__).parent / "data"
SEC = 1_000_000_000


def entry(pos, post, pub, t, **kw):
    return SnapshotEntry(pos, post, pub, t * SEC, **kw)


@pytest.fixture
def data_dir():
    return DATA


@pytest.fixture
def hand_set():
    """Two snapshots of one bot: tops (A, B), second positions (A, A)."""
    return SnapshotSet.from_snapshots(
        [
            Snapshot("b1", 10 * SEC, (entry(1, "a1", "A", 9), entry(2, "a0", "A", 8))),
            Snapshot("b1", 20 * SEC, (entry(1, "b1", "B", 19), entry(2, "a1", "A", 9))),
        ]
    )


@pytest.fixture
def hand_catalog():
    return [
        PostRecord("a0", "A", 8 * SEC),
        PostRecord("a1", "A", 9 * SEC),
        PostRecord("b0", "B", 15 * SEC),
        PostRecord("b1", "B", 19 * SEC),
    ]


def simulate(rates, acceptance=None, K=1, S=10_000, interval=10.0, seed=2018, bots=None, warmup=None):
    """Run a one-bot (or multi-bot) simulation with publishers P0, P1, ..."""
    publishers = [(f"P{j}", r) for j, r in enumerate(rates)]
    if bots is None:
        acc = {f"P{j}": p for j, p in enumerate(acceptance or [])}
        bots = [("bot", acc)]
    return run_simulation(SimConfig(publishers, bots, K, interval, S, warmup=warmup, seed=seed))
