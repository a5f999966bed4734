import numpy as np
import pytest

from conftest import simulate
from feedaudit.errors import ConfigError, DomainError
from feedaudit.metrics import occupancy
from feedaudit.sim import SimConfig, generate_event_times, make_rng, run_simulation


def test_same_seed_same_result():
    a = simulate([1.0, 2.0], [0.5, 1.0], K=3, S=200)
    b = simulate([1.0, 2.0], [0.5, 1.0], K=3, S=200)
    assert a.snapshot_set == b.snapshot_set
    assert a.catalog == b.catalog
    c = simulate([1.0, 2.0], [0.5, 1.0], K=3, S=200, seed=7)
    assert c.snapshot_set != a.snapshot_set


def test_sole_publisher_fills_every_snapshot():
    res = simulate([3.0], K=4, S=50)
    for snap in res.snapshots:
        assert len(snap.entries) == 4
        assert {e.publisher_id for e in snap.entries} == {"P0"}


def test_two_equal_publishers_split_the_top():
    res = simulate([1.0, 1.0], K=1, S=10_000)
    assert float(occupancy(res.snapshot_set, "bot", "P0", 1)) == pytest.approx(0.5, abs=0.015)


def test_thinning_scales_the_effective_rate():
    # one publisher at rate 2 kept with p=0.5 against a sole rival of rate 1:
    # effective rates 1 and 1, so each holds half the feed
    res = simulate([2.0, 1.0], [0.5, 1.0], K=20, S=100_000, interval=1.0)
    N = float(occupancy(res.snapshot_set, "bot", "P0", 20)) / 20
    assert N == pytest.approx(0.5, rel=0.02)


def test_event_times_have_the_requested_rate():
    counts = [len(generate_event_times(5.0, 10_000.0, make_rng(s))) for s in range(10)]
    assert np.mean(counts) / 10_000.0 == pytest.approx(5.0, rel=0.01)


def test_event_times_are_increasing_and_bounded():
    t = generate_event_times(2.0, 100.0, make_rng(1))
    assert np.all(np.diff(t) > 0)
    assert t[0] > 0 and t[-1] <= 100.0
    assert len(generate_event_times(0.0, 100.0, make_rng(1))) == 0
    with pytest.raises(DomainError):
        generate_event_times(-1.0, 10.0, make_rng(1))
    with pytest.raises(DomainError):
        generate_event_times(1.0, 0.0, make_rng(1))


def test_snapshots_are_newest_first():
    res = simulate([1.0, 1.5, 0.5], [1.0, 0.3], K=6, S=100)
    for snap in res.snapshots:
        times = [e.publication_time for e in snap.entries]
        assert times == sorted(times, reverse=True)
        assert all(t <= snap.snapshot_time for t in times)
        assert [e.position for e in snap.entries] == list(range(1, len(times) + 1))


def test_rejected_publisher_never_appears():
    res = simulate([1.0, 1.0], [0.0, 1.0], K=5, S=100)
    assert all(e.publisher_id == "P1" for s in res.snapshots for e in s.entries)


def test_full_snapshot_counts_sum_to_K():
    K = 5
    res = simulate([0.8, 0.9, 1.0, 1.1, 1.2], K=K, S=500)
    counts = res.snapshot_set.publisher_counts("bot", K)
    assert np.all(counts.sum(axis=1) == K)


def test_bots_share_one_arrival_stream():
    res = simulate([1.0, 1.0], bots=[("a", {}), ("b", {})], K=2, S=50)
    assert res.snapshot_set.snapshots("a") == [
        type(s)("a", s.snapshot_time, s.entries) for s in res.snapshot_set.snapshots("b")
    ]


def test_truth_rows():
    res = simulate([2.0, 1.0], [0.5], K=1, S=10)
    truth = {(t.bot_id, t.publisher_id): t for t in res.truth}
    assert truth[("bot", "P0")].effective_rate == 1.0
    assert truth[("bot", "P1")].acceptance == 1.0


def test_default_warmup():
    config = SimConfig([("A", 1.0), ("B", 1.0)], [("x", {"A": 0.5}), ("y", {})], 4, 1.0, 10)
    assert config.resolved_warmup == pytest.approx(10 * 4 / 1.5)


@pytest.mark.parametrize(
    "kwargs, message",
    [
        (dict(publishers=[]), "publisher"),
        (dict(publishers=[("A", -1.0)]), "rate"),
        (dict(publishers=[("A", 1.0), ("A", 2.0)]), "unique"),
        (dict(K=0), "K"),
        (dict(snapshot_interval=0.0), "snapshot_interval"),
        (dict(snapshot_count=0), "snapshot_count"),
        (dict(warmup=-1.0), "warmup"),
        (dict(seed=-1), "seed"),
        (dict(bots=[("b", {"Z": 0.5})]), "unknown publisher"),
        (dict(bots=[("b", {"A": 1.5})]), "acceptance"),
        (dict(bots=[("b", {"A": 0.0})]), "accepts no publisher"),
    ],
)
def test_config_errors(kwargs, message):
    base = dict(publishers=[("A", 1.0)], bots=[("b", {})], K=1, snapshot_interval=1.0, snapshot_count=1)
    base.update(kwargs)
    with pytest.raises(ConfigError, match=message):
        run_simulation(SimConfig(**base))


def test_config_from_dict():
    config = SimConfig.from_dict(
        {
            "publishers": [{"id": "A", "rate": 1}, {"id": "B", "rate": 2}],
            "bots": [{"id": "b1", "acceptance": {"A": 0.5}}],
            "K": 2,
            "snapshot_interval": 5,
            "snapshot_count": 3,
        }
    )
    assert config.acceptance("b1", "A") == 0.5
    assert config.acceptance("b1", "B") == 1.0
    with pytest.raises(ConfigError, match="malformed"):
        SimConfig.from_dict({"publishers": []})
