"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line."""

import math
import time
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import simulate
from feedaudit.bias import bias, bootstrap_bias
from feedaudit.ingest import (
    Report,
    generate_synthetic,
    read_catalog,
    read_report,
    read_snapshots,
    write_catalog,
    write_report,
    write_snapshots,
)
from feedaudit.metrics import exposure_table, occupancy, occupancy_curve, visibility
from feedaudit.model import (
    CreationRates,
    ctmc_stationary,
    fifo_occupancy,
    fifo_visibility,
    ttl_occupancy,
    ttl_timer_for_capacity,
    ttl_visibility,
)
from feedaudit.sim import SimConfig

BALANCED = [0.8, 0.9, 1.0, 1.1, 1.2]
SEED = 2018


@pytest.fixture
def verdict(capsys):
    def report(number, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {number}: {'PASS' if ok else 'FAIL'} | {detail}")
        assert ok, detail

    return report


def test_criterion_01_closed_form_matches_ctmc(verdict):
    rng = np.random.default_rng(SEED)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(200):
        lam_j, lam_rest = rng.uniform(0.01, 10.0, size=2)
        K = int(rng.integers(1, 21))
        dist = ctmc_stationary(lam_j, lam_rest, K)
        worst = max(worst, abs(fifo_visibility(lam_j, lam_j + lam_rest, K) - (1.0 - dist.probs[K])))
    elapsed = time.perf_counter() - start
    verdict(1, worst < 1e-10 and elapsed < 1.0, f"max |diff| = {worst:.2e}, {elapsed:.3f} s for 200 instances")


def test_criterion_02_simulation_matches_closed_form(verdict):
    start = time.perf_counter()
    total = sum(BALANCED)
    worst = (0.0, "")
    for K in (1, 5):
        ds = simulate(BALANCED, K=K, S=10_000, seed=SEED).snapshot_set
        for j, rate in enumerate(BALANCED):
            pub = f"P{j}"
            for name, measured, expected in (
                ("N", occupancy(ds, "bot", pub, K), fifo_occupancy(rate, total, K)),
                ("pi", visibility(ds, "bot", pub, K), fifo_visibility(rate, total, K)),
            ):
                rel = abs(float(measured) / expected - 1.0)
                if rel > worst[0]:
                    worst = (rel, f"{name} of {pub} at K={K}")
    elapsed = time.perf_counter() - start
    verdict(
        2,
        worst[0] < 0.02 and elapsed < 30.0,
        f"worst relative error {worst[0]:.2%} ({worst[1]}), {elapsed:.1f} s",
    )


def _test_datasets(data_dir):
    yield "hand", read_snapshots(data_dir / "hand_snapshots.jsonl"), 2
    for K in (1, 3, 8):
        yield f"fifo K={K}", simulate(BALANCED, K=K, S=2_000, seed=K).snapshot_set, K
        yield f"thinned K={K}", simulate([1.0, 1.0, 2.0], [0.25, 1.0, 0.5], K=K, S=2_000, seed=K).snapshot_set, K


def test_criterion_03_conservation(verdict, data_dir):
    violations, checked = 0, 0
    for _, ds, K in _test_datasets(data_dir):
        for bot in ds.bot_ids:
            counts = ds.publisher_counts(bot, K)
            full = (ds.top_k(bot, K)[0] >= 0).all(axis=1)
            violations += int((counts[full].sum(axis=1) != K).sum())
        for k in range(1, K + 1):
            for row in exposure_table(ds, k):
                checked += 1
                pi, N = row.visibility, row.occupancy
                if not (pi <= N <= k * pi and N / k <= pi):
                    violations += 1
    verdict(3, violations == 0, f"{violations} violations over {checked} rows and all full snapshots")


def test_criterion_04_k1_identity(verdict, data_dir):
    mismatches, checked = 0, 0
    for _, ds, _ in _test_datasets(data_dir):
        for row in exposure_table(ds, 1):
            checked += 1
            mismatches += row.visibility != row.occupancy
    rng = np.random.default_rng(SEED)
    for lam_j, lam in rng.uniform(0, 5, size=(200, 2)):
        lam_j, lam = min(lam_j, lam), max(lam_j, lam)
        if lam > 0:
            checked += 1
            mismatches += fifo_visibility(lam_j, lam, 1) != fifo_occupancy(lam_j, lam, 1)
    verdict(4, mismatches == 0, f"{mismatches} mismatches over {checked} comparisons")


def test_criterion_05_null_bias(verdict):
    res = simulate(BALANCED, K=1, S=10_000, seed=SEED)
    b = bias(res.snapshot_set, res.catalog, "bot", 1)
    worst = max(abs(float(v)) for v in b.values())
    total = abs(float(sum(b.values())))
    verdict(5, worst < 0.02 and total <= 1e-10, f"max |b| = {worst:.4f}, |sum b| = {total:.1e}")


def test_criterion_06_known_bias_recovery(verdict):
    res = simulate([1.0, 1.0], [1.0, 0.25], K=1, S=10_000, seed=SEED)
    b1 = float(bias(res.snapshot_set, res.catalog, "bot", 1)["P0"])
    verdict(6, abs(b1 - 0.3) <= 0.02, f"b1 = {b1:.4f} against +0.3")


@pytest.mark.slow
def test_criterion_07_bootstrap_coverage(verdict):
    start = time.perf_counter()
    covered = 0
    n = 200
    for seed in range(n):
        res = simulate([1.0, 1.0], [1.0, 0.25], K=1, S=2_000, seed=seed)
        rows = bootstrap_bias(res.snapshot_set, res.catalog, "bot", K=1, B=1000, level=0.95, seed=seed)
        row = next(r for r in rows if r.publisher_id == "P0")
        covered += row.ci_low <= 0.3 <= row.ci_high
    elapsed = time.perf_counter() - start
    rate = covered / n
    verdict(7, 0.93 <= rate <= 0.99 and elapsed < 300, f"coverage {covered}/{n} = {rate:.1%}, {elapsed:.0f} s")


@pytest.mark.slow
def test_criterion_08_fifo_flatness(verdict):
    ds = simulate(BALANCED, K=20, S=500_000, interval=2.0, seed=SEED).snapshot_set
    curve = {}
    for point in occupancy_curve(ds, "bot", 20):
        curve.setdefault(point.publisher_id, []).append(float(point.normalized_occupancy))
    spread = {pub: (max(v) - min(v)) / (sum(v) / len(v)) for pub, v in curve.items()}
    pub, worst = max(spread.items(), key=lambda kv: kv[1])
    verdict(8, worst < 0.02, f"max relative variation over K=1..20 is {worst:.2%} ({pub})")


_ttl_failures = []


@settings(max_examples=300, deadline=None)
@given(
    rates=st.lists(st.floats(1e-3, 1e3), min_size=1, max_size=20),
    K=st.integers(1, 200),
    T=st.floats(0, 1e3),
)
def _ttl_property(rates, K, T):
    creation = CreationRates({f"p{j}": r for j, r in enumerate(rates)})
    timer = ttl_timer_for_capacity(creation, K)
    total = math.fsum(ttl_occupancy(r, timer) for r in rates)
    if abs(total - K) > 1e-12 * max(1, K):
        _ttl_failures.append(f"sum {total!r} != K={K}")
    for r in rates:
        if ttl_visibility(r, T) > min(1.0, ttl_occupancy(r, T)):
            _ttl_failures.append(f"visibility above occupancy at rate {r}, T {T}")


def test_criterion_09_ttl_consistency(verdict):
    _ttl_failures.clear()
    _ttl_property()
    verdict(9, not _ttl_failures, f"{len(_ttl_failures)} violations over 300 random rate vectors")


def test_criterion_10_determinism_and_round_trip(verdict, tmp_path, data_dir):
    problems = []
    config = SimConfig([(f"P{j}", r) for j, r in enumerate(BALANCED)], [("a", {}), ("b", {"P1": 0.3})], 3, 5.0, 200, seed=SEED)
    generate_synthetic(config, tmp_path / "one")
    generate_synthetic(config, tmp_path / "two")
    for name in ("snapshots.jsonl", "catalog.jsonl", "truth.csv", "manifest.json"):
        if (tmp_path / "one" / name).read_bytes() != (tmp_path / "two" / name).read_bytes():
            problems.append(f"{name} differs between runs")

    snaps = read_snapshots(tmp_path / "one" / "snapshots.jsonl")
    write_snapshots(snaps, tmp_path / "s.jsonl")
    if read_snapshots(tmp_path / "s.jsonl") != snaps:
        problems.append("snapshot round trip")
    catalog = read_catalog(tmp_path / "one" / "catalog.jsonl")
    write_catalog(catalog, tmp_path / "c.jsonl")
    if read_catalog(tmp_path / "c.jsonl") != catalog:
        problems.append("catalog round trip")
    report = read_report(tmp_path / "one" / "truth.csv")
    write_report(report, tmp_path / "r.csv")
    if read_report(tmp_path / "r.csv") != report:
        problems.append("report round trip")

    columns = ("bot_id", "publisher_id", "K", "occupancy", "visibility", "normalized_occupancy",
               "impressions", "unique_posts", "snapshots")
    hand = read_snapshots(data_dir / "hand_snapshots.jsonl")
    for K in (1, 2):
        out = tmp_path / f"hand_k{K}.csv"
        write_report(Report.from_records(columns, exposure_table(hand, K)), out)
        if out.read_bytes() != (data_dir / f"hand_metrics_k{K}.csv").read_bytes():
            problems.append(f"golden metrics K={K}")
    verdict(10, not problems, "; ".join(problems) or "byte-identical reruns, three round trips, golden metrics equal")
