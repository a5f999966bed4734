"""Analytical models of a size-K News Feed.

FIFO closed forms (visibility and Little's-law occupancy), the unfiltered
baseline, a CTMC solver for the topmost-post position used as an
independent oracle, and the TTL (M/G/infinity) variant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .errors import DomainError, NumericalError

__all__ = [
    "FeedRates",
    "CreationRates",
    "StationaryDistribution",
    "fifo_visibility",
    "fifo_occupancy",
    "unfiltered_occupancy",
    "ctmc_stationary",
    "ttl_visibility",
    "ttl_occupancy",
    "ttl_timer_for_capacity",
]

# Above this size the CTMC is solved with a sparse LU instead of a dense solve.
DENSE_CTMC_LIMIT = 2000
MAX_CONDITION = 1e12


def _check_rates(per_publisher: Mapping[str, float], what: str) -> float:
    total = 0.0
    for pub, rate in per_publisher.items():
        if not math.isfinite(rate) or rate < 0:
            raise DomainError(f"{what} rate for publisher {pub!r} must be finite and >= 0, got {rate}")
        total += rate
    return total


@dataclass(frozen=True)
class FeedRates:
    """Effective arrival rates of each publisher into one user's feed."""

    per_publisher: Mapping[str, float]
    total: float = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        computed = _check_rates(self.per_publisher, "arrival")
        if self.total is None:
            object.__setattr__(self, "total", computed)
        elif not math.isclose(self.total, computed, rel_tol=1e-12, abs_tol=0.0):
            raise DomainError(f"total {self.total} does not equal the sum of per-publisher rates {computed}")

    def rest(self, publisher: str) -> float:
        """Arrival rate of every publisher other than ``publisher``."""
        return self.total - self.per_publisher[publisher]


@dataclass(frozen=True)
class CreationRates(FeedRates):
    """Post creation rates of each publisher (the unfiltered rates)."""


@dataclass(frozen=True)
class StationaryDistribution:
    """Stationary law of the topmost position of a publisher's posts.

    ``probs[x - 1]`` is the probability that the topmost post sits at
    position ``x``; the last entry is the fictitious position K+1, meaning
    the publisher is absent from the feed.
    """

    probs: np.ndarray
    condition: float = float("nan")

    @property
    def K(self) -> int:
        return len(self.probs) - 1

    @property
    def visibility(self) -> float:
        return 1.0 - float(self.probs[-1])


def _check_fifo_args(lambda_j, lambda_total, K):
    if not lambda_total > 0:
        raise DomainError(f"lambda_total must be > 0, got {lambda_total}")
    if lambda_j < 0:
        raise DomainError(f"lambda_j must be >= 0, got {lambda_j}")
    if lambda_j > lambda_total:
        raise DomainError(f"lambda_j must be <= lambda_total ({lambda_total}), got {lambda_j}")
    if int(K) != K or K < 1:
        raise DomainError(f"K must be an integer >= 1, got {K}")


def fifo_visibility(lambda_j: float, lambda_total: float, K: int) -> float:
    """Probability that at least one post of publisher j is in the top K.

    A post of j leaves the feed after K arrivals from other publishers with
    no arrival of j in between, so the visibility is
    ``1 - ((lambda_total - lambda_j) / lambda_total) ** K``.
    """
    _check_fifo_args(lambda_j, lambda_total, K)
    if K == 1:
        # Same value as the general form; keeps visibility == occupancy bit-exact.
        return lambda_j / lambda_total
    ratio = (lambda_total - lambda_j) / lambda_total
    return 1.0 - ratio ** int(K)


def fifo_occupancy(lambda_j: float, lambda_total: float, K: int) -> float:
    """Mean number of publisher j's posts in the top K (Little's law).

    Every post stays for K arrivals, i.e. ``K / lambda_total`` time units,
    hence ``N = lambda_j * K / lambda_total``.
    """
    _check_fifo_args(lambda_j, lambda_total, K)
    # ratio first: a share <= 1 keeps N <= K under rounding
    return K * (lambda_j / lambda_total)


def unfiltered_occupancy(creation: CreationRates, K: int) -> dict[str, float]:
    """FIFO occupancy of every publisher when no post is filtered out."""
    if not creation.total > 0:
        raise DomainError("unfiltered occupancy needs at least one publisher with a positive creation rate")
    return {pub: fifo_occupancy(rate, creation.total, K) for pub, rate in creation.per_publisher.items()}


def _ctmc_matrix(a: float, r: float, K: int):
    """Transposed uniformised generator with the last balance row replaced by
    the normalisation constraint. ``a`` and ``r`` are rates divided by the total."""
    n = K + 1
    if n <= DENSE_CTMC_LIMIT:
        Q = np.zeros((n, n))
        Q[1:, 0] += a
        idx = np.arange(K)
        Q[idx, idx + 1] += r
        Q[np.diag_indices(n)] -= Q.sum(axis=1)
        A = Q.T.copy()
        A[-1, :] = 1.0
        return A
    rows, cols, vals = [], [], []
    # A = Q^T: A[col, row] = Q[row, col]
    rows += [0] * K
    cols += list(range(1, n))
    vals += [a] * K
    rows += list(range(1, n))
    cols += list(range(K))
    vals += [r] * K
    diag = np.full(n, -(a + r))
    diag[0] = -r
    diag[-1] = -a
    rows += list(range(n))
    cols += list(range(n))
    vals += list(diag)
    rows, cols, vals = np.array(rows), np.array(cols), np.array(vals)
    keep = rows != n - 1
    rows = np.concatenate([rows[keep], np.full(n, n - 1)])
    cols = np.concatenate([cols[keep], np.arange(n)])
    vals = np.concatenate([vals[keep], np.ones(n)])
    return scipy.sparse.csc_matrix((vals, (rows, cols)), shape=(n, n))


def ctmc_stationary(lambda_j: float, lambda_rest: float, K: int) -> StationaryDistribution:
    """Solve the balance equations of the topmost-position chain.

    States are positions 1..K+1 of publisher j's topmost post. From any
    state an arrival of j (rate ``lambda_j``) moves the chain to 1; an
    arrival from anyone else (rate ``lambda_rest``) moves it from x to x+1,
    and K+1 is kept. The chain is uniformised by the total rate and solved
    directly, with the last balance equation replaced by normalisation.

    Raises
    ------
    DomainError
        Both rates are zero, a rate is negative, or K < 1.
    NumericalError
        The system is singular or its 1-norm condition number exceeds 1e12.
    """
    if lambda_j < 0 or lambda_rest < 0:
        raise DomainError(f"rates must be >= 0, got lambda_j={lambda_j}, lambda_rest={lambda_rest}")
    total = lambda_j + lambda_rest
    if not total > 0:
        raise DomainError("lambda_j and lambda_rest cannot both be zero")
    if int(K) != K or K < 1:
        raise DomainError(f"K must be an integer >= 1, got {K}")
    K = int(K)
    a, r = lambda_j / total, lambda_rest / total
    A = _ctmc_matrix(a, r, K)
    b = np.zeros(K + 1)
    b[-1] = 1.0
    if scipy.sparse.issparse(A):
        try:
            lu = scipy.sparse.linalg.splu(A)
        except RuntimeError as exc:
            raise NumericalError(f"singular CTMC system: {exc}", condition=math.inf) from exc
        inv = scipy.sparse.linalg.LinearOperator(
            A.shape, matvec=lu.solve, rmatvec=lambda v: lu.solve(v, trans="T")
        )
        cond = scipy.sparse.linalg.onenormest(A) * scipy.sparse.linalg.onenormest(inv)
        probs = lu.solve(b)
    else:
        try:
            lu_piv = scipy.linalg.lu_factor(A, check_finite=False)
        except (ValueError, np.linalg.LinAlgError) as exc:
            raise NumericalError(f"singular CTMC system: {exc}", condition=math.inf) from exc
        cond = np.linalg.cond(A, 1)
        probs = scipy.linalg.lu_solve(lu_piv, b)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise NumericalError(f"CTMC system ill-conditioned (1-norm condition ~ {cond:.3g})", condition=cond)
    # Round-off can leave tiny negatives.
    probs = np.clip(probs, 0.0, None)
    probs /= probs.sum()
    return StationaryDistribution(probs=probs, condition=float(cond))


def _check_ttl(creation_j, timer):
    if not creation_j >= 0:
        raise DomainError(f"creation rate must be >= 0, got {creation_j}")
    if not timer >= 0:
        raise DomainError(f"timer must be >= 0, got {timer}")


def ttl_visibility(creation_j: float, timer: float) -> float:
    """Probability that publisher j has a live post in a TTL feed.

    Posts arrive as a Poisson stream and each lives ``timer`` units, so the
    feed is an M/G/infinity queue that is empty with probability
    ``exp(-creation_j * timer)``.
    """
    _check_ttl(creation_j, timer)
    return -math.expm1(-creation_j * timer)


def ttl_occupancy(creation_j: float, timer: float) -> float:
    """Mean number of publisher j's posts in a TTL feed (Little's law)."""
    _check_ttl(creation_j, timer)
    return creation_j * timer


def ttl_timer_for_capacity(creation: CreationRates, K: int) -> float:
    """Common timer under which the expected feed content equals K posts."""
    if not creation.total > 0:
        raise DomainError("timer needs a positive total creation rate")
    if int(K) != K or K < 1:
        raise DomainError(f"K must be an integer >= 1, got {K}")
    return K / creation.total
