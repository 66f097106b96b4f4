"""Pivot tables: the max-norm reduction through distances to reference points.

A pivot table stores d(x_j, p_i) for every datapoint x_j and pivot p_i.  For
a query q the value lb(x) = max_i |d(q, p_i) - d(x, p_i)| is a lower bound on
d(q, x) (each coordinate is 1-Lipschitz), so points with lb(x) >= eps can be
discarded without computing their true distance.  Tables are immutable after
build; concurrent queries are safe.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import domains
from .domains import Dataset, Domain, Point
from .rng import child_seed, generator

_LB_SLACK = 1e-9  # validation-only slack for the lower-bound assertion


@dataclass
class QueryStats:
    distance_computations: int
    candidates: int
    discarded: int
    true_hits: int


@dataclass(eq=False)
class PivotTable:
    dataset: Dataset
    pivots: list  # list[Point]
    table: np.ndarray  # (n, k) distances d(x_j, p_i)
    build_distance_computations: int

    @property
    def k(self) -> int:
        return self.table.shape[1]


def build_pivot_table(dataset: Dataset, pivots: Sequence[Point]) -> PivotTable:
    """Precompute the full n x k distance matrix (n*k computations recorded)."""
    if len(dataset) == 0:
        raise ValueError("dataset must be nonempty")
    pivots = list(pivots)
    if not pivots:
        raise ValueError("need at least one pivot")
    n = len(dataset)
    table = np.empty((n, len(pivots)))
    for i, p in enumerate(pivots):
        domains.validate_point(dataset.domain, p)
        table[:, i] = domains.distances_to_point(dataset, p)
    return PivotTable(dataset, pivots, table, n * len(pivots))


def _query_bounds(pt: PivotTable, q: Point) -> tuple[np.ndarray, np.ndarray]:
    qd = np.array([domains.distance(pt.dataset.domain, q, p) for p in pt.pivots])
    lb = np.abs(pt.table - qd[None, :]).max(axis=1)
    return lb, qd


def range_query(pt: PivotTable, q: Point, eps: float) -> tuple[np.ndarray, QueryStats]:
    """Exact range query: hits are the points with d(q, x) < eps (strict).

    Candidates survive the max-norm test lb(x) < eps (the discard rule is
    non-strict) and are then verified by a true distance computation.
    """
    if not eps > 0:
        raise ValueError("eps must be > 0")
    lb, _ = _query_bounds(pt, q)
    cand = np.flatnonzero(lb < eps)
    dists = domains.distances_to_point(pt.dataset, q, idx=cand)
    if (lb[cand] > dists + _LB_SLACK).any():
        raise AssertionError("pivot lower bound exceeded a true distance")
    hits = cand[dists < eps]
    n = len(pt.dataset)
    stats = QueryStats(
        distance_computations=pt.k + len(cand),
        candidates=len(cand),
        discarded=n - len(cand),
        true_hits=len(hits),
    )
    return hits, stats


def knn_query(pt: PivotTable, q: Point, m: int) -> tuple[np.ndarray, QueryStats]:
    """Exact m nearest neighbors, ties broken by dataset index ascending.

    Best-first over the pivot lower bound; a candidate's true distance is
    computed only while its lower bound can still displace the current m-th
    best (including exact ties, which matter on discrete domains).
    """
    n = len(pt.dataset)
    if not (1 <= m <= n):
        raise ValueError("m must be in [1, n]")
    lb, _ = _query_bounds(pt, q)
    order = np.argsort(lb, kind="stable")
    heap: list = []  # max-heap via (-dist, -idx); root is the current worst
    verified = 0
    for x in order:
        x = int(x)
        if len(heap) == m:
            worst_d, worst_i = -heap[0][0], -heap[0][1]
            if lb[x] > worst_d:
                break
            if lb[x] == worst_d and x > worst_i:
                continue
        d = domains.distance(pt.dataset.domain, q, pt.dataset[x])
        verified += 1
        if lb[x] > d + _LB_SLACK:
            raise AssertionError("pivot lower bound exceeded a true distance")
        entry = (-d, -x)
        if len(heap) < m:
            heapq.heappush(heap, entry)
        elif entry > heap[0]:
            heapq.heapreplace(heap, entry)
    result = sorted((-d, -i) for d, i in heap)
    hits = np.array([i for _, i in result], dtype=np.int64)
    stats = QueryStats(
        distance_computations=pt.k + verified,
        candidates=verified,
        discarded=n - verified,
        true_hits=len(hits),
    )
    return hits, stats


def access_overhead(pt: PivotTable, q: Point, eps: float) -> int:
    """Candidates retrieved by the reduction minus true hits, for one query."""
    _, stats = range_query(pt, q, eps)
    return stats.candidates - stats.true_hits


def select_pivots(dataset: Dataset, k: int, strategy: str, seed: int) -> list:
    """Pivot selection: "random_domain", "random_data", or "farthest_first".

    farthest_first: the first pivot is the datapoint farthest from a
    seed-chosen start, then each next pivot maximizes the minimum distance to
    the pivots chosen so far (ties resolved by lowest index).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    n = len(dataset)
    if strategy == "random_domain":
        drawn = domains.sample(dataset.domain, k, child_seed(seed, "pivots:domain"))
        return [drawn[i] for i in range(k)]
    if strategy == "random_data":
        if k > n:
            raise ValueError("k exceeds dataset size for a data-restricted strategy")
        rng = generator(seed, "pivots:data")
        idx = rng.choice(n, size=k, replace=False)
        return [dataset[int(i)] for i in idx]
    if strategy == "farthest_first":
        if k > n:
            raise ValueError("k exceeds dataset size for a data-restricted strategy")
        rng = generator(seed, "pivots:ff")
        start = int(rng.integers(0, n))
        d0 = domains.distances_to_point(dataset, dataset[start])
        chosen = [int(np.argmax(d0))]
        min_d = domains.distances_to_point(dataset, dataset[chosen[0]])
        while len(chosen) < k:
            nxt = int(np.argmax(min_d))
            chosen.append(nxt)
            np.minimum(min_d, domains.distances_to_point(dataset, dataset[nxt]), out=min_d)
        return [dataset[i] for i in chosen]
    raise ValueError(f"unknown strategy {strategy!r}")


@dataclass
class ShellDiagnostic:
    intersection_fraction: float
    eps_median: float
    pivot_medians: np.ndarray


def shell_intersection(pt: PivotTable, sample_count: int, seed: int) -> ShellDiagnostic:
    """Measure of the intersection of the pivots' median spherical shells.

    Each shell is centered at a pivot's median distance with half-width half
    the median nearest-neighbor distance; in a concentrated domain the
    intersection carries almost all of the measure, which is exactly why the
    max-norm test stops discarding.
    """
    dom = pt.dataset.domain
    ref = domains.sample(dom, sample_count, child_seed(seed, "shell:ref"))
    qd = np.stack(
        [domains.distances_to_point(ref, p) for p in pt.pivots], axis=1
    )  # (sample, k)
    med = np.median(qd, axis=0)
    queries = domains.sample(dom, min(sample_count, 512), child_seed(seed, "shell:q"))
    nn = domains.cross_distances(dom, queries.data, pt.dataset.data).min(axis=1)
    eps_m = float(np.median(nn))
    inside = (np.abs(qd - med[None, :]) < eps_m / 2).all(axis=1)
    return ShellDiagnostic(float(inside.mean()), eps_m, med)
