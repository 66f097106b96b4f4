"""Witness-based neighbor graphs and greedy spatial-approximation search.

A sampled domain point (witness) connects its nearest and second-nearest
datapoints; with enough witnesses the graph approximates the adjacency of
nearest-neighbor regions from below.  Greedy descent then walks to a local
minimum of the distance to the query, which on a good graph is the exact
nearest neighbor.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import domains
from .domains import Dataset, Domain, Point
from .rng import child_seed, generator


@dataclass(eq=False)
class NeighborGraph:
    n: int
    adjacency: list  # list of sorted int arrays
    witness_count: int
    witness_for_edge: Optional[dict] = None  # (i, j) -> witness point payload (debug)


def build_witness_graph(
    dataset: Dataset,
    witness_samples: int,
    seed: int,
    batch: int = 4096,
    record_witnesses: bool = False,
) -> NeighborGraph:
    """Connect the two nearest datapoints of each sampled witness.

    Nearest and second-nearest are resolved with index-ascending tie-breaks;
    deterministic in seed.
    """
    n = len(dataset)
    if n < 2:
        raise ValueError("need at least 2 datapoints")
    if witness_samples < 1:
        raise ValueError("need at least one witness")
    dom = dataset.domain
    edges = set()
    witness_for_edge = {} if record_witnesses else None
    done = 0
    while done < witness_samples:
        size = min(batch, witness_samples - done)
        w = domains.sample(dom, size, child_seed(seed, f"witness:{done}"))
        d = domains.cross_distances(dom, w.data, dataset.data)
        first = d.argmin(axis=1)  # argmin takes the lowest index on ties
        d[np.arange(size), first] = np.inf
        second = d.argmin(axis=1)
        for row in range(size):
            i, j = int(first[row]), int(second[row])
            e = (i, j) if i < j else (j, i)
            if e not in edges:
                edges.add(e)
                if witness_for_edge is not None:
                    witness_for_edge[e] = w.data[row]
        done += size
    adjacency = [[] for _ in range(n)]
    for i, j in edges:
        adjacency[i].append(j)
        adjacency[j].append(i)
    adjacency = [np.array(sorted(a), dtype=np.int64) for a in adjacency]
    return NeighborGraph(n, adjacency, witness_samples, witness_for_edge)


def line_delaunay_graph(dataset: Dataset) -> NeighborGraph:
    """Exact 1-D adjacency of nearest-neighbor regions: consecutive points in
    sorted order are adjacent."""
    if dataset.domain.kind not in domains.EUCLIDEAN_KINDS or dataset.data.shape[1] != 1:
        raise ValueError("exact construction requires 1-D Euclidean data")
    order = np.argsort(dataset.data[:, 0], kind="stable")
    n = len(dataset)
    adjacency = [[] for _ in range(n)]
    for a, b in zip(order, order[1:]):
        adjacency[int(a)].append(int(b))
        adjacency[int(b)].append(int(a))
    adjacency = [np.array(sorted(x), dtype=np.int64) for x in adjacency]
    return NeighborGraph(n, adjacency, 0)


@dataclass
class GreedyResult:
    answer: int
    path: list
    oracle_calls: int


def greedy_nn(
    graph: NeighborGraph, dataset: Dataset, q: Point, start_index: int = 0
) -> GreedyResult:
    """Greedy descent: move to the strictly closest neighbor until stuck.

    Distances are cached, so each vertex is evaluated once; ties never move
    (guaranteeing strictly decreasing path distances and <= n steps).
    """
    if not (0 <= start_index < graph.n):
        raise ValueError("start index out of range")
    cache: dict = {}
    calls = 0

    def dist(i: int) -> float:
        nonlocal calls
        if i not in cache:
            cache[i] = domains.distance(dataset.domain, q, dataset[i])
            calls += 1
        return cache[i]

    current = start_index
    path = [current]
    while True:
        best = current
        best_d = dist(current)
        for j in graph.adjacency[current]:
            j = int(j)
            dj = dist(j)
            if dj < best_d or (dj == best_d and j < best and best != current):
                best, best_d = j, dj
        if best == current or not best_d < dist(current):
            break
        current = best
        path.append(current)
        if len(path) > graph.n:
            raise AssertionError("greedy descent failed to terminate")
    return GreedyResult(current, path, calls)


def greedy_nn_restarts(
    graph: NeighborGraph, dataset: Dataset, q: Point, restarts: int, seed: int
) -> GreedyResult:
    """Best answer over several random starts (for failure-rate studies)."""
    rng = generator(seed, "greedy:restarts")
    starts = rng.integers(0, graph.n, size=restarts)
    best: Optional[GreedyResult] = None
    best_d = np.inf
    total_calls = 0
    for s in starts:
        res = greedy_nn(graph, dataset, q, int(s))
        total_calls += res.oracle_calls
        d = domains.distance(dataset.domain, q, dataset[res.answer])
        if d < best_d or (d == best_d and best is not None and res.answer < best.answer):
            best, best_d = res, d
    best.oracle_calls = total_calls
    return best


@dataclass
class DegreeStats:
    mean: float
    max: int
    histogram: np.ndarray  # histogram[k] = number of vertices with degree k


def degree_stats(graph: NeighborGraph) -> DegreeStats:
    degrees = np.array([len(a) for a in graph.adjacency])
    return DegreeStats(float(degrees.mean()), int(degrees.max()), np.bincount(degrees))


def graph_to_edge_text(graph: NeighborGraph) -> str:
    """Edge list, one "i j" pair per line with i < j."""
    lines = []
    for i, adj in enumerate(graph.adjacency):
        for j in adj:
            if i < j:
                lines.append(f"{i} {j}")
    return "\n".join(lines) + ("\n" if lines else "")
