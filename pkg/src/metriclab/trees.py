"""Binary metric trees with 1-Lipschitz decision functions.

Inner nodes carry either a generalized-hyperplane split
f(x) = (d(x, a) - d(x, b)) / 2 (halved so it is 1-Lipschitz) or a ball-shell
split f(x) = d(x, c) - r.  Points with f <= 0 route to the "-" child except
that exact zeros route to "+"; both children must be visited whenever
|f(q)| <= eps, which is where concentration bites.  Trees are immutable after
build and safe for concurrent queries.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import json

import numpy as np

from . import domains, vc
from .domains import Dataset, Domain, Point
from .rng import child_seed, generator

GH = "gh"
BALL_SHELL = "ball"


@dataclass(eq=False)
class GHSplit:
    a: np.ndarray
    b: np.ndarray
    query_cost = 2

    def values(self, domain: Domain, data: np.ndarray) -> np.ndarray:
        ds = Dataset(domain, data, seed=0)
        pk = domains.payload_kind(domain)
        da = domains.distances_to_point(ds, Point(pk, self.a))
        db = domains.distances_to_point(ds, Point(pk, self.b))
        return (da - db) / 2.0

    def value(self, domain: Domain, q: Point) -> float:
        pk = domains.payload_kind(domain)
        return (
            domains.distance(domain, q, Point(pk, self.a))
            - domains.distance(domain, q, Point(pk, self.b))
        ) / 2.0

    def params(self) -> dict:
        return {"kind": "gh", "a": _jsonable(self.a), "b": _jsonable(self.b)}


@dataclass(eq=False)
class BallShellSplit:
    c: np.ndarray
    r: float
    query_cost = 1

    def values(self, domain: Domain, data: np.ndarray) -> np.ndarray:
        ds = Dataset(domain, data, seed=0)
        pk = domains.payload_kind(domain)
        return domains.distances_to_point(ds, Point(pk, self.c)) - self.r

    def value(self, domain: Domain, q: Point) -> float:
        pk = domains.payload_kind(domain)
        return domains.distance(domain, q, Point(pk, self.c)) - self.r

    def params(self) -> dict:
        return {"kind": "ball", "c": _jsonable(self.c), "r": self.r}


def _jsonable(x):
    arr = np.asarray(x)
    if arr.dtype == np.uint64:
        return [int(v) for v in arr]
    if arr.ndim == 0:
        return arr.item()
    return arr.tolist()


@dataclass(eq=False)
class TreeNode:
    node_id: str  # string over {+, -}; root is ""
    bin_indices: Optional[np.ndarray] = None  # leaves only
    splitter: object = None  # inner nodes only
    neg: Optional["TreeNode"] = None
    pos: Optional["TreeNode"] = None
    no_separation: bool = False

    @property
    def is_leaf(self) -> bool:
        return self.bin_indices is not None


@dataclass(eq=False)
class MetricTree:
    dataset: Dataset
    root: TreeNode
    splitter_kind: str
    leaf_capacity: int
    max_depth: int
    leaf_count: int
    no_separation_count: int


def build_metric_tree(
    dataset: Dataset,
    splitter: str = GH,
    leaf_capacity: int = 16,
    max_depth: int = 40,
    seed: int = 0,
) -> MetricTree:
    """Recursively split the dataset with random 1-Lipschitz decision functions.

    gh draws two distinct datapoints of the node's set; ball draws a random
    center from the node's set with the median distance as shell radius.
    Recursion stops at leaf_capacity, max_depth, or a split that fails to
    separate (which converts the node to a leaf and sets its flag).
    """
    if len(dataset) == 0:
        raise ValueError("dataset must be nonempty")
    if leaf_capacity < 1:
        raise ValueError("leaf_capacity must be >= 1")
    if splitter not in (GH, BALL_SHELL):
        raise ValueError(f"unknown splitter {splitter!r}")
    counters = {"leaves": 0, "no_sep": 0}
    root = _build_node(
        dataset, np.arange(len(dataset)), "", splitter, leaf_capacity, max_depth, seed, counters
    )
    return MetricTree(
        dataset, root, splitter, leaf_capacity, max_depth,
        counters["leaves"], counters["no_sep"],
    )


def _build_node(dataset, idx, node_id, splitter, leaf_capacity, max_depth, seed, counters):
    if len(idx) <= leaf_capacity or len(node_id) >= max_depth:
        counters["leaves"] += 1
        return TreeNode(node_id, bin_indices=idx)
    rng = generator(seed, f"tree:{node_id or 'root'}")
    dom = dataset.domain
    sub = dataset.data[idx]
    if splitter == GH:
        a_i, b_i = rng.choice(len(idx), size=2, replace=False)
        split = GHSplit(dataset.data[idx[a_i]], dataset.data[idx[b_i]])
    else:
        c_i = int(rng.integers(0, len(idx)))
        ds = Dataset(dom, sub, seed=0)
        dists = domains.distances_to_point(ds, dataset[int(idx[c_i])])
        split = BallShellSplit(dataset.data[idx[c_i]], float(np.median(dists)))
    vals = split.values(dom, sub)
    pos_mask = vals >= 0.0  # zero ties route to "+"
    if pos_mask.all() or not pos_mask.any():
        counters["leaves"] += 1
        counters["no_sep"] += 1
        return TreeNode(node_id, bin_indices=idx, no_separation=True)
    node = TreeNode(node_id, splitter=split)
    node.neg = _build_node(
        dataset, idx[~pos_mask], node_id + "-", splitter, leaf_capacity, max_depth, seed, counters
    )
    node.pos = _build_node(
        dataset, idx[pos_mask], node_id + "+", splitter, leaf_capacity, max_depth, seed, counters
    )
    return node


@dataclass
class TreeQueryStats:
    nodes_visited: int
    bins_scanned: int
    distance_computations: int


def tree_range_query(
    tree: MetricTree, q: Point, eps: float, check_pruned: bool = False
) -> tuple[np.ndarray, TreeQueryStats]:
    """Exact range query with eps-pruning.

    The "-" child is pruned when f(q) > eps and the "+" child when
    f(q) < -eps.  Every scanned bin is verified point by point.  With
    check_pruned the pruned subtrees are scanned too, asserting they hold no
    true hit.
    """
    if not eps > 0:
        raise ValueError("eps must be > 0")
    dom = tree.dataset.domain
    stats = TreeQueryStats(0, 0, 0)
    hits: list = []

    def scan_leaf(node):
        stats.bins_scanned += 1
        d = domains.distances_to_point(tree.dataset, q, idx=node.bin_indices)
        stats.distance_computations += len(node.bin_indices)
        hits.extend(node.bin_indices[d < eps].tolist())

    def assert_no_hits(node):
        if node.is_leaf:
            d = domains.distances_to_point(tree.dataset, q, idx=node.bin_indices)
            if (d < eps).any():
                raise AssertionError(f"pruned subtree at {node.node_id!r} holds a true hit")
            return
        assert_no_hits(node.neg)
        assert_no_hits(node.pos)

    def visit(node):
        stats.nodes_visited += 1
        if node.is_leaf:
            scan_leaf(node)
            return
        fq = node.splitter.value(dom, q)
        stats.distance_computations += node.splitter.query_cost
        if fq > eps:
            if check_pruned:
                assert_no_hits(node.neg)
        else:
            visit(node.neg)
        if fq < -eps:
            if check_pruned:
                assert_no_hits(node.pos)
        else:
            visit(node.pos)

    visit(tree.root)
    return np.array(sorted(hits), dtype=np.int64), stats


def branching_profile(
    tree: MetricTree, domain: Domain, query_count: int, eps: float, seed: int
) -> float:
    """Mean fraction of leaf bins scanned over random domain queries."""
    if query_count < 1:
        raise ValueError("query_count must be >= 1")
    qs = domains.sample(domain, query_count, child_seed(seed, "branching"))
    total = 0.0
    for i in range(query_count):
        _, stats = tree_range_query(tree, qs[i], eps)
        total += stats.bins_scanned / tree.leaf_count
    return total / query_count


def splitter_vc_bound(splitter: str, dim: int) -> dict:
    """Parameter/operation counts feeding the 4 s (t + 2) VC bound.

    Documents that both splitter families have small parameter complexity, so
    the threshold sets {f <= t} have VC dimension polynomial in the dimension.
    Square roots are counted as a single operation.
    """
    if splitter == GH:
        s = 2 * dim + 1            # two anchor points plus a threshold
        t = 6 * dim + 6            # two distance evaluations, a difference, a compare
    elif splitter == BALL_SHELL:
        s = dim + 2                # center, radius, threshold
        t = 3 * dim + 4
    else:
        raise ValueError(f"unknown splitter {splitter!r}")
    return {"s": s, "t": t, "vc_bound": vc.goldberg_jerrum_bound(s, t)}


def tree_to_json(tree: MetricTree) -> str:
    """Structure dump (node id, type, split parameters, bin sizes)."""
    nodes = []

    def walk(node):
        if node.is_leaf:
            nodes.append(
                {
                    "id": node.node_id,
                    "type": "leaf",
                    "bin_size": int(len(node.bin_indices)),
                    "no_separation": node.no_separation,
                }
            )
            return
        nodes.append({"id": node.node_id, "type": "inner", **node.splitter.params()})
        walk(node.neg)
        walk(node.pos)

    walk(tree.root)
    return json.dumps({"splitter": tree.splitter_kind, "nodes": nodes})
