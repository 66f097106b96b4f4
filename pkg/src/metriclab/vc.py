"""Shattering, VC dimension, and uniform-convergence machinery.

Concept classes are restricted to a finite ground set; concepts are stored as
bitmasks over the ground elements.  Geometric generators enumerate the exact
trace class of intervals, half-planes, disks and axis-parallel rectangles on
a given point configuration (general position assumed for disks).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional, Sequence

import numpy as np

from .errors import ResourceLimitError
from .rng import generator

_SHATTER_LIMIT = 25
_SEARCH_BUDGET = 100_000_000


@dataclass(eq=False)
class ConceptClass:
    """A family of subsets of a finite ground set, as deduplicated bitmasks."""

    m: int  # ground set size
    concepts: tuple  # sorted tuple of int bitmasks
    generator: str = "explicit"
    ground_coords: Optional[np.ndarray] = None

    def __post_init__(self):
        full = (1 << self.m) - 1
        for c in self.concepts:
            if c & ~full:
                raise ValueError("concept mask exceeds ground set")

    def __len__(self) -> int:
        return len(self.concepts)


def explicit_class(m: int, masks: Sequence[int]) -> ConceptClass:
    return ConceptClass(m, tuple(sorted(set(int(c) for c in masks))))


# ---------------------------------------------------------------------------
# geometric generators (exact restricted trace classes)


def intervals_class(xs: Sequence[float]) -> ConceptClass:
    """All traces of closed intervals on points of the line."""
    xs = np.asarray(xs, dtype=np.float64)
    m = len(xs)
    order = np.argsort(xs, kind="stable")
    concepts = {0}
    for lo in range(m):
        for hi in range(lo, m):
            a, b = xs[order[lo]], xs[order[hi]]
            mask = 0
            for i in range(m):
                if a <= xs[i] <= b:
                    mask |= 1 << i
            concepts.add(mask)
    return ConceptClass(m, tuple(sorted(concepts)), "intervals", xs.reshape(-1, 1))


def _prefix_traces(keys: np.ndarray) -> set:
    """Traces {i : keys[i] <= t} over all thresholds t."""
    out = {0}
    order = np.argsort(keys, kind="stable")
    mask = 0
    for pos, i in enumerate(order):
        mask |= 1 << int(i)
        # emit only at the last element of a tie group
        if pos + 1 == len(order) or keys[order[pos + 1]] != keys[i]:
            out.add(mask)
    return out


def halfplanes_class(points: np.ndarray) -> ConceptClass:
    """All traces of closed half-planes on a planar point set.

    Prefix sets along a direction u are exactly the half-plane traces with
    normal u; the realized prefix patterns change only at directions
    perpendicular to a difference of two points, so sampling those critical
    angles plus midpoints between them is exhaustive.
    """
    pts = np.asarray(points, dtype=np.float64)
    m = len(pts)
    if pts.shape[1] != 2:
        raise ValueError("half-planes require planar points")
    angles = set()
    for i, j in combinations(range(m), 2):
        v = pts[j] - pts[i]
        if v[0] == 0 and v[1] == 0:
            continue
        base = math.atan2(v[1], v[0])
        for a in (base + math.pi / 2, base - math.pi / 2, base + 3 * math.pi / 2):
            angles.add(a % (2 * math.pi))
    if not angles:
        angles = {0.0}
    crit = sorted(angles)
    samples = list(crit)
    for k in range(len(crit)):
        nxt = crit[(k + 1) % len(crit)] + (2 * math.pi if k + 1 == len(crit) else 0.0)
        samples.append(((crit[k] + nxt) / 2) % (2 * math.pi))
    concepts = set()
    for theta in samples:
        u = np.array([math.cos(theta), math.sin(theta)])
        concepts |= _prefix_traces(pts @ u)
    concepts.add((1 << m) - 1)
    return ConceptClass(m, tuple(sorted(concepts)), "halfplanes", pts)


def _disk_traces_at(pts: np.ndarray, center: np.ndarray, radius: float, tol: float) -> set:
    dist = np.linalg.norm(pts - center[None, :], axis=1)
    boundary = np.flatnonzero(np.abs(dist - radius) <= tol)
    inside = np.flatnonzero(dist < radius - tol)
    base = 0
    for i in inside:
        base |= 1 << int(i)
    out = set()
    if len(boundary) <= 3:
        # <=3 distinct boundary points can be included/excluded independently
        # by perturbing (center, radius)
        for r in range(len(boundary) + 1):
            for sub in combinations(boundary, r):
                mask = base
                for i in sub:
                    mask |= 1 << int(i)
                out.add(mask)
    else:
        full = base
        for i in boundary:
            full |= 1 << int(i)
        out.add(base)
        out.add(full)
    return out


def balls_class(points: np.ndarray) -> ConceptClass:
    """All traces of closed disks on a planar point set (general position).

    Every realizable trace is witnessed by a disk pinned by at most three
    points, so sweeping the two-point bisector families (sampled between
    consecutive critical parameters) plus all circumcircles is exhaustive.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2:
        raise ValueError("expected a 2-D point array")
    if pts.shape[1] == 1:
        return intervals_class(pts[:, 0])
    if pts.shape[1] != 2:
        raise ValueError("disk enumeration supports dimension 1 or 2")
    m = len(pts)
    scale = max(1.0, float(np.abs(pts).max()))
    tol = 1e-9 * scale
    concepts = {0, (1 << m) - 1}
    for i in range(m):
        concepts.add(1 << i)
    for i, j in combinations(range(m), 2):
        mid = (pts[i] + pts[j]) / 2
        v = pts[j] - pts[i]
        nv = np.linalg.norm(v)
        if nv <= tol:
            continue
        n = np.array([-v[1], v[0]]) / nv
        ts = [0.0]
        for k in range(m):
            if k in (i, j):
                continue
            a = 2.0 * float(n @ (pts[i] - pts[k]))
            b = float(pts[k] @ pts[k] - pts[i] @ pts[i] + 2.0 * mid @ (pts[i] - pts[k]))
            if abs(a) > tol:
                ts.append(-b / a)
        ts = sorted(ts)
        span = max(ts[-1] - ts[0], 1.0) + nv
        samples = [ts[0] - span, ts[-1] + span] + ts
        for lo, hi in zip(ts, ts[1:]):
            samples.append((lo + hi) / 2)
        for t in samples:
            c = mid + t * n
            concepts |= _disk_traces_at(pts, c, float(np.linalg.norm(c - pts[i])), tol)
    for i, j, k in combinations(range(m), 3):
        a, b, c = pts[i], pts[j], pts[k]
        det = 2.0 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
        if abs(det) <= tol * tol:
            continue  # collinear
        bb = b @ b - a @ a
        cc = c @ c - a @ a
        ux = (cc * (b[1] - a[1]) - bb * (c[1] - a[1])) / -det
        uy = (bb * (c[0] - a[0]) - cc * (b[0] - a[0])) / -det
        center = np.array([ux, uy])
        concepts |= _disk_traces_at(pts, center, float(np.linalg.norm(center - a)), tol)
    return ConceptClass(m, tuple(sorted(concepts)), "balls", pts)


def rectangles_class(points: np.ndarray) -> ConceptClass:
    """All traces of axis-parallel rectangles on a planar point set."""
    pts = np.asarray(points, dtype=np.float64)
    m = len(pts)
    xs = np.unique(pts[:, 0])
    ys = np.unique(pts[:, 1])
    concepts = {0}
    for xlo_i in range(len(xs)):
        for xhi_i in range(xlo_i, len(xs)):
            in_x = (pts[:, 0] >= xs[xlo_i]) & (pts[:, 0] <= xs[xhi_i])
            for ylo_i in range(len(ys)):
                for yhi_i in range(ylo_i, len(ys)):
                    sel = in_x & (pts[:, 1] >= ys[ylo_i]) & (pts[:, 1] <= ys[yhi_i])
                    mask = 0
                    for i in np.flatnonzero(sel):
                        mask |= 1 << int(i)
                    concepts.add(mask)
    return ConceptClass(m, tuple(sorted(concepts)), "rectangles", pts)


# ---------------------------------------------------------------------------
# shattering and VC dimension


def shatters(cc: ConceptClass, subset: Sequence[int]) -> bool:
    """True iff every subset of `subset` is a trace of some concept."""
    idx = sorted(set(int(i) for i in subset))
    if len(idx) > _SHATTER_LIMIT:
        raise ResourceLimitError(f"subset size {len(idx)} exceeds {_SHATTER_LIMIT}")
    if any(i < 0 or i >= cc.m for i in idx):
        raise ValueError("subset element outside ground set")
    need = 1 << len(idx)
    if len(cc.concepts) < need:
        return False
    sub_mask = 0
    for i in idx:
        sub_mask |= 1 << i
    seen = set()
    for c in cc.concepts:
        seen.add(c & sub_mask)
        if len(seen) == need:
            return True
    return False


def vc_dimension(cc: ConceptClass, cap: int = _SHATTER_LIMIT) -> int:
    """Largest k <= cap with a shattered k-subset of the ground set.

    Searches level by level, extending only shattered (k-1)-subsets (every
    subset of a shattered set is shattered, so this is exhaustive).  Returns
    -1 for an empty class.
    """
    if cap > _SHATTER_LIMIT:
        raise ValueError(f"cap must be <= {_SHATTER_LIMIT}")
    if not cc.concepts:
        return -1
    cap = min(cap, cc.m, max(0, len(cc.concepts)).bit_length() - 1)
    frontier = [()]
    k = 0
    while k < cap and frontier:
        if len(frontier) * cc.m > _SEARCH_BUDGET:
            raise ResourceLimitError("subset search budget exceeded")
        nxt = []
        for base in frontier:
            start = base[-1] + 1 if base else 0
            for e in range(start, cc.m):
                cand = base + (e,)
                if shatters(cc, cand):
                    nxt.append(cand)
        if not nxt:
            return k
        frontier = nxt
        k += 1
    return k


def goldberg_jerrum_bound(s: int, t: int) -> int:
    """VC bound 4 s (t + 2) for s-parameter classes computable in t operations."""
    if s < 0 or t < 0:
        raise ValueError("s and t must be >= 0")
    return 4 * s * (t + 2)


def ugc_sample_bound(d: int, eps: float, delta: float) -> int:
    """Distribution-free sample complexity ceil(max((8d/e) lg(8e/e), (4/e) lg(2/delta)))."""
    if d < 1:
        raise ValueError("VC dimension must be >= 1")
    if not (0 < eps < 1) or not (0 < delta < 1):
        raise ValueError("eps and delta must be in (0, 1)")
    lg = lambda x: math.log2(x)
    first = (8.0 * d / eps) * lg(8.0 * math.e / eps)
    second = (4.0 / eps) * lg(2.0 / delta)
    return int(math.ceil(max(first, second)))


# ---------------------------------------------------------------------------
# empirical sup-deviation over a probed concept family


@dataclass(eq=False)
class IntervalFamily:
    """Closed intervals [a, b] inside [0, 1] under the uniform measure."""

    def sample_points(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.random(size)

    def sample_probes(self, rng: np.random.Generator, count: int) -> np.ndarray:
        ab = np.sort(rng.random((count, 2)), axis=1)
        return ab

    def true_measure(self, probes: np.ndarray) -> Optional[np.ndarray]:
        return probes[:, 1] - probes[:, 0]

    def empirical_measure(self, probes: np.ndarray, points: np.ndarray) -> np.ndarray:
        s = np.sort(points)
        hi = np.searchsorted(s, probes[:, 1], side="right")
        lo = np.searchsorted(s, probes[:, 0], side="left")
        return (hi - lo) / len(points)


@dataclass
class DeviationReport:
    sup_per_trial: np.ndarray
    max: float
    mean: float
    quantiles: dict


def empirical_sup_deviation(
    family,
    n: int,
    probe_count: int,
    trials: int,
    seed: int,
    reference_size: int = 1_000_000,
) -> DeviationReport:
    """Per-trial sup over probed concepts of |mu(C) - mu_n(C)|.

    The true measures come from the family's analytic formula when it has
    one, otherwise from a single large reference sample.
    """
    rng_probe = generator(seed, "ugc:probes")
    probes = family.sample_probes(rng_probe, probe_count)
    truth = family.true_measure(probes)
    if truth is None:
        ref = family.sample_points(generator(seed, "ugc:reference"), reference_size)
        truth = family.empirical_measure(probes, ref)
    sups = np.empty(trials)
    for t in range(trials):
        pts = family.sample_points(generator(seed, f"ugc:trial:{t}"), n)
        emp = family.empirical_measure(probes, pts)
        sups[t] = np.abs(emp - truth).max()
    qs = {q: float(np.quantile(sups, q)) for q in (0.5, 0.9, 0.95, 0.99)}
    return DeviationReport(sups, float(sups.max()), float(sups.mean()), qs)


# ---------------------------------------------------------------------------
# serialization


def concept_class_to_json(cc: ConceptClass) -> str:
    width = (cc.m + 3) // 4
    payload = {
        "m": cc.m,
        "generator": cc.generator,
        "concepts": [f"0x{c:0{width}x}" for c in cc.concepts],
        "ground_coords": None
        if cc.ground_coords is None
        else np.asarray(cc.ground_coords).tolist(),
    }
    return json.dumps(payload, indent=None, separators=(",", ":"))


def concept_class_from_json(text: str) -> ConceptClass:
    payload = json.loads(text)
    coords = payload.get("ground_coords")
    return ConceptClass(
        payload["m"],
        tuple(sorted(int(c, 16) for c in payload["concepts"])),
        payload.get("generator", "explicit"),
        None if coords is None else np.asarray(coords, dtype=np.float64),
    )
