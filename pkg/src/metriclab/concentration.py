"""Concentration-of-measure diagnostics.

Estimates concentration functions through 1-Lipschitz witness functions,
computes the exact Hamming-cube concentration function and its Chernoff
bound, runs the empty-space and near-equilateral experiments, and evaluates
the two intrinsic-dimension estimators (distance-variance and
concentration-integral based).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from . import domains
from .domains import Dataset, Domain, Point
from .errors import InvalidStateError
from .rng import child_seed, generator

EXACT_HAMMING = "exact_hamming"
MONTE_CARLO_LIPSCHITZ = "monte_carlo_lipschitz"
CHERNOFF_BOUND = "chernoff_bound"


@dataclass(eq=False)
class ConcentrationProfile:
    """alpha(eps) on an increasing grid, with the method that produced it."""

    eps_grid: np.ndarray
    alpha: np.ndarray
    method: str
    samples: int = 0
    witness_count: int = 0

    def validate(self) -> None:
        g = self.eps_grid
        a = self.alpha
        if len(g) != len(a) or len(g) == 0:
            raise ValueError("grid and alpha must be nonempty and equal length")
        if (np.diff(g) < 0).any():
            raise ValueError("eps grid must be increasing")
        if g[0] == 0.0 and a[0] != 0.5:
            raise ValueError("alpha(0) must be 1/2")
        if (np.diff(a) > 1e-12).any():
            raise ValueError("alpha must be nonincreasing")
        if a.min() < 0 or a.max() > 0.5 + 1e-12:
            raise ValueError("alpha values must lie in [0, 1/2]")


def chernoff_alpha_bound(eps: float, d: int) -> float:
    """Gaussian upper bound min(1/2, exp(-2 eps^2 d)) for the Hamming cube."""
    if eps < 0:
        raise ValueError("eps must be >= 0")
    if d < 1:
        raise ValueError("dimension must be >= 1")
    return min(0.5, math.exp(-2.0 * eps * eps * d))


@lru_cache(maxsize=64)
def _binom_cumulative(d: int):
    """Exact cumulative binomial sums S[k] = sum_{i<=k} C(d, i) as big ints."""
    sums = []
    total = 0
    c = 1
    for k in range(d + 1):
        total += c
        sums.append(total)
        c = c * (d - k) // (k + 1)
    return tuple(sums)


@lru_cache(maxsize=64)
def hamming_median_radius(d: int) -> int:
    """Smallest r with P[Bin(d, 1/2) <= r] >= 1/2."""
    sums = _binom_cumulative(d)
    half = 1 << (d - 1)
    for r, s in enumerate(sums):
        if s >= half:
            return r
    raise AssertionError("unreachable")


def exact_hamming_alpha(d: int, eps: float) -> float:
    """Exact concentration function of the Hamming cube at normalized radius eps.

    alpha(eps) = P[Bin(d, 1/2) > r + floor(eps * d)] with r the median radius;
    computed by exact big-integer tail summation.
    """
    if not (1 <= d <= 10_000):
        raise ValueError("d must be in [1, 10^4]")
    if not (0.0 <= eps <= 1.0):
        raise ValueError("eps must be in [0, 1]")
    r = hamming_median_radius(d)
    # guard against float droop in eps*d for grid values like 3/10
    t = r + int(math.floor(eps * d + 1e-9))
    if t >= d:
        return 0.0
    sums = _binom_cumulative(d)
    tail = (1 << d) - sums[t]
    return tail / (1 << d)


def exact_hamming_profile(d: int, eps_grid: Sequence[float]) -> ConcentrationProfile:
    grid = np.asarray(eps_grid, dtype=np.float64)
    alpha = np.array([exact_hamming_alpha(d, e) for e in grid])
    prof = ConcentrationProfile(grid, alpha, EXACT_HAMMING)
    prof.validate()
    return prof


def chernoff_profile(d: int, eps_grid: Sequence[float]) -> ConcentrationProfile:
    grid = np.asarray(eps_grid, dtype=np.float64)
    alpha = np.array([chernoff_alpha_bound(e, d) for e in grid])
    return ConcentrationProfile(grid, alpha, CHERNOFF_BOUND)


# ---------------------------------------------------------------------------
# Lipschitz witnesses


@dataclass(eq=False)
class LipschitzWitness:
    """A 1-Lipschitz function with its empirical median.

    kind "distance_to": distance to an anchor point.
    kind "linear": x -> norm_factor * <u, x> for a unit vector u (Euclidean
    kinds only; the norm_factor keeps it 1-Lipschitz under the scaled metric).
    """

    kind: str
    anchor: object  # Point for distance_to, unit vector for linear
    median: float


def witness_values(domain: Domain, witness: LipschitzWitness, data: np.ndarray) -> np.ndarray:
    if witness.kind == "distance_to":
        ds = Dataset(domain, data, seed=0)
        return domains.distances_to_point(ds, witness.anchor)
    if witness.kind == "linear":
        if domain.kind not in domains.EUCLIDEAN_KINDS:
            raise ValueError("linear witnesses require a Euclidean-kind domain")
        return data @ np.asarray(witness.anchor) * domain.norm_factor
    raise ValueError(f"unknown witness kind {witness.kind!r}")


def lower_median(values: np.ndarray) -> float:
    """Deterministic median: the lower of the two middle order statistics."""
    v = np.sort(np.asarray(values))
    return float(v[(len(v) - 1) // 2])


def make_distance_witness(domain: Domain, anchor: Point, reference: Dataset) -> LipschitzWitness:
    w = LipschitzWitness("distance_to", anchor, 0.0)
    w.median = lower_median(witness_values(domain, w, reference.data))
    return w


def make_linear_witness(domain: Domain, direction: np.ndarray, reference: Dataset) -> LipschitzWitness:
    u = np.asarray(direction, dtype=np.float64)
    u = u / np.linalg.norm(u)
    w = LipschitzWitness("linear", u, 0.0)
    w.median = lower_median(witness_values(domain, w, reference.data))
    return w


def lipschitz_deviation(dataset: Dataset, witness: LipschitzWitness, eps: float) -> float:
    """Fraction of datapoints whose witness value deviates from the median by > eps."""
    if len(dataset) == 0:
        raise ValueError("dataset must be nonempty")
    vals = witness_values(dataset.domain, witness, dataset.data)
    return float(np.mean(np.abs(vals - witness.median) > eps))


def estimate_alpha(
    domain: Domain,
    eps_grid: Sequence[float],
    sample_count: int,
    witness_count: int,
    seed: int,
) -> ConcentrationProfile:
    """Lower estimate of the concentration function via the deviation proxy.

    For each witness the two-sided deviation mass beyond eps from the
    empirical median is halved (inverting the median-deviation inequality),
    maximized over witnesses, clamped to [0, 1/2] and made nonincreasing by a
    running minimum.  Witnesses are distance functions to random points; for
    Euclidean kinds every other witness is a random unit linear functional.
    """
    grid = np.asarray(eps_grid, dtype=np.float64)
    if len(grid) == 0:
        raise ValueError("eps grid must be nonempty")
    if sample_count < 100:
        raise ValueError("sample_count must be >= 100")
    ref = domains.sample(domain, sample_count, child_seed(seed, "alpha:sample"))
    euclid = domain.kind in domains.EUCLIDEAN_KINDS
    best = np.zeros_like(grid)
    for w_i in range(witness_count):
        if euclid and w_i % 2 == 1:
            rng = generator(seed, f"alpha:lin:{w_i}")
            witness = make_linear_witness(domain, rng.standard_normal(domain.dim), ref)
        else:
            anchor = domains.sample(domain, 1, child_seed(seed, f"alpha:pt:{w_i}"))[0]
            witness = make_distance_witness(domain, anchor, ref)
        vals = witness_values(domain, witness, ref.data)
        dev = np.sort(np.abs(vals - witness.median))
        # strict deviation mass beyond each grid eps; the 1e-12 guard keeps
        # lattice-valued distances (Hamming) from crossing the threshold on
        # float rounding noise alone
        counts = len(dev) - np.searchsorted(dev, grid + 1e-12, side="right")
        np.maximum(best, counts / len(dev) / 2.0, out=best)
    alpha = np.minimum(best, 0.5)
    alpha[grid == 0.0] = 0.5
    alpha = np.minimum.accumulate(alpha)
    prof = ConcentrationProfile(
        grid, alpha, MONTE_CARLO_LIPSCHITZ, samples=sample_count, witness_count=witness_count
    )
    prof.validate()
    return prof


# ---------------------------------------------------------------------------
# empty-space and simplex experiments


def nn_distances(
    dataset: Dataset, queries: Dataset, leave_one_out: bool = False
) -> np.ndarray:
    """Exact nearest-neighbor distance of each query by linear scan.

    With leave_one_out the queries are dataset points and the query's own
    index is excluded from the scan.
    """
    dom = dataset.domain
    out = np.empty(len(queries))
    d = domains.cross_distances(dom, queries.data, dataset.data)
    if leave_one_out:
        np.fill_diagonal(d, np.inf)
    out[:] = d.min(axis=1)
    return out


@dataclass
class CurveRow:
    dim: int
    value: float
    stderr: float


def nn_distance_curve(
    domain_family: Sequence[Domain],
    n: int,
    trials: int,
    seed: int,
    queries_per_trial: int = 16,
    leave_one_out: bool = False,
) -> list[CurveRow]:
    """Mean normalized nearest-neighbor distance per domain.

    Each domain is (re-)normalized to characteristic size 1, so the output is
    invariant under rescaling of the raw metric.  Fresh query points are drawn
    by default; leave_one_out instead queries the datapoints themselves.
    """
    if n < 2:
        raise ValueError("need at least 2 datapoints")
    rows = []
    for d_i, dom in enumerate(domain_family):
        base = dom if dom.normalized else domains.normalize(
            dom, seed=child_seed(seed, f"curve:norm:{d_i}")
        )
        per_trial = np.empty(trials)
        for t in range(trials):
            data = domains.sample(base, n, child_seed(seed, f"curve:{d_i}:data:{t}"))
            if leave_one_out:
                dists = nn_distances(data, data, leave_one_out=True)
            else:
                qs = domains.sample(
                    base, queries_per_trial, child_seed(seed, f"curve:{d_i}:query:{t}")
                )
                dists = nn_distances(data, qs)
            per_trial[t] = dists.mean()
        stderr = float(per_trial.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
        rows.append(CurveRow(dom.dim, float(per_trial.mean()), stderr))
    return rows


def pairwise_simplex_check(dataset: Dataset, eps: float) -> float:
    """Fraction of unordered pairs with distance in [1-eps, 1+eps].

    Requires a characteristic-size-normalized domain.
    """
    if len(dataset) < 2:
        raise ValueError("need at least 2 points")
    if not dataset.domain.normalized:
        raise InvalidStateError("domain is not characteristic-size normalized")
    d = domains.pairwise_distances(dataset)
    return float(np.mean((d >= 1.0 - eps) & (d <= 1.0 + eps)))


# ---------------------------------------------------------------------------
# intrinsic dimension


def dim_dist(dataset: Dataset, pair_count: int, seed: int) -> float:
    """Distance-variance intrinsic dimension 1 / (2 var) on mean-rescaled pairs.

    Pairs are sampled with replacement; coincident-index pairs are redrawn.
    Zero variance reports +inf.
    """
    n = len(dataset)
    if n < 2:
        raise ValueError("need at least 2 points")
    rng = generator(seed, "dim_dist")
    i = rng.integers(0, n, size=pair_count, dtype=np.int64)
    j = rng.integers(0, n, size=pair_count, dtype=np.int64)
    while True:
        clash = i == j
        if not clash.any():
            break
        j[clash] = rng.integers(0, n, size=int(clash.sum()), dtype=np.int64)
    d = domains.row_distances(dataset.domain, dataset.data[i], dataset.data[j])
    mean = d.mean()
    if mean == 0.0:
        return math.inf
    scaled = d / mean
    var = float(scaled.var(ddof=1))
    if var == 0.0:
        return math.inf
    return 1.0 / (2.0 * var)


def dim_alpha(profile: ConcentrationProfile) -> float:
    """Concentration dimension 1 / (2 * integral of alpha over [0, 1])^2."""
    g = profile.eps_grid
    if g[0] != 0.0 or g[-1] != 1.0:
        raise ValueError("profile grid must span [0, 1]")
    integral = float(np.trapezoid(profile.alpha, g))
    if integral == 0.0:
        return math.inf
    return 1.0 / (2.0 * integral) ** 2
