"""Dimensionality reductions for approximate search.

Three map families: Gaussian random projections (distance-preserving up to a
multiplicative factor at target dimension ~ eps^-2 log n), plain coordinate
sampling on the Hamming cube (additive error), and mod-2 random linear maps
whose image bit-difference rate follows a closed-form calibration curve
p(h) = (1 - (1 - 2/ell)^h) / 2 in the source Hamming distance h.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from . import domains
from .domains import Dataset, Domain, Point
from .rng import child_seed, generator

JL = "jl"
BIT_SAMPLE = "bit_sample"
KOR_MOD2 = "kor_mod2"


@dataclass(eq=False)
class ReductionMap:
    kind: str
    source_dim: int
    target_dim: int
    seed: int
    matrix: Optional[np.ndarray] = None  # jl: (k, d) float64
    scale: Optional[float] = None  # jl only
    indices: Optional[np.ndarray] = None  # bit_sample: sorted distinct coords
    bit_matrix: Optional[np.ndarray] = None  # kor: (d, k) uint8
    ell: Optional[int] = None  # kor sparsity scale


def jl_map(d: int, k: int, seed: int) -> ReductionMap:
    """Random projection with i.i.d. standard Gaussian entries scaled by 1/sqrt(k)."""
    if not (1 <= k <= d):
        raise ValueError("need 1 <= k <= d")
    rng = generator(seed, f"jl:{d}:{k}")
    m = rng.standard_normal((k, d))
    return ReductionMap(JL, d, k, seed, matrix=m, scale=1.0 / math.sqrt(k))


def jl_target_dim(n: int, eps: float, C: float = 4.0) -> int:
    """Target dimension ceil(C * eps^-2 * ln n) for an n-point multiplicative
    eps guarantee."""
    if n < 2:
        raise ValueError("need n >= 2")
    if not (0 < eps < 0.5):
        raise ValueError("eps must be in (0, 1/2)")
    return int(math.ceil(C * eps ** -2 * math.log(n)))


def bit_sample_map(d: int, k: int, seed: int) -> ReductionMap:
    """Uniform random k-subset of coordinates, without replacement."""
    if not (1 <= k <= d):
        raise ValueError("need 1 <= k <= d")
    rng = generator(seed, f"bits:{d}:{k}")
    idx = np.sort(rng.choice(d, size=k, replace=False))
    return ReductionMap(BIT_SAMPLE, d, k, seed, indices=idx)


def kor_map(d: int, k: int, ell: int, seed: int) -> ReductionMap:
    """Mod-2 random linear map with i.i.d. Bernoulli(1/ell) matrix entries."""
    if not (1 <= ell <= d):
        raise ValueError("need 1 <= ell <= d")
    if k < 1:
        raise ValueError("need k >= 1")
    rng = generator(seed, f"kor:{d}:{k}:{ell}")
    a = (rng.random((d, k)) < 1.0 / ell).astype(np.uint8)
    return ReductionMap(KOR_MOD2, d, k, seed, bit_matrix=a, ell=ell)


def kor_scale_family(d: int, k: int, seed: int) -> list:
    """One map per distance scale ell in {1, 2, 4, ...} up to d."""
    maps = []
    ell = 1
    while ell <= d:
        maps.append(kor_map(d, k, ell, seed))
        ell *= 2
    return maps


def kor_expected_rate(h: int, ell: int) -> float:
    """Expected image bit-difference rate for a source pair at Hamming distance h."""
    if h < 0 or ell < 1:
        raise ValueError("need h >= 0 and ell >= 1")
    return (1.0 - (1.0 - 2.0 / ell) ** h) / 2.0


def apply_map(rmap: ReductionMap, target: Union[Dataset, Point]) -> Union[Dataset, Point]:
    """Image of a dataset (or single point) under the reduction map.

    The image domain keeps the source norm_factor so distortions compare like
    with like: a Euclidean R^k ambient for jl, a k-bit Hamming cube otherwise.
    """
    if isinstance(target, Point):
        single = Dataset(_expected_domain(rmap), _point_rows(rmap, target), seed=0)
        reduced = apply_map(rmap, single)
        return reduced[0]
    src = target.domain
    if rmap.kind == JL:
        if src.kind not in domains.EUCLIDEAN_KINDS:
            raise ValueError("jl maps apply to real-vector domains")
        if target.data.shape[1] != rmap.source_dim:
            raise ValueError("dataset dimension does not match map")
        out = target.data @ rmap.matrix.T * rmap.scale
        dom = domains.Domain(domains.GAUSSIAN, rmap.target_dim, src.norm_factor)
        return Dataset(dom, out, seed=target.seed)
    if src.kind != domains.HAMMING:
        raise ValueError("bit maps apply to Hamming domains")
    if src.dim != rmap.source_dim:
        raise ValueError("dataset dimension does not match map")
    bits = domains.unpack_bits(target.data, src.dim)
    if rmap.kind == BIT_SAMPLE:
        out_bits = bits[:, rmap.indices]
    elif rmap.kind == KOR_MOD2:
        out_bits = (bits.astype(np.int64) @ rmap.bit_matrix.astype(np.int64)) & 1
    else:
        raise ValueError(f"unknown map kind {rmap.kind!r}")
    dom = domains.Domain(domains.HAMMING, rmap.target_dim, src.norm_factor)
    return Dataset(dom, domains.pack_bits(out_bits), seed=target.seed)


def _expected_domain(rmap: ReductionMap) -> Domain:
    if rmap.kind == JL:
        return domains.gaussian(rmap.source_dim)
    return domains.hamming(rmap.source_dim)


def _point_rows(rmap: ReductionMap, p: Point) -> np.ndarray:
    return np.asarray(p.data)[None, :]


# ---------------------------------------------------------------------------
# distortion measurement


@dataclass
class DistortionSummary:
    mode: str
    counts: np.ndarray
    bin_edges: np.ndarray
    mean: float
    std: float
    quantiles: dict
    min: float
    max: float


def distortion_histogram(
    original: Dataset, reduced: Dataset, mode: str = "additive", bins: int = 60
) -> DistortionSummary:
    """Distortion of all n(n-1)/2 pairwise distances under the reduction.

    additive: image - original; multiplicative: image / original (duplicate
    source points are rejected, naming the offending pair).
    """
    if len(original) != len(reduced):
        raise ValueError("datasets must have equal point counts")
    d_orig = domains.pairwise_distances(original)
    d_red = domains.pairwise_distances(reduced)
    if mode == "additive":
        vals = d_red - d_orig
    elif mode == "multiplicative":
        zero = np.flatnonzero(d_orig == 0.0)
        if len(zero):
            i, j = _condensed_to_pair(int(zero[0]), len(original))
            raise ValueError(
                f"duplicate points {i} and {j} make multiplicative distortion undefined"
            )
        vals = d_red / d_orig
    else:
        raise ValueError(f"unknown mode {mode!r}")
    counts, edges = np.histogram(vals, bins=bins)
    qs = {q: float(np.quantile(vals, q)) for q in (0.01, 0.25, 0.5, 0.75, 0.99)}
    return DistortionSummary(
        mode, counts, edges, float(vals.mean()), float(vals.std()), qs,
        float(vals.min()), float(vals.max()),
    )


def _condensed_to_pair(idx: int, n: int) -> tuple[int, int]:
    # invert the condensed pdist index
    i = 0
    offset = idx
    row = n - 1
    while offset >= row:
        offset -= row
        row -= 1
        i += 1
    return i, i + 1 + offset


# ---------------------------------------------------------------------------
# projection experiments


def sphere_projection_distortion(d: int, pair_count: int, seed: int) -> float:
    """Mean over random sphere pairs of |first-coordinate gap| / distance."""
    if d < 2:
        raise ValueError("need d >= 2")
    sph = domains.sphere(d)
    xs = domains.sample(sph, pair_count, child_seed(seed, "sphproj:x"))
    ys = domains.sample(sph, pair_count, child_seed(seed, "sphproj:y"))
    diff = xs.data - ys.data
    norms = np.linalg.norm(diff, axis=1)
    keep = norms > 0
    return float(np.mean(np.abs(diff[keep, 0]) / norms[keep]))


def cube_projection_scatter(d: int, n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Project uniform points of the centered unit cube on a random 2-frame.

    Returns (projected points (n, 2), projected cube-vertex outline):
    all 2^d vertices for d <= 16, a 2^16 random vertex sample otherwise.
    """
    if d < 2:
        raise ValueError("need d >= 2")
    rng = generator(seed, f"cubeproj:{d}")
    g1 = rng.standard_normal(d)
    g2 = rng.standard_normal(d)
    u1 = g1 / np.linalg.norm(g1)
    g2 = g2 - (g2 @ u1) * u1
    u2 = g2 / np.linalg.norm(g2)
    frame = np.stack([u1, u2], axis=1)  # (d, 2)
    pts = rng.random((n, d)) - 0.5
    if d <= 16:
        grid = ((np.arange(1 << d)[:, None] >> np.arange(d)[None, :]) & 1) - 0.5
    else:
        grid = rng.integers(0, 2, size=(1 << 16, d)) - 0.5
    return pts @ frame, grid @ frame
