"""Metric spaces with measure.

A Domain bundles a metric, a probability measure with a sampler, and a
normalization factor so that the expected distance between two random points
(the characteristic size) can be pinned to 1.  Supported kinds:

  hamming   -- {0,1}^d with the normalized Hamming metric (raw distance / d)
               and the uniform measure; points stored as packed 64-bit words
  gaussian  -- R^d with the Euclidean metric and standard Gaussian measure
  cube      -- [0,1]^d with the Euclidean metric and uniform measure
  sphere    -- S^{d-1} in R^d with the Euclidean (chordal) metric and uniform
               measure
  finite    -- n points with an explicit distance matrix and the uniform
               measure over indices

Domains and Datasets are immutable after construction and safe to read from
any number of threads.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.spatial.distance import cdist, pdist

from .errors import DegenerateDomainError, FormatError
from .rng import child_seed, generator

HAMMING = "hamming"
GAUSSIAN = "gaussian"
CUBE = "cube"
SPHERE = "sphere"
FINITE = "finite"

EUCLIDEAN_KINDS = (GAUSSIAN, CUBE, SPHERE)

# O(n^3) triangle verification is gated to matrices up to this size.
TRIANGLE_CHECK_LIMIT = 512
_ATOL = 1e-9


@dataclass(frozen=True, eq=False)
class Domain:
    kind: str
    dim: int  # bit count / dimension / point count for finite kind
    norm_factor: float = 1.0
    matrix: Optional[np.ndarray] = None  # finite kind only (raw, unscaled)
    triangle_checked: bool = True
    normalized: bool = False
    charsize_estimate: Optional[float] = None

    @property
    def n_points(self) -> int:
        if self.kind != FINITE:
            raise ValueError("n_points is only defined for finite domains")
        return self.dim


@dataclass(frozen=True, eq=False)
class Point:
    kind: str  # "bits" | "reals" | "index"
    data: object  # packed uint64 words / float vector / int


@dataclass(eq=False)
class Dataset:
    """An ordered collection of points drawn from a domain.

    Storage is columnar: (n, words) uint64 for hamming, (n, d) float64 for the
    Euclidean kinds, (n,) int64 index array for finite domains.
    """

    domain: Domain
    data: np.ndarray
    seed: int

    def __len__(self) -> int:
        return self.data.shape[0]

    def __getitem__(self, i: int) -> Point:
        return Point(payload_kind(self.domain), self.data[i])


def payload_kind(domain: Domain) -> str:
    if domain.kind == HAMMING:
        return "bits"
    if domain.kind == FINITE:
        return "index"
    return "reals"


def words_for(d: int) -> int:
    return (d + 63) // 64


# ---------------------------------------------------------------------------
# constructors


def hamming(d: int, norm_factor: float = 1.0) -> Domain:
    if d < 1:
        raise ValueError("bit count must be >= 1")
    return Domain(HAMMING, d, norm_factor)


def gaussian(d: int, norm_factor: float = 1.0) -> Domain:
    if d < 1:
        raise ValueError("dimension must be >= 1")
    return Domain(GAUSSIAN, d, norm_factor)


def unit_cube(d: int, norm_factor: float = 1.0) -> Domain:
    if d < 1:
        raise ValueError("dimension must be >= 1")
    return Domain(CUBE, d, norm_factor)


def sphere(d: int, norm_factor: float = 1.0) -> Domain:
    if d < 2:
        raise ValueError("ambient dimension must be >= 2")
    return Domain(SPHERE, d, norm_factor)


def finite_metric(matrix: np.ndarray, norm_factor: float = 1.0) -> Domain:
    """Build a finite domain, validating the metric axioms.

    Symmetry, zero diagonal and nonnegativity are always checked (1e-9
    absolute tolerance).  The O(n^3) triangle check runs only for
    n <= TRIANGLE_CHECK_LIMIT; larger matrices are accepted with
    triangle_checked=False and a warning.
    """
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("distance matrix must be square")
    n = m.shape[0]
    if n < 1:
        raise ValueError("distance matrix must be nonempty")
    if np.abs(np.diagonal(m)).max() > _ATOL:
        raise ValueError("distance matrix diagonal must be zero")
    if m.min() < -_ATOL:
        raise ValueError("distances must be nonnegative")
    if np.abs(m - m.T).max() > _ATOL:
        raise ValueError("distance matrix must be symmetric")
    checked = n <= TRIANGLE_CHECK_LIMIT
    if checked:
        best = np.full((n, n), np.inf)
        for k in range(n):
            np.minimum(best, m[:, k : k + 1] + m[k : k + 1, :], out=best)
        if (m > best + _ATOL).any():
            i, j = np.unravel_index(np.argmax(m - best), m.shape)
            raise ValueError(f"triangle inequality violated at pair ({i}, {j})")
    else:
        warnings.warn(
            f"triangle check skipped for n={n} > {TRIANGLE_CHECK_LIMIT}",
            stacklevel=2,
        )
    m = m.copy()
    m.flags.writeable = False
    return Domain(FINITE, n, norm_factor, matrix=m, triangle_checked=checked)


def random_finite_metric(n: int, seed: int, style: str = "uniform") -> Domain:
    """A random valid finite metric: "uniform" draws distances in [1, 2]
    (automatically metric), "euclidean" embeds random Gaussian points."""
    rng = generator(seed, f"finite:{style}:{n}")
    if style == "uniform":
        m = rng.uniform(1.0, 2.0, size=(n, n))
        m = (m + m.T) / 2.0
        np.fill_diagonal(m, 0.0)
    elif style == "euclidean":
        pts = rng.standard_normal((n, max(2, int(math.ceil(math.log2(n + 1))))))
        m = cdist(pts, pts)
    else:
        raise ValueError(f"unknown style {style!r}")
    return finite_metric(m)


# ---------------------------------------------------------------------------
# sampling


def sample(domain: Domain, n: int, seed: int) -> Dataset:
    """Draw n i.i.d. points from the domain's measure; deterministic in seed."""
    if n < 1:
        raise ValueError("sample size must be >= 1")
    rng = generator(seed, f"sample:{domain.kind}:{domain.dim}")
    if domain.kind == HAMMING:
        data = _sample_bits(rng, n, domain.dim)
    elif domain.kind == GAUSSIAN:
        data = rng.standard_normal((n, domain.dim))
    elif domain.kind == CUBE:
        data = rng.random((n, domain.dim))
    elif domain.kind == SPHERE:
        g = rng.standard_normal((n, domain.dim))
        norms = np.linalg.norm(g, axis=1, keepdims=True)
        # zero-norm draws have probability 0; resample defensively
        while (norms == 0).any():
            bad = norms[:, 0] == 0
            g[bad] = rng.standard_normal((int(bad.sum()), domain.dim))
            norms = np.linalg.norm(g, axis=1, keepdims=True)
        data = g / norms
    elif domain.kind == FINITE:
        if n > domain.dim:
            raise ValueError(
                f"sample size {n} exceeds finite domain size {domain.dim}"
            )
        data = rng.integers(0, domain.dim, size=n, dtype=np.int64)
    else:
        raise ValueError(f"unknown domain kind {domain.kind!r}")
    return Dataset(domain, data, seed)


def _sample_bits(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    w = words_for(d)
    data = rng.integers(0, 1 << 64, size=(n, w), dtype=np.uint64)
    rem = d % 64
    if rem:
        data[:, -1] &= np.uint64((1 << rem) - 1)
    return data


def pack_bits(bits: np.ndarray) -> np.ndarray:
    """Pack an (n, d) array of 0/1 into (n, words) uint64, bit i -> word i//64."""
    bits = np.asarray(bits, dtype=np.uint8)
    n, d = bits.shape
    w = words_for(d)
    padded = np.zeros((n, w * 64), dtype=np.uint8)
    padded[:, :d] = bits
    packed8 = np.packbits(padded, axis=1, bitorder="little")
    return packed8.view(np.uint64).reshape(n, w)


def unpack_bits(words: np.ndarray, d: int) -> np.ndarray:
    """Inverse of pack_bits: (n, words) uint64 -> (n, d) uint8."""
    words = np.ascontiguousarray(words, dtype=np.uint64)
    n = words.shape[0]
    as8 = words.view(np.uint8).reshape(n, -1)
    bits = np.unpackbits(as8, axis=1, bitorder="little")
    return bits[:, :d]


# ---------------------------------------------------------------------------
# distances


def _popcount_rows(x: np.ndarray) -> np.ndarray:
    return np.bitwise_count(x).sum(axis=-1, dtype=np.int64)


def validate_point(domain: Domain, p: Point) -> None:
    expected = payload_kind(domain)
    if p.kind != expected:
        raise ValueError(f"point payload {p.kind!r} does not match domain {domain.kind!r}")
    if domain.kind == SPHERE:
        norm = float(np.linalg.norm(p.data))
        if abs(norm - 1.0) > _ATOL:
            raise ValueError(f"sphere point has norm {norm!r}")
    if domain.kind == FINITE and not (0 <= int(p.data) < domain.dim):
        raise ValueError("finite-domain point index out of range")


def distance(domain: Domain, x: Point, y: Point) -> float:
    """Metric distance, including norm_factor and the 1/d Hamming normalization."""
    expected = payload_kind(domain)
    if x.kind != expected or y.kind != expected:
        raise ValueError(
            f"payload kinds ({x.kind!r}, {y.kind!r}) do not match domain {domain.kind!r}"
        )
    nf = domain.norm_factor
    if domain.kind == HAMMING:
        diff = np.bitwise_xor(np.asarray(x.data), np.asarray(y.data))
        return float(_popcount_rows(diff)) / domain.dim * nf
    if domain.kind == FINITE:
        return float(domain.matrix[int(x.data), int(y.data)]) * nf
    return float(np.linalg.norm(np.asarray(x.data) - np.asarray(y.data))) * nf


def row_distances(domain: Domain, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distances between matching rows of two storage arrays."""
    nf = domain.norm_factor
    if domain.kind == HAMMING:
        return _popcount_rows(np.bitwise_xor(a, b)) / domain.dim * nf
    if domain.kind == FINITE:
        return domain.matrix[a, b] * nf
    return np.linalg.norm(a - b, axis=1) * nf


def distances_to_point(
    dataset: Dataset, q: Point, idx: Optional[np.ndarray] = None
) -> np.ndarray:
    """Distances from a query point to every dataset point (or a subset)."""
    dom = dataset.domain
    data = dataset.data if idx is None else dataset.data[idx]
    nf = dom.norm_factor
    if dom.kind == HAMMING:
        diff = np.bitwise_xor(data, np.asarray(q.data)[None, :])
        return _popcount_rows(diff) / dom.dim * nf
    if dom.kind == FINITE:
        return dom.matrix[int(q.data), data] * nf
    return np.linalg.norm(data - np.asarray(q.data)[None, :], axis=1) * nf


def cross_distances(domain: Domain, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Full (len(a), len(b)) distance matrix between two storage arrays.

    Hamming blocks are chunked to bound the intermediate (chunk, m, words)
    XOR buffer.
    """
    nf = domain.norm_factor
    if domain.kind in EUCLIDEAN_KINDS:
        return cdist(a, b) * nf
    if domain.kind == FINITE:
        return domain.matrix[np.ix_(a, b)] * nf
    n, w = a.shape
    m = b.shape[0]
    out = np.empty((n, m), dtype=np.float64)
    chunk = max(1, (1 << 22) // max(1, m * w))
    for lo in range(0, n, chunk):
        hi = min(n, lo + chunk)
        diff = np.bitwise_xor(a[lo:hi, None, :], b[None, :, :])
        out[lo:hi] = np.bitwise_count(diff).sum(axis=-1, dtype=np.int64)
    return out / domain.dim * nf


def pairwise_distances(dataset: Dataset) -> np.ndarray:
    """Condensed vector of all n(n-1)/2 pairwise distances (pdist ordering)."""
    dom = dataset.domain
    nf = dom.norm_factor
    if dom.kind in EUCLIDEAN_KINDS:
        return pdist(dataset.data) * nf
    if dom.kind == HAMMING:
        bits = unpack_bits(dataset.data, dom.dim)
        return pdist(bits, metric="hamming") * nf
    idx = dataset.data
    sub = dom.matrix[np.ix_(idx, idx)] * nf
    n = len(idx)
    iu = np.triu_indices(n, k=1)
    return sub[iu]


# ---------------------------------------------------------------------------
# characteristic size and normalization


def analytic_char_size(domain: Domain) -> Optional[float]:
    """Closed-form expected distance between two random points, or None."""
    nf = domain.norm_factor
    if domain.kind == HAMMING:
        return 0.5 * nf
    if domain.kind == GAUSSIAN:
        d = domain.dim
        return 2.0 * math.exp(math.lgamma((d + 1) / 2) - math.lgamma(d / 2)) * nf
    if domain.kind == SPHERE:
        d = domain.dim
        lbeta = lambda p, q: math.lgamma(p) + math.lgamma(q) - math.lgamma(p + q)
        half = (d - 1) / 2
        return 2.0 * math.exp(lbeta(d / 2, half) - lbeta(half, half)) * nf
    if domain.kind == FINITE:
        m = domain.matrix
        n = m.shape[0]
        if n == 1:
            return 0.0
        return float((m.sum() / (n * (n - 1)))) * nf
    return None  # cube: no closed form used


def char_size(domain: Domain, pair_count: int, seed: int) -> float:
    """Monte Carlo estimate of the expected distance between two random points.

    pair_count == 0 is the sentinel for the analytic value where one exists
    (hamming, gaussian, sphere, finite).
    """
    if pair_count == 0:
        value = analytic_char_size(domain)
        if value is None:
            raise ValueError(f"no analytic characteristic size for kind {domain.kind!r}")
        return value
    if pair_count < 1:
        raise ValueError("pair_count must be >= 1 (or 0 for analytic)")
    if domain.kind == FINITE:
        # coincident index pairs are redrawn so the estimate matches the
        # off-diagonal analytic value
        rng = generator(seed, "charsize:finite")
        i = rng.integers(0, domain.dim, size=pair_count, dtype=np.int64)
        j = rng.integers(0, domain.dim, size=pair_count, dtype=np.int64)
        while True:
            clash = i == j
            if not clash.any():
                break
            j[clash] = rng.integers(0, domain.dim, size=int(clash.sum()), dtype=np.int64)
        return float(np.mean(domain.matrix[i, j])) * domain.norm_factor
    xs = sample(domain, pair_count, child_seed(seed, "charsize:x"))
    ys = sample(domain, pair_count, child_seed(seed, "charsize:y"))
    return float(np.mean(row_distances(domain, xs.data, ys.data)))


def normalize(domain: Domain, pair_count: int = 100_000, seed: int = 0) -> Domain:
    """Rescale the metric so the characteristic size is 1.

    Uses the analytic value where available, Monte Carlo otherwise; the
    estimate that was used is recorded on the returned domain.
    """
    cs = analytic_char_size(domain)
    if cs is None:
        cs = char_size(domain, pair_count, seed)
    if not cs > 0:
        raise DegenerateDomainError(f"characteristic size {cs!r} is not positive")
    return replace(
        domain,
        norm_factor=domain.norm_factor / cs,
        normalized=True,
        charsize_estimate=cs,
    )


# ---------------------------------------------------------------------------
# file loading

# Vector file format: ASCII, one point per line, d whitespace-separated reals.
# Finite-metric file format: first line n, then n lines of n reals.


def load_vectors(path: str, d: int) -> Dataset:
    """Load whitespace-separated vectors into a Euclidean R^d dataset."""
    rows = []
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            fields = line.split()
            if len(fields) != d:
                raise FormatError(
                    f"{path}:{lineno}: expected {d} values, found {len(fields)}"
                )
            try:
                rows.append([float(f) for f in fields])
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise FormatError(f"{path}: no data rows")
    return Dataset(gaussian(d), np.asarray(rows, dtype=np.float64), seed=0)


def load_finite_metric(path: str) -> Domain:
    """Load an explicit n x n distance matrix (first line holds n)."""
    with open(path, "r", encoding="ascii") as fh:
        lines = [ln for ln in (raw.strip() for raw in fh) if ln]
    if not lines:
        raise FormatError(f"{path}: empty file")
    try:
        n = int(lines[0])
    except ValueError:
        raise FormatError(f"{path}:1: expected point count") from None
    if len(lines) - 1 != n:
        raise FormatError(f"{path}: expected {n} matrix rows, found {len(lines) - 1}")
    m = np.empty((n, n), dtype=np.float64)
    for r in range(n):
        fields = lines[1 + r].split()
        if len(fields) != n:
            raise FormatError(
                f"{path}:{r + 2}: expected {n} values, found {len(fields)}"
            )
        try:
            m[r] = [float(f) for f in fields]
        except ValueError as exc:
            raise FormatError(f"{path}:{r + 2}: {exc}") from None
    return finite_metric(m)
