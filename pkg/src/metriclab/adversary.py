"""Adversarial distance oracle for exact black-box nearest-neighbor search.

The oracle answers 1 (the diameter) to every distance probe.  If a search
algorithm halts after missing at least two points, the adversary retroactively
commits to a query point, realized as a one-point metric extension whose
distance function f satisfies the Katetov constraints
|f(x) - f(y)| <= d(x, y) <= f(x) + f(y), that is consistent with every answer
given and whose unique nearest neighbor is an unqueried point.  Any such
algorithm is therefore wrong on some legal query.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from . import domains
from .domains import Domain
from .errors import (
    InvalidStateError,
    KatetovViolation,
    ProtocolError,
    UniquenessViolation,
)

_SLACK = 1e-12

DEFAULT_MODE = "default"
PAPER_MODE = "paper"


@dataclass(eq=False)
class KatetovFunction:
    """A one-point extension's distance values over a finite base space."""

    domain: Domain
    values: np.ndarray


def first_katetov_violation(domain: Domain, values) -> Optional[tuple]:
    """First pair violating the extension constraints, or None.

    Returns (i, j, kind, lhs, rhs) with kind "difference" for
    |f(i) - f(j)| > d(i, j) and "sum" for f(i) + f(j) < d(i, j).
    """
    vals = np.asarray(values, dtype=np.float64)
    if domain.kind != domains.FINITE:
        raise ValueError("Katetov checks require a finite domain")
    n = domain.dim
    if len(vals) != n:
        raise ValueError(f"expected {n} values, got {len(vals)}")
    dist = domain.matrix * domain.norm_factor
    diff = np.abs(vals[:, None] - vals[None, :])
    total = vals[:, None] + vals[None, :]
    upper = np.triu(np.ones((n, n), dtype=bool), k=1)
    bad = upper & ((diff > dist + _SLACK) | (total < dist - _SLACK))
    if not bad.any():
        return None
    flat = int(np.flatnonzero(bad.ravel())[0])  # first pair in row-major order
    i, j = divmod(flat, n)
    if diff[i, j] > dist[i, j] + _SLACK:
        return (i, j, "difference", float(diff[i, j]), float(dist[i, j]))
    return (i, j, "sum", float(total[i, j]), float(dist[i, j]))


def is_katetov(domain: Domain, values) -> bool:
    return first_katetov_violation(domain, values) is None


def diameter_normalized(space: Domain) -> Domain:
    """The same finite space with norm_factor set so the diameter is 1."""
    if space.kind != domains.FINITE:
        raise ValueError("adversary requires a finite domain")
    diam = float(space.matrix.max()) * space.norm_factor
    if not diam > 0:
        raise ValueError("space diameter must be positive")
    return replace(space, norm_factor=space.norm_factor / diam)


class Adversary:
    """Mutable oracle session; confine each instance to one thread of control."""

    def __init__(self, space: Domain):
        self.space = diameter_normalized(space)
        self.n = self.space.dim
        self.queried: list = []  # ordered, distinct
        self._queried_set: set = set()
        self.call_log: list = []
        self.finalized: Optional[KatetovFunction] = None
        self.final_mode: Optional[str] = None

    def answer(self, x: int) -> float:
        """Pre-finalization oracle: every distance is the diameter."""
        if self.finalized is not None:
            raise InvalidStateError("adversary already finalized; use the function values")
        x = int(x)
        if not (0 <= x < self.n):
            raise ValueError("point index out of range")
        if x not in self._queried_set:
            self._queried_set.add(x)
            self.queried.append(x)
        self.call_log.append(x)
        return 1.0

    def finalize(self, x0: int, mode: str = DEFAULT_MODE) -> KatetovFunction:
        """Commit to a query whose unique nearest neighbor is x0.

        default: f = 1 everywhere except f(x0) = 1 - d(x0, rest)/2, which is
        always a valid extension.  paper: the max-formula
        f(x) = max(1 - d(x, Y), d(x0, Y) - d(x, x0)), which is verified and
        rejected with a structured error when the extension constraints or
        the uniqueness of x0 fail.
        """
        x0 = int(x0)
        if not (0 <= x0 < self.n):
            raise ValueError("x0 out of range")
        if x0 in self._queried_set:
            raise ValueError(f"x0={x0} was already queried")
        dist = self.space.matrix * self.space.norm_factor
        others = [i for i in range(self.n) if i != x0]
        if mode == DEFAULT_MODE:
            values = np.ones(self.n)
            values[x0] = 1.0 - dist[x0, others].min() / 2.0
        elif mode == PAPER_MODE:
            if not self.queried:
                raise ValueError("paper-mode finalization requires at least one answered probe")
            y = np.array(self.queried)
            d_to_y = dist[:, y].min(axis=1)
            values = np.maximum(1.0 - d_to_y, d_to_y[x0] - dist[:, x0])
        else:
            raise ValueError(f"unknown finalization mode {mode!r}")
        violation = first_katetov_violation(self.space, values)
        if violation is not None:
            raise KatetovViolation(*violation)
        argmin = set(np.flatnonzero(values == values.min()).tolist())
        if argmin != {x0}:
            raise UniquenessViolation(x0, argmin)
        if any(values[i] != 1.0 for i in self.queried):
            raise AssertionError("finalized values contradict an answered probe")
        self.finalized = KatetovFunction(self.space, values)
        self.final_mode = mode
        return self.finalized


# ---------------------------------------------------------------------------
# the game


@dataclass
class GameResult:
    distinct_calls: int
    total_calls: int
    answer: int
    fooled: bool
    x0: Optional[int]
    values: Optional[np.ndarray]
    call_sequence: list


def run_adversary_game(space: Domain, algorithm: Callable) -> GameResult:
    """Run a black-box search algorithm against a fresh adversary.

    The algorithm receives (oracle, n) and must return a point index, probing
    distances only through the oracle.  When it halts after missing at least
    two points, the adversary finalizes on an unqueried point other than the
    answer; fooled means the answer is not a nearest neighbor of the finalized
    query.  Algorithms that probed n-1 or more points are never fooled here.
    """
    adv = Adversary(space)
    n = adv.n
    budget = n * (n + 1)

    def oracle(x: int) -> float:
        if len(adv.call_log) >= budget:
            raise ProtocolError(f"algorithm exceeded {budget} oracle calls")
        return adv.answer(x)

    answer = int(algorithm(oracle, n))
    if not (0 <= answer < n):
        raise ProtocolError(f"algorithm returned invalid index {answer}")
    k = len(adv.queried)
    if k >= n - 1:
        return GameResult(k, len(adv.call_log), answer, False, None, None, list(adv.call_log))
    excluded = set(adv.queried) | {answer}
    x0 = min(i for i in range(n) if i not in excluded)
    fn = adv.finalize(x0)
    fooled = bool(fn.values[answer] > fn.values.min())
    return GameResult(
        k, len(adv.call_log), answer, fooled, x0, fn.values, list(adv.call_log)
    )


def full_scan(oracle: Callable, n: int) -> int:
    """Probe every point; return the closest seen (lowest index on ties)."""
    best, best_d = 0, oracle(0)
    for i in range(1, n):
        d = oracle(i)
        if d < best_d:
            best, best_d = i, d
    return best


def early_stop_scanner(k: int) -> Callable:
    """A scanner that gives up after k probes and returns the best seen."""

    def algo(oracle: Callable, n: int) -> int:
        stop = min(k, n)
        best, best_d = 0, oracle(0)
        for i in range(1, stop):
            d = oracle(i)
            if d < best_d:
                best, best_d = i, d
        return best

    return algo


def game_transcript_json(result: GameResult) -> str:
    """Audit dump: call sequence, answers, finalized values, verdict."""
    payload = {
        "calls": result.call_sequence,
        "answers": [1.0] * len(result.call_sequence),
        "distinct_calls": result.distinct_calls,
        "answer": result.answer,
        "x0": result.x0,
        "finalized_values": None if result.values is None else list(map(float, result.values)),
        "fooled": result.fooled,
    }
    return json.dumps(payload)
