"""Majorization orders, Schur-convexity probes and unitary-stochastic
matrices.

All comparisons sort their inputs into non-increasing order first. Prefix
sums are compared after dividing both vectors by the total of the
dominating vector so the tolerances are scale-free.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "ordered",
    "majorizes",
    "weakly_submajorizes",
    "weakly_supermajorizes",
    "UnitaryStochasticPair",
    "unitary_stochastic_from_majorization",
    "dft_matrix",
    "random_majorized",
    "SchurVerdict",
    "schur_probe",
    "k_tuple_inequality_check",
]

PREFIX_TOL = 1e-12


def ordered(x) -> np.ndarray:
    """Copy of `x` as a float vector sorted non-increasing."""
    return np.sort(np.asarray(x, dtype=float).ravel())[::-1]


def _prepared(a, b):
    a, b = ordered(a), ordered(b)
    if a.size != b.size:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    scale = abs(b.sum())
    if scale == 0.0:
        scale = max(1.0, float(np.max(np.abs(b)))) if b.size else 1.0
    return a / scale, b / scale


def majorizes(a, b, tol: float = PREFIX_TOL) -> bool:
    """True iff `a` is majorized by `b` (``a ≺ b``).

    Every prefix sum of sorted `a` is at most the matching prefix sum of
    sorted `b`, and the totals agree.
    """
    a, b = _prepared(a, b)
    ca, cb = np.cumsum(a), np.cumsum(b)
    return bool(np.all(ca <= cb + tol) and abs(ca[-1] - cb[-1]) <= tol)


def weakly_submajorizes(a, b, tol: float = PREFIX_TOL) -> bool:
    """True iff ``a ≺_w b``: prefix sums of `a` never exceed those of `b`."""
    a, b = _prepared(a, b)
    return bool(np.all(np.cumsum(a) <= np.cumsum(b) + tol))


def weakly_supermajorizes(a, b, tol: float = PREFIX_TOL) -> bool:
    """True iff ``a ≺^w b``: the sum of the `k` smallest entries of `a` is
    at least that of `b`, for every `k`.

    Equivalently ``-a ≺_w -b``. This is the form under which decreasing
    convex maps send ``a ≺^w b`` to ``g(a) ≺_w g(b)``.
    """
    a, b = _prepared(a, b)
    return bool(np.all(np.cumsum(a[::-1]) >= np.cumsum(b[::-1]) - tol))


@dataclass(frozen=True)
class UnitaryStochasticPair:
    gamma: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        q = np.abs(self.gamma) ** 2
        if not np.allclose(q, self.q, atol=1e-12, rtol=0):
            raise ValueError("Q is not |Gamma|^2")


def dft_matrix(n: int) -> np.ndarray:
    """Unitary DFT matrix; every entry has squared magnitude ``1/n``."""
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n) / np.sqrt(n)


def _givens_chain(u: np.ndarray, v: np.ndarray, tol: float) -> np.ndarray:
    # Marshall-Olkin T-transform sequence realised as plane rotations. Each
    # rotation matches at least one coordinate to its target; matched
    # coordinates are never rotated again, so the unmatched block of
    # Gamma^H diag(v) Gamma stays diagonal and equals `d` below.
    n = v.size
    d = v.copy()
    gamma = np.eye(n, dtype=complex)
    for _ in range(n):
        diff = d - u
        above = np.flatnonzero(diff > tol)
        if above.size == 0:
            break
        j = int(above[-1])
        below = np.flatnonzero(diff[j + 1 :] < -tol)
        if below.size == 0:
            break
        k = j + 1 + int(below[0])
        delta = min(d[j] - u[j], u[k] - d[k])
        gap = d[j] - d[k]
        c2 = (gap - delta) / gap
        c, s = np.sqrt(c2), np.sqrt(max(0.0, 1.0 - c2))
        rot = np.eye(n, dtype=complex)
        rot[j, j] = c
        rot[k, k] = c
        rot[j, k] = -s
        rot[k, j] = s
        gamma = gamma @ rot
        d[j] -= delta
        d[k] += delta
    return gamma


def unitary_stochastic_from_majorization(u, v, tol: float = 1e-13) -> UnitaryStochasticPair:
    """Unitary `Gamma` with ``Q = |Gamma|^2`` doubly stochastic and ``u = v Q``.

    Equivalently ``diag(Gamma^H diag(v) Gamma) = u``. A constant `u` is
    served by the DFT matrix; equal vectors by the identity; anything else
    by a chain of at most ``n - 1`` plane rotations.

    Both vectors are sorted non-increasing first.

    Raises
    ------
    ValueError
        If `u` is not majorized by `v`.
    """
    u, v = ordered(u), ordered(v)
    if not majorizes(u, v):
        raise ValueError("u is not majorized by v")
    n = v.size
    scale = max(1.0, float(np.max(np.abs(v))))
    if np.allclose(u, v, rtol=0, atol=tol * scale):
        gamma = np.eye(n, dtype=complex)
    elif np.ptp(u) <= tol * scale:
        gamma = dft_matrix(n)
    else:
        gamma = _givens_chain(u, v, tol * scale)
    return UnitaryStochasticPair(gamma, np.abs(gamma) ** 2)


def random_majorized(b, rng: np.random.Generator, steps: int | None = None) -> np.ndarray:
    """Random vector majorized by `b`, built from random T-transforms."""
    a = np.asarray(b, dtype=float).copy()
    n = a.size
    steps = n if steps is None else steps
    for _ in range(steps):
        i, j = rng.choice(n, size=2, replace=False)
        lam = rng.uniform()
        ai, aj = a[i], a[j]
        a[i] = lam * ai + (1 - lam) * aj
        a[j] = lam * aj + (1 - lam) * ai
    return a


@dataclass(frozen=True)
class SchurVerdict:
    """Outcome of :func:`schur_probe`; flags only mean "not falsified"."""

    concave: bool
    convex: bool

    @property
    def label(self) -> str:
        if self.concave and self.convex:
            return "both"
        if self.concave:
            return "consistent-concave"
        if self.convex:
            return "consistent-convex"
        return "neither"


def schur_probe(
    f: Callable[[np.ndarray], float],
    dim: int,
    trials: int,
    rng: np.random.Generator,
    tol: float = 1e-10,
) -> SchurVerdict:
    """Randomized falsifier for Schur-concavity / Schur-convexity of `f`.

    Draws positive vectors `b`, derives ``a ≺ b`` through random
    T-transforms, and records which of ``f(a) >= f(b)`` (concave) and
    ``f(a) <= f(b)`` (convex) held on every sampled pair. A surviving flag
    is evidence, never proof.
    """
    if dim < 2 or trials < 1:
        raise ValueError("need dim >= 2 and trials >= 1")
    concave = convex = True
    for _ in range(trials):
        b = rng.uniform(0.05, 1.0, size=dim)
        a = random_majorized(b, rng)
        fa, fb = float(f(a)), float(f(b))
        slack = tol * max(1.0, abs(fa), abs(fb))
        concave &= fa >= fb - slack
        convex &= fa <= fb + slack
        if not (concave or convex):
            break
    return SchurVerdict(bool(concave), bool(convex))


def k_tuple_inequality_check(x, y, tol: float = 1e-12) -> bool:
    """Evaluate ``sum(x) <= (1/K) * sum(x / y) * sum(y)``.

    The inequality is guaranteed when `x` is non-decreasing and `y`
    non-increasing (then ``x / y`` and `y` are oppositely ordered); for
    arbitrary orderings it can fail and the check reports that.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size != y.size:
        raise ValueError("length mismatch")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("entries must be positive")
    k = x.size
    lhs = x.sum()
    rhs = np.sum(x / y) * np.sum(y) / k
    return bool(lhs <= rhs + tol * max(1.0, abs(rhs)))
