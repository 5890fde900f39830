"""Spatial correlation models, channel sampling and matching metrics.

Both model families reduce to a variance profile ``sigma2[i, j]`` for the
independent-entry matrix ``H_ind``; a realization is
``H = U_r H_ind U_t^H`` with ``H_ind = sqrt(sigma2) * W`` and ``W`` i.i.d.
unit-variance circularly symmetric complex Gaussian.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Union

import numpy as np

__all__ = [
    "SeparableModel",
    "CanonicalModel",
    "ChannelModel",
    "ChannelRealization",
    "ChannelBatch",
    "ChannelStats",
    "sample",
    "sample_batch",
    "complex_gaussian",
    "transmit_covariance",
    "receive_covariance",
    "channel_stats",
    "matching_metric_tx",
    "matching_metric_rx",
    "make_matched",
    "make_mismatched",
    "geometric_profile",
    "matching_sweep_family",
    "CANONICAL_4X4_PROFILE",
]

# Non-separable 4x4 variance profile used in the low/medium-SNR study.
CANONICAL_4X4_PROFILE = np.array(
    [
        [1.66, 0.31, 1.71, 0.31],
        [2.24, 0.18, 0.15, 0.54],
        [1.97, 1.46, 0.70, 0.28],
        [1.65, 1.65, 0.49, 0.71],
    ]
)

_UNITARY_TOL = 1e-10
_SUM_RTOL = 1e-9


def _check_unitary(u, n, name):
    u = np.asarray(u, dtype=complex)
    if u.shape != (n, n):
        raise ValueError(f"{name} must be {n}x{n}, got {u.shape}")
    if np.linalg.norm(u.conj().T @ u - np.eye(n)) > _UNITARY_TOL * max(1, n):
        raise ValueError(f"{name} is not unitary")
    return u


def _check_eigs(v, name):
    v = np.asarray(v, dtype=float).ravel()
    if v.size == 0 or not np.all(np.isfinite(v)):
        raise ValueError(f"{name} must be a non-empty finite vector")
    if np.any(v < 0):
        raise ValueError(f"{name} has negative entries")
    if np.any(np.diff(v) > 1e-12 * max(1.0, v.max())):
        raise ValueError(f"{name} must be non-increasing")
    return v


def _is_identity(u):
    return np.array_equal(u, np.eye(u.shape[0]))


@dataclass(frozen=True, eq=False)
class SeparableModel:
    """Kronecker correlation: ``sigma2[i, j] = lambda_r[i] * lambda_t[j] / rho_c``."""

    lambda_t: np.ndarray
    lambda_r: np.ndarray
    u_t: np.ndarray = None
    u_r: np.ndarray = None

    def __post_init__(self):
        lt = _check_eigs(self.lambda_t, "lambda_t")
        lr = _check_eigs(self.lambda_r, "lambda_r")
        st, sr = lt.sum(), lr.sum()
        if st <= 0 or abs(st - sr) > _SUM_RTOL * max(st, sr):
            raise ValueError(f"sum(lambda_t)={st} and sum(lambda_r)={sr} must agree")
        ut = np.eye(lt.size, dtype=complex) if self.u_t is None else self.u_t
        ur = np.eye(lr.size, dtype=complex) if self.u_r is None else self.u_r
        object.__setattr__(self, "lambda_t", lt)
        object.__setattr__(self, "lambda_r", lr)
        object.__setattr__(self, "u_t", _check_unitary(ut, lt.size, "u_t"))
        object.__setattr__(self, "u_r", _check_unitary(ur, lr.size, "u_r"))

    @property
    def n_t(self) -> int:
        return self.lambda_t.size

    @property
    def n_r(self) -> int:
        return self.lambda_r.size

    @property
    def rho_c(self) -> float:
        return float(self.lambda_t.sum())

    @property
    def variance_profile(self) -> np.ndarray:
        return np.outer(self.lambda_r, self.lambda_t) / self.rho_c

    @property
    def gamma_t(self) -> np.ndarray:
        return self.lambda_t

    @property
    def row_power(self) -> np.ndarray:
        return self.lambda_r


@dataclass(frozen=True, eq=False)
class CanonicalModel:
    """Independent non-identically distributed entries with a variance profile.

    Columns must be ordered so their powers ``gamma_t[k] = sum_i sigma2[i, k]``
    are non-increasing.
    """

    variance_profile: np.ndarray
    u_t: np.ndarray = None
    u_r: np.ndarray = None

    def __post_init__(self):
        prof = np.asarray(self.variance_profile, dtype=float)
        if prof.ndim != 2 or prof.size == 0 or not np.all(np.isfinite(prof)):
            raise ValueError("variance_profile must be a finite 2-D array")
        if np.any(prof < 0):
            raise ValueError("variance_profile has negative entries")
        if prof.sum() <= 0:
            raise ValueError("variance_profile carries no power")
        col = prof.sum(axis=0)
        if np.any(np.diff(col) > 1e-12 * col.max()):
            raise ValueError("column powers of variance_profile must be non-increasing")
        n_r, n_t = prof.shape
        ut = np.eye(n_t, dtype=complex) if self.u_t is None else self.u_t
        ur = np.eye(n_r, dtype=complex) if self.u_r is None else self.u_r
        object.__setattr__(self, "variance_profile", prof)
        object.__setattr__(self, "u_t", _check_unitary(ut, n_t, "u_t"))
        object.__setattr__(self, "u_r", _check_unitary(ur, n_r, "u_r"))

    @property
    def n_t(self) -> int:
        return self.variance_profile.shape[1]

    @property
    def n_r(self) -> int:
        return self.variance_profile.shape[0]

    @property
    def rho_c(self) -> float:
        return float(self.variance_profile.sum())

    @property
    def gamma_t(self) -> np.ndarray:
        return self.variance_profile.sum(axis=0)

    @property
    def lambda_t(self) -> np.ndarray:
        return self.gamma_t

    @property
    def row_power(self) -> np.ndarray:
        return self.variance_profile.sum(axis=1)

    @property
    def lambda_r(self) -> np.ndarray:
        """Receive eigenvalues: row powers sorted non-increasing."""
        return np.sort(self.row_power)[::-1]


ChannelModel = Union[SeparableModel, CanonicalModel]


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    """One draw ``H = U_r H_ind U_t^H``; `h_iid` is the unit-variance seed matrix."""

    h: np.ndarray
    h_ind: np.ndarray
    h_iid: np.ndarray = field(default=None, repr=False)


class ChannelBatch(NamedTuple):
    h: np.ndarray
    h_ind: np.ndarray
    h_iid: np.ndarray


class ChannelStats(NamedTuple):
    rho_c: float
    gamma_r: float
    sigma_t: np.ndarray
    sigma_r: np.ndarray
    gamma_t: np.ndarray


def complex_gaussian(shape, rng: np.random.Generator) -> np.ndarray:
    """Unit-variance circularly symmetric complex Gaussian samples."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * np.sqrt(0.5)


def _rotate(model, h_ind):
    h = h_ind
    if not _is_identity(model.u_r):
        h = model.u_r @ h
    if not _is_identity(model.u_t):
        h = h @ model.u_t.conj().T
    return h


def sample(model: ChannelModel, rng: np.random.Generator) -> ChannelRealization:
    """Draw one channel realization from `model`."""
    w = complex_gaussian((model.n_r, model.n_t), rng)
    h_ind = np.sqrt(model.variance_profile) * w
    return ChannelRealization(_rotate(model, h_ind), h_ind, w)


def sample_batch(model: ChannelModel, count: int, rng: np.random.Generator) -> ChannelBatch:
    """Draw `count` realizations stacked along a leading axis."""
    w = complex_gaussian((count, model.n_r, model.n_t), rng)
    h_ind = np.sqrt(model.variance_profile) * w
    return ChannelBatch(_rotate(model, h_ind), h_ind, w)


def transmit_covariance(model: ChannelModel) -> np.ndarray:
    """``E[H^H H] = U_t diag(gamma_t) U_t^H``."""
    return (model.u_t * model.gamma_t) @ model.u_t.conj().T


def receive_covariance(model: ChannelModel) -> np.ndarray:
    """``E[H H^H] = U_r diag(row powers) U_r^H``."""
    return (model.u_r * model.row_power) @ model.u_r.conj().T


def channel_stats(model: ChannelModel) -> ChannelStats:
    return ChannelStats(
        rho_c=model.rho_c,
        gamma_r=model.rho_c / model.n_r,
        sigma_t=transmit_covariance(model),
        sigma_r=receive_covariance(model),
        gamma_t=model.gamma_t.copy(),
    )


def matching_metric_tx(model: ChannelModel, m: int) -> float:
    """Product of the `m` dominant transmit eigenvalues."""
    lt = np.sort(model.lambda_t)[::-1]
    if not 1 <= m <= lt.size:
        raise ValueError(f"m={m} outside 1..{lt.size}")
    return float(np.prod(lt[:m]))


def matching_metric_rx(model: ChannelModel) -> float:
    """Sum of squared receive eigenvalues."""
    return float(np.sum(np.asarray(model.row_power) ** 2))


def _unitaries(n_t, n_r, rng, random_unitaries):
    if not random_unitaries:
        return None, None
    if rng is None:
        raise ValueError("random unitaries need an rng")
    from .matcore import random_unitary

    return random_unitary(n_t, rng), random_unitary(n_r, rng)


def make_matched(
    n_t: int,
    n_r: int,
    m: int,
    rho_c: float,
    rng: np.random.Generator | None = None,
    random_unitaries: bool = False,
) -> SeparableModel:
    """Rank-`m` transmit side with equal dominant eigenvalues, white receive side."""
    if not 1 <= m <= n_t:
        raise ValueError(f"m={m} outside 1..{n_t}")
    lt = np.zeros(n_t)
    lt[:m] = rho_c / m
    lr = np.full(n_r, rho_c / n_r)
    ut, ur = _unitaries(n_t, n_r, rng, random_unitaries)
    return SeparableModel(lt, lr, ut, ur)


def geometric_profile(n: int, total: float, spread: float = 1e3) -> np.ndarray:
    """Decaying vector with ``v[0] / v[-1] = spread`` summing to `total`."""
    if n == 1:
        return np.array([float(total)])
    r = spread ** (-1.0 / (n - 1))
    v = r ** np.arange(n)
    return total * v / v.sum()


def make_mismatched(
    n_t: int,
    n_r: int,
    m: int,
    rho_c: float,
    profile="geometric",
    rng: np.random.Generator | None = None,
    random_unitaries: bool = False,
    spread: float = 1e3,
) -> SeparableModel:
    """Channel badly matched to an `m`-stream precoder.

    `profile` is ``"geometric"`` (steep decay on both sides with
    ``lambda[0] / lambda[-1] = spread``), ``"iid"`` (flat on both sides), or
    an explicit transmit eigenvalue vector (receive side flat).
    """
    if not 1 <= m <= n_t:
        raise ValueError(f"m={m} outside 1..{n_t}")
    if isinstance(profile, str):
        if profile == "geometric":
            lt = geometric_profile(n_t, rho_c, spread)
            lr = geometric_profile(n_r, rho_c, spread)
        elif profile == "iid":
            lt = np.full(n_t, rho_c / n_t)
            lr = np.full(n_r, rho_c / n_r)
        else:
            raise ValueError(f"unknown profile {profile!r}")
    else:
        lt = np.sort(np.asarray(profile, dtype=float).ravel())[::-1]
        if lt.size != n_t:
            raise ValueError("profile length must equal n_t")
        if abs(lt.sum() - rho_c) > _SUM_RTOL * rho_c:
            raise ValueError("profile must sum to rho_c")
        lr = np.full(n_r, rho_c / n_r)
    if np.count_nonzero(lt > 0) < m:
        raise ValueError(f"profile has rank below m={m}")
    ut, ur = _unitaries(n_t, n_r, rng, random_unitaries)
    return SeparableModel(lt, lr, ut, ur)


def _mt(v, m):
    return float(np.prod(v[:m]))


def _path_point(s, matched, d, tip):
    # s in [0, 1]: matched -> d ; s in [1, 2): d -> tip (rank kept for s < 2)
    if s <= 1.0:
        return (1.0 - s) * matched + s * d
    v = s - 1.0
    return (1.0 - v) * d + v * tip


def matching_sweep_family(
    n_t: int,
    m: int,
    rho_c: float,
    count: int,
    rng: np.random.Generator,
    decades: float = 3.0,
    concentration: float = 0.5,
) -> list[np.ndarray]:
    """Transmit eigenvalue vectors whose matching metric spans `decades` decades.

    Bin ``i`` of `count` equal log-width bins over
    ``[M_max 10^-decades, M_max]`` receives one channel. Each channel lies on
    a random path from the matched vector through a random sorted Dirichlet
    point towards the rank-one vertex; bisection along the path hits a
    target drawn uniformly (in log) inside the bin. Every vector is
    non-increasing, sums to `rho_c` and has rank at least `m`.

    Returns the family sorted by increasing matching metric with
    duplicates removed.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if not 1 <= m <= n_t:
        raise ValueError(f"m={m} outside 1..{n_t}")
    m_max = (rho_c / m) ** m
    matched = np.zeros(n_t)
    matched[:m] = rho_c / m
    tip = np.zeros(n_t)
    tip[0] = rho_c
    edges = np.linspace(-decades, 0.0, count + 1)
    out = []
    for i in range(count):
        target = m_max * 10.0 ** rng.uniform(edges[i], edges[i + 1])
        d = rho_c * np.sort(rng.dirichlet(np.full(n_t, concentration)))[::-1]
        d = np.maximum(d, 1e-300)
        d *= rho_c / d.sum()
        lo, hi = 0.0, 2.0 - 1e-12
        if _mt(_path_point(hi, matched, d, tip), m) > target:
            continue
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if _mt(_path_point(mid, matched, d, tip), m) > target:
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-14:
                break
        v = _path_point(0.5 * (lo + hi), matched, d, tip)
        v = np.sort(v)[::-1]
        v *= rho_c / v.sum()
        if np.count_nonzero(v > 0) >= m:
            out.append(v)
    out.sort(key=lambda v: _mt(v, m))
    family = []
    for v in out:
        if not family or _mt(v, m) > _mt(family[-1], m):
            family.append(v)
    return family
