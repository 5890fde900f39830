"""Precoder constructions with perfect CSI and with channel statistics.

A precoder is stored as directions ``V_F`` (semiunitary), power shares
``Lambda_F`` with ``Tr(Lambda_F) <= M`` and the total power ``rho``; an
optional unitary `rotation` is applied after power shaping. The matrix put
on the air is ``F = sqrt(rho / M) V_F Lambda_F^{1/2} Gamma``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import channel as _channel
from .majorization import unitary_stochastic_from_majorization
from .matcore import fix_phase, svd

__all__ = [
    "Precoder",
    "WaterfillResult",
    "StatPowerOptions",
    "StatPowerResult",
    "waterfill",
    "waterfill_batch",
    "numerical_rank",
    "perfect_unconstrained",
    "perfect_semiunitary",
    "perfect_equalized",
    "perfect_fixed",
    "equalizing_rotation",
    "stat_directions",
    "stat_semiunitary",
    "stat_fixed",
    "stat_fixed_powers",
    "snr_threshold",
    "project_capped_simplex",
    "optimize_stat_power",
]

RANK_RTOL = 1e-10
_SEMIUNITARY_TOL = 1e-10
_TRACE_SLACK = 1e-10


@dataclass(frozen=True, eq=False)
class Precoder:
    v_f: np.ndarray
    lambda_f: np.ndarray
    rho: float
    rotation: np.ndarray | None = field(default=None)

    def __post_init__(self):
        v = np.asarray(self.v_f, dtype=complex)
        lam = np.asarray(self.lambda_f, dtype=float).ravel()
        if v.ndim != 2 or v.shape[1] != lam.size:
            raise ValueError("v_f columns must match lambda_f length")
        m = lam.size
        if np.linalg.norm(v.conj().T @ v - np.eye(m)) > _SEMIUNITARY_TOL * max(1, m):
            raise ValueError("v_f is not semiunitary")
        if np.any(lam < 0) or lam.sum() > m + _TRACE_SLACK:
            raise ValueError(f"lambda_f must be non-negative with trace <= {m}")
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        object.__setattr__(self, "v_f", v)
        object.__setattr__(self, "lambda_f", lam)
        object.__setattr__(self, "rho", float(self.rho))
        if self.rotation is not None:
            g = np.asarray(self.rotation, dtype=complex)
            if g.shape != (m, m) or np.linalg.norm(g.conj().T @ g - np.eye(m)) > 1e-10 * m:
                raise ValueError("rotation must be an M x M unitary")
            object.__setattr__(self, "rotation", g)

    @property
    def m(self) -> int:
        return self.lambda_f.size

    @property
    def effective(self) -> np.ndarray:
        """``sqrt(rho / M) V_F Lambda_F^{1/2} Gamma``, the matrix the link sees."""
        f = np.sqrt(self.rho / self.m) * self.v_f * np.sqrt(self.lambda_f)
        if self.rotation is not None:
            f = f @ self.rotation
        return f


@dataclass(frozen=True, eq=False)
class WaterfillResult:
    n_h: int
    mu_h: float
    lambda_wf: np.ndarray


def waterfill(lam, rho: float) -> WaterfillResult:
    """Capacity-achieving power split over parallel modes with gains `lam`.

    Mode ``k`` is active when ``k / lam[k] - sum_{i<=k} 1 / lam[i] <= rho``
    (1-based ``k``); this quantity grows with ``k`` so the active set is a
    prefix. Powers are ``mu - 1 / lam[i]`` on that prefix and sum to `rho`.

    Parameters
    ----------
    lam : array_like
        Positive mode gains in non-increasing order.
    rho : float
        Total power.
    """
    lam = np.asarray(lam, dtype=float).ravel()
    if lam.size == 0:
        raise ValueError("no eigenvalues")
    if not rho > 0:
        raise ValueError("rho must be positive")
    if np.any(lam <= 0):
        raise ValueError("eigenvalues must be positive")
    if np.any(np.diff(lam) > 0):
        raise ValueError("eigenvalues must be non-increasing")
    inv = 1.0 / lam
    k = np.arange(1, lam.size + 1)
    need = k * inv - np.cumsum(inv)
    n = int(np.count_nonzero(need <= rho))
    mu = (rho + inv[:n].sum()) / n
    out = np.zeros_like(lam)
    out[:n] = mu - inv[:n]
    return WaterfillResult(n, float(mu), out)


def waterfill_batch(lam: np.ndarray, rho: float) -> np.ndarray:
    """Vectorized :func:`waterfill` over the rows of `lam` (powers only)."""
    lam = np.asarray(lam, dtype=float)
    inv = 1.0 / lam
    k = np.arange(1, lam.shape[-1] + 1)
    cs = np.cumsum(inv, axis=-1)
    need = k * inv - cs
    n = np.count_nonzero(need <= rho, axis=-1)
    mu = (rho + np.take_along_axis(cs, (n - 1)[..., None], axis=-1)[..., 0]) / n
    return np.where(k <= n[..., None], mu[..., None] - inv, 0.0)


def _h_matrix(h) -> np.ndarray:
    return np.asarray(getattr(h, "h", h), dtype=complex)


def numerical_rank(s: np.ndarray) -> int:
    s = np.asarray(s, dtype=float)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.count_nonzero(s > RANK_RTOL * s[0]))


def _modes(h, m):
    hm = _h_matrix(h)
    res = svd(hm)
    if not 1 <= m <= hm.shape[1]:
        raise ValueError(f"m={m} outside 1..{hm.shape[1]}")
    if numerical_rank(res.singular_values) < m:
        raise ValueError(f"channel rank is below m={m}")
    return res.right[:, :m], res.singular_values[:m] ** 2


def perfect_unconstrained(h, m: int, rho: float) -> Precoder:
    """Dominant right singular vectors with waterfilled powers."""
    v, lam = _modes(h, m)
    wf = waterfill(lam, rho)
    return Precoder(v, wf.lambda_wf * (m / rho), rho)


def perfect_semiunitary(h, m: int, rho: float) -> Precoder:
    """Dominant right singular vectors with equal power."""
    v, _ = _modes(h, m)
    return Precoder(v, np.ones(m), rho)


def equalizing_rotation(values) -> np.ndarray:
    """Unitary ``Gamma`` with constant ``diag(Gamma^H diag(values) Gamma)``."""
    values = np.asarray(values, dtype=float)
    order = np.argsort(-values, kind="stable")
    target = np.full(values.size, values.mean())
    pair = unitary_stochastic_from_majorization(target, values[order])
    return np.eye(values.size)[:, order] @ pair.gamma


def _unrotated_mse(lam, lambda_f, rho, m):
    return 1.0 / (1.0 + (rho / m) * lambda_f * lam)


def perfect_equalized(h, m: int, rho: float) -> Precoder:
    """Equal-power precoder rotated so every stream sees the same MSE."""
    v, lam = _modes(h, m)
    gamma = equalizing_rotation(_unrotated_mse(lam, np.ones(m), rho, m))
    return Precoder(v @ gamma, np.ones(m), rho)


def perfect_fixed(h, m: int, rho: float, lambda_fixed, objective: str = "schur_concave") -> Precoder:
    """Dominant singular directions with a prescribed power profile.

    For ``objective="schur_convex"`` an MSE-equalizing rotation is applied
    after the power shaping.
    """
    lf = np.asarray(lambda_fixed, dtype=float).ravel()
    if lf.size != m:
        raise ValueError("lambda_fixed must have m entries")
    if np.any(lf < 0) or lf.sum() > m + _TRACE_SLACK:
        raise ValueError(f"lambda_fixed must be non-negative with trace <= {m}")
    v, lam = _modes(h, m)
    if objective == "schur_concave":
        return Precoder(v, lf, rho)
    if objective == "schur_convex":
        gamma = equalizing_rotation(_unrotated_mse(lam, lf, rho, m))
        return Precoder(v, lf, rho, rotation=gamma)
    raise ValueError(f"unknown objective {objective!r}")


def _sorted_columns(model, m):
    gt = np.asarray(model.gamma_t, dtype=float)
    if not 1 <= m <= gt.size:
        raise ValueError(f"m={m} outside 1..{gt.size}")
    order = np.argsort(-gt, kind="stable")
    if not gt[order[m - 1]] > 0:
        raise ValueError(f"transmit covariance has rank below m={m}")
    return order[:m], gt[order]


def stat_directions(model, m: int) -> np.ndarray:
    """Eigenvectors of the transmit covariance for its `m` largest eigenvalues.

    Ties go to the lowest index.
    """
    cols, _ = _sorted_columns(model, m)
    return fix_phase(model.u_t[:, cols])


def stat_semiunitary(model, m: int, rho: float) -> Precoder:
    return Precoder(stat_directions(model, m), np.ones(m), rho)


def snr_threshold(model, m: int, alpha: float) -> float:
    """``alpha m / lambda_t(m)``: above it the fixed profile becomes uniform."""
    if not alpha > 1:
        raise ValueError("alpha must exceed 1")
    _, gt = _sorted_columns(model, m)
    return float(alpha * m / gt[m - 1])


def stat_fixed_powers(model, m: int, rho: float, alpha: float) -> np.ndarray:
    thr = snr_threshold(model, m, alpha)
    _, gt = _sorted_columns(model, m)
    if rho < thr:
        return m * gt[:m] / gt[:m].sum()
    return np.ones(m)


def stat_fixed(model, m: int, rho: float, alpha: float) -> Precoder:
    """Statistical directions with power proportional to the dominant
    transmit eigenvalues below the SNR threshold, uniform at or above it."""
    return Precoder(stat_directions(model, m), stat_fixed_powers(model, m, rho, alpha), rho)


@dataclass(frozen=True)
class StatPowerOptions:
    batch: int = 2000
    step: float | None = None
    tol: float = 1e-6
    max_iters: int = 10_000


@dataclass(frozen=True, eq=False)
class StatPowerResult:
    power: np.ndarray
    converged: bool
    iterations: int
    objective: float
    history: np.ndarray


def project_capped_simplex(x, cap: float) -> np.ndarray:
    """Euclidean projection onto ``{y >= 0, sum(y) <= cap}``."""
    x = np.asarray(x, dtype=float)
    y = np.maximum(x, 0.0)
    if y.sum() <= cap:
        return y
    u = np.sort(x)[::-1]
    css = np.cumsum(u) - cap
    idx = np.arange(1, x.size + 1)
    r = np.flatnonzero(u - css / idx > 0)[-1]
    theta = css[r] / (r + 1)
    return np.maximum(x - theta, 0.0)


def _saa(b, c):
    # log det(I + c diag(lam) B) averaged over the batch, and its gradient
    m = b.shape[-1]
    eye = np.eye(m)

    def value_grad(lam):
        k = eye + c * lam[:, None] * b
        _, logdet = np.linalg.slogdet(k)
        kinv = np.linalg.inv(k)
        g = c * np.einsum("nij,nji->ni", b, kinv).real
        return float(logdet.mean()), g.mean(axis=0)

    return value_grad


def optimize_stat_power(
    model, m: int, rho: float, options: StatPowerOptions | None = None, rng=None
) -> StatPowerResult:
    """Power profile over the statistical directions maximizing average
    log-det mutual information (nats), by projected gradient ascent.

    The expectation is replaced by an average over ``options.batch`` fixed
    channel draws. Steps grow by 1.5 after an accepted move and halve on
    rejection; iteration stops when ``||P(x + grad) - x|| < tol``.
    Non-convergence returns the best iterate with ``converged=False`` and
    emits a ``RuntimeWarning``.
    """
    options = options or StatPowerOptions()
    if options.batch < 100:
        raise ValueError("batch must be >= 100")
    if rng is None:
        rng = np.random.default_rng()
    cols, _ = _sorted_columns(model, m)
    w = _channel.complex_gaussian((options.batch, model.n_r, model.n_t), rng)
    h_t = (np.sqrt(model.variance_profile) * w)[:, :, cols]
    b = np.einsum("nik,nil->nkl", h_t.conj(), h_t)
    value_grad = _saa(b, rho / m)

    x = np.ones(m)
    fx, gx = value_grad(x)
    step = options.step if options.step is not None else 0.1 / rho
    history = [fx]
    converged = False
    it = 0
    for it in range(1, options.max_iters + 1):
        if np.linalg.norm(project_capped_simplex(x + gx, m) - x) < options.tol:
            converged = True
            break
        y = project_capped_simplex(x + step * gx, m)
        fy, gy = value_grad(y)
        if fy >= fx:
            x, fx, gx = y, fy, gy
            history.append(fx)
            step *= 1.5
        else:
            step *= 0.5
            if step < 1e-300:
                break
    if not converged:
        warnings.warn(
            f"stat power optimization did not converge in {options.max_iters} iterations",
            RuntimeWarning,
            stacklevel=2,
        )
    return StatPowerResult(x, converged, it, fx, np.asarray(history))
