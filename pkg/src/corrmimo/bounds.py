"""Evaluators for the analytic upper bounds on the relative gaps.

Every evaluator returns the right-hand side of its inequality; mutual
information inside a bound is in nats. Constants the theory leaves
unspecified, including the constant hidden in each ``O(.)`` term, are all
set by ``params.kappa``. Inner expectations are estimated on
``params.trials`` channel draws seeded by ``params.seed``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import channel as _channel
from . import metrics as _metrics
from .precoding import waterfill_batch

__all__ = ["BoundParams", "BoundConditionError", "BOUND_IDS", "evaluate_bound"]

_LN2 = np.log(2.0)


class BoundConditionError(ValueError):
    """The SNR or eigenvalue condition a bound relies on does not hold."""


@dataclass(frozen=True)
class BoundParams:
    alpha: float = 2.0
    beta: float = 1.0
    kappa: float = 1.0
    trials: int = 2000
    seed: int = 0
    eta: float = 0.5


def _sorted(v):
    return np.sort(np.asarray(v, dtype=float))[::-1]


def _require_separable(model, bid):
    if not isinstance(model, _channel.SeparableModel):
        raise ValueError(f"{bid} needs a separable model")


def _high_snr(model, m, rho, alpha):
    lt = _sorted(model.gamma_t)
    thr = alpha * m / lt[m - 1] if lt[m - 1] > 0 else np.inf
    if rho < thr:
        raise BoundConditionError(
            f"rho={rho:.6g} is below alpha*M/lambda_t(M)={thr:.6g} (alpha={alpha})"
        )


def _o_term(model, m, kappa):
    return kappa * (np.sqrt(model.n_t) + np.sqrt(m)) / np.sqrt(model.n_r)


def _spectra(model, m, p):
    return _metrics.draw_spectra(model, m, p.trials, p.seed)


def _inv_lam_moments(spectra, m):
    lam_m = spectra.lam[:, m - 1]
    if np.any(lam_m <= 0):
        raise BoundConditionError("a draw has rank below M; inverse moments diverge")
    inv = 1.0 / lam_m
    return inv.mean(), np.mean(inv**2)


def _waterfill_gap(model, m, rho, p):
    sp = _spectra(model, m, p)
    e1, e2 = _inv_lam_moments(sp, m)
    need = p.alpha * m * e1
    if rho < need:
        raise BoundConditionError(
            f"rho={rho:.6g} is below alpha*E[M/lambda_H(M)]={need:.6g} (alpha={p.alpha})"
        )
    i_stat = _metrics.scheme_outcome(sp, "stat_semi", rho).mi.mean() * _LN2
    return 2.0 * m / (p.alpha**2 * i_stat) * e2 / e1**2


def _direction_gap_separable(model, m, rho, p):
    _require_separable(model, "direction_gap_separable")
    lt, lr = _sorted(model.lambda_t), _sorted(model.lambda_r)
    gamma_r = model.rho_c / model.n_r
    spread = np.sqrt(np.sum(lr**2)) / model.n_r
    return 2 * p.kappa / gamma_r * spread * np.mean(1.0 / np.log1p(rho / m * lt[:m]))


def _direction_gap_canonical(model, m, rho, p):
    gt = _sorted(model.gamma_t)[:m]
    n_t, n_r = model.n_t, model.n_r
    return 2 * p.kappa * np.sqrt(n_t / n_r) * n_r / m * np.sum(1.0 / (gt * np.log1p(rho / m * gt)))


def _beamforming_rate_gap(model, m, rho, p):
    sp = _metrics.draw_spectra(model, 1, p.trials, p.seed)
    i_stat = np.mean(np.log1p(rho * sp.b[:, 0, 0].real))
    n_t, n_r = model.n_t, model.n_r
    return np.log1p(rho * p.kappa * np.sqrt(n_t * np.log(n_r) / n_r)) / i_stat


def _rate_gap_high_snr(model, m, rho, p):
    _require_separable(model, "rate_gap_high_snr")
    _high_snr(model, m, rho, p.alpha)
    lt, lr = _sorted(model.lambda_t), _sorted(model.lambda_r)
    if lr.size < m or lr[m - 1] <= 0:
        raise BoundConditionError("receive side has rank below M")
    rho_c = model.rho_c
    g_r = np.prod(lr[:m]) ** (1.0 / m)
    g_t = np.prod(lt[:m]) ** (1.0 / m)
    rng = np.random.default_rng(np.random.SeedSequence(p.seed))
    w = _channel.complex_gaussian((p.trials, model.n_r, model.n_t), rng)
    a = np.einsum("nik,i,nil->nkl", w.conj(), lr, w)
    b = np.einsum("nik,k,njk->nij", w, lt, w.conj())
    top_a = np.linalg.eigvalsh(a)[:, -1]
    top_b = np.linalg.eigvalsh(b)[:, -1]
    kappa4 = p.kappa + min(np.mean(np.log(top_a / g_r)), np.mean(np.log(top_b / g_t)))
    den = np.log(rho / np.e) + np.mean(np.log(lt[:m] * lr[:m] / rho_c))
    if den <= 0:
        raise BoundConditionError(f"denominator {den:.6g} is not positive at rho={rho:.6g}")
    return (np.log(np.e / m) + kappa4) / den


def _error_gap_tail(model, m, rho, p):
    sp = _spectra(model, m, p)
    b2 = p.beta**2
    pu = _metrics.scheme_outcome(sp, "perf_unconst", rho).sinr
    ss = _metrics.scheme_outcome(sp, "stat_semi", rho).sinr
    if np.any(b2 * pu <= 1.0):
        bad = int(np.count_nonzero(np.any(b2 * pu <= 1.0, axis=1)))
        raise BoundConditionError(f"{bad} draws have beta^2 SINR <= 1; the tail bound is void")
    d = pu - ss
    with np.errstate(over="ignore"):
        terms = np.exp(b2 * d / 2) * np.sqrt(1.0 + d / ss) / (1.0 - 1.0 / (b2 * pu))
    return float(np.mean(terms.mean(axis=1) - 1.0))


def _error_gap_separable(model, m, rho, p):
    _require_separable(model, "error_gap_separable")
    _high_snr(model, m, rho, p.alpha)
    lt = _sorted(model.lambda_t)[:m]
    b2, a = p.beta**2, p.alpha
    e1, e2 = _inv_lam_moments(_spectra(model, m, p), m)
    gamma_r = model.rho_c / model.n_r
    first = np.sum(1.0 / (rho * lt / m - 1.0)) / (b2 * m) + b2 * (1 + m / a)
    inner = 1 / a + e2 / (a**2 * e1**2) + _o_term(model, m, p.kappa) / gamma_r
    return first + b2 * rho * lt.sum() / m * inner


def _error_gap_separable_dominant(model, m, rho, p):
    _require_separable(model, "error_gap_separable_dominant")
    _high_snr(model, m, rho, p.alpha)
    lt = _sorted(model.lambda_t)[:m]
    b2 = p.beta**2
    return np.sum(1.0 / lt) / (b2 * rho) + b2 * lt.sum() / lt[-1]


def _error_gap_canonical(model, m, rho, p):
    _high_snr(model, m, rho, p.alpha)
    gt = _sorted(model.gamma_t)[:m]
    b2, a = p.beta**2, p.alpha
    gamma_r = model.rho_c / model.n_r
    avg = gt.sum() / m
    return (
        b2 * rho / (2 * a) * avg
        + np.sum(1.0 / gt) / (b2 * rho)
        + b2 * rho / (2 * gamma_r) * avg * _o_term(model, m, p.kappa)
    )


def _error_gap_canonical_threshold(model, m, rho, p):
    prof = model.variance_profile
    gt = prof.sum(axis=0)
    order = np.argsort(-gt, kind="stable")[:m]
    cols = gt[order]
    b2 = p.beta**2
    return b2 / 2 * cols.sum() / cols[-1] + cols[-1] * np.sum(1.0 / cols) / (b2 * p.alpha * m)


def _beamforming_error_gap_separable(model, m, rho, p):
    _require_separable(model, "beamforming_error_gap_separable")
    lt = _sorted(model.lambda_t)
    n_t, n_r = model.n_t, model.n_r
    gamma_r = model.rho_c / n_r
    if not lt[0] > lt[1] * (1 + 2 / (gamma_r * n_r**p.eta)):
        raise BoundConditionError("dominant transmit eigenvalue is not separated enough")
    g = _metrics.gap_statistics(model, 1)
    return p.kappa * np.sqrt(g.mu_r2) / (g.gap_t * gamma_r) * np.sqrt(n_t * np.log(n_r) / n_r)


def _beamforming_error_gap_canonical(model, m, rho, p):
    gt = _sorted(model.gamma_t)
    n_t, n_r = model.n_t, model.n_r
    if not gt[0] / n_r > gt[1] / n_r + 2 / n_r**p.eta:
        raise BoundConditionError("dominant column power is not separated enough")
    g = _metrics.gap_statistics(model, 1)
    return p.kappa * np.sqrt(g.gap_t_c * g.mu_r2_c) * np.sqrt(n_t * np.log(n_r) / n_r)


def _mse_gap(model, m, rho, p):
    _high_snr(model, m, rho, p.alpha)
    lt = _sorted(model.gamma_t)[:m]
    a = p.alpha
    gamma_r = model.rho_c / model.n_r
    sp = _spectra(model, m, p)
    wf = waterfill_batch(np.maximum(sp.lam, 1e-300), rho)
    tail = np.mean(np.mean(lt * (wf - rho / m) / (1 + rho * lt / m), axis=1))
    return (1 + m / a) * (m / a + m / gamma_r * _o_term(model, m, p.kappa) + tail)


def _mse_gap_dominant(model, m, rho, p):
    gamma_r = model.rho_c / model.n_r
    return m / gamma_r * _o_term(model, m, p.kappa)


_BOUNDS = {
    "waterfill_gap": _waterfill_gap,
    "direction_gap_separable": _direction_gap_separable,
    "direction_gap_canonical": _direction_gap_canonical,
    "beamforming_rate_gap": _beamforming_rate_gap,
    "rate_gap_high_snr": _rate_gap_high_snr,
    "error_gap_tail": _error_gap_tail,
    "error_gap_separable": _error_gap_separable,
    "error_gap_separable_dominant": _error_gap_separable_dominant,
    "error_gap_canonical": _error_gap_canonical,
    "error_gap_canonical_threshold": _error_gap_canonical_threshold,
    "beamforming_error_gap_separable": _beamforming_error_gap_separable,
    "beamforming_error_gap_canonical": _beamforming_error_gap_canonical,
    "mse_gap": _mse_gap,
    "mse_gap_dominant": _mse_gap_dominant,
}
BOUND_IDS = tuple(_BOUNDS)


def evaluate_bound(bound_id: str, model, m: int, rho: float, params: BoundParams | None = None) -> float:
    """Right-hand side of the bound named `bound_id`.

    Identifiers:

    - ``waterfill_gap``: waterfilling against uniform power on the same
      directions.
    - ``direction_gap_separable``, ``direction_gap_canonical``: statistical
      against perfect-CSI directions.
    - ``beamforming_rate_gap``: single-stream mutual information.
    - ``rate_gap_high_snr``: joint growth of SNR and eigenvalues.
    - ``error_gap_tail``, ``error_gap_separable``,
      ``error_gap_separable_dominant``, ``error_gap_canonical``,
      ``error_gap_canonical_threshold``: error probability.
    - ``beamforming_error_gap_separable``,
      ``beamforming_error_gap_canonical``: single-stream error probability.
    - ``mse_gap``, ``mse_gap_dominant``: mean squared error.

    Raises
    ------
    BoundConditionError
        If the SNR or separation condition of the bound is not met.
    ValueError
        For an unknown identifier or an unsupported model family.
    """
    try:
        fn = _BOUNDS[bound_id]
    except KeyError:
        raise ValueError(f"unknown bound {bound_id!r}; expected one of {BOUND_IDS}") from None
    params = params or BoundParams()
    if not 1 <= m <= model.n_t:
        raise ValueError(f"m={m} outside 1..{model.n_t}")
    return float(fn(model, m, rho, params))
