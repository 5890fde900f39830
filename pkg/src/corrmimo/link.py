"""Linear MMSE receiver quantities for a channel ``H`` and an effective
precoder ``F`` (power scaling already folded in), with unit noise variance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

__all__ = [
    "Constellation",
    "BPSK",
    "QPSK",
    "LinkMetrics",
    "effective_matrix",
    "gram",
    "mmse_filters",
    "sinr",
    "mse",
    "mutual_info",
    "link_metrics",
    "q_function",
    "q_bounds",
    "stream_error_prob",
    "error_prob_any",
    "error_prob_avg",
]


@dataclass(frozen=True)
class Constellation:
    """Per-stream error probability ``alpha * Q(beta * sqrt(SINR))``."""

    alpha: float
    beta: float
    name: str = "custom"

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError("alpha and beta must be positive")

    @classmethod
    def preset(cls, name: str) -> "Constellation":
        try:
            return {"bpsk": BPSK, "qpsk": QPSK}[name.lower()]
        except KeyError:
            raise ValueError(f"unknown constellation {name!r}") from None


BPSK = Constellation(1.0, float(np.sqrt(2.0)), "bpsk")
QPSK = Constellation(2.0, 1.0, "qpsk")


@dataclass(frozen=True, eq=False)
class LinkMetrics:
    sinr: np.ndarray
    mse: np.ndarray
    mutual_info: float
    p_stream: np.ndarray
    p_any: float
    p_avg: float


def effective_matrix(precoder) -> np.ndarray:
    """Accept a :class:`~corrmimo.precoding.Precoder` or a plain matrix."""
    f = getattr(precoder, "effective", precoder)
    return np.atleast_2d(np.asarray(f, dtype=complex))


def _h(h):
    return np.atleast_2d(np.asarray(getattr(h, "h", h), dtype=complex))


def gram(h, precoder) -> np.ndarray:
    """``I_M + F^H H^H H F``."""
    hf = _h(h) @ effective_matrix(precoder)
    g = hf.conj().T @ hf
    return np.eye(g.shape[0]) + 0.5 * (g + g.conj().T)


def mmse_filters(h, precoder) -> np.ndarray:
    """Columns ``g_k = (H F F^H H^H + I)^{-1} H f_k``."""
    hm = _h(h)
    f = effective_matrix(precoder)
    if hm.shape[1] != f.shape[0]:
        raise ValueError(f"H has {hm.shape[1]} columns but F has {f.shape[0]} rows")
    hf = hm @ f
    r = hf @ hf.conj().T + np.eye(hm.shape[0])
    return np.linalg.solve(r, hf)


def mse(h, precoder) -> np.ndarray:
    """Per-stream MSE: the diagonal of ``(I + F^H H^H H F)^{-1}``."""
    e = np.linalg.inv(gram(h, precoder))
    return np.clip(np.diag(e).real, 0.0, 1.0)


def sinr(h, precoder) -> np.ndarray:
    """Per-stream MMSE SINR ``1 / MSE_k - 1``."""
    e = np.linalg.inv(gram(h, precoder))
    return np.maximum(1.0 / np.diag(e).real - 1.0, 0.0)


def mutual_info(h, precoder) -> float:
    """Gaussian-input mutual information ``log2 det(I + F^H H^H H F)`` in bits."""
    w = np.linalg.eigvalsh(gram(h, precoder))
    return float(np.sum(np.log2(np.maximum(w, 1.0))))


def q_function(x):
    """Gaussian tail probability ``Q(x) = erfc(x / sqrt(2)) / 2``."""
    out = 0.5 * erfc(np.asarray(x, dtype=float) / np.sqrt(2.0))
    return float(out) if np.ndim(out) == 0 else out


def q_bounds(x):
    """Lower and upper tail bounds ``phi(x)/x * (1 - 1/x^2)`` and ``phi(x)/x``.

    The lower bound is only informative for ``x > 1``.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("q_bounds needs x > 0")
    upper = np.exp(-0.5 * x * x) / (x * np.sqrt(2.0 * np.pi))
    lower = upper * (1.0 - 1.0 / (x * x))
    if x.ndim == 0:
        return float(lower), float(upper)
    return lower, upper


def stream_error_prob(sinr_values, c: Constellation):
    s = np.asarray(sinr_values, dtype=float)
    if np.any(s < 0):
        raise ValueError("SINR must be non-negative")
    return np.clip(c.alpha * 0.5 * erfc(c.beta * np.sqrt(s) / np.sqrt(2.0)), 0.0, 1.0)


def _probs(p):
    p = np.asarray(p, dtype=float)
    if np.any((p < 0) | (p > 1)) or not np.all(np.isfinite(p)):
        raise ValueError("probabilities must lie in [0, 1]")
    return p


def error_prob_any(p) -> float:
    """Probability that at least one stream is in error."""
    with np.errstate(divide="ignore"):
        return float(-np.expm1(np.sum(np.log1p(-_probs(p)))))


def error_prob_avg(p) -> float:
    return float(np.mean(_probs(p)))


def link_metrics(h, precoder, c: Constellation = QPSK) -> LinkMetrics:
    g = gram(h, precoder)
    e = np.linalg.inv(g)
    d = np.clip(np.diag(e).real, np.finfo(float).tiny, 1.0)
    s = 1.0 / d - 1.0
    p = stream_error_prob(s, c)
    w = np.linalg.eigvalsh(g)
    return LinkMetrics(
        sinr=s,
        mse=d,
        mutual_info=float(np.sum(np.log2(np.maximum(w, 1.0)))),
        p_stream=p,
        p_any=error_prob_any(p),
        p_avg=error_prob_avg(p),
    )
