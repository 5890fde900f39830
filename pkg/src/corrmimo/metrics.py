"""Monte Carlo estimation of relative performance gaps between precoders.

All schemes are scored on the same channel draws. Draws are produced in
fixed-size chunks; chunk ``i`` gets its own generator seeded from
``SeedSequence(seed, spawn_key=(i,))`` so results do not depend on how many
worker threads process the chunks.

Only eigen-quantities of ``H_ind`` enter the closed forms below. The
unitaries ``U_t`` and ``U_r`` change neither the spectrum of ``H^H H`` nor
the Gram matrix seen through the statistical directions, so they are never
applied here.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np
from scipy.special import log_ndtr, logsumexp

from . import channel as _channel
from . import link as _link
from . import matcore as _matcore
from . import precoding as _precoding

__all__ = [
    "SCHEMES",
    "CHUNK_SIZE",
    "MCEstimate",
    "DeltaReport",
    "GapStats",
    "Spectra",
    "SchemeOutcome",
    "SupportReport",
    "thread_count",
    "chunk_generators",
    "iter_realizations",
    "draw_spectra",
    "scheme_outcome",
    "estimate",
    "ratio_of_means",
    "estimate_delta",
    "estimate_delta_beamforming",
    "delta_sinr_identity_check",
    "gap_statistics",
    "rmt_support_check",
]

SCHEMES = ("perf_unconst", "perf_semi", "perf_equalized", "perf_fixed", "stat_semi", "stat_fixed")
CHUNK_SIZE = 1024
RATIO_FLOOR = 1e-9
_TINY = 1e-300


@dataclass(frozen=True, eq=False)
class MCEstimate:
    """Sample mean with its standard error; `mean` may be a vector."""

    mean: float | np.ndarray
    stderr: float | np.ndarray
    trials: int

    def __float__(self):
        return float(self.mean)


def estimate(x: np.ndarray) -> MCEstimate:
    """Mean and ``std / sqrt(n)`` along the first axis."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    mean = x.mean(axis=0)
    se = x.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else np.zeros_like(mean)
    if np.ndim(mean) == 0:
        return MCEstimate(float(mean), float(se), n)
    return MCEstimate(mean, se, n)


def ratio_of_means(num: np.ndarray, den: np.ndarray) -> MCEstimate:
    """``mean(num) / mean(den)`` with a delta-method standard error."""
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    n = num.size
    dbar = den.mean()
    r = num.mean() / dbar
    if n > 1:
        se = np.std(num - r * den, ddof=1) / (np.sqrt(n) * abs(dbar))
    else:
        se = 0.0
    return MCEstimate(float(r), float(se), n)


def thread_count() -> int:
    """Worker threads from ``CORRMIMO_THREADS`` (default: CPU count)."""
    raw = os.environ.get("CORRMIMO_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return os.cpu_count() or 1


def chunk_generators(seed: int, trials: int) -> list[tuple[int, np.random.Generator]]:
    """``(count, rng)`` per chunk; independent of the worker count."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    out = []
    for i, start in enumerate(range(0, trials, CHUNK_SIZE)):
        ss = np.random.SeedSequence(seed, spawn_key=(i,))
        out.append((min(CHUNK_SIZE, trials - start), np.random.default_rng(ss)))
    return out


def _ordered_map(fn, items):
    workers = min(thread_count(), len(items))
    if workers <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def iter_realizations(model, trials: int, seed: int) -> Iterator[_channel.ChannelRealization]:
    """The exact draws :func:`draw_spectra` uses, as full realizations."""
    for count, rng in chunk_generators(seed, trials):
        batch = _channel.sample_batch(model, count, rng)
        for i in range(count):
            yield _channel.ChannelRealization(batch.h[i], batch.h_ind[i], batch.h_iid[i])


@dataclass(frozen=True, eq=False)
class Spectra:
    """Per-draw quantities every scheme is computed from.

    `lam` holds the `m` largest eigenvalues of ``H^H H`` (non-increasing);
    `b` is ``V_stat^H H^H H V_stat``.
    """

    model: object
    m: int
    lam: np.ndarray
    b: np.ndarray
    seed: int

    @property
    def trials(self) -> int:
        return self.lam.shape[0]


def draw_spectra(model, m: int, trials: int, seed: int) -> Spectra:
    cols, _ = _precoding._sorted_columns(model, m)
    if model.n_r < m:
        raise ValueError(f"need n_r >= m={m}")

    def work(item):
        count, rng = item
        batch = _channel.sample_batch(model, count, rng)
        hi = batch.h_ind
        g = np.einsum("nik,nil->nkl", hi.conj(), hi)
        w = np.linalg.eigvalsh(g)[:, ::-1][:, :m]
        b = g[:, cols][:, :, cols]
        return np.maximum(w, 0.0), b

    parts = _ordered_map(work, chunk_generators(seed, trials))
    lam = np.concatenate([p[0] for p in parts])
    b = np.concatenate([p[1] for p in parts])
    return Spectra(model, m, lam, b, seed)


@dataclass(frozen=True, eq=False)
class SchemeOutcome:
    """Per-draw results: mutual information (bits), SINR, MSE, log error prob."""

    scheme: str
    mi: np.ndarray
    sinr: np.ndarray
    mse: np.ndarray
    log_p: np.ndarray

    @property
    def log_p_avg(self) -> np.ndarray:
        return logsumexp(self.log_p, axis=1) - np.log(self.log_p.shape[1])

    @property
    def log_p_any(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            s = np.sum(np.log1p(-np.exp(self.log_p)), axis=1)
            out = np.log(-np.expm1(s))
        tiny = s == 0.0
        out[tiny] = logsumexp(self.log_p[tiny], axis=1)
        return out


def _log_error_prob(s, c: _link.Constellation):
    return np.minimum(np.log(c.alpha) + log_ndtr(-c.beta * np.sqrt(s)), 0.0)


def scheme_outcome(
    spectra: Spectra,
    scheme: str,
    rho: float,
    constellation: _link.Constellation = _link.QPSK,
    alpha: float = 2.0,
    lambda_fixed=None,
) -> SchemeOutcome:
    """Closed-form per-draw link quantities for one scheme at power `rho`.

    `alpha` sets the threshold of ``stat_fixed``; ``perf_fixed`` uses
    `lambda_fixed`, defaulting to the ``stat_fixed`` power profile.
    """
    m = spectra.m
    lam = spectra.lam
    c = rho / m
    model = spectra.model
    if scheme in ("perf_fixed", "stat_fixed") and lambda_fixed is None:
        lambda_fixed = _precoding.stat_fixed_powers(model, m, rho, alpha)
    mi = None
    if scheme == "perf_unconst":
        p = _precoding.waterfill_batch(np.maximum(lam, _TINY), rho)
        s = p * lam
    elif scheme == "perf_semi":
        s = c * lam
    elif scheme == "perf_fixed":
        s = c * np.asarray(lambda_fixed, dtype=float) * lam
    elif scheme == "perf_equalized":
        mse_eq = np.mean(1.0 / (1.0 + c * lam), axis=1)
        s = np.repeat((1.0 / mse_eq - 1.0)[:, None], m, axis=1)
        mi = np.sum(np.log2(1.0 + c * lam), axis=1)
    elif scheme in ("stat_semi", "stat_fixed"):
        d = np.sqrt(np.ones(m) if scheme == "stat_semi" else np.asarray(lambda_fixed, float))
        k = np.eye(m) + c * (d[:, None] * spectra.b * d[None, :])
        e = np.linalg.inv(k)
        mse_v = np.clip(np.einsum("nkk->nk", e).real, np.finfo(float).tiny, 1.0)
        s = 1.0 / mse_v - 1.0
        mi = np.sum(np.log2(np.maximum(np.linalg.eigvalsh(k), 1.0)), axis=1)
    else:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    s = np.maximum(s, 0.0)
    if mi is None:
        mi = np.sum(np.log2(1.0 + s), axis=1)
    mse_out = 1.0 / (1.0 + s)
    return SchemeOutcome(scheme, mi, s, mse_out, _log_error_prob(s, constellation))


@dataclass(frozen=True, eq=False)
class DeltaReport:
    """Relative gaps of `test` against `benchmark` on shared draws.

    Mutual-information ratios divide by the test scheme; error probability
    and MSE ratios divide by the benchmark.
    """

    benchmark: str
    test: str
    intermediate: str
    delta_i: MCEstimate
    delta_i1: MCEstimate
    delta_i2: MCEstimate
    delta_i_tilde: MCEstimate
    delta_i_tilde2: MCEstimate
    delta_p: MCEstimate
    delta_p_any: MCEstimate
    delta_mse: MCEstimate
    delta_sinr: MCEstimate
    mi_benchmark: MCEstimate
    mi_test: MCEstimate
    p_benchmark: MCEstimate
    p_test: MCEstimate
    discarded: dict = field(default_factory=dict)
    trials: int = 0
    seed: int = 0


def _intermediate(benchmark, test):
    if benchmark == "perf_unconst" and test != "perf_unconst":
        return "perf_semi"
    return benchmark


def _expect_ratio(num, den, floor=RATIO_FLOOR):
    keep = den >= floor
    return estimate(num[keep] / den[keep]) if keep.any() else MCEstimate(np.nan, np.nan, 0), int(
        (~keep).sum()
    )


def _relative_log(lt, lb):
    with np.errstate(over="ignore", invalid="ignore"):
        r = np.expm1(lt - lb)
    keep = np.isfinite(r)
    return (estimate(r[keep]) if keep.any() else MCEstimate(np.nan, np.nan, 0)), int((~keep).sum())


def delta_report(
    ob: SchemeOutcome, ot: SchemeOutcome, omid: SchemeOutcome, trials: int, seed: int
) -> DeltaReport:
    i_b, i_t, i_mid = ob.mi, ot.mi, omid.mi
    if not i_t.mean() > 0:
        raise ValueError("expected mutual information of the test scheme is not positive")
    d_tilde, disc_i = _expect_ratio(i_b - i_t, i_t)
    d_tilde2, _ = _expect_ratio(i_mid - i_t, i_t)
    lpb, lpt = ob.log_p_avg, ot.log_p_avg
    d_p, disc_p = _relative_log(lpt, lpb)
    d_p_any, disc_p_any = _relative_log(ot.log_p_any, ob.log_p_any)
    rel_mse = np.mean((ot.mse - ob.mse) / ob.mse, axis=1)
    return DeltaReport(
        benchmark=ob.scheme,
        test=ot.scheme,
        intermediate=omid.scheme,
        delta_i=ratio_of_means(i_b - i_t, i_t),
        delta_i1=ratio_of_means(i_b - i_mid, i_t),
        delta_i2=ratio_of_means(i_mid - i_t, i_t),
        delta_i_tilde=d_tilde,
        delta_i_tilde2=d_tilde2,
        delta_p=d_p,
        delta_p_any=d_p_any,
        delta_mse=estimate(rel_mse),
        delta_sinr=estimate(ob.sinr - ot.sinr),
        mi_benchmark=estimate(i_b),
        mi_test=estimate(i_t),
        p_benchmark=estimate(np.exp(lpb)),
        p_test=estimate(np.exp(lpt)),
        discarded={"delta_i_tilde": disc_i, "delta_p": disc_p, "delta_p_any": disc_p_any},
        trials=int(i_b.size),
        seed=seed,
    )


def estimate_delta(
    model,
    m: int,
    rho: float,
    benchmark: str = "perf_unconst",
    test: str = "stat_semi",
    constellation: _link.Constellation = _link.QPSK,
    trials: int = 10_000,
    seed: int = 0,
    alpha: float = 2.0,
    lambda_fixed=None,
    spectra: Spectra | None = None,
) -> DeltaReport:
    """Relative mutual information, error probability and MSE gaps.

    ``delta_i = E[I_b - I_t] / E[I_t]`` splits into ``delta_i1`` and
    ``delta_i2`` through an intermediate scheme: ``perf_semi`` when the
    benchmark is ``perf_unconst`` (and the test is not), else the benchmark
    itself. ``delta_p = E[(P_t - P_b) / P_b]`` uses the per-stream average
    error probability, computed in the log domain; ``delta_p_any`` uses the
    at-least-one-stream probability.
    """
    for s in (benchmark, test):
        if s not in SCHEMES:
            raise ValueError(f"unknown scheme {s!r}; expected one of {SCHEMES}")
    if spectra is None:
        spectra = draw_spectra(model, m, trials, seed)
    kw = dict(constellation=constellation, alpha=alpha, lambda_fixed=lambda_fixed)
    ob = scheme_outcome(spectra, benchmark, rho, **kw)
    ot = ob if test == benchmark else scheme_outcome(spectra, test, rho, **kw)
    mid = _intermediate(benchmark, test)
    omid = ob if mid == benchmark else scheme_outcome(spectra, mid, rho, **kw)
    return delta_report(ob, ot, omid, spectra.trials, spectra.seed)


def estimate_delta_beamforming(
    model,
    rho: float,
    constellation: _link.Constellation = _link.QPSK,
    trials: int = 10_000,
    seed: int = 0,
) -> tuple[MCEstimate, MCEstimate]:
    """Single-stream gaps between dominant-singular-vector beamforming and
    beamforming along the dominant transmit eigenvector."""
    rep = estimate_delta(
        model, 1, rho, "perf_semi", "stat_semi", constellation, trials, seed
    )
    return rep.delta_i, rep.delta_p


def delta_sinr_identity_check(h, model, m: int, rho: float, k: int, rtol: float = 1e-8) -> bool:
    """Compare the direct SINR gap of stream `k` with its determinant form.

    Direct side: SINRs of the waterfilled perfect-CSI precoder and of the
    statistical semiunitary precoder through :func:`corrmimo.link.sinr`.
    Determinant side: ``1 + wf_k lambda_k / rho_c - det(G) / adj(G)_kk``
    with the Gram matrix built from the unit-variance seed matrix and the
    transmit/receive eigenvalues.
    """
    if not isinstance(model, _channel.SeparableModel):
        raise ValueError("the determinant form needs a separable model")
    if not 0 <= k < m:
        raise ValueError(f"k={k} outside 0..{m - 1}")
    direct = _link.sinr(h, _precoding.perfect_unconstrained(h, m, rho))[k] - _link.sinr(
        h, _precoding.stat_semiunitary(model, m, rho)
    )[k]

    w = np.asarray(h.h_iid)
    lt, lr, rho_c = model.lambda_t, model.lambda_r, model.rho_c
    prod = lt[:, None] * (w.conj().T @ (lr[:, None] * w))
    ev = np.sort(np.linalg.eigvals(prod).real)[::-1][:m] / rho_c
    wf = _precoding.waterfill(ev, rho).lambda_wf
    cols, _ = _precoding._sorted_columns(model, m)
    wt = w[:, cols]
    sq = np.sqrt(lt[cols])
    g = np.eye(m) + rho / (m * rho_c) * (sq[:, None] * (wt.conj().T @ (lr[:, None] * wt)) * sq)
    rest = [j for j in range(m) if j != k]
    det_g = _matcore.block_det(
        g[np.ix_([k], [k])], g[np.ix_([k], rest)], g[np.ix_(rest, [k])], g[np.ix_(rest, rest)]
    )
    adj_k = np.linalg.det(g[np.ix_(rest, rest)]) if rest else 1.0
    via_det = 1.0 + wf[k] * ev[k] - (det_g / adj_k).real
    scale = max(1.0, abs(direct), abs(via_det))
    return bool(abs(direct - via_det) <= rtol * scale)


@dataclass(frozen=True)
class GapStats:
    gap_t: float
    mu_r2: float
    gap_t_c: float
    mu_r2_c: float
    g_m_lambda_t: float
    g_m_lambda_r: float
    b1: float
    b2: float


def gap_statistics(model, m: int) -> GapStats:
    """Eigen-gap, receive second-moment, geometric-mean and power-share
    summaries of a correlation model."""
    lt = np.sort(np.asarray(model.lambda_t, float))[::-1]
    lr = np.sort(np.asarray(model.lambda_r, float))[::-1]
    if not 1 <= m <= min(lt.size, lr.size):
        raise ValueError(f"m={m} out of range")
    n_t, n_r = lt.size, lr.size
    prof = model.variance_profile
    gt = prof.sum(axis=0)
    rho_c = model.rho_c
    gap_t = 1.0 - lt[1] / lt[0] if n_t > 1 else 1.0
    with np.errstate(divide="ignore"):
        gap_t_c = float(np.mean(n_r**2 / (gt[0] - gt[1:]) ** 2)) if n_t > 1 else 0.0
    mu_r2_c = float(np.max(prof[:, 1:].T @ prof[:, 0]) / n_r) if n_t > 1 else 0.0
    return GapStats(
        gap_t=float(gap_t),
        mu_r2=float(np.sum(lr**2) / n_r),
        gap_t_c=gap_t_c,
        mu_r2_c=mu_r2_c,
        g_m_lambda_t=float(np.prod(lt[:m]) ** (1.0 / m)),
        g_m_lambda_r=float(np.prod(lr[:m]) ** (1.0 / m)),
        b1=float(lt[:m].sum() / rho_c),
        b2=float(lr[:m].sum() / rho_c),
    )


@dataclass(frozen=True, eq=False)
class SupportReport:
    """Empirical check of eigenvalue concentration for ``X X^H / n``.

    `empirical_extremes` holds per-trial ``(min, max)`` eigenvalues;
    `lower`/`upper` are the asymptotic edges (per eigenvalue index for a
    variance profile) before the finite-n `margin` is applied.
    """

    violations: float
    empirical_extremes: np.ndarray
    lower: np.ndarray | float
    upper: np.ndarray | float
    margin: float
    gamma_fit: float


def rmt_support_check(
    p: int,
    n: int,
    weights=None,
    variance_profile=None,
    trials: int = 200,
    seed: int = 0,
    gamma: float | None = None,
) -> SupportReport:
    """Fraction of eigenvalues of ``X X^H / n`` outside their asymptotic support.

    Three cases: i.i.d. unit-variance ``X`` (edges ``1 +- 2 sqrt(p/n)``),
    weighted ``X diag(weights) X^H`` (edges ``mean(weights) +- gamma
    sqrt(p/n)``), and a ``p x n`` variance profile (edge ``i`` is the ``i``-th
    largest row mean ``+- gamma sqrt(p/n)``). `gamma` defaults to twice the
    RMS weight, resp. twice the largest root-mean-fourth-power row. The
    edges are inflated multiplicatively by ``3 n^{-1/3}``. Only extreme
    eigenvalues are counted except for the profile case, where every
    eigenvalue is compared with its own edge pair. `gamma_fit` is the
    smallest constant that would have covered every trial.
    """
    if not 1 <= p <= n:
        raise ValueError("need 1 <= p <= n")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if weights is not None and variance_profile is not None:
        raise ValueError("pass weights or variance_profile, not both")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    root = np.sqrt(p / n)
    margin = 3.0 * n ** (-1.0 / 3.0)
    if variance_profile is not None:
        prof = np.asarray(variance_profile, dtype=float)
        if prof.shape != (p, n):
            raise ValueError("variance_profile must be p x n")
        center = np.sort(prof.sum(axis=1) / n)[::-1]
        g = gamma if gamma is not None else 2.0 * float(np.sqrt(np.max(np.mean(prof**2, axis=1))))
        scale = np.sqrt(prof)
    else:
        wts = np.ones(n) if weights is None else np.asarray(weights, dtype=float).ravel()
        if wts.size != n or np.any(wts <= 0):
            raise ValueError("weights must be n positive values")
        center = np.full(p, wts.mean())
        if weights is None:
            g = 2.0 if gamma is None else gamma
        else:
            g = gamma if gamma is not None else 2.0 * float(np.sqrt(np.mean(wts**2)))
        scale = np.sqrt(wts)[None, :]
    lower = center - g * root
    upper = center + g * root
    lo_eff = np.where(lower >= 0, lower * (1 - margin), lower * (1 + margin))
    hi_eff = upper * (1 + margin)

    eigs = np.empty((trials, p))
    for t in range(trials):
        x = _channel.complex_gaussian((p, n), rng) * scale
        eigs[t] = np.linalg.eigvalsh(x @ x.conj().T / n)[::-1]
    extremes = np.column_stack([eigs[:, -1], eigs[:, 0]])
    if variance_profile is not None:
        bad = (eigs < lo_eff) | (eigs > hi_eff)
        dev = np.abs(eigs - center)
    else:
        bad = np.column_stack([extremes[:, 0] < lo_eff[-1], extremes[:, 1] > hi_eff[0]])
        dev = np.abs(extremes - center[0])
    gamma_fit = float(dev.max() / root)
    if variance_profile is None:
        lower, upper = float(lower[0]), float(upper[0])
    return SupportReport(float(bad.mean()), extremes, lower, upper, margin, gamma_fit)
