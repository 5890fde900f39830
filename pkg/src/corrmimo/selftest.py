"""Fast invariant suite behind ``corrmimo selftest``.

Library functions are looked up through their modules at call time so a
patched implementation is what gets checked.
"""

from __future__ import annotations

import itertools
from typing import Callable

import numpy as np

from . import channel, link, majorization, matcore, metrics, precoding

__all__ = ["SUITES", "run_suites", "enumerate_waterfill"]


def enumerate_waterfill(lam, rho):
    """Exhaustive active-set search: the unique prefix with all powers positive."""
    lam = np.asarray(lam, dtype=float)
    best = None
    for n in range(1, lam.size + 1):
        mu = (rho + np.sum(1.0 / lam[:n])) / n
        p = mu - 1.0 / lam[:n]
        if np.all(p > 0):
            best = np.concatenate([p, np.zeros(lam.size - n)])
    return best


def _rand_complex(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def _check_waterfill(rng):
    for _ in range(200):
        n = int(rng.integers(1, 9))
        lam = np.sort(rng.uniform(0.01, 10, n))[::-1]
        rho = float(10 ** rng.uniform(-2, 2))
        got = precoding.waterfill(lam, rho).lambda_wf
        if np.max(np.abs(got - enumerate_waterfill(lam, rho))) > 1e-10:
            return f"mismatch for lam={np.round(lam, 4).tolist()} rho={rho:.4g}"
    got = precoding.waterfill([4.0, 1.0], 1.0)
    if got.n_h != 2 or not np.allclose(got.lambda_wf, [0.875, 0.125], atol=1e-12):
        return "hand case lam=[4,1], rho=1 failed"
    return None


def _definitional_sinr(h, f):
    g = link.mmse_filters(h, f)
    hf = h @ f
    out = np.empty(f.shape[1])
    for k in range(f.shape[1]):
        resp = g[:, k].conj() @ hf
        sig = abs(resp[k]) ** 2
        interf = np.sum(np.abs(resp) ** 2) - sig
        out[k] = sig / (interf + np.linalg.norm(g[:, k]) ** 2)
    return out


def _check_sinr_dual(rng):
    for _ in range(100):
        h = _rand_complex(rng, 4, 4)
        f = _rand_complex(rng, 4, 2) * rng.uniform(0.1, 3)
        a, b = link.sinr(h, f), _definitional_sinr(h, f)
        if np.max(np.abs(a - b) / np.maximum(1, np.abs(b))) > 1e-9:
            return "closed-form SINR disagrees with filter output"
        if np.max(np.abs(link.mse(h, f) * (1 + a) - 1)) > 1e-10:
            return "MSE is not 1/(1+SINR)"
    return None


def _check_delta_sinr(rng):
    for _ in range(50):
        lt = np.sort(rng.uniform(0.2, 5, 4))[::-1]
        lr = np.sort(rng.uniform(0.2, 5, 4))[::-1]
        lr *= lt.sum() / lr.sum()
        model = channel.SeparableModel(lt, lr)
        h = channel.sample(model, rng)
        for k in range(2):
            if not metrics.delta_sinr_identity_check(h, model, 2, 10.0, k):
                return "determinant form of the SINR gap disagrees"
    return None


def _check_schur_horn(rng):
    for _ in range(200):
        a = matcore.random_hermitian(5, rng)
        d = np.diag(a).real
        if not majorization.majorizes(d, matcore.hermitian_eig(a).eigenvalues, tol=1e-10):
            return "diag(A) not majorized by eig(A)"
    return None


def _check_gamma(rng):
    for _ in range(200):
        n = int(rng.integers(2, 7))
        v = np.sort(rng.uniform(0, 1, n))[::-1]
        u = majorization.ordered(majorization.random_majorized(v, rng))
        pair = majorization.unitary_stochastic_from_majorization(u, v)
        if np.max(np.abs(v @ pair.q - u)) > 1e-10:
            return "u != vQ"
    return None


def _check_matrix_lemmas(rng):
    for _ in range(200):
        n = int(rng.integers(2, 8))
        a = matcore.random_hermitian(n, rng)
        w = matcore.random_unitary(n, rng)[:, : int(rng.integers(1, n + 1))]
        if not matcore.poincare_check(a, w):
            return "Poincare separation violated"
        pa = matcore.random_hermitian(n, rng, psd=True)
        pb = matcore.random_hermitian(n, rng, psd=True)
        if not matcore.product_eig_bounds_hold(pa, pb):
            return "product eigenvalue bounds violated"
        b = matcore.random_hermitian(n, rng)
        if not matcore.sum_eig_bounds_hold(a, b) or not matcore.trace_product_bound_holds(a, b):
            return "sum / trace eigenvalue bounds violated"
    return None


def _check_q_bounds(rng):
    for x in np.arange(1.1, 10.0 + 1e-9, 0.1):
        lo, hi = link.q_bounds(x)
        q = link.q_function(x)
        if not lo <= q <= hi:
            return f"Q bounds fail at x={x:.1f}"
    return None


def _check_matched(rng):
    model = channel.make_matched(4, 4, 2, 16.0)
    for _ in range(100):
        h = channel.sample(model, rng)
        a = link.mutual_info(h, precoding.perfect_semiunitary(h, 2, 10.0))
        b = link.mutual_info(h, precoding.stat_semiunitary(model, 2, 10.0))
        if abs(a - b) > 1e-9:
            return "matched channel: perfect and statistical semiunitary differ"
    return None


def _check_fast_path(rng):
    model = channel.SeparableModel([6.0, 4.0, 2.0, 0.5], [5.0, 4.0, 2.5, 1.0])
    sp = metrics.draw_spectra(model, 2, 40, 7)
    rho = 3.0
    builders = {
        "perf_unconst": lambda h: precoding.perfect_unconstrained(h, 2, rho),
        "perf_semi": lambda h: precoding.perfect_semiunitary(h, 2, rho),
        "stat_semi": lambda h: precoding.stat_semiunitary(model, 2, rho),
    }
    for scheme, build in builders.items():
        out = metrics.scheme_outcome(sp, scheme, rho)
        for i, h in enumerate(metrics.iter_realizations(model, 40, 7)):
            if abs(link.mutual_info(h, build(h)) - out.mi[i]) > 1e-9:
                return f"batched {scheme} disagrees with per-draw construction"
    return None


SUITES: dict[str, list[tuple[str, Callable]]] = {
    "oracles": [
        ("waterfill_vs_enumeration", _check_waterfill),
        ("sinr_closed_form_vs_filter", _check_sinr_dual),
        ("q_function_bounds", _check_q_bounds),
    ],
    "identities": [
        ("delta_sinr_determinant_form", _check_delta_sinr),
        ("matched_channel_equality", _check_matched),
        ("batched_vs_per_draw", _check_fast_path),
    ],
    "majorization": [
        ("schur_horn", _check_schur_horn),
        ("unitary_stochastic_construction", _check_gamma),
        ("matrix_eigenvalue_lemmas", _check_matrix_lemmas),
    ],
}


def run_suites(emit=print, seed: int = 20240601) -> int:
    """Run every check; return 0 when all pass, 1 otherwise."""
    failed = 0
    counter = itertools.count()
    for suite, checks in SUITES.items():
        passed = 0
        for name, fn in checks:
            rng = np.random.default_rng([seed, next(counter)])
            try:
                msg = fn(rng)
            except Exception as exc:  # a crash is a failure, not an abort
                msg = f"{type(exc).__name__}: {exc}"
            if msg is None:
                passed += 1
            else:
                failed += 1
                emit(f"FAIL {suite}/{name}: {msg}")
        emit(f"{suite}: {passed}/{len(checks)} passed")
    return 0 if failed == 0 else 1
