"""Experiment configuration, SNR / matching / antenna sweeps and CSV output."""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import channel as _channel
from . import link as _link
from . import metrics as _metrics
from . import precoding as _precoding

__all__ = [
    "CSV_HEADER",
    "ConfigError",
    "NumericalFailure",
    "SweepRow",
    "ExperimentConfig",
    "parse_config",
    "load_config",
    "run_config",
    "rows_to_csv",
    "write_outputs",
    "FIGURES",
    "figure_rows",
    "DEFAULT_SNR_GRID_DB",
]

CSV_HEADER = ("experiment", "snr_db", "scheme", "metric", "mean", "stderr", "trials", "seed")
DEFAULT_SNR_GRID_DB = tuple(range(-10, 31, 2))
SCHEME_ALIASES = {"perf": "perf_semi", "stat": "stat_semi"}
EXTRA_SCHEMES = ("stat_opt",)


class ConfigError(ValueError):
    """Invalid experiment configuration; `field` names the offending key."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


class NumericalFailure(RuntimeError):
    """Raised in strict mode when a computation does not produce a usable result."""


@dataclass(frozen=True)
class SweepRow:
    experiment: str
    snr_db: float
    scheme: str
    metric: str
    mean: float
    stderr: float
    trials: int
    seed: int


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    experiment: str
    models: dict
    m: int
    snr_grid_db: tuple
    trials: int
    seed: int
    constellation: _link.Constellation
    schemes: tuple
    deltas: tuple = ()
    alpha: float = 2.0
    output: str | None = None
    strict: bool = False
    optimizer: _precoding.StatPowerOptions = field(default_factory=_precoding.StatPowerOptions)
    labelled: bool = False


def _req(d, key, where):
    if key not in d:
        raise ConfigError(where + key, "missing")
    return d[key]


def _vec(v, name):
    try:
        arr = np.asarray(v, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(name, "must be numeric") from None
    if arr.ndim != 1 or arr.size == 0:
        raise ConfigError(name, "must be a non-empty array")
    return arr


def _model_from_spec(spec, where, seed):
    if not isinstance(spec, dict):
        raise ConfigError(where.rstrip("."), "must be an object")
    kind = _req(spec, "kind", where)
    unitary = spec.get("unitary", "identity")
    if unitary not in ("identity", "random"):
        raise ConfigError(where + "unitary", "must be 'identity' or 'random'")
    try:
        if kind == "separable":
            lt = _vec(_req(spec, "lambda_t", where), where + "lambda_t")
            lr = _vec(_req(spec, "lambda_r", where), where + "lambda_r")
            ut = ur = None
            if unitary == "random":
                rng = np.random.default_rng(int(spec.get("unitary_seed", seed)))
                from .matcore import random_unitary

                ut, ur = random_unitary(lt.size, rng), random_unitary(lr.size, rng)
            return _channel.SeparableModel(lt, lr, ut, ur)
        if kind == "canonical":
            prof = np.asarray(_req(spec, "variance_profile", where), dtype=float)
            ut = ur = None
            if unitary == "random":
                rng = np.random.default_rng(int(spec.get("unitary_seed", seed)))
                from .matcore import random_unitary

                ut, ur = random_unitary(prof.shape[1], rng), random_unitary(prof.shape[0], rng)
            return _channel.CanonicalModel(prof, ut, ur)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(where.rstrip("."), str(exc)) from None
    raise ConfigError(where + "kind", "must be 'separable' or 'canonical'")


def _constellation(spec):
    if spec is None:
        return _link.QPSK
    try:
        if isinstance(spec, str):
            return _link.Constellation.preset(spec)
        if isinstance(spec, dict):
            return _link.Constellation(float(spec["alpha"]), float(spec["beta"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError("constellation", str(exc)) from None
    raise ConfigError("constellation", "must be a preset name or {alpha, beta}")


def _int(d, key, default=None, minimum=None):
    v = d.get(key, default)
    if v is None:
        raise ConfigError(key, "missing")
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(key, "must be an integer")
    if minimum is not None and v < minimum:
        raise ConfigError(key, f"must be >= {minimum}")
    return v


def parse_config(doc: dict) -> ExperimentConfig:
    """Validate a JSON document and build an :class:`ExperimentConfig`."""
    if not isinstance(doc, dict):
        raise ConfigError("config", "top level must be an object")
    trials = _int(doc, "trials", minimum=1)
    seed = _int(doc, "seed", 0, minimum=0)
    if seed >= 2**64:
        raise ConfigError("seed", "must fit in 64 bits")
    m = _int(doc, "m", minimum=1)
    grid = doc.get("snr_grid_db")
    if not isinstance(grid, list) or not grid:
        raise ConfigError("snr_grid_db", "must be a non-empty list")
    try:
        grid = tuple(float(x) for x in grid)
    except (TypeError, ValueError):
        raise ConfigError("snr_grid_db", "must contain numbers") from None
    if not all(math.isfinite(x) for x in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigError("snr_grid_db", "must be finite and strictly increasing")
    if "models" in doc:
        if not isinstance(doc["models"], dict) or not doc["models"]:
            raise ConfigError("models", "must be a non-empty object")
        models = {
            str(k): _model_from_spec(v, f"models.{k}.", seed) for k, v in doc["models"].items()
        }
        labelled = True
    else:
        models = {"": _model_from_spec(_req(doc, "model", ""), "model.", seed)}
        labelled = False
    for label, mod in models.items():
        if m > mod.n_t or m > mod.n_r:
            raise ConfigError("m", f"exceeds antenna count of model {label or 'model'}")
        if np.count_nonzero(mod.gamma_t > 0) < m:
            raise ConfigError("m", f"exceeds transmit rank of model {label or 'model'}")
    schemes = doc.get("schemes", ["perf_unconst", "stat_semi"])
    if not isinstance(schemes, list) or not schemes:
        raise ConfigError("schemes", "must be a non-empty list")
    for s in schemes:
        if SCHEME_ALIASES.get(s, s) not in _metrics.SCHEMES + EXTRA_SCHEMES:
            raise ConfigError("schemes", f"unknown scheme {s!r}")
    deltas = []
    for i, d in enumerate(doc.get("deltas", [])):
        if not isinstance(d, dict):
            raise ConfigError(f"deltas[{i}]", "must be an object")
        b = SCHEME_ALIASES.get(d.get("benchmark"), d.get("benchmark"))
        t = SCHEME_ALIASES.get(d.get("test"), d.get("test"))
        if b not in _metrics.SCHEMES or t not in _metrics.SCHEMES:
            raise ConfigError(f"deltas[{i}]", "benchmark and test must be known schemes")
        deltas.append((b, t))
    alpha = doc.get("alpha", 2.0)
    if not isinstance(alpha, (int, float)) or isinstance(alpha, bool) or not alpha > 1:
        raise ConfigError("alpha", "must be a number > 1")
    opt = doc.get("optimizer", {})
    if not isinstance(opt, dict):
        raise ConfigError("optimizer", "must be an object")
    try:
        options = _precoding.StatPowerOptions(
            batch=int(opt.get("batch", 2000)),
            tol=float(opt.get("tol", 1e-6)),
            max_iters=int(opt.get("max_iters", 10_000)),
        )
    except (TypeError, ValueError):
        raise ConfigError("optimizer", "batch/tol/max_iters must be numeric") from None
    if options.batch < 100:
        raise ConfigError("optimizer.batch", "must be >= 100")
    output = doc.get("output")
    if output is not None and not isinstance(output, str):
        raise ConfigError("output", "must be a path string")
    return ExperimentConfig(
        experiment=str(doc.get("experiment", "run")),
        models=models,
        m=m,
        snr_grid_db=grid,
        trials=trials,
        seed=seed,
        constellation=_constellation(doc.get("constellation")),
        schemes=tuple(schemes),
        deltas=tuple(deltas),
        alpha=float(alpha),
        output=output,
        strict=bool(doc.get("strict", False)),
        optimizer=options,
        labelled=labelled,
    )


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"invalid JSON: {exc}") from None
    return parse_config(doc)


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def _check_finite(rows, strict):
    bad = [r for r in rows if not (math.isfinite(r.mean) and math.isfinite(r.stderr))]
    if bad and strict:
        r = bad[0]
        raise NumericalFailure(f"non-finite {r.metric} for {r.scheme} at {r.snr_db} dB")


def _scheme_rows(cfg, label, model, spectra, snr_db, scheme):
    rho = db_to_linear(snr_db)
    name = SCHEME_ALIASES.get(scheme, scheme)
    lambda_fixed = None
    if name == "stat_opt":
        seq = np.random.SeedSequence(cfg.seed, spawn_key=(2**31, int(round(snr_db * 1000)) % 2**31))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            res = _precoding.optimize_stat_power(
                model, cfg.m, rho, cfg.optimizer, np.random.default_rng(seq)
            )
        if not res.converged and cfg.strict:
            raise NumericalFailure(f"power optimizer did not converge at {snr_db} dB")
        name, lambda_fixed = "stat_fixed", res.power
    out = _metrics.scheme_outcome(
        spectra, name, rho, cfg.constellation, cfg.alpha, lambda_fixed=lambda_fixed
    )
    col = f"{label}-{scheme}" if cfg.labelled else scheme
    vals = {
        "mutual_info": _metrics.estimate(out.mi),
        "p_err": _metrics.estimate(np.exp(out.log_p_avg)),
        "mse": _metrics.estimate(out.mse.mean(axis=1)),
    }
    return [
        SweepRow(cfg.experiment, snr_db, col, k, v.mean, v.stderr, v.trials, cfg.seed)
        for k, v in vals.items()
    ]


def _delta_rows(cfg, label, spectra, snr_db, benchmark, test):
    rep = _metrics.estimate_delta(
        spectra.model,
        cfg.m,
        db_to_linear(snr_db),
        benchmark,
        test,
        cfg.constellation,
        alpha=cfg.alpha,
        spectra=spectra,
    )
    col = f"{test}-vs-{benchmark}"
    if cfg.labelled:
        col = f"{label}-{col}"
    rows = []
    for metric in ("delta_i", "delta_i1", "delta_i2", "delta_p", "delta_mse"):
        v = getattr(rep, metric)
        rows.append(SweepRow(cfg.experiment, snr_db, col, metric, v.mean, v.stderr, v.trials, cfg.seed))
    return rows


def run_config(cfg: ExperimentConfig) -> list[SweepRow]:
    """One row per (model, SNR, scheme, metric), in a fixed order."""
    rows = []
    for label, model in cfg.models.items():
        spectra = _metrics.draw_spectra(model, cfg.m, cfg.trials, cfg.seed)
        for snr in cfg.snr_grid_db:
            for scheme in cfg.schemes:
                rows.extend(_scheme_rows(cfg, label, model, spectra, snr, scheme))
            for b, t in cfg.deltas:
                rows.extend(_delta_rows(cfg, label, spectra, snr, b, t))
    _check_finite(rows, cfg.strict)
    return rows


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".9g")


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow(
            [r.experiment, _fmt(r.snr_db), r.scheme, r.metric, _fmt(r.mean), _fmt(r.stderr), r.trials, r.seed]
        )
    return buf.getvalue()


def write_outputs(rows, path, metadata: dict) -> Path:
    """Write the CSV and a ``<path>.meta.json`` sidecar describing defaults."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(rows_to_csv(rows), encoding="utf-8")
    meta = path.with_name(path.name + ".meta.json")
    meta.write_text(json.dumps(metadata, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


# ---------------------------------------------------------------- figures

FIG4A_LAMBDA_T = [9.80, 5.66, 0.45, 0.09]
FIG4A_LAMBDA_R = [8.58, 4.20, 1.98, 1.24]
FIG2_SNR_DB = (-10.0, 0.0, 10.0)
FIG3_NR = (4, 8, 16, 32, 64)
FIG3_SNR_DB = (0.0, 10.0, 20.0)
FIG2_CHANNELS = 200


def _sep(lt, lr):
    return {"kind": "separable", "lambda_t": list(lt), "lambda_r": list(lr)}


def _fig1_config(trials, seed):
    return {
        "experiment": "fig1",
        "models": {"matched": _sep([8, 8, 0, 0], [4] * 4), "mismatched": _sep([4] * 4, [4] * 4)},
        "m": 2,
        "snr_grid_db": list(DEFAULT_SNR_GRID_DB),
        "trials": trials,
        "seed": seed,
        "schemes": ["perf", "stat"],
    }


def _fig4_config(name, model_spec, trials, seed):
    return {
        "experiment": name,
        "model": model_spec,
        "m": 2,
        "snr_grid_db": list(DEFAULT_SNR_GRID_DB),
        "trials": trials,
        "seed": seed,
        "alpha": 2.0,
        "schemes": ["perf_unconst", "perf_semi", "stat_semi", "stat_fixed"],
    }


def _delta_metric_rows(exp, snr_db, scheme, rep, trials, seed, extra=()):
    rows = [SweepRow(exp, snr_db, scheme, k, v, 0.0, trials, seed) for k, v in extra]
    for metric in ("delta_i", "delta_p"):
        v = getattr(rep, metric)
        rows.append(SweepRow(exp, snr_db, scheme, metric, v.mean, v.stderr, v.trials, seed))
    return rows


def fig2_family(seed: int, count: int = FIG2_CHANNELS) -> list[np.ndarray]:
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(2**32 - 1,)))
    return _channel.matching_sweep_family(4, 2, 16.0, count, rng)


def _fig2_rows(trials, seed, count=FIG2_CHANNELS):
    rows = []
    lr = np.full(4, 4.0)
    for idx, lt in enumerate(fig2_family(seed, count)):
        model = _channel.SeparableModel(lt, lr)
        mt = _channel.matching_metric_tx(model, 2)
        spectra = _metrics.draw_spectra(model, 2, trials, seed)
        for snr in FIG2_SNR_DB:
            rep = _metrics.estimate_delta(
                model, 2, db_to_linear(snr), "perf_unconst", "stat_semi", _link.QPSK, spectra=spectra
            )
            rows.extend(
                _delta_metric_rows("fig2", snr, f"ch{idx:03d}", rep, trials, seed, [("matching_metric_tx", mt)])
            )
    return rows


def _fig3_rows(trials, seed):
    rows = []
    for n_r in FIG3_NR:
        model = _channel.SeparableModel(np.ones(4), np.full(n_r, 4.0 / n_r))
        spectra = _metrics.draw_spectra(model, 2, trials, seed)
        for snr in FIG3_SNR_DB:
            rep = _metrics.estimate_delta(
                model, 2, db_to_linear(snr), "perf_unconst", "stat_semi", _link.QPSK, spectra=spectra
            )
            rows.extend(_delta_metric_rows("fig3", snr, f"nr{n_r}", rep, trials, seed))
    return rows


def _from_config(doc):
    return run_config(parse_config(doc))


FIGURES = {
    "fig1": lambda t, s: _from_config(_fig1_config(t, s)),
    "fig2": _fig2_rows,
    "fig3": _fig3_rows,
    "fig4a": lambda t, s: _from_config(_fig4_config("fig4a", _sep(FIG4A_LAMBDA_T, FIG4A_LAMBDA_R), t, s)),
    "fig4b": lambda t, s: _from_config(
        _fig4_config(
            "fig4b",
            {"kind": "canonical", "variance_profile": _channel.CANONICAL_4X4_PROFILE.tolist()},
            t,
            s,
        )
    ),
}


def figure_rows(figure: str, trials: int, seed: int) -> list[SweepRow]:
    if figure not in FIGURES:
        raise ConfigError("figure", f"unknown figure {figure!r}; expected one of {sorted(FIGURES)}")
    if trials < 1:
        raise ConfigError("trials", "must be >= 1")
    return FIGURES[figure](trials, seed)


def figure_metadata(figure: str, trials: int, seed: int) -> dict:
    notes = {
        "fig1": "SNR grid -10..30 dB step 2 is a package default",
        "fig2": f"{FIG2_CHANNELS}-channel stratified family stands in for the unpublished channel set",
        "fig3": "antenna sweep at 0, 10 and 20 dB; SNR choice is a package default",
        "fig4a": "SNR grid -10..30 dB step 2 is a package default; alpha = 2",
        "fig4b": "SNR grid -10..30 dB step 2 is a package default; alpha = 2",
    }
    return {
        "experiment": figure,
        "trials": trials,
        "seed": seed,
        "chunk_size": _metrics.CHUNK_SIZE,
        "mutual_info_unit": "bits",
        "constellation": "qpsk (alpha=2, beta=1)",
        "defaults": notes[figure],
    }
