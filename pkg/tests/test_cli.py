"""Tests for the configuration layer and the command-line entry point."""

import csv
import json

import numpy as np
import pytest

from corrmimo import cli, experiments, precoding

FIG1_MODELS = {
    "matched": {"kind": "separable", "lambda_t": [8, 8, 0, 0], "lambda_r": [4, 4, 4, 4]},
    "mismatched": {"kind": "separable", "lambda_t": [4, 4, 4, 4], "lambda_r": [4, 4, 4, 4]},
}


def write_config(tmp_path, **overrides):
    doc = {
        "experiment": "demo",
        "models": FIG1_MODELS,
        "m": 2,
        "snr_grid_db": [-10, 0, 10, 20],
        "trials": 300,
        "seed": 4,
        "schemes": ["perf", "stat"],
    }
    doc.update(overrides)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(doc))
    return path


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


class TestRun:
    def test_fig1_style_config(self, tmp_path):
        cfg = write_config(tmp_path)
        out = tmp_path / "out.csv"
        assert cli.main(["run", str(cfg), "--out", str(out)]) == 0
        rows = read_rows(out)
        assert tuple(rows[0]) == experiments.CSV_HEADER
        mi = [r for r in rows[1:] if r[3] == "mutual_info"]
        assert {r[2] for r in mi} == {"matched-perf", "matched-stat", "mismatched-perf", "mismatched-stat"}
        assert len(mi) == 4 * 4
        meta = json.loads((tmp_path / "out.csv.meta.json").read_text())
        assert meta["trials"] == 300 and meta["mutual_info_unit"] == "bits"

    def test_byte_identical_reruns(self, tmp_path, monkeypatch):
        cfg = write_config(tmp_path, deltas=[{"benchmark": "perf_unconst", "test": "stat_semi"}])
        outs = []
        for i, threads in enumerate(("1", "4")):
            monkeypatch.setenv("CORRMIMO_THREADS", threads)
            out = tmp_path / f"o{i}.csv"
            assert cli.main(["run", str(cfg), "--out", str(out)]) == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_number_format(self, tmp_path):
        cfg = write_config(tmp_path)
        out = tmp_path / "out.csv"
        cli.main(["run", str(cfg), "--out", str(out)])
        for r in read_rows(out)[1:]:
            digits = r[4].lstrip("-").split("e")[0].replace(".", "").lstrip("0")
            assert len(digits) <= 9

    @pytest.mark.parametrize(
        "override,field",
        [
            ({"trials": 0}, "trials"),
            ({"snr_grid_db": [10, 0]}, "snr_grid_db"),
            ({"m": 3}, "m"),
            ({"schemes": ["psychic"]}, "schemes"),
            ({"alpha": 1.0}, "alpha"),
            ({"models": {"x": {"kind": "separable", "lambda_t": [2, 1], "lambda_r": [1, 1]}}}, "models.x"),
        ],
    )
    def test_config_errors_exit_2(self, tmp_path, override, field, capsys):
        cfg = write_config(tmp_path, **override)
        assert cli.main(["run", str(cfg), "--out", str(tmp_path / "x.csv")]) == 2
        assert field in capsys.readouterr().err

    def test_missing_file_exit_2(self, tmp_path):
        assert cli.main(["run", str(tmp_path / "nope.json")]) == 2

    def test_malformed_json_exit_2(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        assert cli.main(["run", str(p)]) == 2

    def test_strict_nonconvergence_exit_3(self, tmp_path):
        cfg = write_config(
            tmp_path,
            models={"m": FIG1_MODELS["mismatched"]},
            schemes=["stat_opt"],
            snr_grid_db=[0],
            optimizer={"batch": 100, "max_iters": 1, "tol": 0.0},
            strict=True,
        )
        assert cli.main(["run", str(cfg), "--out", str(tmp_path / "x.csv")]) == 3

    def test_canonical_model(self, tmp_path):
        cfg = write_config(
            tmp_path,
            models=None,
            model={"kind": "canonical", "variance_profile": [[2, 1], [1, 0.5]]},
            m=1,
        )
        doc = json.loads(cfg.read_text())
        del doc["models"]
        cfg.write_text(json.dumps(doc))
        out = tmp_path / "c.csv"
        assert cli.main(["run", str(cfg), "--out", str(out)]) == 0
        assert {r[2] for r in read_rows(out)[1:]} == {"perf", "stat"}


class TestReproduce:
    def test_fig1(self, tmp_path):
        assert cli.main(["reproduce", "fig1", "--trials", "200", "--out", str(tmp_path)]) == 0
        rows = read_rows(tmp_path / "fig1.csv")
        schemes = {r[2] for r in rows[1:]}
        assert schemes == {"matched-perf", "matched-stat", "mismatched-perf", "mismatched-stat"}
        snrs = sorted({float(r[1]) for r in rows[1:]})
        assert snrs == list(map(float, experiments.DEFAULT_SNR_GRID_DB))
        assert "defaults" in json.loads((tmp_path / "fig1.csv.meta.json").read_text())

    def test_unknown_figure(self, tmp_path):
        assert cli.main(["reproduce", "fig9", "--out", str(tmp_path)]) == 2

    def test_bad_trials(self, tmp_path):
        assert cli.main(["reproduce", "fig1", "--trials", "0", "--out", str(tmp_path)]) == 2

    def test_argparse_error(self):
        assert cli.main(["frobnicate"]) == 2


class TestSelftest:
    def test_clean_build(self, capsys):
        assert cli.main(["selftest"]) == 0
        assert "FAIL" not in capsys.readouterr().out

    def test_injected_waterfill_fault(self, monkeypatch, capsys):
        real = precoding.waterfill

        def skewed(lam, rho):
            r = real(lam, rho)
            return precoding.WaterfillResult(r.n_h, r.mu_h, r.lambda_wf * (1 + 1e-6))

        monkeypatch.setattr(precoding, "waterfill", skewed)
        assert cli.main(["selftest"]) == 1
        assert "FAIL oracles/" in capsys.readouterr().out
