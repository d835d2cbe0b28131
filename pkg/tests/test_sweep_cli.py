"""Sweep harness determinism, measure generators, CLI exit codes."""

import csv
import json
import os

import numpy as np
import pytest

from twoweight import GridSpec, build_grid
from twoweight import serialize
from twoweight.cli import main
from twoweight.exceptions import NormError
from twoweight.operators import zero_operator
from twoweight.sweep import (
    SweepConfig,
    generate_measure,
    generate_measure_pair,
    replay_trial,
    run_sweep,
)


def small_config(**overrides):
    doc = {
        "dimension": 1, "depths": [3], "radii": [0, 1], "trials": 2,
        "families": ["martingale_transform", "random_ewl"],
        "measures": ["iid_uniform", {"kind": "sparse_atoms", "p": 0.3}],
        "seed": 2024,
    }
    doc.update(overrides)
    return SweepConfig.from_dict(doc)


def test_generate_measure_uniform_quarters(rng):
    grid = build_grid(GridSpec(1, 2))
    mu = generate_measure("uniform", grid, rng)
    assert np.allclose(mu.masses, 0.25)


def test_generate_measure_sparse_all_zero(rng):
    grid = build_grid(GridSpec(1, 2))
    mu = generate_measure({"kind": "sparse_atoms", "p": 1.0}, grid, rng)
    assert mu.total == 0.0
    omega = generate_measure("uniform", grid, rng)
    from twoweight.testing import operator_norm

    with pytest.raises(NormError):
        operator_norm(zero_operator(grid, mu, omega))


def test_generate_measure_lacunary_pattern(rng):
    grid = build_grid(GridSpec(1, 3))
    mu = generate_measure("lacunary", grid, rng)
    assert np.allclose(mu.masses, [0.5, 0.25, 0.125, 0.125, 0, 0, 0, 0])
    assert mu.total == pytest.approx(1.0)


def test_generate_pair_from_weights(rng):
    grid = build_grid(GridSpec(1, 3))
    sigma, omega = generate_measure_pair("from_weights", grid, rng)
    assert sigma.total > 0 and np.all(sigma.masses > 0)
    assert np.all(omega.masses >= 0)


def test_sweep_zero_coefficient_trivial(tmp_path):
    cfg = small_config(families=["martingale_transform"], trials=1,
                       coefficient_scale=0.0, measures=["uniform"])
    summary = run_sweep(cfg, out_dir=str(tmp_path))
    assert summary.exit_code == 0
    rows = serialize.read_rows_csv(tmp_path / "trials.csv")
    assert all(float(r["norm"]) == 0.0 and float(r["c1"]) == 0.0 for r in rows)


def test_sweep_deterministic_modulo_wall_ms(tmp_path):
    cfg = small_config()
    out1, out2 = tmp_path / "a", tmp_path / "b"
    s1 = run_sweep(cfg, out_dir=str(out1))
    s2 = run_sweep(cfg, out_dir=str(out2))
    assert s1.exit_code == s2.exit_code == 0
    assert s1.trials == s2.trials == 16

    def stripped(path):
        with open(path / "trials.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        drop = rows[0].index("wall_ms")
        return [[c for i, c in enumerate(row) if i != drop] for row in rows]

    assert stripped(out1) == stripped(out2)


def test_replay_matches_sweep_row(tmp_path):
    cfg = small_config()
    run_sweep(cfg, out_dir=str(tmp_path))
    rows = serialize.read_rows_csv(tmp_path / "trials.csv")
    row, failures, _ = replay_trial(cfg, 5)
    assert not failures
    for key in ("seed", "n", "d", "r", "family", "norm", "c1", "c2", "c3"):
        got, want = row[key], rows[5][key]
        if isinstance(got, float):
            assert got == float(want)
        else:
            assert str(got) == want
    with pytest.raises(ValueError):
        replay_trial(cfg, 10_000)


def test_dump_certificates_files(tmp_path):
    cfg = small_config(trials=1, dump_certificates=True,
                       families=["random_ewl"], measures=["iid_uniform"])
    run_sweep(cfg, out_dir=str(tmp_path))
    certs = sorted((tmp_path / "certificates").iterdir())
    assert len(certs) == 2  # one per trial (two radii)
    doc = json.loads(certs[0].read_text())
    assert "verdicts" in doc and all(doc["verdicts"].values())
    assert doc["pi_total"] == pytest.approx(
        doc["a_term"] + doc["b_term"] + doc["c_term"], abs=1e-9)


def test_summary_metadata(tmp_path):
    cfg = small_config(trials=1)
    summary = run_sweep(cfg, out_dir=str(tmp_path))
    doc = serialize.load_json(tmp_path / "summary.json")
    assert doc["config_digest"] == cfg.digest()
    assert doc["trials"] == summary.trials
    assert doc["passes"] == summary.trials
    assert set(doc["cells"]) == set(summary.cells)


def test_config_rejects_unknown_keys():
    with pytest.raises(ValueError):
        SweepConfig.from_dict({"bogus": 1})
    with pytest.raises(ValueError):
        SweepConfig.from_dict({"dimension": 2, "families": ["haar_shift"]})
    with pytest.raises(ValueError):
        SweepConfig.from_dict({"measures": ["nope"]})


def test_cli_sweep_report_classify_exit_codes(tmp_path, rng, capsys):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({
        "dimension": 1, "depths": [3], "radii": [1], "trials": 1,
        "families": ["haar_shift", "paraproduct"], "measures": ["iid_exponential"],
        "seed": 11,
    }))
    out = tmp_path / "out"
    assert main(["sweep", "--config", str(cfg_path), "--out", str(out)]) == 0
    assert main(["report", "--in", str(out)]) == 0
    shown = capsys.readouterr().out
    assert "max embedding ratio" in shown

    from conftest import random_measure
    from twoweight.operators import CoefficientSequence, haar_shift

    grid = build_grid(GridSpec(1, 3))
    t = haar_shift(CoefficientSequence.random(grid, rng),
                   random_measure(grid, rng, low=0.1),
                   random_measure(grid, rng, low=0.1))
    op_path = tmp_path / "op.json"
    serialize.dump_json(op_path, serialize.operator_to_dict(t))
    assert main(["classify", "--operator", str(op_path)]) == 0
    shown = capsys.readouterr().out
    assert "ewl_radius: 1" in shown
    assert "well-localized radii: [2, 3]" in shown


def test_cli_usage_errors(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"dimension": 2, "families": ["haar_shift"]}))
    assert main(["sweep", "--config", str(bad)]) == 2
    assert main(["sweep", "--config", str(tmp_path / "missing.json")]) == 2
    assert main(["report", "--in", str(tmp_path / "nowhere")]) == 2
    assert main(["classify", "--operator", str(tmp_path / "missing.json")]) == 2
    capsys.readouterr()


def test_cli_replay(tmp_path, capsys):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({
        "dimension": 1, "depths": [2], "radii": [0], "trials": 2,
        "families": ["random_ewl"], "measures": ["uniform"], "seed": 5,
    }))
    assert main(["sweep", "--config", str(cfg_path), "--replay", "1"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["failures"] == []
    assert doc["row"]["d"] == 2
    assert main(["sweep", "--config", str(cfg_path), "--replay", "99"]) == 2


def test_parallel_workers_match_serial(tmp_path, monkeypatch):
    cfg = small_config(trials=1)
    out1, out2 = tmp_path / "serial", tmp_path / "par"
    run_sweep(cfg, out_dir=str(out1))
    monkeypatch.setenv("TWOWEIGHT_WORKERS", "2")
    run_sweep(cfg, out_dir=str(out2))

    def stripped(path):
        with open(path / "trials.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        drop = rows[0].index("wall_ms")
        return [[c for i, c in enumerate(row) if i != drop] for row in rows]

    assert stripped(out1) == stripped(out2)
