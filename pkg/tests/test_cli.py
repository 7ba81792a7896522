"""Command-line interface: config handling, artifacts, exit codes."""

import json

import numpy as np
import pytest
from click.testing import CliRunner

from mhdrelax.cli import main
from mhdrelax.dynamics import corpus_vector_field
from mhdrelax.fields import TorusGrid, init_field, to_physical
from mhdrelax.snapshot import read_snapshot, snapshot_of_field, write_snapshot
from mhdrelax.stokes import (
    REFERENCE_BUMPS,
    bump_forcing,
    solve_stokes_freespace,
    velocity_from_B,
)

BASE_CONFIG = """\
[grid]
n = 16

[params]
nu = 1.0
eta = 0.1

[time]
dt = 1e-3
t_end = 5e-3

[init]
kind = "taylor_green"

[output]
cadence = 2
"""


@pytest.fixture
def runner():
    return CliRunner()


def _write_config(tmp_path, text=BASE_CONFIG, name="run.toml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


# ---------------------------------------------------------------------------
# run: plain integration

def test_run_taylor_green_writes_artifacts(runner, tmp_path):
    cfg = _write_config(tmp_path)
    out = tmp_path / "out"
    res = runner.invoke(main, ["run", "--config", cfg, "--output-dir", str(out)])
    assert res.exit_code == 0, res.output
    assert (out / "ledger.csv").exists()
    assert (out / "final.smhd").exists()
    assert (out / "metadata.json").exists()
    # cadence 2 over 5 steps: observers fire at steps 0, 2, 4 and at the end
    snaps = sorted(p.name for p in out.glob("snap_*.smhd"))
    assert snaps == [f"snap_{i:06d}.smhd" for i in range(4)]
    final = read_snapshot(out / "final.smhd")
    assert final.t == 5e-3 and final.box is None


def test_run_is_deterministic(runner, tmp_path):
    cfg = _write_config(tmp_path)
    ledgers = []
    for sub in ("a", "b"):
        out = tmp_path / sub
        res = runner.invoke(main, ["run", "--config", cfg, "--output-dir", str(out)])
        assert res.exit_code == 0, res.output
        ledgers.append((out / "ledger.csv").read_bytes())
    assert ledgers[0] == ledgers[1]


def test_run_set_overrides_last_wins(runner, tmp_path):
    cfg = _write_config(tmp_path)
    out = tmp_path / "out"
    res = runner.invoke(
        main,
        ["run", "--config", cfg, "--output-dir", str(out),
         "--set", "time.dt=2e-3", "--set", "time.dt=2.5e-3"],
    )
    assert res.exit_code == 0, res.output
    meta = json.loads((out / "metadata.json").read_text())
    assert meta["config"]["time"]["dt"] == 2.5e-3


@pytest.mark.parametrize(
    "override, key",
    [
        ("grid.n=15", "grid.n"),
        ("params.nu=0", "params.nu"),
        ("params.eta=-1", "params.eta"),
        ("time.dt=0", "time.dt"),
        ("time.cfl_safety=2", "time.cfl_safety"),
        ("init.kind=vortex", "init.kind"),
        ("output.cadence=0", "output.cadence"),
        ("experiment.name=turbulence", "experiment.name"),
    ],
)
def test_run_validation_names_offending_key(runner, tmp_path, override, key):
    cfg = _write_config(tmp_path)
    res = runner.invoke(main, ["run", "--config", cfg, "--set", override])
    assert res.exit_code == 1
    assert key in res.output


def test_run_validation_reports_first_failure(runner, tmp_path):
    # grid.n is validated before params.nu
    cfg = _write_config(tmp_path)
    res = runner.invoke(
        main, ["run", "--config", cfg, "--set", "grid.n=3", "--set", "params.nu=-1"]
    )
    assert res.exit_code == 1
    assert "grid.n" in res.output and "params.nu" not in res.output


def test_run_random_sobolev_requires_seed(runner, tmp_path):
    cfg = _write_config(tmp_path)
    res = runner.invoke(main, ["run", "--config", cfg, "--set", "init.kind=random_sobolev"])
    assert res.exit_code == 1
    assert "init.seed" in res.output


def test_run_missing_config_file(runner, tmp_path):
    res = runner.invoke(main, ["run", "--config", str(tmp_path / "nope.toml")])
    assert res.exit_code == 1
    assert "not found" in res.output


def test_run_unparsable_config(runner, tmp_path):
    cfg = _write_config(tmp_path, text="grid = [unclosed\n", name="bad.toml")
    res = runner.invoke(main, ["run", "--config", cfg])
    assert res.exit_code == 1
    assert "does not parse" in res.output


def test_run_malformed_set(runner, tmp_path):
    cfg = _write_config(tmp_path)
    res = runner.invoke(main, ["run", "--config", cfg, "--set", "missingdelimiter"])
    assert res.exit_code == 1
    assert "key=value" in res.output


# ---------------------------------------------------------------------------
# run: experiments

def test_run_uniqueness_experiment(runner, tmp_path):
    text = BASE_CONFIG + """
[experiment]
name = "uniqueness"

[experiment.params]
deltas = [1e-4, 1e-5]
"""
    cfg = _write_config(tmp_path, text=text)
    out = tmp_path / "uniq"
    res = runner.invoke(
        main,
        ["run", "--config", cfg, "--output-dir", str(out), "--set", "time.t_end=0.02"],
    )
    assert res.exit_code == 0, res.output
    assert "delta_scaling_slope" in res.output
    assert (out / "report.csv").exists()
    assert (out / "verdict.txt").exists()

    # report re-audits the same directory without recomputing
    (out / "verdict.txt").unlink()
    res2 = runner.invoke(main, ["report", "--dir", str(out)])
    assert res2.exit_code == 0, res2.output
    assert (out / "verdict.txt").exists()


# ---------------------------------------------------------------------------
# verify

def test_verify_dynamics_two_seeds(runner, tmp_path):
    out = tmp_path / "v"
    res = runner.invoke(
        main, ["verify", "--suite", "dynamics", "--seeds", "0..1", "--output-dir", str(out)]
    )
    assert res.exit_code == 0, res.output
    for name in ("dynamics_dbdt_bound", "dynamics_cancellations", "dynamics_hs_product"):
        assert (out / f"{name}.csv").exists()
    text = (out / "verdict.txt").read_text()
    assert text.count("pass") == 3 and "fail" not in text


def test_verify_rejects_bad_suite_and_seeds(runner, tmp_path):
    res = runner.invoke(main, ["verify", "--suite", "bogus"])
    assert res.exit_code == 1 and "--suite" in res.output
    for seeds in ("5..2", "x..y", "1.5"):
        res = runner.invoke(
            main,
            ["verify", "--suite", "dynamics", "--seeds", seeds,
             "--output-dir", str(tmp_path / "s")],
        )
        assert res.exit_code == 1
        assert "--seeds" in res.output


def test_verify_output_independent_of_thread_count(runner, tmp_path):
    blobs = []
    for threads in ("1", "3"):
        out = tmp_path / f"t{threads}"
        res = runner.invoke(
            main,
            ["verify", "--suite", "lorentz", "--seeds", "0..3", "--output-dir", str(out)],
            env={"MHDRELAX_THREADS": threads},
        )
        assert res.exit_code == 0, res.output
        blobs.append((out / "lorentz_chebyshev.csv").read_bytes())
    assert blobs[0] == blobs[1]


def test_verify_rejects_bad_thread_count(runner, tmp_path):
    res = runner.invoke(
        main,
        ["verify", "--suite", "lorentz", "--seeds", "0", "--output-dir", str(tmp_path / "x")],
        env={"MHDRELAX_THREADS": "many"},
    )
    assert res.exit_code == 1
    assert "MHDRELAX_THREADS" in res.output


# ---------------------------------------------------------------------------
# one-shot stokes solves

def test_stokes_torus_solve_roundtrip(runner, tmp_path):
    grid = TorusGrid(32)
    B = corpus_vector_field(grid, 3)
    src = tmp_path / "field.smhd"
    snapshot_of_field(src, 0.0, B)
    res = runner.invoke(main, ["stokes", "--input", str(src), "--nu", "2.0"])
    assert res.exit_code == 0, res.output
    out_path = tmp_path / "field_velocity.smhd"
    assert out_path.exists()
    snap = read_snapshot(out_path)
    assert snap.box is None and snap.samples.shape == (2, 32, 32)
    B_rt = init_field(grid, "from_file", path=str(src))
    u = velocity_from_B(B_rt, 2.0).u
    assert np.array_equal(snap.samples[0], to_physical(u.x_comp))
    assert np.array_equal(snap.samples[1], to_physical(u.y_comp))


def test_stokes_freespace_solve(runner, tmp_path):
    f = bump_forcing(REFERENCE_BUMPS, 1.0, 32)
    src = tmp_path / "forcing.smhd"
    write_snapshot(src, 0.0, f.reshape(4, 32, 32), box=1.0)
    dst = tmp_path / "u.smhd"
    res = runner.invoke(
        main, ["stokes", "--input", str(src), "--nu", "1.5", "--output", str(dst)]
    )
    assert res.exit_code == 0, res.output
    snap = read_snapshot(dst)
    assert snap.box == 1.0
    expected = solve_stokes_freespace(f, 1.0, 1.5)
    np.testing.assert_allclose(snap.samples, expected, atol=0)


def test_stokes_input_validation(runner, tmp_path):
    res = runner.invoke(main, ["stokes", "--input", str(tmp_path / "nope.smhd")])
    assert res.exit_code == 1 and "--input" in res.output

    one_comp = tmp_path / "one.smhd"
    write_snapshot(one_comp, 0.0, np.zeros((1, 8, 8)))
    res = runner.invoke(main, ["stokes", "--input", str(one_comp)])
    assert res.exit_code == 1 and "2 components" in res.output

    two_box = tmp_path / "two.smhd"
    write_snapshot(two_box, 0.0, np.zeros((2, 8, 8)), box=1.0)
    res = runner.invoke(main, ["stokes", "--input", str(two_box)])
    assert res.exit_code == 1 and "4 components" in res.output

    field = tmp_path / "f.smhd"
    snapshot_of_field(field, 0.0, corpus_vector_field(TorusGrid(16), 0))
    res = runner.invoke(main, ["stokes", "--input", str(field), "--nu", "-1"])
    assert res.exit_code == 1 and "--nu" in res.output


# ---------------------------------------------------------------------------
# report

def test_report_on_plain_run_ledger(runner, tmp_path):
    cfg = _write_config(tmp_path)
    out = tmp_path / "out"
    assert runner.invoke(main, ["run", "--config", cfg, "--output-dir", str(out)]).exit_code == 0
    res = runner.invoke(main, ["report", "--dir", str(out)])
    assert res.exit_code == 0, res.output
    text = (out / "verdict.txt").read_text()
    assert "energy_B_nonincreasing" in text and "balance_residual_final" in text
    assert "fail" not in text


def test_report_requires_known_directory_layout(runner, tmp_path):
    res = runner.invoke(main, ["report", "--dir", str(tmp_path)])
    assert res.exit_code == 1
    assert "neither report.csv nor ledger.csv" in res.output

    (tmp_path / "report.csv").write_text("t\n0\n")
    res = runner.invoke(main, ["report", "--dir", str(tmp_path)])
    assert res.exit_code == 1
    assert "experiment name" in res.output
