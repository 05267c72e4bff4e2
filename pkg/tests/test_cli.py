"""CLI contract: subcommands, exit codes, file formats, determinism."""

import json

import numpy as np
import pytest

from qmaflow.cli import (
    EXIT_INVALID,
    EXIT_NOT_CONVERGED,
    EXIT_OK,
    EXIT_POSITIVITY,
    RunConfig,
    main,
    read_snapshot,
    write_snapshot,
)
from qmaflow.errors import SpecValidationError
from qmaflow.fields import ScalarField, TorusGrid


def base_config(out_dir, **overrides):
    config = {
        "n": 2,
        "grid": {"active_dims": [0, 4], "sizes": [16, 16]},
        "omega_h": {"c": 1.0, "rho": [{"k": [0, 1], "amplitude": 0.05}]},
        "f": {
            "manufactured": {
                "u_star": [
                    {"k": [1, 0], "amplitude": 0.1},
                    {"k": [1, 1], "amplitude": 0.05},
                ]
            }
        },
        "u0": [],
        "sigma": 0.2,
        "tol_steady": 1e-6,
        "t_max": 100.0,
        "snapshot_interval": 10.0,
        "seed": 0,
        "output_dir": str(out_dir),
    }
    config.update(overrides)
    return config


def write_config(tmp_path, config, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(config))
    return path


# -- identities ----------------------------------------------------------------


def test_identities_exit_zero_and_deterministic_report(tmp_path, capsys):
    out1 = tmp_path / "r1.json"
    out2 = tmp_path / "r2.json"
    args = ["identities", "--n", "2", "--trials", "3", "--seed", "7"]
    assert main(args + ["--out", str(out1)]) == EXIT_OK
    assert main(args + ["--out", str(out2)]) == EXIT_OK
    assert out1.read_bytes() == out2.read_bytes()
    payload = json.loads(out1.read_text())
    assert payload["all_passed"] is True
    assert {r["name"] for r in payload["identities"]} >= {
        "pfaffian_squared_equals_det",
        "metric_form_dual_path",
    }
    text = capsys.readouterr().out
    assert "pass" in text


def test_identities_rejects_n_one(tmp_path, capsys):
    code = main(["identities", "--n", "1", "--out", str(tmp_path / "r.json")])
    assert code == EXIT_INVALID
    assert "1/(n-1)" in capsys.readouterr().err


def test_usage_error_exit_code(capsys):
    assert main(["identities"]) == EXIT_INVALID  # missing required --n


# -- flow -----------------------------------------------------------------------


@pytest.fixture(scope="module")
def flow_run(tmp_path_factory):
    tmp_path = tmp_path_factory.mktemp("flowrun")
    out_dir = tmp_path / "out"
    path = write_config(tmp_path, base_config(out_dir))
    code = main(["flow", "--config", str(path)])
    return code, path, out_dir


def test_flow_converges_and_writes_outputs(flow_run):
    code, _, out_dir = flow_run
    assert code == EXIT_OK
    result = json.loads((out_dir / "result.json").read_text())
    assert result["converged"] is True
    assert abs(result["b_tilde"]) < 1e-6
    assert result["residual"] <= 1e-6
    assert result["wall_time_s"] > 0
    assert (out_dir / "u_final.snap").exists()
    snaps = sorted(out_dir.glob("u_0*.snap"))
    assert snaps  # interval snapshots were emitted


def test_flow_diagnostics_rows_increase(flow_run):
    _, _, out_dir = flow_run
    lines = (out_dir / "diagnostics.csv").read_text().strip().splitlines()
    header = lines[0].split(",")
    assert header[:4] == ["step", "t", "dt", "sup_abs_ut"]
    steps = [int(line.split(",")[0]) for line in lines[1:]]
    ts = [float(line.split(",")[1]) for line in lines[1:]]
    assert steps == sorted(steps) and len(set(steps)) == len(steps)
    assert all(t2 > t1 for t1, t2 in zip(ts, ts[1:]))


def test_flow_snapshot_round_trip_is_bit_exact(flow_run, tmp_path):
    _, _, out_dir = flow_run
    header, field_values = read_snapshot(out_dir / "u_final.snap")
    grid = TorusGrid(
        n=header["n"],
        active_dims=tuple(header["active_dims"]),
        sizes=tuple(header["sizes"]),
    )
    field = ScalarField(grid, field_values)
    copy_path = tmp_path / "copy.snap"
    write_snapshot(copy_path, field, header["t"])
    header2, values2 = read_snapshot(copy_path)
    assert header2 == header
    assert np.array_equal(values2, field_values)


def test_flow_check_round_trip(flow_run, capsys):
    _, config_path, out_dir = flow_run
    code = main(
        ["check", "--config", str(config_path), "--snapshot", str(out_dir / "u_final.snap")]
    )
    assert code == EXIT_OK
    out = capsys.readouterr().out
    assert "residual" in out and "b_tilde" in out


def test_flow_invalid_config_exit_two(tmp_path):
    path = write_config(tmp_path, {"n": 2}, "broken.json")
    assert main(["flow", "--config", str(path)]) == EXIT_INVALID
    path2 = write_config(tmp_path, base_config(tmp_path / "o", n=1), "n1.json")
    assert main(["flow", "--config", str(path2)]) == EXIT_INVALID
    # unresolvable wavevector
    bad = base_config(tmp_path / "o2")
    bad["f"] = [{"k": [99, 0], "amplitude": 0.1}]
    path3 = write_config(tmp_path, bad, "band.json")
    assert main(["flow", "--config", str(path3)]) == EXIT_INVALID


def test_flow_initial_positivity_exit_three(tmp_path):
    config = base_config(tmp_path / "o3", u0=[{"k": [1, 0], "amplitude": 10.0}])
    path = write_config(tmp_path, config, "bad-u0.json")
    assert main(["flow", "--config", str(path)]) == EXIT_POSITIVITY


# -- check ------------------------------------------------------------------------


def test_check_zero_potential_against_nontrivial_source(flow_run, tmp_path):
    _, config_path, _ = flow_run
    grid = TorusGrid(n=2, active_dims=(0, 4), sizes=(16, 16))
    snap = tmp_path / "zero.snap"
    write_snapshot(snap, ScalarField.zeros(grid), 0.0)
    code = main(["check", "--config", str(config_path), "--snapshot", str(snap)])
    assert code == EXIT_NOT_CONVERGED


def test_check_truncated_snapshot_exit_two(flow_run, tmp_path):
    _, config_path, out_dir = flow_run
    raw = (out_dir / "u_final.snap").read_bytes()
    broken = tmp_path / "trunc.snap"
    broken.write_bytes(raw[:-17])
    code = main(["check", "--config", str(config_path), "--snapshot", str(broken)])
    assert code == EXIT_INVALID


def test_check_shape_mismatch_exit_two(flow_run, tmp_path):
    _, config_path, _ = flow_run
    other = TorusGrid(n=2, active_dims=(0, 4), sizes=(8, 8))
    snap = tmp_path / "wrong-shape.snap"
    write_snapshot(snap, ScalarField.zeros(other), 0.0)
    code = main(["check", "--config", str(config_path), "--snapshot", str(snap)])
    assert code == EXIT_INVALID


# -- config parsing ------------------------------------------------------------------


def test_run_config_validation(tmp_path):
    with pytest.raises(SpecValidationError):
        RunConfig.from_json({"n": 2}, tmp_path)
    with pytest.raises(SpecValidationError):
        RunConfig.from_json(base_config(tmp_path, sigma=-1.0), tmp_path)
    with pytest.raises(SpecValidationError):
        RunConfig.from_json(base_config(tmp_path, f={"wrong": {}}), tmp_path)
    config = RunConfig.from_json(base_config(tmp_path / "x"), tmp_path)
    assert config.u_star_spec is not None and config.f_spec is None
    # absolute output_dir entries win over the config's directory
    assert config.output_dir == tmp_path / "x"
