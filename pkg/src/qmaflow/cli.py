"""Command-line entry point: run configs in, diagnostics and snapshots out.

Subcommands
-----------
identities   run the randomized identity suite, write a JSON report
flow         integrate a run config to steady state, write diagnostics.csv,
             snapshots and result.json
check        evaluate the stationary residual of a saved snapshot

Exit codes: 0 success (flow: converged; check: residual within tolerance),
1 clean run that missed its target, 2 invalid arguments/config/input files,
3 initial-positivity violation, 4 stiffness failure.

The run config is a single JSON document; all field inputs (source, initial
data, background perturbation, manufactured stationary potential) are trig
term lists [{"k": [...], "amplitude": a, "phase": p}, ...] over the active
dimensions.  Snapshots are a one-line JSON header followed by the raw
row-major little-endian float64 payload.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import PositivityError, SpecValidationError, StiffnessError
from .fields import ScalarField, TorusGrid, TrigPolySpec, build_omega_h, sample
from .flow import DiagnosticsRecord, run_to_steady
from .model import build_model
from .operators import flow_rhs
from .verify import build_manufactured, run_identity_suite

EXIT_OK = 0
EXIT_NOT_CONVERGED = 1
EXIT_INVALID = 2
EXIT_POSITIVITY = 3
EXIT_STIFF = 4

SNAPSHOT_MAGIC = "qmaflow-snapshot"


# -- run configuration -------------------------------------------------------


@dataclass
class RunConfig:
    n: int
    grid: TorusGrid
    omega_h_c: float
    omega_h_rho: TrigPolySpec | None
    f_spec: TrigPolySpec | None
    u_star_spec: TrigPolySpec | None  # set iff the source is manufactured
    u0_spec: TrigPolySpec | None
    sigma: float
    tol_steady: float
    t_max: float
    snapshot_interval: float
    seed: int
    output_dir: Path

    @classmethod
    def from_json(cls, data: dict, base_dir: Path) -> "RunConfig":
        try:
            n = int(data["n"])
            grid_spec = data["grid"]
            grid = TorusGrid(
                n=n,
                active_dims=tuple(grid_spec["active_dims"]),
                sizes=tuple(grid_spec["sizes"]),
            )
            oh = data.get("omega_h", {})
            omega_h_c = float(oh.get("c", 1.0))
            omega_h_rho = (
                TrigPolySpec.from_json(oh["rho"]) if oh.get("rho") else None
            )
            f_data = data.get("f", [])
            u_star_spec = None
            f_spec = None
            if isinstance(f_data, dict):
                if "manufactured" not in f_data:
                    raise SpecValidationError(
                        'the "f" object form must be {"manufactured": {"u_star": [...]}}'
                    )
                u_star_spec = TrigPolySpec.from_json(
                    f_data["manufactured"]["u_star"]
                )
            else:
                f_spec = TrigPolySpec.from_json(f_data)
            u0_spec = (
                TrigPolySpec.from_json(data["u0"]) if data.get("u0") else None
            )
            config = cls(
                n=n,
                grid=grid,
                omega_h_c=omega_h_c,
                omega_h_rho=omega_h_rho,
                f_spec=f_spec,
                u_star_spec=u_star_spec,
                u0_spec=u0_spec,
                sigma=float(data.get("sigma", 0.2)),
                tol_steady=float(data.get("tol_steady", 1e-8)),
                t_max=float(data.get("t_max", 1000.0)),
                snapshot_interval=float(data.get("snapshot_interval", 0.0)),
                seed=int(data.get("seed", 0)),
                output_dir=base_dir / str(data.get("output_dir", "out")),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, SpecValidationError):
                raise
            raise SpecValidationError(f"invalid run config: {exc}") from exc
        build_model(config.n)  # range check, n = 1 gets its dedicated message
        if config.sigma <= 0 or config.tol_steady < 0 or config.t_max <= 0:
            raise SpecValidationError("sigma, tol_steady, t_max must be positive")
        for spec in (config.omega_h_rho, config.f_spec, config.u_star_spec, config.u0_spec):
            if spec is not None:
                spec.validate_on(config.grid)
        return config

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except OSError as exc:
            raise SpecValidationError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise SpecValidationError(f"config {path} is not valid JSON: {exc}") from exc
        return cls.from_json(data, path.parent)


def _build_problem(config: RunConfig):
    """Background form, source and initial data for a run config."""
    model = build_model(config.n)
    if config.u_star_spec is not None:
        problem = build_manufactured(
            config.u_star_spec,
            config.grid,
            c=config.omega_h_c,
            rho=config.omega_h_rho,
        )
        omega_h, f = problem.omega_h, problem.f
    else:
        omega_h = build_omega_h(
            model, config.grid, config.omega_h_c, config.omega_h_rho
        )
        f = (
            sample(config.f_spec, config.grid)
            if config.f_spec is not None
            else ScalarField.zeros(config.grid)
        )
    u0 = (
        sample(config.u0_spec, config.grid)
        if config.u0_spec is not None
        else ScalarField.zeros(config.grid)
    )
    return omega_h, f, u0


# -- snapshot format ----------------------------------------------------------


def write_snapshot(path, field: ScalarField, t: float, name: str = "u"):
    """One-line JSON header, then the row-major little-endian float64 payload."""
    grid = field.grid
    header = {
        "format": SNAPSHOT_MAGIC,
        "n": grid.n,
        "active_dims": list(grid.active_dims),
        "sizes": list(grid.sizes),
        "t": t,
        "field": name,
        "byte_order": "little",
        "dtype": "float64",
    }
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        fh.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes())


def read_snapshot(path, grid: TorusGrid | None = None):
    """Read a snapshot; validates header, payload length and grid shape."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise SpecValidationError(f"cannot read snapshot {path}: {exc}") from exc
    newline = raw.find(b"\n")
    if newline < 0:
        raise SpecValidationError(f"snapshot {path} has no header line")
    try:
        header = json.loads(raw[:newline].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SpecValidationError(f"snapshot {path} has a bad header: {exc}") from exc
    if header.get("format") != SNAPSHOT_MAGIC:
        raise SpecValidationError(f"snapshot {path} has an unknown format tag")
    sizes = tuple(int(s) for s in header["sizes"])
    payload = raw[newline + 1 :]
    expected = int(np.prod(sizes)) * 8
    if len(payload) != expected:
        raise SpecValidationError(
            f"snapshot {path} payload has {len(payload)} bytes, expected {expected}"
        )
    values = np.frombuffer(payload, dtype="<f8").reshape(sizes)
    if grid is not None:
        if (
            tuple(header.get("active_dims", ())) != grid.active_dims
            or sizes != grid.sizes
            or int(header.get("n", -1)) != grid.n
        ):
            raise SpecValidationError(
                "snapshot grid does not match the config grid "
                f"(snapshot: n={header.get('n')}, dims={header.get('active_dims')}, "
                f"sizes={list(sizes)})"
            )
        return header, ScalarField(grid, values.copy())
    return header, values.copy()


# -- subcommands ---------------------------------------------------------------


def cmd_identities(args) -> int:
    try:
        reports = run_identity_suite(args.n, trials=args.trials, seed=args.seed)
    except (SpecValidationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    payload = {
        "n": args.n,
        "trials": args.trials,
        "seed": args.seed,
        "identities": [r.to_json() for r in reports],
        "all_passed": all(r.passed for r in reports),
    }
    out = Path(args.out)
    out.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    width = max(len(r.name) for r in reports)
    print(f"identity suite: n={args.n} trials={args.trials} seed={args.seed}")
    for r in reports:
        status = "pass" if r.passed else "FAIL"
        print(f"  {r.name:<{width}}  max_rel_err={r.max_rel_err:.3e}  tol={r.tol:.0e}  {status}")
    print(f"report written to {out}")
    return EXIT_OK if payload["all_passed"] else EXIT_NOT_CONVERGED


def cmd_flow(args) -> int:
    try:
        config = RunConfig.load(args.config)
        omega_h, f, u0 = _build_problem(config)
    except (SpecValidationError, PositivityError) as exc:
        # a bad background form or unreachable manufactured target is a
        # config problem; only the initial data gets the dedicated code
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID

    out_dir = config.output_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "diagnostics.csv"
    next_snapshot = [0.0]
    wall_start = time.perf_counter()

    with csv_path.open("w") as csv_file:
        csv_file.write(",".join(DiagnosticsRecord.CSV_FIELDS) + "\n")

        def on_step(state, record):
            csv_file.write(record.csv_row() + "\n")
            if config.snapshot_interval > 0 and state.t >= next_snapshot[0]:
                write_snapshot(
                    out_dir / f"u_{state.step_count:08d}.snap", state.u, state.t
                )
                while next_snapshot[0] <= state.t:
                    next_snapshot[0] += config.snapshot_interval

        try:
            result = run_to_steady(
                u0,
                omega_h,
                f,
                tol_steady=config.tol_steady,
                t_max=config.t_max,
                sigma=config.sigma,
                on_step=on_step,
            )
        except PositivityError as exc:
            print(f"error: initial data rejected: {exc}", file=sys.stderr)
            return EXIT_POSITIVITY
        except StiffnessError as exc:
            print(f"error: {exc}", file=sys.stderr)
            if exc.diagnostics is not None:
                print(f"last accepted step: {exc.diagnostics}", file=sys.stderr)
            return EXIT_STIFF

    wall = time.perf_counter() - wall_start
    write_snapshot(out_dir / "u_final.snap", result.u_normalized, result.t_final)
    result_payload = {
        "converged": result.converged,
        "b_tilde": result.b_tilde,
        "residual": result.residual,
        "t_final": result.t_final,
        "steps": result.steps,
        "wall_time_s": wall,
    }
    (out_dir / "result.json").write_text(
        json.dumps(result_payload, indent=2, sort_keys=True) + "\n"
    )
    status = "converged" if result.converged else "did not converge"
    print(
        f"{status}: t={result.t_final:.4g} steps={result.steps} "
        f"b_tilde={result.b_tilde:.10g} residual={result.residual:.3e} "
        f"wall={wall:.1f}s -> {out_dir}"
    )
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def cmd_check(args) -> int:
    try:
        config = RunConfig.load(args.config)
        omega_h, f, _ = _build_problem(config)
        _, u = read_snapshot(args.snapshot, config.grid)
    except (SpecValidationError, PositivityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    tol = args.tol if args.tol is not None else config.tol_steady
    try:
        rhs = flow_rhs(u, omega_h, f)
    except PositivityError as exc:
        print(f"error: snapshot violates positivity: {exc}", file=sys.stderr)
        return EXIT_POSITIVITY
    residual = rhs.osc()
    b_tilde = rhs.mean()
    print(f"residual = {residual:.6e}")
    print(f"b_tilde  = {b_tilde:.10g}")
    return EXIT_OK if residual <= tol else EXIT_NOT_CONVERGED


# -- argument parsing -----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qmaflow",
        description="Quaternionic Monge-Ampère flow on flat hyperkähler tori.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_id = sub.add_parser("identities", help="run the randomized identity suite")
    p_id.add_argument("--n", type=int, required=True, help="quaternionic dimension")
    p_id.add_argument("--trials", type=int, default=200)
    p_id.add_argument("--seed", type=int, default=0)
    p_id.add_argument("--out", default="identities_report.json")
    p_id.set_defaults(func=cmd_identities)

    p_flow = sub.add_parser("flow", help="integrate a run config to steady state")
    p_flow.add_argument("--config", required=True)
    p_flow.set_defaults(func=cmd_flow)

    p_check = sub.add_parser("check", help="stationary residual of a snapshot")
    p_check.add_argument("--config", required=True)
    p_check.add_argument("--snapshot", required=True)
    p_check.add_argument("--tol", type=float, default=None)
    p_check.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors, which matches the contract
        return int(exc.code) if exc.code is not None else EXIT_INVALID
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
