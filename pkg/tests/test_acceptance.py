"""Acceptance criteria, one test per criterion at its stated tolerance.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the one-line
verdict per criterion.  The long flows (the reduced-mode manufactured run,
its second-initial-data twin, and the full-dimension smoke test) are
module-scoped fixtures shared across criteria.
"""

import time

import numpy as np
import pytest

from qmaflow.fields import (
    ScalarField,
    TorusGrid,
    TrigPolySpec,
    TrigTerm,
    build_omega_h,
    constant_two_form_field,
)
from qmaflow.flow import FlowEngine, FlowState, monitor_maximum_principle, normalize, run_to_steady
from qmaflow.model import build_model, positivity_matrix, standard_form
from qmaflow.operators import flow_form, flow_rhs
from qmaflow.verify import (
    admissible_potential,
    build_manufactured,
    fit_exponential_decay,
    linearization_order_check,
    random_trig_spec,
    run_identity_suite,
)


def verdict(num, ok, detail):
    print(f"ACCEPTANCE {num}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"criterion {num}: {detail}"


# -- shared runs ---------------------------------------------------------------


@pytest.fixture(scope="module")
def run2():
    """Trivial flow: flat background, constant source 0.3, zero start."""
    grid = TorusGrid(n=2, active_dims=(0, 4), sizes=(16, 16))
    omega_h = constant_two_form_field(grid, standard_form(2))
    f = ScalarField.constant(grid, 0.3)
    start = time.perf_counter()
    engine = FlowEngine(omega_h, f)
    stage = engine.evaluate(np.zeros(grid.shape))
    state = FlowState(u=ScalarField.zeros(grid), t=0.0, dt=engine.cfl_cap(stage), step_count=0)
    trajectory = [(state.t, state.u.values.copy())]
    history = [engine.diagnostics(state, stage)]
    for _ in range(120):
        state, stage = engine.step(state, stage)
        trajectory.append((state.t, state.u.values.copy()))
        history.append(engine.diagnostics(state, stage))
    steady = run_to_steady(ScalarField.zeros(grid), omega_h, f)
    wall = time.perf_counter() - start
    return {
        "trajectory": trajectory,
        "history": history,
        "steady": steady,
        "wall": wall,
    }


RUN3_GRID = TorusGrid(n=2, active_dims=(0, 4), sizes=(64, 64))
RUN3_USTAR = TrigPolySpec.from_terms(
    [TrigTerm((1, 0), 0.1), TrigTerm((1, 1), 0.05)]
)
RUN3_RHO = TrigPolySpec.from_terms([TrigTerm((0, 1), 0.05)])


def _run3_problem():
    return build_manufactured(RUN3_USTAR, RUN3_GRID, c=1.0, rho=RUN3_RHO)


def _run_manufactured(problem, u0, real_form_check=False):
    target = normalize(problem.u_star)
    errs, ts, defects = [], [], []
    pf_flat = 1.0  # det of the flat positivity matrix

    def on_step(state, record):
        ts.append(state.t)
        errs.append(
            float(np.max(np.abs(normalize(state.u).values - target.values)))
        )
        if real_form_check and state.step_count % 10 == 0:
            omt = flow_form(state.u, problem.omega_h)
            det = np.linalg.det(
                np.moveaxis(positivity_matrix(omt.entries, 2), (0, 1), (-2, -1))
            ).real
            rhs = flow_rhs(state.u, problem.omega_h, problem.f)
            target_det = np.exp(2.0 * (rhs.values + problem.f.values)) * pf_flat
            defects.append(float(np.max(np.abs(det / target_det - 1.0))))

    start = time.perf_counter()
    result = run_to_steady(
        u0, problem.omega_h, problem.f, tol_steady=1e-8, t_max=200.0, on_step=on_step
    )
    wall = time.perf_counter() - start
    return {
        "result": result,
        "target": target,
        "ts": ts,
        "errs": errs,
        "defects": defects,
        "wall": wall,
    }


@pytest.fixture(scope="module")
def run3():
    problem = _run3_problem()
    data = _run_manufactured(problem, ScalarField.zeros(RUN3_GRID), real_form_check=True)
    data["problem"] = problem
    return data


@pytest.fixture(scope="module")
def run3_alt():
    """Same problem as run3 from a different admissible start."""
    problem = _run3_problem()
    u0 = ScalarField(
        RUN3_GRID,
        _sample_terms(RUN3_GRID, [((0, 1), 0.05, 0.0), ((1, -1), 0.03, 0.7)]),
    )
    return _run_manufactured(problem, u0)


def _sample_terms(grid, triples):
    from qmaflow.fields import sample

    spec = TrigPolySpec.from_terms([TrigTerm(k, a, p) for k, a, p in triples])
    return sample(spec, grid).values


@pytest.fixture(scope="module")
def run4():
    """Full-dimension smoke test: all 8 real coordinates active."""
    grid = TorusGrid(n=2, active_dims=tuple(range(8)), sizes=(4,) * 8)
    u_star = TrigPolySpec.from_terms(
        [
            TrigTerm((1, 0, 0, 0, 0, 0, 0, 0), 0.05),
            TrigTerm((0, 1, 0, 0, 0, 1, 0, 0), 0.03),
            TrigTerm((0, 0, 1, 0, 0, 0, 0, -1), 0.02),
        ]
    )
    rho = TrigPolySpec.from_terms([TrigTerm((0, 0, 0, 1, 0, 0, 1, 0), 0.02)])
    problem = build_manufactured(u_star, grid, c=1.0, rho=rho)
    start = time.perf_counter()
    result = run_to_steady(
        ScalarField.zeros(grid),
        problem.omega_h,
        problem.f,
        tol_steady=1e-6,
        t_max=100.0,
    )
    wall = time.perf_counter() - start
    return {"problem": problem, "result": result, "wall": wall}


# -- criteria --------------------------------------------------------------------


def test_criterion_1_identity_suite():
    start = time.perf_counter()
    failures = []
    for n in (2, 3):
        for report in run_identity_suite(n, trials=200, seed=2024 + n):
            if not report.passed:
                failures.append((n, report.name, report.max_rel_err))
    wall = time.perf_counter() - start
    verdict(
        1,
        not failures and wall < 120.0,
        f"n=2,3 x 200 trials in {wall:.1f}s, failures={failures}",
    )


def test_criterion_2_trivial_flow(run2):
    # |u(t) + 0.3 t| within 1e-10 per unit of flow time
    worst = max(
        float(np.max(np.abs(values + 0.3 * t))) / (1e-10 * max(1.0, t))
        for t, values in run2["trajectory"]
    )
    steady = run2["steady"]
    ok = (
        worst <= 1.0
        and steady.converged
        and abs(steady.b_tilde + 0.3) <= 1e-8
        and run2["wall"] < 60.0
    )
    verdict(
        2,
        ok,
        f"|u + 0.3 t| at {worst:.3g} of the 1e-10/t budget, "
        f"b_tilde = {steady.b_tilde:.12g}, wall = {run2['wall']:.1f}s",
    )


def test_criterion_3_manufactured_convergence(run3):
    result = run3["result"]
    err_final = float(
        np.max(np.abs(result.u_normalized.values - run3["target"].values))
    )
    ts, errs = np.asarray(run3["ts"]), np.asarray(run3["errs"])
    half = ts >= result.t_final / 2
    usable = half & (errs > 0)
    rate, r2 = fit_exponential_decay(ts[usable], errs[usable])
    ok = (
        result.converged
        and err_final <= 1e-5
        and abs(result.b_tilde) <= 1e-6
        and r2 > 0.99
        and rate < 0
        and run3["wall"] < 600.0
    )
    verdict(
        3,
        ok,
        f"err={err_final:.2e}, b_tilde={result.b_tilde:.2e}, rate={rate:.3f}, "
        f"R2={r2:.5f}, wall={run3['wall']:.0f}s, steps={result.steps}",
    )


def test_criterion_4_full_dimension_smoke(run4):
    result = run4["result"]
    ok = result.converged and result.residual <= 1e-6 and run4["wall"] < 1800.0
    verdict(
        4,
        ok,
        f"residual={result.residual:.2e}, steps={result.steps}, wall={run4['wall']:.0f}s",
    )


def test_criterion_5_maximum_principle(run2, run3, run4):
    checks = {
        "run2": monitor_maximum_principle(run2["history"]),
        "run3": monitor_maximum_principle(run3["result"].history),
        "run4": monitor_maximum_principle(run4["result"].history),
    }
    verdict(5, all(checks.values()), f"sup|u_t| monitors: {checks}")


def test_criterion_6_positivity_preservation(run2, run3, run4):
    mins = {
        "run2": min(r.min_eig_omega_tilde for r in run2["history"]),
        "run3": min(r.min_eig_omega_tilde for r in run3["result"].history),
        "run4": min(r.min_eig_omega_tilde for r in run4["result"].history),
    }
    verdict(6, all(v > 0 for v in mins.values()), f"min eigenvalues: {mins}")


def test_criterion_7_uniqueness(run3, run3_alt):
    a, b = run3["result"], run3_alt["result"]
    du = float(np.max(np.abs(a.u_normalized.values - b.u_normalized.values)))
    db = abs(a.b_tilde - b.b_tilde)
    ok = b.converged and du <= 1e-5 and db <= 1e-6
    verdict(7, ok, f"|u_a - u_b| = {du:.2e}, |b_a - b_b| = {db:.2e}")


def test_criterion_8_linearization_order():
    grid = TorusGrid(n=2, active_dims=(0, 1, 6), sizes=(8, 8, 8))
    model = build_model(2)
    omega_h = build_omega_h(
        model, grid, 1.0, TrigPolySpec.from_terms([TrigTerm((0, 1, 0), 0.05)])
    )
    slopes = []
    for trial in range(20):
        rng = np.random.default_rng(900 + trial)
        u, _, _ = admissible_potential(rng, grid, omega_h, amplitude=0.2)
        v_spec = random_trig_spec(rng, grid, num_terms=5, amplitude=0.6)
        from qmaflow.fields import sample

        v = sample(v_spec, grid)
        res = linearization_order_check(u, v, omega_h)
        slopes.append(res.slope)
    verdict(
        8,
        all(s >= 1.9 for s in slopes),
        f"min slope = {min(slopes):.3f} over 20 pairs",
    )


def test_criterion_9_real_form_identity(run3):
    worst = max(run3["defects"])
    verdict(9, worst <= 1e-8, f"max pointwise defect = {worst:.2e} over {len(run3['defects'])} samples")
