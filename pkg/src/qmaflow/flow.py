"""Time integration of the parabolic flow with positivity guarding.

The stepper is explicit Heun (predictor-corrector) under a parabolic CFL
bound dt = sigma * h_min^2 / kappa, where kappa is the largest grid value
of the sum of reciprocal block eigenvalues of the evolving form.  Steps
whose predictor or corrector leave the positive cone (or go non-finite)
are rejected and retried with half the step, up to a bounded number of
halvings; the step then regrows geometrically toward the CFL cap after a
run of accepted steps.

Steady state is detected through the oscillation of the right-hand side,
not its norm: the time derivative tends to a constant, so only its spread
vanishes at convergence.  The constant itself is reported as the spatial
mean of the final right-hand side, which on the flat torus equals its
volume average.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import PositivityError, StiffnessError
from .exterior import pfaffian, pfaffian_upper
from .fields import ScalarField, TwoFormField, spectral_ops
from .model import block_eigenvalues, standard_form

GROW_FACTOR = 1.1
GROW_AFTER_ACCEPTS = 10
DEFAULT_MARGIN = 1e-8
DEFAULT_SIGMA = 0.2
MAX_HALVINGS = 20


@dataclass
class FlowState:
    """Current potential, flow time, step size and step counter."""

    u: ScalarField
    t: float
    dt: float
    step_count: int


@dataclass
class DiagnosticsRecord:
    """Per-step monitors mirroring the a priori estimates of the flow."""

    step: int
    t: float
    dt: float
    sup_abs_ut: float
    osc_u: float
    max_beta: float
    max_eta: float
    min_eig_omega_tilde: float
    osc_ut: float
    spectral_tail: float

    CSV_FIELDS = (
        "step",
        "t",
        "dt",
        "sup_abs_ut",
        "osc_u",
        "max_beta",
        "max_eta",
        "min_eig_omega_tilde",
        "osc_ut",
        "spectral_tail",
    )

    def csv_row(self) -> str:
        return ",".join(repr(getattr(self, name)) for name in self.CSV_FIELDS)


@dataclass
class SteadyResult:
    """Outcome of a run: normalized limit, its constant, and the history."""

    u_normalized: ScalarField
    b_tilde: float
    residual: float
    converged: bool
    history: list
    t_final: float
    steps: int


def normalize(u: ScalarField) -> ScalarField:
    """Subtract the mean; the volume form is constant on the flat torus."""
    return ScalarField(u.grid, u.values - u.values.mean())


class _Stage:
    """One evaluation of the flow map: right-hand side plus guards."""

    __slots__ = ("ok", "rhs", "min_eig", "kappa", "eta", "hat")

    def __init__(self, ok, rhs=None, min_eig=math.nan, kappa=math.nan, eta=None, hat=None):
        self.ok = ok
        self.rhs = rhs
        self.min_eig = min_eig
        self.kappa = kappa
        self.eta = eta
        self.hat = hat


class FlowEngine:
    """Shared per-run workspace: background form, source, multipliers."""

    def __init__(
        self,
        omega_h: TwoFormField,
        f: ScalarField,
        sigma: float = DEFAULT_SIGMA,
        margin: float = DEFAULT_MARGIN,
    ):
        self.grid = omega_h.grid
        self.n = self.grid.n
        self.ops = spectral_ops(self.grid)
        self.omega_h = omega_h.entries
        self.f = f.values
        self.sigma = sigma
        self.margin = margin
        omega = standard_form(self.n)
        self._pf_omega = float(pfaffian(omega).real)
        self._inv_nm1 = 1.0 / (self.n - 1)
        pairs = self.ops.pairs
        self._omega_h_upper = np.stack([omega_h.entries[j, k] for j, k in pairs])
        sh = (len(pairs),) + (1,) * len(self.grid.shape)
        self._omega_upper = np.array([omega[j, k] for j, k in pairs]).reshape(sh)
        self._block_idx = [pairs.index((2 * i, 2 * i + 1)) for i in range(self.n)]

    def evaluate(self, u_values) -> _Stage:
        """Evolving form, positivity guard, right-hand side at one state.

        Runs on stacked upper-triangle entries: the form is antisymmetric,
        so the (j, k), j < k entries determine it, and one batched inverse
        transform covers the whole quaternionic Hessian plus its trace.
        """
        if not np.all(np.isfinite(u_values)):
            return _Stage(ok=False)
        hat = self.ops.fft(u_values)
        upper, eta = self.ops.ddj_upper_s1_from_hat(hat)
        omt_upper = self._omega_h_upper + (eta * self._omega_upper - upper) * self._inv_nm1
        pf = pfaffian_upper(omt_upper, 2 * self.n).real
        if self.n == 2:
            s1 = (omt_upper[self._block_idx[0]] + omt_upper[self._block_idx[1]]).real
            disc = np.sqrt(np.maximum(s1 * s1 - 4.0 * pf, 0.0))
            min_eig = float((0.5 * (s1 - disc)).min())
            if not (min_eig > self.margin and np.isfinite(min_eig)):
                return _Stage(ok=False, min_eig=min_eig)
            kappa = float((s1 / pf).max())
        else:
            omt = self._upper_to_full(omt_upper)
            lam = block_eigenvalues(omt, self.n)
            min_eig = float(lam.min())
            if not (min_eig > self.margin and np.isfinite(min_eig)):
                return _Stage(ok=False, min_eig=min_eig)
            kappa = float((1.0 / lam).sum(axis=-1).max())
        rhs = np.log(pf / self._pf_omega) - self.f
        if not np.all(np.isfinite(rhs)):
            return _Stage(ok=False, min_eig=min_eig)
        return _Stage(True, rhs, min_eig, kappa, eta, hat)

    def _upper_to_full(self, upper):
        m = 2 * self.n
        full = np.zeros((m, m) + self.grid.shape, dtype=complex)
        for idx, (j, k) in enumerate(self.ops.pairs):
            full[j, k] = upper[idx]
            full[k, j] = -upper[idx]
        return full

    def cfl_cap(self, stage: _Stage) -> float:
        return self.sigma * self.grid.min_spacing**2 / stage.kappa

    def diagnostics(self, state: FlowState, stage: _Stage) -> DiagnosticsRecord:
        g = self.ops.zbar_gradient_batched_from_hat(stage.hat)
        max_beta = float(np.sum(np.abs(g) ** 2, axis=0).max())
        return DiagnosticsRecord(
            step=state.step_count,
            t=state.t,
            dt=state.dt,
            sup_abs_ut=float(np.max(np.abs(stage.rhs))),
            osc_u=float(state.u.values.max() - state.u.values.min()),
            max_beta=max_beta,
            max_eta=float(np.max(np.abs(stage.eta))),
            min_eig_omega_tilde=stage.min_eig,
            osc_ut=float(stage.rhs.max() - stage.rhs.min()),
            spectral_tail=self.ops.spectral_tail(stage.hat),
        )

    def step(self, state: FlowState, stage: Optional[_Stage] = None):
        """One Heun step with rejection and halving; returns the new pair.

        ``stage`` is the evaluation at ``state.u`` (recomputed if absent).
        Raises StiffnessError after MAX_HALVINGS rejections.
        """
        if stage is None:
            stage = self.evaluate(state.u.values)
            if not stage.ok:
                raise PositivityError(
                    "flow state violates strict positivity",
                    min_eigenvalue=stage.min_eig,
                )
        u = state.u.values
        dt = min(state.dt, self.cfl_cap(stage))
        for _ in range(MAX_HALVINGS + 1):
            predictor = u + dt * stage.rhs
            stage_pred = self.evaluate(predictor)
            if stage_pred.ok:
                corrected = u + 0.5 * dt * (stage.rhs + stage_pred.rhs)
                stage_new = self.evaluate(corrected)
                if stage_new.ok:
                    new_state = FlowState(
                        u=ScalarField(self.grid, corrected),
                        t=state.t + dt,
                        dt=dt,
                        step_count=state.step_count + 1,
                    )
                    return new_state, stage_new
            dt *= 0.5
        raise StiffnessError(
            f"step rejected after {MAX_HALVINGS} halvings "
            f"(t = {state.t:.6g}, dt reached {dt:.3e})"
        )


def cfl_dt(u: ScalarField, omega_h: TwoFormField, sigma: float = DEFAULT_SIGMA) -> float:
    """Parabolic step bound sigma * h_min^2 / kappa at the given state.

    kappa is the largest grid value of the sum of reciprocal block
    eigenvalues of the evolving form.
    """
    engine = FlowEngine(omega_h, ScalarField.zeros(u.grid), sigma=sigma, margin=0.0)
    stage = engine.evaluate(u.values)
    if not stage.ok:
        raise PositivityError(
            "evolving form is not strictly positive", min_eigenvalue=stage.min_eig
        )
    return engine.cfl_cap(stage)


def step(
    state: FlowState,
    omega_h: TwoFormField,
    f: ScalarField,
    sigma: float = DEFAULT_SIGMA,
    margin: float = DEFAULT_MARGIN,
) -> FlowState:
    """Single public Heun step; see FlowEngine.step for the guard policy."""
    engine = FlowEngine(omega_h, f, sigma=sigma, margin=margin)
    new_state, _ = engine.step(state)
    return new_state


def run_to_steady(
    u0: ScalarField,
    omega_h: TwoFormField,
    f: ScalarField,
    tol_steady: float = 1e-8,
    t_max: float = 1000.0,
    sigma: float = DEFAULT_SIGMA,
    margin: float = DEFAULT_MARGIN,
    on_step: Optional[Callable[[FlowState, DiagnosticsRecord], None]] = None,
) -> SteadyResult:
    """Integrate until the right-hand side oscillation drops below tolerance.

    The initial state must satisfy the strict-positivity condition; a
    violation raises PositivityError before any stepping.  If t_max is
    reached first, the partial result is returned with converged=False.
    Diagnostics are recorded every step and forwarded to ``on_step``.
    """
    engine = FlowEngine(omega_h, f, sigma=sigma, margin=margin)
    stage = engine.evaluate(u0.values)
    if not stage.ok:
        raise PositivityError(
            "initial data violates the strict-positivity condition "
            f"(min eigenvalue {stage.min_eig:.6e})",
            min_eigenvalue=stage.min_eig,
        )
    state = FlowState(u=u0, t=0.0, dt=engine.cfl_cap(stage), step_count=0)
    history = []

    def record(st, sg):
        rec = engine.diagnostics(st, sg)
        history.append(rec)
        if on_step is not None:
            on_step(st, rec)
        return rec

    rec = record(state, stage)
    consecutive = 0
    while rec.osc_ut >= tol_steady and state.t < t_max:
        attempted_dt = min(state.dt, engine.cfl_cap(stage))
        try:
            new_state, new_stage = engine.step(state, stage)
        except StiffnessError as exc:
            exc.diagnostics = history[-1]
            raise
        consecutive = consecutive + 1 if new_state.dt >= attempted_dt else 0
        if consecutive >= GROW_AFTER_ACCEPTS:
            new_state.dt = min(new_state.dt * GROW_FACTOR, engine.cfl_cap(new_stage))
            consecutive = 0
        else:
            new_state.dt = min(new_state.dt, engine.cfl_cap(new_stage))
        state, stage = new_state, new_stage
        rec = record(state, stage)

    final_rhs = stage.rhs
    return SteadyResult(
        u_normalized=normalize(state.u),
        b_tilde=float(final_rhs.mean()),
        residual=float(final_rhs.max() - final_rhs.min()),
        converged=bool(rec.osc_ut < tol_steady),
        history=history,
        t_final=state.t,
        steps=state.step_count,
    )


def monitor_maximum_principle(
    history,
    step_slack: float = 1e-9,
    total_slack: float = 1e-7,
) -> bool:
    """Check the discrete maximum principle for sup |u_t| along a run.

    True iff the initial value is never exceeded beyond ``total_slack``
    and every step decreases sup |u_t| up to ``step_slack``.
    """
    if len(history) < 2:
        raise ValueError("need at least two diagnostics records")
    sup0 = history[0].sup_abs_ut
    prev = sup0
    for rec in history[1:]:
        if rec.sup_abs_ut > sup0 + total_slack:
            return False
        if rec.sup_abs_ut > prev + step_slack:
            return False
        prev = rec.sup_abs_ut
    return True
