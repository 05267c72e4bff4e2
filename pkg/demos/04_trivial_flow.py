"""Spatially constant dynamics: the flow integrates u_t = -f exactly.

With the flat background and a constant source c, the potential stays
spatially constant, u(t) = -c t, and the steady constant is -c.
"""

import numpy as np

from qmaflow import (
    FlowState,
    ScalarField,
    TorusGrid,
    cfl_dt,
    constant_two_form_field,
    run_to_steady,
    standard_form,
    step,
)

grid = TorusGrid(n=2, active_dims=(0, 4), sizes=(16, 16))
omega_h = constant_two_form_field(grid, standard_form(2))
f = ScalarField.constant(grid, 0.3)

state = FlowState(u=ScalarField.zeros(grid), t=0.0, dt=cfl_dt(ScalarField.zeros(grid), omega_h), step_count=0)
for _ in range(100):
    state = step(state, omega_h, f)
print(f"after {state.step_count} steps, t = {state.t:.4f}")
print("max |u + 0.3 t| =", np.max(np.abs(state.u.values + 0.3 * state.t)))

result = run_to_steady(ScalarField.zeros(grid), omega_h, f)
print("steady constant:", result.b_tilde, " (expected -0.3)")
print("normalized limit is identically zero:", result.u_normalized.max_abs() == 0.0)
