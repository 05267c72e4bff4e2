"""The randomized identity suite, printed as a table.

Every identity the solver relies on, evaluated on seeded random inputs
through two independent code paths each.
"""

from qmaflow import run_identity_suite

for n in (2, 3):
    reports = run_identity_suite(n, trials=50, seed=42)
    print(f"\nn = {n} (50 trials each):")
    width = max(len(r.name) for r in reports)
    for r in reports:
        status = "pass" if r.passed else "FAIL"
        print(f"  {r.name:<{width}}  max rel err {r.max_rel_err:.3e}  tol {r.tol:.0e}  {status}")
