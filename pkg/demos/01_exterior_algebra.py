"""Pointwise exterior algebra: wedge products, Pfaffians, S_m.

Walks through the algebra the solver is built on, at a single point of a
quaternionic-dimension-2 model (four holomorphic directions).
"""

import numpy as np

from qmaflow import ExteriorElement, pfaffian, s_m, standard_form, top_quotient

n = 2
omega = standard_form(n)
print("standard form (antisymmetric matrix):")
print(omega.real)

# Omega^n = n! Pf(Omega) dz^0 ^ ... ^ dz^{2n-1}, and Pf(Omega) = 1
top = ExteriorElement.from_two_form(omega).wedge_power(n).top_coefficient()
print(f"\ntop coefficient of Omega^{n}: {top.real:g}  (= n! Pf, Pf = {pfaffian(omega).real:g})")

# a block-diagonal form has S_m equal to the elementary symmetric polynomials
chi = np.zeros((4, 4), dtype=complex)
chi[0, 1], chi[1, 0] = 2.0, -2.0
chi[2, 3], chi[3, 2] = 3.0, -3.0
print("\nblock values (2, 3):")
for m in range(n + 1):
    print(f"  S_{m} = {s_m(chi, omega, n, m).real:g}")

# Pfaffian squared is the determinant, top quotients divide Pfaffians
rng = np.random.default_rng(1)
a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
a = 0.5 * (a - a.T)
print(f"\nrandom antisymmetric: Pf^2 - det = {abs(pfaffian(a)**2 - np.linalg.det(a)):.2e}")
print(f"top quotient paths agree to {abs(top_quotient(a, omega, n) - top_quotient(a, omega, n, method='exterior')):.2e}")

# scaling: (lambda Omega)^n / Omega^n = lambda^n
print(f"(2 Omega)^2 / Omega^2 = {top_quotient(2.0 * omega, omega, n).real:g}")
