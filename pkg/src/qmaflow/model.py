"""Flat hyperkähler torus model: J tables, the standard form, positivity.

Conventions (pinned by the calibration tests, see tests/test_model.py):

* 2n holomorphic coordinates z^0..z^{2n-1}; real coordinates x^0..x^{4n-1}
  with z^j = x^j + i x^{2n+j}, every x-coordinate of period 2 pi.
* The right quaternionic structure acts on coordinate 1-forms as

      J dz^{2i}   = -dzbar^{2i+1},      J dz^{2i+1} = +dzbar^{2i},

  extended by realness, J(conj xi) = conj(J xi).  The induced action on
  coordinate vectors is J dbar_{2i} = d_{2i+1}, J dbar_{2i+1} = -d_{2i}.
* The standard form has entries Omega_{2i,2i+1} = 1; it is J-real
  (J Omega = conj Omega) and its positivity matrix is the identity.

With these tables the Hermitian positivity matrix of a (2,0)-form alpha is
M[j,k] = alpha(d_j, J dbar_k), the finite-dimensional stand-in for the
quantifier over (1,0)-vectors in the positivity definition; its determinant
equals Pf(alpha)^2 exactly, and for J-real alpha its eigenvalues come in
equal pairs (one pair per quaternionic block).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import PositivityError, SpecValidationError
from .exterior import pfaffian

_SUPPORTED_N = (2, 3, 4)


@dataclass(frozen=True)
class JTables:
    """Index tables for the constant J action in the standard frame.

    ``sigma`` pairs each index with its quaternionic partner
    (2i <-> 2i+1).  ``form_sign[j]`` is the sign in J dz^j = s_j
    dzbar^{sigma_j}; ``vec_sign[k]`` the sign in J dbar_k = t_k
    d_{sigma_k}; ``dj_sign[m]`` the sign in (d_J u)_m = dj_m
    u_{conj sigma_m}.
    """

    n: int
    sigma: np.ndarray
    form_sign: np.ndarray
    vec_sign: np.ndarray
    dj_sign: np.ndarray


def j_tables(n: int) -> JTables:
    m = 2 * n
    sigma = np.arange(m)
    sigma[0::2] += 1
    sigma[1::2] -= 1
    form_sign = np.where(np.arange(m) % 2 == 0, -1, 1)
    vec_sign = -form_sign
    dj_sign = -form_sign[sigma]
    return JTables(n, sigma, form_sign, vec_sign, dj_sign)


def standard_form(n: int) -> np.ndarray:
    """Antisymmetric matrix of the standard form, blocks (2i, 2i+1) -> 1."""
    omega = np.zeros((2 * n, 2 * n), dtype=complex)
    for i in range(n):
        omega[2 * i, 2 * i + 1] = 1.0
        omega[2 * i + 1, 2 * i] = -1.0
    return omega


@dataclass(frozen=True)
class TorusModel:
    """The flat torus of quaternionic dimension n with its constant J."""

    n: int
    tables: JTables = field(repr=False)
    omega: np.ndarray = field(repr=False)
    period: float = 2.0 * np.pi

    @property
    def complex_dim(self) -> int:
        return 2 * self.n

    @property
    def real_dim(self) -> int:
        return 4 * self.n


def build_model(n: int) -> TorusModel:
    """Construct the flat model; n must lie in {2, 3, 4}.

    n = 1 is rejected explicitly: the quaternionic-Hessian recombination
    divides by n - 1 and the equation degenerates.
    """
    if n == 1:
        raise SpecValidationError(
            "n = 1 is not supported: the 1/(n-1) recombination factor is undefined"
        )
    if n not in _SUPPORTED_N:
        raise SpecValidationError(f"n must be one of {_SUPPORTED_N}, got {n}")
    return TorusModel(n=n, tables=j_tables(n), omega=standard_form(n))


@dataclass
class JRealTwoForm:
    """A (2,0)-form at a point: antisymmetric (2n, 2n) complex matrix."""

    n: int
    entries: np.ndarray

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=complex)
        m = 2 * self.n
        if self.entries.shape[:2] != (m, m):
            raise ValueError(f"expected a ({m}, {m}) matrix")
        # antisymmetry is enforced, not assumed
        self.entries = 0.5 * (self.entries - np.swapaxes(self.entries, 0, 1))

    def pfaffian(self):
        return pfaffian(self.entries)

    def positivity_matrix(self) -> np.ndarray:
        return positivity_matrix(self.entries, self.n)

    def j_reality_defect(self) -> float:
        return j_reality_defect(self.entries, self.n)

    def is_strictly_positive(self, margin: float = 1e-10) -> bool:
        return is_strictly_positive(self.entries, self.n, margin)


# -- J actions on matrix representations --------------------------------


def j_conjugate_two_form(entries, n: int):
    """Matrix of J alpha (a (0,2)-form) for a (2,0)-form alpha.

    (J alpha)_{ab} = s_{sigma(a)} s_{sigma(b)} alpha_{sigma(a) sigma(b)};
    J-reality means this equals conj(alpha) entrywise.
    """
    t = j_tables(n)
    entries = np.asarray(entries)
    ss = t.form_sign[t.sigma]
    reordered = np.take(np.take(entries, t.sigma, axis=0), t.sigma, axis=1)
    shape = (2 * n, 2 * n) + (1,) * (entries.ndim - 2)
    return reordered * np.outer(ss, ss).reshape(shape)


def j_reality_defect(entries, n: int) -> float:
    """Max-norm of J alpha - conj(alpha) over entries (and grid axes)."""
    entries = np.asarray(entries)
    return float(
        np.max(np.abs(j_conjugate_two_form(entries, n) - np.conj(entries)))
    )


def j_conjugate_one_one(matrix, n: int):
    """Coefficient matrix of i J theta for a real (1,1)-form i theta.

    For theta with coefficient matrix a (so theta = i a_{jk} dz^j ^
    dzbar^k), the J image has (J a)_{ab} = -s_a s_b a_{sigma(b) sigma(a)}.
    """
    t = j_tables(n)
    matrix = np.asarray(matrix)
    reordered = np.take(np.take(matrix, t.sigma, axis=0), t.sigma, axis=1)
    reordered = np.swapaxes(reordered, 0, 1)
    shape = (2 * n, 2 * n) + (1,) * (matrix.ndim - 2)
    return -np.outer(t.form_sign, t.form_sign).reshape(shape) * reordered


# -- positivity ----------------------------------------------------------


def positivity_matrix(entries, n: int):
    """Hermitian matrix M[j,k] = alpha(d_j, J dbar_k), entry axes first.

    Hermitian exactly when alpha is J-real; M(standard form) = identity.
    """
    t = j_tables(n)
    entries = np.asarray(entries)
    m = np.take(entries, t.sigma, axis=1)
    shape = (1, 2 * n) + (1,) * (entries.ndim - 2)
    return m * t.vec_sign.reshape(shape)


def positivity_eigenvalues(entries, n: int):
    """All 2n eigenvalues of the positivity matrix, grid axes leading."""
    m = positivity_matrix(entries, n)
    m = np.moveaxis(m, (0, 1), (-2, -1))
    return np.linalg.eigvalsh(m)


def min_positivity_eigenvalue(entries, n: int):
    return positivity_eigenvalues(entries, n)[..., 0]


def is_strictly_positive(entries, n: int, margin: float = 1e-10) -> bool:
    """True iff every eigenvalue of the positivity matrix exceeds margin."""
    return bool(np.all(min_positivity_eigenvalue(entries, n) > margin))


def block_eigenvalues(entries, n: int):
    """The n paired eigenvalues of the positivity matrix, grid axes leading.

    For J-real forms the 2n eigenvalues of M come in equal pairs; this
    returns one representative per pair, ascending.  For n = 2 the pair
    values are the roots of lambda^2 - S_1 lambda + Pf, which gives a
    closed form from quantities the flow already computes; for larger n
    the batched Hermitian eigensolver is used and adjacent eigenvalues
    are averaged.
    """
    entries = np.asarray(entries)
    if n == 2:
        s1 = (entries[0, 1] + entries[2, 3]).real
        pf = pfaffian(entries).real
        disc = np.sqrt(np.maximum(s1 * s1 - 4.0 * pf, 0.0))
        lo = 0.5 * (s1 - disc)
        hi = 0.5 * (s1 + disc)
        return np.stack([lo, hi], axis=-1)
    eig = positivity_eigenvalues(entries, n)
    return 0.5 * (eig[..., 0::2] + eig[..., 1::2])


def require_strictly_positive(entries, n: int, margin: float, what: str):
    """Raise PositivityError naming the worst grid point if the test fails."""
    min_eig = min_positivity_eigenvalue(entries, n)
    worst = float(np.min(min_eig))
    if worst <= margin:
        if np.ndim(min_eig) == 0:
            point = None
        else:
            point = tuple(
                int(i) for i in np.unravel_index(np.argmin(min_eig), min_eig.shape)
            )
        raise PositivityError(
            f"{what} is not strictly positive: min eigenvalue {worst:.6e} "
            f"<= margin {margin:.1e}" + (f" at grid point {point}" if point else ""),
            point=point,
            min_eigenvalue=worst,
        )


# -- basis-level J application (used by calibration tests and oracles) ---


def apply_j_one_form(hol, antihol, n: int):
    """J applied to a 1-form with components (hol on dz, antihol on dzbar)."""
    t = j_tables(n)
    hol = np.asarray(hol, dtype=complex)
    antihol = np.asarray(antihol, dtype=complex)
    sh = (2 * n,) + (1,) * (hol.ndim - 1)
    sig = t.form_sign.reshape(sh)
    new_antihol = (sig * hol)[t.sigma]
    new_hol = (sig * antihol)[t.sigma]
    return new_hol, new_antihol


def apply_j_vector(hol, antihol, n: int):
    """J applied to a vector with components (hol on d, antihol on dbar)."""
    t = j_tables(n)
    hol = np.asarray(hol, dtype=complex)
    antihol = np.asarray(antihol, dtype=complex)
    sh = (2 * n,) + (1,) * (hol.ndim - 1)
    sig = t.vec_sign.reshape(sh)
    new_hol = (sig * antihol)[t.sigma]
    new_antihol = (sig * hol)[t.sigma]
    return new_hol, new_antihol


def pair_form_vector(form_hol, form_antihol, vec_hol, vec_antihol):
    """Natural pairing of a 1-form with a vector in the coordinate frame."""
    return np.sum(form_hol * vec_hol, axis=0) + np.sum(
        form_antihol * vec_antihol, axis=0
    )
