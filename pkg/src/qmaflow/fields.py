"""Periodic grids, scalar fields, trig-polynomial inputs, spectral calculus.

Fields live on a uniform periodic grid over a chosen subset of the 4n real
coordinates (period 2 pi each).  Inactive coordinates contribute zero to
every derivative, so a reduced grid integrates the same equations exactly
whenever the data only depend on the active coordinates; all structure
tensors of the flat model are constant, so nothing else changes.

Derivatives are Fourier multipliers.  No dealiasing is applied (the flow's
right-hand side involves a logarithm, which no truncation rule handles
exactly); instead the energy fraction in the top third of the spectrum is
reported as a per-step diagnostic.  The Nyquist mode multiplier is zeroed,
which keeps real fields real under differentiation; inputs are required to
be band-limited below Nyquist anyway.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from scipy import fft as sp_fft

from .errors import SpecValidationError
from .model import (
    JRealTwoForm,
    TorusModel,
    j_reality_defect,
    j_tables,
    require_strictly_positive,
)

PERIOD = 2.0 * np.pi


def fft_workers() -> int:
    """Worker count for FFT calls; QMAFLOW_WORKERS overrides cpu count."""
    env = os.environ.get("QMAFLOW_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise SpecValidationError(f"QMAFLOW_WORKERS must be an integer: {env!r}") from exc
    return os.cpu_count() or 1


@dataclass(frozen=True)
class TorusGrid:
    """Uniform periodic grid on selected real coordinates of the 4n-torus."""

    n: int
    active_dims: tuple
    sizes: tuple

    def __post_init__(self):
        object.__setattr__(self, "active_dims", tuple(int(d) for d in self.active_dims))
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))
        if not self.active_dims:
            raise SpecValidationError("at least one active dimension is required")
        if len(self.active_dims) != len(self.sizes):
            raise SpecValidationError("active_dims and sizes must have equal length")
        if list(self.active_dims) != sorted(set(self.active_dims)):
            raise SpecValidationError("active_dims must be strictly increasing")
        if self.active_dims[-1] >= 4 * self.n or self.active_dims[0] < 0:
            raise SpecValidationError(
                f"active dims must lie in [0, {4 * self.n - 1}]"
            )
        if any(s < 2 for s in self.sizes):
            raise SpecValidationError("grid sizes must be at least 2")

    @property
    def shape(self) -> tuple:
        return self.sizes

    @property
    def num_points(self) -> int:
        return int(np.prod(self.sizes))

    @property
    def spacings(self) -> tuple:
        return tuple(PERIOD / s for s in self.sizes)

    @property
    def min_spacing(self) -> float:
        return min(self.spacings)

    def axis_of(self, real_dim: int):
        """Array axis carrying a real coordinate, or None if inactive."""
        try:
            return self.active_dims.index(real_dim)
        except ValueError:
            return None

    def coordinates(self):
        """Broadcastable coordinate arrays, one per active dimension."""
        out = []
        d = len(self.sizes)
        for p, size in enumerate(self.sizes):
            x = np.arange(size) * (PERIOD / size)
            shape = [1] * d
            shape[p] = size
            out.append(x.reshape(shape))
        return out


@dataclass
class ScalarField:
    """Real-valued samples over a TorusGrid."""

    grid: TorusGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise SpecValidationError(
                f"field shape {self.values.shape} does not match grid {self.grid.shape}"
            )

    @classmethod
    def zeros(cls, grid: TorusGrid) -> "ScalarField":
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def constant(cls, grid: TorusGrid, value: float) -> "ScalarField":
        return cls(grid, np.full(grid.shape, float(value)))

    def mean(self) -> float:
        return float(self.values.mean())

    def osc(self) -> float:
        return float(self.values.max() - self.values.min())

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    def __add__(self, other):
        other_values = other.values if isinstance(other, ScalarField) else other
        return ScalarField(self.grid, self.values + other_values)

    __radd__ = __add__

    def __sub__(self, other):
        other_values = other.values if isinstance(other, ScalarField) else other
        return ScalarField(self.grid, self.values - other_values)

    def __mul__(self, factor):
        return ScalarField(self.grid, self.values * factor)

    __rmul__ = __mul__

    def __neg__(self):
        return ScalarField(self.grid, -self.values)


# -- trig-polynomial input language --------------------------------------


@dataclass(frozen=True)
class TrigTerm:
    """One term amplitude * cos(<k, x> + phase) over the active coordinates."""

    k: tuple
    amplitude: float
    phase: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "k", tuple(int(c) for c in self.k))


@dataclass(frozen=True)
class TrigPolySpec:
    """Band-limited real input: a finite list of cosine terms."""

    terms: tuple

    @classmethod
    def from_terms(cls, terms) -> "TrigPolySpec":
        return cls(tuple(terms))

    @classmethod
    def single(cls, k, amplitude, phase=0.0) -> "TrigPolySpec":
        return cls((TrigTerm(tuple(k), amplitude, phase),))

    def scaled(self, factor: float) -> "TrigPolySpec":
        return TrigPolySpec(
            tuple(TrigTerm(t.k, t.amplitude * factor, t.phase) for t in self.terms)
        )

    def validate_on(self, grid: TorusGrid):
        for term in self.terms:
            if len(term.k) != len(grid.active_dims):
                raise SpecValidationError(
                    f"wavevector {term.k} has {len(term.k)} components, "
                    f"grid has {len(grid.active_dims)} active dims"
                )
            for kc, size in zip(term.k, grid.sizes):
                if 2 * abs(kc) >= size:
                    raise SpecValidationError(
                        f"wavevector component {kc} is not resolvable on a "
                        f"size-{size} axis (need |k| < size/2)"
                    )

    def to_json(self):
        return [
            {"k": list(t.k), "amplitude": t.amplitude, "phase": t.phase}
            for t in self.terms
        ]

    @classmethod
    def from_json(cls, data) -> "TrigPolySpec":
        if not isinstance(data, list):
            raise SpecValidationError("trig spec must be a list of terms")
        terms = []
        for entry in data:
            try:
                terms.append(
                    TrigTerm(
                        tuple(entry["k"]),
                        float(entry["amplitude"]),
                        float(entry.get("phase", 0.0)),
                    )
                )
            except (KeyError, TypeError) as exc:
                raise SpecValidationError(f"bad trig term {entry!r}") from exc
        return cls(tuple(terms))


def sample(spec: TrigPolySpec, grid: TorusGrid) -> ScalarField:
    """Evaluate a trig spec on the grid; exact for band-limited input."""
    spec.validate_on(grid)
    coords = grid.coordinates()
    values = np.zeros(grid.shape)
    for term in spec.terms:
        phase_field = term.phase
        for kc, x in zip(term.k, coords):
            if kc:
                phase_field = phase_field + kc * x
        values = values + term.amplitude * np.cos(
            np.broadcast_to(phase_field, grid.shape)
        )
    return ScalarField(grid, values)


# -- spectral calculus ----------------------------------------------------


class SpectralOps:
    """Fourier-multiplier derivatives for one grid and one model dimension.

    Precomputes the holomorphic/antiholomorphic first-derivative multipliers
    and the fused multipliers for the quaternionic Hessian and its trace.
    All methods operating "from_hat" expect the full FFT of a field and
    return position-space arrays.
    """

    def __init__(self, grid: TorusGrid):
        self.grid = grid
        self.n = grid.n
        m = 2 * self.n
        self._ik = self._build_ik()
        # d/dz^a -> (ik_a + k_{2n+a})/2,  d/dzbar^a -> (ik_a - k_{2n+a})/2
        self.zmult = [
            0.5 * (self._ik_for(a) + (-1j) * self._ik_for(2 * self.n + a))
            for a in range(m)
        ]
        self.zbmult = [
            0.5 * (self._ik_for(a) - (-1j) * self._ik_for(2 * self.n + a))
            for a in range(m)
        ]
        t = j_tables(self.n)
        self._sigma = t.sigma
        self._dj_sign = t.dj_sign
        # (ddj u)_{jk} = dj_k u_{j sigma(k)bar} - dj_j u_{k sigma(j)bar}
        self.pairs = [(j, k) for j in range(m) for k in range(j + 1, m)]
        self.ddj_mult = {}
        for j, k in self.pairs:
            self.ddj_mult[(j, k)] = t.dj_sign[k] * self.zmult[j] * self.zbmult[
                t.sigma[k]
            ] - t.dj_sign[j] * self.zmult[k] * self.zbmult[t.sigma[j]]
        self.s1_mult = sum(self.zmult[a] * self.zbmult[a] for a in range(m))
        self._tail_mask = self._build_tail_mask()
        # stacked multipliers let the hot loop run single batched transforms
        full = lambda a: np.broadcast_to(a, self.grid.shape)
        self._ddj_s1_stack = np.stack(
            [full(self.ddj_mult[p]) for p in self.pairs] + [full(self.s1_mult)]
        )
        self._zbar_stack = np.stack([full(mult) for mult in self.zbmult])

    def _build_ik(self):
        out = []
        d = len(self.grid.sizes)
        for p, size in enumerate(self.grid.sizes):
            k = sp_fft.fftfreq(size) * size
            if size % 2 == 0:
                k[size // 2] = 0.0  # Nyquist zeroed; inputs are band-limited
            shape = [1] * d
            shape[p] = size
            out.append(1j * k.reshape(shape))
        return out

    def _ik_for(self, real_dim: int):
        axis = self.grid.axis_of(real_dim)
        if axis is None:
            return np.zeros((1,) * len(self.grid.sizes))
        return self._ik[axis]

    def _build_tail_mask(self):
        d = len(self.grid.sizes)
        mask = np.zeros(self.grid.shape, dtype=bool)
        for p, size in enumerate(self.grid.sizes):
            k = np.abs(sp_fft.fftfreq(size) * size)
            shape = [1] * d
            shape[p] = size
            mask |= np.broadcast_to(k.reshape(shape) >= size / 3.0, self.grid.shape)
        return mask

    # -- transforms ---------------------------------------------------

    def fft(self, values):
        return sp_fft.fftn(np.asarray(values), workers=fft_workers())

    def ifft(self, hat):
        return sp_fft.ifftn(hat, workers=fft_workers())

    def _ifft_batch(self, hats):
        axes = tuple(range(1, hats.ndim))
        return sp_fft.ifftn(hats, axes=axes, workers=fft_workers())

    # -- first derivatives ---------------------------------------------

    def partial_x(self, values, real_dim: int):
        return self.ifft(self._ik_for(real_dim) * self.fft(values))

    def partial_z(self, values, a: int):
        return self.ifft(self.zmult[a] * self.fft(values))

    def partial_zbar(self, values, a: int):
        return self.ifft(self.zbmult[a] * self.fft(values))

    def zbar_gradient_from_hat(self, hat):
        """u_{abar} for a = 0..2n-1, stacked on a leading axis."""
        return np.stack([self.ifft(self.zbmult[a] * hat) for a in range(2 * self.n)])

    def z_gradient_from_hat(self, hat):
        return np.stack([self.ifft(self.zmult[a] * hat) for a in range(2 * self.n)])

    # -- second derivatives ---------------------------------------------

    def mixed_hessian_from_hat(self, hat, real_input: bool = True):
        """H[a, b] = d_{z^a} d_{zbar^b} u with entry axes leading.

        For real u only the upper triangle is transformed; the rest is
        filled by the Hermitian symmetry H[b, a] = conj(H[a, b]).
        """
        m = 2 * self.n
        H = np.empty((m, m) + self.grid.shape, dtype=complex)
        for a in range(m):
            start = a if real_input else 0
            for b in range(start, m):
                H[a, b] = self.ifft(self.zmult[a] * self.zbmult[b] * hat)
        if real_input:
            for a in range(m):
                for b in range(a):
                    H[a, b] = np.conj(H[b, a])
        return H

    def ddj_from_hat(self, hat):
        """Antisymmetric matrix field of the quaternionic Hessian of u."""
        m = 2 * self.n
        out = np.zeros((m, m) + self.grid.shape, dtype=complex)
        for (j, k), mult in self.ddj_mult.items():
            entry = self.ifft(mult * hat)
            out[j, k] = entry
            out[k, j] = -entry
        return out

    def s1_from_hat(self, hat):
        """Trace of the mixed Hessian (half the model Laplacian), real part."""
        return self.ifft(self.s1_mult * hat).real

    def ddj_upper_s1_from_hat(self, hat):
        """Upper-triangle quaternionic Hessian entries plus its S_1 trace.

        Returns (upper, s1) where ``upper`` stacks the (j, k) entries in
        ``self.pairs`` order; a single batched transform serves the whole
        bundle, which is what the time stepper runs on.
        """
        stack = self._ifft_batch(self._ddj_s1_stack * hat[None])
        return stack[:-1], stack[-1].real

    def zbar_gradient_batched_from_hat(self, hat):
        return self._ifft_batch(self._zbar_stack * hat[None])

    # -- diagnostics ----------------------------------------------------

    def spectral_tail(self, hat) -> float:
        """Energy fraction carried by the top third of the spectrum.

        The mean mode is excluded from the reference energy so a large
        additive constant cannot mask tail growth.  Returns 0 for fields
        with no non-mean content.
        """
        power = np.abs(hat) ** 2
        total = float(power.sum() - power[(0,) * power.ndim])
        if total <= 0.0:
            return 0.0
        return float(power[self._tail_mask].sum() / total)


_SPECTRAL_CACHE: dict = {}


def spectral_ops(grid: TorusGrid) -> SpectralOps:
    ops = _SPECTRAL_CACHE.get(grid)
    if ops is None:
        ops = SpectralOps(grid)
        _SPECTRAL_CACHE[grid] = ops
    return ops


# -- two-form fields -------------------------------------------------------


@dataclass
class TwoFormField:
    """A J-real (2,0)-form per grid point, entry axes leading."""

    grid: TorusGrid
    entries: np.ndarray

    def __post_init__(self):
        m = 2 * self.grid.n
        self.entries = np.asarray(self.entries, dtype=complex)
        if self.entries.shape != (m, m) + self.grid.shape:
            raise SpecValidationError(
                f"two-form field shape {self.entries.shape} does not match "
                f"({m}, {m}) + {self.grid.shape}"
            )

    @property
    def n(self) -> int:
        return self.grid.n

    def at(self, point) -> JRealTwoForm:
        return JRealTwoForm(self.n, self.entries[(Ellipsis,) + tuple(point)])

    def j_reality_defect(self) -> float:
        return j_reality_defect(self.entries, self.n)


def constant_two_form_field(grid: TorusGrid, matrix) -> TwoFormField:
    matrix = np.asarray(matrix, dtype=complex)
    entries = np.broadcast_to(
        matrix.reshape(matrix.shape + (1,) * len(grid.shape)),
        matrix.shape + grid.shape,
    ).copy()
    return TwoFormField(grid, entries)


def build_omega_h(
    model: TorusModel,
    grid: TorusGrid,
    c: float,
    rho: TrigPolySpec | None = None,
    margin: float = 1e-10,
) -> TwoFormField:
    """Background form c * Omega + ddj(rho), verified strictly positive.

    J-reality is automatic: the standard form is J-real and so is the
    quaternionic Hessian of any real function.  Positivity is checked at
    every grid point before returning; a violation reports the offending
    point and the minimum eigenvalue there.
    """
    if grid.n != model.n:
        raise SpecValidationError("grid and model dimensions differ")
    if c <= 0:
        raise SpecValidationError(f"background scale c must be positive, got {c}")
    entries = np.zeros((2 * model.n, 2 * model.n) + grid.shape, dtype=complex)
    entries += model.omega.reshape(model.omega.shape + (1,) * len(grid.shape)) * c
    if rho is not None and rho.terms:
        ops = spectral_ops(grid)
        rho_field = sample(rho, grid)
        entries += ops.ddj_from_hat(ops.fft(rho_field.values))
    require_strictly_positive(entries, model.n, margin, "the background form")
    return TwoFormField(grid, entries)
