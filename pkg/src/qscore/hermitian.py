"""Dense Hermitian matrix algebra.

Eigendecomposition by cyclic complex Jacobi sweeps, functional calculus,
first divided differences and the Daleckii-Krein formulas for the first
and second variation of ``Tr f(h)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional, Tuple

import numpy as np

from .exceptions import DomainError, ValidationError

HERMITIAN_RTOL = 1e-10
JACOBI_TOL = 1e-14
JACOBI_MAX_SWEEPS = 100
PHASE_TOL = 1e-12
DEGENERACY_DELTA = 1e-8
EPS_FLOOR = 1e-10
ZERO_EIGENVALUE = 1e-14
DOMAIN_TOL = 1e-10


def _as_square(m, name="matrix") -> np.ndarray:
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise ValidationError(f"{name} must be a non-empty square 2-D array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValidationError(f"{name} contains non-finite entries")
    return a


def hermitian_asymmetry(m) -> float:
    a = np.asarray(m, dtype=complex)
    return float(np.max(np.abs(a - a.conj().T)))


def jacobi_eigh(a: np.ndarray, tol: float = JACOBI_TOL,
                max_sweeps: int = JACOBI_MAX_SWEEPS) -> Tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi eigensolver for a complex Hermitian matrix.

    Each rotation first removes the phase of the pivot ``a[p, q]`` and then
    applies the real symmetric Jacobi rotation, so the pair ``(p, q)`` is
    annihilated exactly. Sweeps run in row-major pivot order until the
    off-diagonal Frobenius mass drops below ``tol * ||a||_F``.

    Returns eigenvalues (unsorted, as they sit on the diagonal) and the
    accumulated unitary whose columns are the eigenvectors.
    """
    a = np.array(a, dtype=complex)
    d = a.shape[0]
    v = np.eye(d, dtype=complex)
    norm = float(np.linalg.norm(a))
    if d == 1 or norm == 0.0:
        return a.diagonal().real.copy(), v
    offmask = ~np.eye(d, dtype=bool)
    for _ in range(max_sweeps):
        off = math.sqrt(float(np.sum(np.abs(a[offmask]) ** 2)))
        if off <= tol * norm:
            break
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = a[p, q]
                mag = abs(apq)
                if mag == 0.0:
                    continue
                phase = apq / mag
                cphase = phase.conjugate()
                tau = (a[q, q].real - a[p, p].real) / (2.0 * mag)
                t = (1.0 if tau >= 0.0 else -1.0) / (abs(tau) + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                colp = a[:, p].copy()
                colq = a[:, q].copy()
                a[:, p] = c * colp - s * cphase * colq
                a[:, q] = s * colp + c * cphase * colq
                rowp = a[p, :].copy()
                rowq = a[q, :].copy()
                a[p, :] = c * rowp - s * phase * rowq
                a[q, :] = s * rowp + c * phase * rowq
                a[p, q] = 0.0
                a[q, p] = 0.0
                a[p, p] = a[p, p].real
                a[q, q] = a[q, q].real
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * cphase * vq
                v[:, q] = s * vp + c * cphase * vq
    else:
        off = math.sqrt(float(np.sum(np.abs(a[offmask]) ** 2)))
        if off > tol * norm:
            raise ArithmeticError(
                f"Jacobi sweeps did not converge in {max_sweeps} sweeps (off-diagonal mass {off:.3e})")
    return a.diagonal().real.copy(), v


def _fix_phases(vectors: np.ndarray) -> np.ndarray:
    # first component with modulus > PHASE_TOL becomes real positive
    u = vectors.copy()
    for k in range(u.shape[1]):
        col = u[:, k]
        idx = np.flatnonzero(np.abs(col) > PHASE_TOL)
        if idx.size:
            z = col[idx[0]]
            u[:, k] = col * (abs(z) / z)
    return u


def _sorted_eigen(values: np.ndarray, vectors: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    order = np.argsort(values, kind="stable")
    return values[order], _fix_phases(vectors[:, order])


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


class HermitianMatrix:
    """Immutable complex Hermitian matrix with an eagerly computed eigendecomposition.

    Parameters
    ----------
    data : array_like, shape (d, d)
        Matrix entries. Must be Hermitian to within
        ``1e-10 * (1 + max|entry|)``; the stored value is the exact
        Hermitian part ``(a + a^H) / 2``.
    """

    __slots__ = ("_data", "_eigenvalues", "_eigenvectors")

    def __init__(self, data, *, _eigen=None):
        if isinstance(data, HermitianMatrix):
            a = data.data
            _eigen = _eigen or (data.eigenvalues, data.eigenvectors)
        else:
            a = _as_square(data)
            asym = hermitian_asymmetry(a)
            bound = HERMITIAN_RTOL * (1.0 + float(np.max(np.abs(a))))
            if asym > bound:
                raise ValidationError(
                    f"matrix is not Hermitian: max |a_ij - conj(a_ji)| = {asym:.3e} exceeds {bound:.3e}")
            a = 0.5 * (a + a.conj().T)
        self._data = _freeze(np.array(a, dtype=complex))
        if _eigen is None:
            _eigen = _sorted_eigen(*jacobi_eigh(self._data))
        w, u = _eigen
        self._eigenvalues = _freeze(np.array(w, dtype=float))
        self._eigenvectors = _freeze(np.array(u, dtype=complex))

    @classmethod
    def from_eigen(cls, values, vectors) -> "HermitianMatrix":
        """Build ``U diag(values) U^H`` without re-diagonalizing."""
        w = np.asarray(values, dtype=float)
        u = np.asarray(vectors, dtype=complex)
        w, u = _sorted_eigen(w, u)
        a = (u * w) @ u.conj().T
        a = 0.5 * (a + a.conj().T)
        obj = cls.__new__(cls)
        obj._data = _freeze(a)
        obj._eigenvalues = _freeze(w)
        obj._eigenvectors = _freeze(u)
        return obj

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def dim(self) -> int:
        return self._data.shape[0]

    @property
    def eigenvalues(self) -> np.ndarray:
        return self._eigenvalues

    @property
    def eigenvectors(self) -> np.ndarray:
        return self._eigenvectors

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self._data.copy()
        return self._data.astype(dtype)

    def __repr__(self):
        return f"HermitianMatrix(dim={self.dim}, eigenvalues={np.array2string(self._eigenvalues, precision=6)})"

    def trace(self) -> float:
        return float(np.trace(self._data).real)

    def to_basis(self, other) -> np.ndarray:
        """Entries of ``other`` in this matrix's eigenbasis: ``U^H other U``."""
        u = self._eigenvectors
        return u.conj().T @ np.asarray(other, dtype=complex) @ u


def as_hermitian(m) -> HermitianMatrix:
    return m if isinstance(m, HermitianMatrix) else HermitianMatrix(m)


def eigendecompose(h) -> Tuple[np.ndarray, np.ndarray]:
    """Return ``(eigenvalues ascending, unitary eigenvectors)`` of a Hermitian matrix."""
    h = as_hermitian(h)
    return h.eigenvalues.copy(), h.eigenvectors.copy()


@dataclass(frozen=True)
class ScalarFunction:
    """A real function with its first two derivatives.

    ``singular_at_zero`` marks functions whose value or derivatives blow up
    at 0; for those, arguments are clamped to ``[eps_floor, hi]`` before
    evaluation, except that the value itself is taken exactly at 0 when it
    is finite there (so ``0 log 0 = 0``).
    """

    f: Callable[[np.ndarray], np.ndarray]
    fprime: Callable[[np.ndarray], np.ndarray]
    fsecond: Optional[Callable[[np.ndarray], np.ndarray]] = None
    domain: Tuple[float, float] = (0.0, 1.0)
    singular_at_zero: bool = False
    name: str = ""

    def derivative(self) -> "ScalarFunction":
        if self.fsecond is None:
            raise ValueError(f"{self.name or 'function'} has no second derivative")
        return ScalarFunction(self.fprime, self.fsecond, None, self.domain,
                              self.singular_at_zero, f"{self.name}'")

    def with_domain(self, domain: Tuple[float, float]) -> "ScalarFunction":
        return ScalarFunction(self.f, self.fprime, self.fsecond, tuple(domain),
                              self.singular_at_zero, self.name)

    def effective_arguments(self, lam, eps_floor: float = EPS_FLOOR) -> np.ndarray:
        """Check the spectrum against the domain and apply the clamping policy."""
        lam = np.asarray(lam, dtype=float)
        lo, hi = self.domain
        if np.any(lam < lo - DOMAIN_TOL) or np.any(lam > hi + DOMAIN_TOL):
            bad = lam[(lam < lo - DOMAIN_TOL) | (lam > hi + DOMAIN_TOL)]
            raise DomainError(
                f"eigenvalue {bad[0]:.6g} outside domain [{lo}, {hi}] of {self.name or 'function'}")
        lam = np.clip(lam, lo, hi)
        if not self.singular_at_zero:
            return lam
        exact_zero = (lam <= ZERO_EIGENVALUE) & self.finite_at_zero
        return np.where(exact_zero, 0.0, np.maximum(lam, eps_floor))

    def derivative_arguments(self, lam, eps_floor: float = EPS_FLOOR) -> np.ndarray:
        """Arguments for evaluating ``fprime``: always clamped for singular functions."""
        lam = self.effective_arguments(lam, eps_floor)
        return np.maximum(lam, eps_floor) if self.singular_at_zero else lam

    @cached_property
    def finite_at_zero(self) -> bool:
        with np.errstate(all="ignore"):
            return bool(np.isfinite(np.asarray(self.f(np.zeros(1)), dtype=float)).all())

    def __call__(self, lam, eps_floor: float = EPS_FLOOR) -> np.ndarray:
        x = self.effective_arguments(lam, eps_floor)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.asarray(self.f(x), dtype=float)


def _xlogx(t):
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(t > 0.0, t * np.log(np.where(t > 0.0, t, 1.0)), 0.0)


def _log_plus_one(t):
    with np.errstate(divide="ignore"):
        return np.log(np.asarray(t, dtype=float)) + 1.0


def _reciprocal(t):
    with np.errstate(divide="ignore"):
        return 1.0 / np.asarray(t, dtype=float)


XLOGX = ScalarFunction(_xlogx, _log_plus_one, _reciprocal, (0.0, 1.0), True, "t log t")
SQUARE = ScalarFunction(lambda t: np.asarray(t, float) ** 2, lambda t: 2.0 * np.asarray(t, float),
                        lambda t: np.full(np.shape(t), 2.0), (0.0, 1.0), False, "t^2")
IDENTITY = ScalarFunction(lambda t: np.asarray(t, float), lambda t: np.ones(np.shape(t)),
                          lambda t: np.zeros(np.shape(t)), (-np.inf, np.inf), False, "t")


def derivative_check(fn: ScalarFunction, points: int = 100, step: float = 1e-5) -> float:
    """Largest relative error between ``fprime``/``fsecond`` and central differences.

    Samples ``points`` interior points of the domain (truncated to
    ``[0.05, 0.95]`` of the unit interval so the stencil stays inside).
    """
    lo, hi = fn.domain
    lo = max(lo, 0.0) + 0.05
    hi = min(hi, 1.0) - 0.05
    x = np.linspace(lo, hi, points)
    worst = 0.0
    pairs = [(fn.f, fn.fprime)]
    if fn.fsecond is not None:
        pairs.append((fn.fprime, fn.fsecond))
    for g, dg in pairs:
        fd = (np.asarray(g(x + step)) - np.asarray(g(x - step))) / (2.0 * step)
        exact = np.asarray(dg(x), dtype=float)
        err = np.abs(fd - exact) / np.maximum(np.abs(exact), 1.0)
        worst = max(worst, float(err.max()))
    return worst


def apply_function(h, f: ScalarFunction, eps_floor: float = EPS_FLOOR) -> HermitianMatrix:
    """Functional calculus ``U diag(f(lambda_i)) U^H``.

    Raises :class:`DomainError` if an eigenvalue lies outside ``f.domain``
    by more than ``1e-10``. Singular functions follow the clamping policy of
    :meth:`ScalarFunction.effective_arguments`.
    """
    h = as_hermitian(h)
    return HermitianMatrix.from_eigen(f(h.eigenvalues, eps_floor), h.eigenvectors)


def divided_difference_first(eigenvalues, f: ScalarFunction, eps_floor: float = EPS_FLOOR,
                             delta: float = DEGENERACY_DELTA) -> np.ndarray:
    """First divided-difference matrix of ``f`` on a spectrum.

    Entry ``(i, j)`` is ``(f(l_i) - f(l_j)) / (l_i - l_j)`` when the gap exceeds
    ``delta`` and ``f'((l_i + l_j) / 2)`` otherwise. Clamped arguments are
    used in numerator and denominator alike.
    """
    x = f.effective_arguments(eigenvalues, eps_floor)
    with np.errstate(divide="ignore", invalid="ignore"):
        fx = np.asarray(f.f(x), dtype=float)
        gap = x[:, None] - x[None, :]
        mid = f.derivative_arguments(0.5 * (x[:, None] + x[None, :]), eps_floor)
        fmid = np.asarray(f.fprime(mid), dtype=float)
        quotient = (fx[:, None] - fx[None, :]) / np.where(np.abs(gap) > delta, gap, 1.0)
    out = np.where(np.abs(gap) > delta, quotient, fmid)
    return 0.5 * (out + out.T)


def frechet_derivative(h, f: ScalarFunction, direction, eps_floor: float = EPS_FLOOR) -> np.ndarray:
    """Daleckii-Krein derivative ``D f(h)[H] = U (f^[1] o U^H H U) U^H``."""
    h = as_hermitian(h)
    hd = _checked_direction(h, direction)
    k = divided_difference_first(h.eigenvalues, f, eps_floor)
    u = h.eigenvectors
    return u @ (k * h.to_basis(hd)) @ u.conj().T


def _checked_direction(h: HermitianMatrix, direction) -> np.ndarray:
    d = np.asarray(direction.data if isinstance(direction, HermitianMatrix) else direction, dtype=complex)
    if d.shape != h.data.shape:
        raise ValidationError(f"dimension mismatch: operator is {h.data.shape}, direction is {d.shape}")
    return d


def directional_derivative_trace(h, f: ScalarFunction, direction, eps_floor: float = EPS_FLOOR) -> float:
    """``d/dt Tr f(h + tH)`` at ``t = 0``, i.e. ``Tr(f'(h) H)``."""
    h = as_hermitian(h)
    hd = h.to_basis(_checked_direction(h, direction))
    k = divided_difference_first(h.eigenvalues, f, eps_floor)
    return float(np.sum(np.diag(k) * np.diag(hd).real))


def hessian_bilinear_form(h, f: ScalarFunction, a, b, eps_floor: float = EPS_FLOOR) -> float:
    """Second variation of ``Tr f`` at ``h`` evaluated on the pair ``(a, b)``.

    ``sum_ij (f')^[1](l_i, l_j) Re(a_ij conj(b_ij))`` with ``a``, ``b``
    expressed in the eigenbasis of ``h``.
    """
    h = as_hermitian(h)
    at = h.to_basis(_checked_direction(h, a))
    bt = h.to_basis(_checked_direction(h, b))
    k = divided_difference_first(h.eigenvalues, f.derivative(), eps_floor)
    return float(np.sum(k * (at * bt.conj()).real))


def hessian_quadratic_form(h, f: ScalarFunction, direction, eps_floor: float = EPS_FLOOR) -> float:
    """``d^2/dt^2 Tr f(h + tH)`` at ``t = 0``."""
    return hessian_bilinear_form(h, f, direction, direction, eps_floor)


def hs_inner(a, b) -> complex:
    """Hilbert-Schmidt inner product ``Tr(a^H b)``."""
    a = np.asarray(a.data if isinstance(a, HermitianMatrix) else a, dtype=complex)
    b = np.asarray(b.data if isinstance(b, HermitianMatrix) else b, dtype=complex)
    if a.shape != b.shape:
        raise ValidationError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return complex(np.vdot(a, b))


def random_hermitian(d: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return scale * 0.5 * (g + g.conj().T)
