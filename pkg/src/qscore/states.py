"""Density operators, measurement bases, dephasing, entropy and coherence."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from .exceptions import ValidationError
from .hermitian import HermitianMatrix, as_hermitian
from .rng import SeededRng, as_generator

__all__ = [
    "DensityOperator", "MeasurementBasis", "BlochVector", "SeededRng",
    "make_density", "dephase", "von_neumann_entropy", "coherence",
    "bloch_to_density", "density_to_bloch", "random_pure", "random_mixed",
    "random_unitary", "floor_eigenvalues", "computational_basis",
    "hadamard_basis", "circular_basis", "fourier_basis", "basis_by_name",
    "plus_state", "fourier_state", "maximally_mixed", "PAULI",
]

PSD_TOL = 1e-10
TRACE_TOL = 1e-10
UNITARY_TOL = 1e-10

I2 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = (SIGMA_X, SIGMA_Y, SIGMA_Z)


class DensityOperator:
    """A validated quantum state: Hermitian, PSD and of unit trace.

    Use :func:`make_density` to build one from raw entries.
    """

    __slots__ = ("op",)

    def __init__(self, op: HermitianMatrix):
        self.op = op

    @property
    def dim(self) -> int:
        return self.op.dim

    @property
    def data(self) -> np.ndarray:
        return self.op.data

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.op.eigenvalues

    @property
    def eigenvectors(self) -> np.ndarray:
        return self.op.eigenvectors

    def purity(self) -> float:
        return float(np.sum(self.op.eigenvalues ** 2))

    def rank(self, tol: float = 1e-8) -> int:
        return int(np.sum(self.op.eigenvalues > tol))

    def __array__(self, dtype=None, copy=None):
        return self.op.__array__(dtype)

    def __repr__(self):
        return f"DensityOperator(dim={self.dim}, spectrum={np.array2string(self.eigenvalues, precision=6)})"


def _from_spectrum(values, vectors) -> DensityOperator:
    w = np.clip(np.asarray(values, dtype=float), 0.0, None)
    return DensityOperator(HermitianMatrix.from_eigen(w / w.sum(), vectors))


def make_density(m) -> DensityOperator:
    """Validate ``m`` as a density matrix.

    Eigenvalues in ``[-1e-10, 0)`` are treated as rounding dust: they are
    clipped to zero and the trace renormalized. Anything more negative, a
    trace off by more than ``1e-10``, or a non-Hermitian input raises
    :class:`ValidationError`.
    """
    if isinstance(m, DensityOperator):
        return m
    h = as_hermitian(m)
    tr = h.trace()
    if abs(tr - 1.0) > TRACE_TOL:
        raise ValidationError(f"trace check failed: Tr = {tr:.12g} deviates from 1 by {abs(tr - 1.0):.3e}")
    lmin = float(h.eigenvalues[0])
    if lmin < -PSD_TOL:
        raise ValidationError(f"positivity check failed: min eigenvalue {lmin:.6g} < -{PSD_TOL:g}")
    if lmin < 0.0:
        return _from_spectrum(h.eigenvalues, h.eigenvectors)
    return DensityOperator(h)


def floor_eigenvalues(rho: DensityOperator, eps: float) -> Tuple[DensityOperator, bool]:
    """Raise eigenvalues below ``eps`` to ``eps`` and renormalize.

    Returns the new state and whether the floor was active.
    """
    w = rho.eigenvalues
    if eps <= 0.0 or float(w[0]) >= eps:
        return rho, False
    return _from_spectrum(np.maximum(w, eps), rho.eigenvectors), True


@dataclass(frozen=True)
class MeasurementBasis:
    """Orthonormal basis ``{|k>}`` stored as the columns of a unitary."""

    vectors: np.ndarray
    label: str = ""
    projectors: Tuple[np.ndarray, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        u = np.array(self.vectors, dtype=complex)
        if u.ndim != 2 or u.shape[0] != u.shape[1]:
            raise ValidationError(f"basis must be a square matrix of column vectors, got shape {u.shape}")
        err = float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))))
        if err > UNITARY_TOL:
            raise ValidationError(f"basis vectors are not orthonormal: max |U^H U - I| = {err:.3e}")
        u.setflags(write=False)
        object.__setattr__(self, "vectors", u)
        object.__setattr__(self, "projectors",
                           tuple(np.outer(u[:, k], u[:, k].conj()) for k in range(u.shape[0])))

    @property
    def dim(self) -> int:
        return self.vectors.shape[0]

    @classmethod
    def eigenbasis(cls, rho) -> "MeasurementBasis":
        h = rho.op if isinstance(rho, DensityOperator) else as_hermitian(rho)
        return cls(h.eigenvectors, "eigenbasis")


def computational_basis(d: int = 2) -> MeasurementBasis:
    return MeasurementBasis(np.eye(d, dtype=complex), "Z" if d == 2 else "computational")


def hadamard_basis() -> MeasurementBasis:
    return MeasurementBasis(np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2), "X")


def circular_basis() -> MeasurementBasis:
    return MeasurementBasis(np.array([[1, 1], [1j, -1j]], dtype=complex) / math.sqrt(2), "Y")


def fourier_basis(d: int) -> MeasurementBasis:
    j = np.arange(d)
    f = np.exp(2j * np.pi * np.outer(j, j) / d) / math.sqrt(d)
    return MeasurementBasis(f, "fourier")


def basis_by_name(name: str, d: int = 2) -> MeasurementBasis:
    key = name.strip().lower()
    if key in ("z", "computational"):
        return computational_basis(d)
    if key in ("x", "hadamard"):
        if d != 2:
            raise ValidationError("the X basis is defined for d = 2 only")
        return hadamard_basis()
    if key in ("y", "circular"):
        if d != 2:
            raise ValidationError("the Y basis is defined for d = 2 only")
        return circular_basis()
    if key in ("fourier", "f"):
        return fourier_basis(d)
    raise ValidationError(f"unknown basis {name!r}; expected Z, X, Y, computational or fourier")


def _check_same_dim(rho: DensityOperator, basis: MeasurementBasis):
    if rho.dim != basis.dim:
        raise ValidationError(f"dimension mismatch: state is {rho.dim}-dimensional, basis is {basis.dim}")


def dephase(rho: DensityOperator, basis: MeasurementBasis) -> DensityOperator:
    """Dephasing channel ``sum_k |k><k| rho |k><k|``."""
    _check_same_dim(rho, basis)
    u = basis.vectors
    p = np.einsum("ik,ij,jk->k", u.conj(), rho.data, u).real
    return _from_spectrum(p, u)


def von_neumann_entropy(rho: DensityOperator) -> float:
    """Entropy ``-sum l log l`` in nats, with ``0 log 0 = 0``."""
    w = np.clip(rho.eigenvalues, 0.0, None)
    nz = w[w > 0.0]
    s = float(-np.sum(nz * np.log(nz)))
    return max(s, 0.0)


def coherence(rho: DensityOperator, basis: MeasurementBasis) -> float:
    """Relative entropy of coherence ``S(dephase(rho)) - S(rho)``."""
    c = von_neumann_entropy(dephase(rho, basis)) - von_neumann_entropy(rho)
    return max(c, 0.0)


@dataclass(frozen=True)
class BlochVector:
    x: float
    y: float
    z: float

    def __post_init__(self):
        n = math.sqrt(self.x ** 2 + self.y ** 2 + self.z ** 2)
        if n > 1.0 + 1e-10:
            raise ValidationError(f"Bloch vector norm {n:.12g} exceeds 1")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    def norm(self) -> float:
        return float(np.linalg.norm(self.as_array()))


def bloch_to_density(r) -> DensityOperator:
    if not isinstance(r, BlochVector):
        r = BlochVector(*map(float, r))
    m = 0.5 * (I2 + r.x * SIGMA_X + r.y * SIGMA_Y + r.z * SIGMA_Z)
    return make_density(m)


def density_to_bloch(rho: DensityOperator) -> BlochVector:
    if rho.dim != 2:
        raise ValidationError(f"Bloch representation needs d = 2, got d = {rho.dim}")
    comps = [float(np.trace(rho.data @ s).real) for s in PAULI]
    n = math.sqrt(sum(c * c for c in comps))
    if n > 1.0:
        comps = [c / n for c in comps]
    return BlochVector(*comps)


def random_pure(d: int, rng=None) -> DensityOperator:
    """Projector onto a normalized complex-Gaussian ket."""
    g = as_generator(rng)
    psi = g.normal(size=d) + 1j * g.normal(size=d)
    psi /= np.linalg.norm(psi)
    return make_density(np.outer(psi, psi.conj()))


def random_mixed(d: int, rng=None) -> DensityOperator:
    """Hilbert-Schmidt random state ``G G^H / Tr(G G^H)``."""
    g = as_generator(rng)
    m = g.normal(size=(d, d)) + 1j * g.normal(size=(d, d))
    w = m @ m.conj().T
    return make_density(w / np.trace(w).real)


def random_unitary(d: int, rng=None) -> np.ndarray:
    """Haar unitary from the QR factorization of a complex Ginibre matrix."""
    g = as_generator(rng)
    z = (g.normal(size=(d, d)) + 1j * g.normal(size=(d, d))) / math.sqrt(2.0)
    q, r = np.linalg.qr(z)
    diag = np.diag(r)
    return q * (diag / np.abs(diag))


def fourier_state(d: int) -> DensityOperator:
    """Uniform superposition ``sum_k |k> / sqrt(d)``, maximally coherent in Z."""
    psi = np.full(d, 1.0 / math.sqrt(d), dtype=complex)
    return make_density(np.outer(psi, psi.conj()))


def plus_state() -> DensityOperator:
    return fourier_state(2)


def maximally_mixed(d: int = 2) -> DensityOperator:
    return make_density(np.eye(d, dtype=complex) / d)
