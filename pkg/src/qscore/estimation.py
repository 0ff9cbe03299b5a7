"""Parametrized families, SLD operators, Fisher information and the CRMC bound."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .exceptions import SingularityError, ValidationError
from .hermitian import (EPS_FLOOR, HermitianMatrix, divided_difference_first, hermitian_asymmetry)
from .scoring import get_generator
from .states import (PAULI, DensityOperator, MeasurementBasis, floor_eigenvalues, make_density,
                     plus_state)

H_FD = 1e-5
SLD_RESIDUAL_TOL = 1e-8
COND_LIMIT = 1e12

__all__ = [
    "ParametrizedFamily", "Povm", "FisherReport", "sld_operators", "qfi_matrix",
    "classical_fisher", "povm_probabilities", "crmc_bound", "crmc_details", "fisher_report",
    "rotation_family", "bloch_rotation_family", "diagonal_qubit_family", "bloch_family",
    "circle_family", "gell_mann_matrices", "gell_mann_family", "dephased_family",
    "reparametrized_family", "sld_residual",
]


@dataclass(frozen=True)
class ParametrizedFamily:
    """Smooth map ``theta -> rho_theta`` with optional analytic tangents.

    ``state_fn`` returns a density matrix as an array; ``tangent_fn``, when
    given, returns the ``n_params`` derivatives ``d rho / d theta_i``.
    Without it tangents come from central differences with step ``h_fd``.
    """

    dim: int
    n_params: int
    state_fn: Callable[[np.ndarray], np.ndarray]
    tangent_fn: Optional[Callable[[np.ndarray], Sequence[np.ndarray]]] = None
    label: str = ""
    h_fd: float = H_FD

    def _theta(self, theta) -> np.ndarray:
        t = np.atleast_1d(np.asarray(theta, dtype=float))
        if t.shape != (self.n_params,):
            raise ValidationError(f"{self.label or 'family'} takes {self.n_params} parameters, got shape {t.shape}")
        return t

    def state_at(self, theta) -> DensityOperator:
        return make_density(self.state_fn(self._theta(theta)))

    def fd_tangents(self, theta) -> List[np.ndarray]:
        t = self._theta(theta)
        out = []
        for i in range(self.n_params):
            e = np.zeros(self.n_params)
            e[i] = self.h_fd
            diff = (np.asarray(self.state_fn(t + e), complex) - np.asarray(self.state_fn(t - e), complex))
            out.append(diff / (2.0 * self.h_fd))
        return out

    def tangent_at(self, theta) -> List[np.ndarray]:
        t = self._theta(theta)
        raw = self.tangent_fn(t) if self.tangent_fn is not None else self.fd_tangents(t)
        out = []
        for i, m in enumerate(raw):
            m = np.asarray(m, dtype=complex)
            if m.shape != (self.dim, self.dim):
                raise ValidationError(f"tangent {i} has shape {m.shape}, expected {(self.dim, self.dim)}")
            if hermitian_asymmetry(m) > 1e-8 or abs(np.trace(m)) > 1e-8:
                raise ValidationError(f"tangent {i} must be Hermitian and traceless")
            out.append(0.5 * (m + m.conj().T))
        return out


def _unitary_exp(gen: np.ndarray, theta: float) -> np.ndarray:
    h = HermitianMatrix(gen)
    u = h.eigenvectors
    return (u * np.exp(-1j * theta * h.eigenvalues)) @ u.conj().T


def rotation_family(rho0, generator, label: str = "rotation") -> ParametrizedFamily:
    """``rho_theta = exp(-i theta G) rho0 exp(i theta G)``, tangent ``-i[G, rho_theta]``."""
    r0 = make_density(rho0).data
    g = np.asarray(generator, dtype=complex)

    def state(t):
        u = _unitary_exp(g, t[0])
        return u @ r0 @ u.conj().T

    def tangent(t):
        r = state(t)
        return [-1j * (g @ r - r @ g)]

    return ParametrizedFamily(r0.shape[0], 1, state, tangent, label)


def bloch_rotation_family(rho0=None) -> ParametrizedFamily:
    """Rotation of ``|+><+|`` (or of ``rho0``) that tilts the Bloch vector toward +y.

    Generated by ``sigma_z / 2``: at ``theta = 0`` the SLD is ``sigma_y``,
    the QFI is 1 and Z-basis outcomes stay uniform to first order.
    """
    return rotation_family(plus_state() if rho0 is None else rho0, 0.5 * PAULI[2], "bloch-rotation")


def diagonal_qubit_family() -> ParametrizedFamily:
    """``diag(theta, 1 - theta)``."""
    return ParametrizedFamily(
        2, 1, lambda t: np.diag([t[0], 1.0 - t[0]]).astype(complex),
        lambda t: [np.diag([1.0, -1.0]).astype(complex)], "diagonal")


def bloch_family(r_fn, dr_fn=None, n_params: int = 1, label: str = "bloch") -> ParametrizedFamily:
    """Qubit family ``(I + r(theta) . sigma) / 2``; ``dr_fn`` returns a (3, m) Jacobian."""
    def state(t):
        r = np.asarray(r_fn(t), dtype=float)
        return 0.5 * (np.eye(2) + sum(c * s for c, s in zip(r, PAULI)))

    tangent = None
    if dr_fn is not None:
        def tangent(t):
            j = np.asarray(dr_fn(t), dtype=float).reshape(3, n_params)
            return [0.5 * sum(j[k, i] * PAULI[k] for k in range(3)) for i in range(n_params)]

    return ParametrizedFamily(2, n_params, state, tangent, label)


def circle_family(r: float) -> ParametrizedFamily:
    """``r(theta) = (r cos theta, r sin theta, 0)``."""
    return bloch_family(lambda t: (r * math.cos(t[0]), r * math.sin(t[0]), 0.0),
                        lambda t: [[-r * math.sin(t[0])], [r * math.cos(t[0])], [0.0]],
                        1, f"circle(r={r:g})")


@lru_cache(maxsize=None)
def _gell_mann(d: int) -> Tuple[np.ndarray, ...]:
    mats = []
    for j in range(d):
        for k in range(j + 1, d):
            s = np.zeros((d, d), complex)
            s[j, k] = s[k, j] = 1.0
            a = np.zeros((d, d), complex)
            a[j, k], a[k, j] = -1j, 1j
            mats += [s, a]
    for l in range(1, d):
        diag = np.zeros(d)
        diag[:l] = 1.0
        diag[l] = -float(l)
        mats.append(np.diag(diag * math.sqrt(2.0 / (l * (l + 1)))).astype(complex))
    for m in mats:
        m.setflags(write=False)
    return tuple(mats)


def gell_mann_matrices(d: int) -> Tuple[np.ndarray, ...]:
    """Generalized Gell-Mann basis, normalized ``Tr(G_a G_b) = 2 delta_ab``.

    For ``d = 2`` this is the Pauli triple (in x, y, z order).
    """
    return _gell_mann(d)


def gell_mann_family(d: int) -> ParametrizedFamily:
    """Full state manifold ``rho = I/d + sum_a theta_a G_a / 2`` with ``d^2 - 1`` parameters.

    ``family.coordinates(rho)`` gives ``theta_a = Tr(rho G_a)``.
    """
    gm = gell_mann_matrices(d)
    tangents = [0.5 * g for g in gm]

    def state(t):
        return np.eye(d, dtype=complex) / d + sum(c * m for c, m in zip(t, tangents))

    fam = ParametrizedFamily(d, d * d - 1, state, lambda t: tangents, f"gell-mann({d})")
    object.__setattr__(fam, "coordinates", lambda rho: np.array(
        [float(np.trace(np.asarray(rho.data if hasattr(rho, "data") else rho) @ g).real) for g in gm]))
    return fam


def dephased_family(fam: ParametrizedFamily, basis: MeasurementBasis) -> ParametrizedFamily:
    """Compose a family with the dephasing channel of ``basis``."""
    projs = basis.projectors

    def deph(m):
        return sum(p @ m @ p for p in projs)

    tangent = None
    if fam.tangent_fn is not None:
        def tangent(t):
            return [deph(np.asarray(x, complex)) for x in fam.tangent_fn(t)]

    return ParametrizedFamily(fam.dim, fam.n_params, lambda t: deph(np.asarray(fam.state_fn(t), complex)),
                              tangent, f"dephased({fam.label})", fam.h_fd)


def reparametrized_family(fam: ParametrizedFamily, a) -> ParametrizedFamily:
    """Family ``phi -> rho_{A phi}`` for an invertible ``A``."""
    a = np.asarray(a, dtype=float)
    if a.shape != (fam.n_params, fam.n_params) or abs(np.linalg.det(a)) < 1e-12:
        raise ValidationError("reparametrization matrix must be square and invertible")

    tangent = None
    if fam.tangent_fn is not None:
        def tangent(phi):
            base = fam.tangent_fn(a @ phi)
            return [sum(a[i, j] * base[i] for i in range(fam.n_params)) for j in range(fam.n_params)]

    return ParametrizedFamily(fam.dim, fam.n_params, lambda phi: fam.state_fn(a @ phi), tangent,
                              f"{fam.label}@A", fam.h_fd)


@dataclass(frozen=True)
class Povm:
    """Measurement with PSD effects summing to the identity."""

    effects: Tuple[np.ndarray, ...]
    labels: Tuple[str, ...] = ()

    def __post_init__(self):
        effects = tuple(np.array(e, dtype=complex) for e in self.effects)
        if not effects:
            raise ValidationError("a POVM needs at least one effect")
        d = effects[0].shape[0]
        for k, e in enumerate(effects):
            if e.shape != (d, d):
                raise ValidationError(f"effect {k} has shape {e.shape}, expected {(d, d)}")
            lmin = float(HermitianMatrix(e).eigenvalues[0])
            if lmin < -1e-10:
                raise ValidationError(f"effect {k} is not positive semidefinite (min eigenvalue {lmin:.3e})")
        err = float(np.max(np.abs(sum(effects) - np.eye(d))))
        if err > 1e-10:
            raise ValidationError(f"POVM effects do not sum to the identity (max deviation {err:.3e})")
        for e in effects:
            e.setflags(write=False)
        object.__setattr__(self, "effects", effects)
        labels = tuple(self.labels) or tuple(str(k) for k in range(len(effects)))
        if len(labels) != len(effects):
            raise ValidationError("one label per effect is required")
        object.__setattr__(self, "labels", labels)

    @property
    def dim(self) -> int:
        return self.effects[0].shape[0]

    @classmethod
    def from_basis(cls, basis: MeasurementBasis) -> "Povm":
        return cls(basis.projectors, tuple(f"{basis.label}{k}" for k in range(basis.dim)))


def _as_povm(m) -> Povm:
    return Povm.from_basis(m) if isinstance(m, MeasurementBasis) else m


def povm_probabilities(rho: DensityOperator, povm) -> np.ndarray:
    """Born-rule outcome distribution, with rounding dust clipped and renormalized."""
    povm = _as_povm(povm)
    if povm.dim != rho.dim:
        raise ValidationError(f"dimension mismatch: state is {rho.dim}-dimensional, POVM is {povm.dim}")
    p = np.array([np.vdot(e, rho.data).real for e in povm.effects])
    p = np.clip(p, 0.0, None)
    return p / p.sum()


def _prepare(fam: ParametrizedFamily, theta, eps_floor: float):
    rho, floored = floor_eigenvalues(fam.state_at(theta), eps_floor)
    tangents = fam.tangent_at(theta)
    return rho, floored, tangents, [rho.op.to_basis(t) for t in tangents]


def _sld_in_eigenbasis(rho: DensityOperator, tangents_eb, eps_floor: float) -> List[np.ndarray]:
    lam = rho.eigenvalues
    denom = lam[:, None] + lam[None, :]
    if float(denom.min()) < eps_floor or float(denom.min()) <= 0.0:
        raise SingularityError(f"SLD undefined: eigenvalue pair sum {denom.min():.3e} below floor {eps_floor:g}")
    return [(t + t.conj().T) / denom for t in tangents_eb]


def _hermitian_back(u: np.ndarray, l: np.ndarray) -> HermitianMatrix:
    m = u @ l @ u.conj().T
    return HermitianMatrix(0.5 * (m + m.conj().T))


def sld_operators(fam: ParametrizedFamily, theta, eps_floor: float = EPS_FLOOR) -> List[HermitianMatrix]:
    """Symmetric logarithmic derivatives ``L_i`` solving ``d_i rho = (rho L_i + L_i rho) / 2``.

    The state is first floored at ``eps_floor`` (and renormalized) so the
    Lyapunov equation is solvable; for rank-deficient states the result is
    the regularized limit.
    """
    rho, _, _, teb = _prepare(fam, theta, eps_floor)
    u = rho.eigenvectors
    return [_hermitian_back(u, l) for l in _sld_in_eigenbasis(rho, teb, eps_floor)]


def sld_residual(fam: ParametrizedFamily, theta, eps_floor: float = EPS_FLOOR) -> float:
    """``max_i || d_i rho - (rho L_i + L_i rho) / 2 ||_max`` at the floored state."""
    rho, _, tangents, _ = _prepare(fam, theta, eps_floor)
    worst = 0.0
    for t, l in zip(tangents, sld_operators(fam, theta, eps_floor)):
        r = rho.data @ l.data
        worst = max(worst, float(np.max(np.abs(t - 0.5 * (r + r.conj().T)))))
    return worst


def _qfi_from_eb(rho: DensityOperator, slds_eb) -> np.ndarray:
    lam = rho.eigenvalues
    m = len(slds_eb)
    q = np.empty((m, m))
    for a in range(m):
        for b in range(a, m):
            q[a, b] = q[b, a] = float(np.sum(lam[:, None] * slds_eb[a] * slds_eb[b].T).real)
    return q


def qfi_matrix(fam: ParametrizedFamily, theta, eps_floor: float = EPS_FLOOR) -> np.ndarray:
    """SLD quantum Fisher information ``Re Tr(rho {L_i, L_j} / 2)``."""
    rho, _, _, teb = _prepare(fam, theta, eps_floor)
    return _qfi_from_eb(rho, _sld_in_eigenbasis(rho, teb, eps_floor))


def classical_fisher(fam: ParametrizedFamily, theta, povm) -> np.ndarray:
    """Fisher information of the outcome distribution ``p_k = Tr(E_k rho_theta)``.

    Outcomes with ``p_k < 1e-12`` are skipped when their derivative is
    also negligible (``< 1e-9``); otherwise the affected diagonal entries
    are ``inf``.
    """
    povm = _as_povm(povm)
    rho = fam.state_at(theta)
    if povm.dim != rho.dim:
        raise ValidationError(f"dimension mismatch: family is {rho.dim}-dimensional, POVM is {povm.dim}")
    tangents = fam.tangent_at(theta)
    m = fam.n_params
    out = np.zeros((m, m))
    divergent = np.zeros(m, dtype=bool)
    for e in povm.effects:
        p = float(np.vdot(e, rho.data).real)
        dp = np.array([np.vdot(e, t).real for t in tangents])
        if p < 1e-12:
            divergent |= np.abs(dp) >= 1e-9
            continue
        out += np.outer(dp, dp) / p
    out[divergent, divergent] = math.inf
    return out


@dataclass(frozen=True)
class FisherReport:
    qfi: np.ndarray
    sld: List[HermitianMatrix]
    cfi: Optional[np.ndarray] = None
    regularized: bool = False


def fisher_report(fam: ParametrizedFamily, theta, povm=None, eps_floor: float = EPS_FLOOR) -> FisherReport:
    rho, floored, _, teb = _prepare(fam, theta, eps_floor)
    slds = _sld_in_eigenbasis(rho, teb, eps_floor)
    u = rho.eigenvectors
    cfi = None if povm is None else classical_fisher(fam, theta, povm)
    return FisherReport(_qfi_from_eb(rho, slds), [_hermitian_back(u, l) for l in slds],
                        cfi, floored)


@dataclass(frozen=True)
class CrmcDetails:
    bound: float
    hessian: np.ndarray
    qfi: np.ndarray
    mode: str
    n: int
    regularized: bool = False
    extra: dict = field(default_factory=dict)


def _check_invertible(q: np.ndarray) -> None:
    h = HermitianMatrix(q)
    w = h.eigenvalues
    top = float(np.max(np.abs(w)))
    if top == 0.0 or float(w[0]) <= top / COND_LIMIT:
        null = [np.round(h.eigenvectors[:, k].real, 6).tolist()
                for k in range(len(w)) if w[k] <= top / COND_LIMIT]
        raise SingularityError(f"QFI is singular (condition number >= {COND_LIMIT:g}); null directions: {null}")


def crmc_details(fam: ParametrizedFamily, theta, g, n: int, mode: str = "hessian",
                 eps_floor: float = EPS_FLOOR) -> CrmcDetails:
    """Cramer-Rao-McCarthy bound ``Tr(H I^-1) / (2n)`` with its ingredients.

    ``mode="hessian"`` uses the exact second variation of ``Tr f`` pulled
    back along the tangents, ``H_ab = sum_ij (f')^[1](l_i, l_j) Re(T_a,ij conj T_b,ij)``.
    ``mode="f2diag"`` replaces the divided-difference kernel by the
    curvature ``(f''(l_i) + f''(l_j)) / 2`` (exact when the tangents
    commute with the state).
    """
    if n < 1:
        raise ValidationError("copy count n must be >= 1")
    g = get_generator(g)
    rho, floored, _, teb = _prepare(fam, theta, eps_floor)
    qfi = _qfi_from_eb(rho, _sld_in_eigenbasis(rho, teb, eps_floor))
    _check_invertible(qfi)
    lam = rho.eigenvalues
    if mode == "hessian":
        kernel = divided_difference_first(lam, g.fprime, eps_floor)
    elif mode == "f2diag":
        f2 = np.asarray(g.scalar.fsecond(g.scalar.derivative_arguments(lam, eps_floor)), dtype=float)
        kernel = 0.5 * (f2[:, None] + f2[None, :])
    else:
        raise ValidationError(f"unknown bound mode {mode!r}; expected 'hessian' or 'f2diag'")
    m = len(teb)
    hess = np.empty((m, m))
    for a in range(m):
        for b in range(a, m):
            hess[a, b] = hess[b, a] = float(np.sum(kernel * (teb[a] * teb[b].conj()).real))
    bound = float(np.trace(np.linalg.solve(qfi, hess))) / (2.0 * n)
    return CrmcDetails(bound, hess, qfi, mode, n, floored)


def crmc_bound(fam: ParametrizedFamily, theta, g, n: int, mode: str = "hessian",
               eps_floor: float = EPS_FLOOR) -> float:
    return crmc_details(fam, theta, g, n, mode, eps_floor).bound
