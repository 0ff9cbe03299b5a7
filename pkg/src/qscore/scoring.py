"""Quantum value functionals, score operators and the divergences they induce.

A generator ``f`` defines the value functional ``V(rho) = Tr f(rho)``. Its
proper score operator is the affine tangent

    S(sigma) = f'(sigma) + c(sigma) I,
    c(sigma) = Tr[f(sigma) - sigma f'(sigma)] - Tr[f(I/d) - (I/d) f'(I/d)],

so that ``Tr(rho S(sigma)) = V(sigma) + Tr(f'(sigma)(rho - sigma)) + const``
and the expected-score gap equals the Bregman divergence for every
generator. For ``t log t`` the offset is identically zero and
``S(sigma) = log(sigma) + I``.
"""

from __future__ import annotations

import math
import warnings
from functools import cached_property
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from .exceptions import ValidationError
from .hermitian import EPS_FLOOR, SQUARE, XLOGX, HermitianMatrix, ScalarFunction, apply_function
from .rng import as_generator
from .states import DensityOperator, random_mixed, random_unitary

SUPPORT_TOL = 1e-8
LOWNER_TOL = 1e-8


@dataclass(frozen=True)
class Generator:
    """Scoring-rule generator: a convex ``f`` on ``[0, 1]`` plus metadata."""

    name: str
    scalar: ScalarFunction
    operator_convex: bool = False
    singular_at_zero: bool = False

    def __post_init__(self):
        worst = midpoint_convexity_defect(self.scalar)
        if worst > 1e-9:
            raise ValidationError(f"generator {self.name!r} is not convex on [0, 1]: midpoint defect {worst:.3e}")
        if self.singular_at_zero != self.scalar.singular_at_zero:
            object.__setattr__(self, "scalar", ScalarFunction(
                self.scalar.f, self.scalar.fprime, self.scalar.fsecond, self.scalar.domain,
                self.singular_at_zero, self.scalar.name or self.name))

    @cached_property
    def fprime(self) -> ScalarFunction:
        return self.scalar.derivative()


def midpoint_convexity_defect(fn: ScalarFunction, triples: int = 200, seed: int = 12345) -> float:
    """Largest ``f((x+y)/2) - (f(x)+f(y))/2`` over sampled points of ``[0, 1]``.

    Each triple is ``(x, y, (x+y)/2)``; a positive value means a violation.
    """
    g = np.random.default_rng(seed)
    x = g.uniform(0.0, 1.0, triples)
    y = g.uniform(0.0, 1.0, triples)
    x[:2], y[:2] = (0.0, 1.0), (1.0, 0.0)
    with np.errstate(all="ignore"):
        fx, fy, fm = (np.asarray(fn.f(v), dtype=float) for v in (x, y, 0.5 * (x + y)))
    defect = fm - 0.5 * (fx + fy)
    return float(np.nanmax(defect))


LOG = Generator("log", XLOGX, operator_convex=True, singular_at_zero=True)
QUADRATIC = Generator("quadratic", SQUARE, operator_convex=True)

_REGISTRY: Dict[str, Generator] = {"log": LOG, "quadratic": QUADRATIC}


def register_generator(gen: Generator) -> Generator:
    _REGISTRY[gen.name] = gen
    return gen


def get_generator(name) -> Generator:
    if isinstance(name, Generator):
        return name
    try:
        return _REGISTRY[name]
    except KeyError:
        raise ValidationError(f"unknown generator {name!r}; registered: {sorted(_REGISTRY)}") from None


def power_generator(p: float) -> Generator:
    """``t**p`` for ``p >= 1``; operator convex only for ``1 <= p <= 2``."""
    if p < 1:
        raise ValidationError("power generators need p >= 1")
    fn = ScalarFunction(lambda t: np.asarray(t, float) ** p,
                        lambda t: p * np.asarray(t, float) ** (p - 1),
                        lambda t: p * (p - 1) * np.asarray(t, float) ** (p - 2),
                        (0.0, 1.0), p < 2, f"t^{p:g}")
    return Generator(f"power{p:g}", fn, operator_convex=1 <= p <= 2, singular_at_zero=p < 2)


def _check_pair(rho: DensityOperator, sigma: DensityOperator):
    if rho.dim != sigma.dim:
        raise ValidationError(f"dimension mismatch: rho is {rho.dim}-dimensional, sigma is {sigma.dim}")


def _diag_in(sigma: DensityOperator, rho: DensityOperator) -> np.ndarray:
    u = sigma.eigenvectors
    return np.einsum("ik,ij,jk->k", u.conj(), rho.data, u).real


def value_functional(rho: DensityOperator, g, eps_floor: float = EPS_FLOOR) -> float:
    """``Tr f(rho) = sum_i f(lambda_i)``."""
    g = get_generator(g)
    return float(np.sum(g.scalar(rho.eigenvalues, eps_floor)))


def score_offset(sigma: DensityOperator, g, eps_floor: float = EPS_FLOOR) -> float:
    g = get_generator(g)
    lam = sigma.eigenvalues
    fp = g.fprime(lam, eps_floor)
    own = float(np.sum(g.scalar(lam, eps_floor) - np.clip(lam, 0.0, None) * fp))
    d = sigma.dim
    ref = np.full(d, 1.0 / d)
    base = float(np.sum(g.scalar(ref, eps_floor) - ref * g.fprime(ref, eps_floor)))
    return own - base


def gradient_operator(sigma: DensityOperator, g, eps_floor: float = EPS_FLOOR) -> HermitianMatrix:
    """Functional-calculus gradient ``f'(sigma)`` of the value functional."""
    g = get_generator(g)
    return apply_function(sigma.op, g.fprime, eps_floor)


def score_operator(sigma: DensityOperator, g, eps_floor: float = EPS_FLOOR) -> HermitianMatrix:
    """Proper score observable ``f'(sigma) + c(sigma) I``; commutes with ``sigma``."""
    g = get_generator(g)
    vals = g.fprime(sigma.eigenvalues, eps_floor) + score_offset(sigma, g, eps_floor)
    return HermitianMatrix.from_eigen(vals, sigma.eigenvectors)


def expected_score(rho: DensityOperator, sigma: DensityOperator, g, eps_floor: float = EPS_FLOOR) -> float:
    """``Tr(rho S(sigma))``: expected payoff for reporting ``sigma`` when the truth is ``rho``."""
    _check_pair(rho, sigma)
    g = get_generator(g)
    fp = g.fprime(sigma.eigenvalues, eps_floor)
    return float(np.dot(_diag_in(sigma, rho), fp)) + score_offset(sigma, g, eps_floor)


def support_leak(rho: DensityOperator, sigma: DensityOperator, tol: float = SUPPORT_TOL) -> float:
    """Weight of ``rho`` on the numerical kernel (eigenvalues < tol) of ``sigma``."""
    ker = sigma.eigenvalues < tol
    if not ker.any():
        return 0.0
    return float(np.sum(_diag_in(sigma, rho)[ker]))


def bregman_divergence(rho: DensityOperator, sigma: DensityOperator, g,
                       eps_floor: float = EPS_FLOOR) -> float:
    """``V(rho) - V(sigma) - Tr(f'(sigma)(rho - sigma))``.

    Returns ``math.inf`` for generators singular at zero when ``rho`` puts
    more than ``1e-8`` weight on the kernel of ``sigma``.
    """
    _check_pair(rho, sigma)
    g = get_generator(g)
    if g.singular_at_zero and support_leak(rho, sigma) > SUPPORT_TOL:
        return math.inf
    lam = sigma.eigenvalues
    fp = g.fprime(lam, eps_floor)
    linear = float(np.dot(fp, _diag_in(sigma, rho) - np.clip(lam, 0.0, None)))
    return value_functional(rho, g, eps_floor) - value_functional(sigma, g, eps_floor) - linear


def petz_f_divergence(rho: DensityOperator, sigma: DensityOperator, g,
                      eps_floor: float = EPS_FLOOR) -> float:
    """Petz quasi-entropy ``Tr[sigma^1/2 f(sigma^-1/2 rho sigma^-1/2) sigma^1/2]``.

    Computed on the support of ``sigma`` (eigenvalues >= 1e-8, floored at
    ``eps_floor`` before inversion). If ``rho`` leaks more than ``1e-8`` onto
    the kernel of ``sigma`` the result is ``math.inf``.
    """
    _check_pair(rho, sigma)
    g = get_generator(g)
    if support_leak(rho, sigma) > SUPPORT_TOL:
        return math.inf
    lam = sigma.eigenvalues
    keep = lam >= SUPPORT_TOL
    u = sigma.eigenvectors[:, keep]
    s = np.maximum(lam[keep], eps_floor)
    inv_sqrt = 1.0 / np.sqrt(s)
    x = (u.conj().T @ rho.data @ u) * np.outer(inv_sqrt, inv_sqrt)
    fx = apply_function(HermitianMatrix(0.5 * (x + x.conj().T)),
                        g.scalar.with_domain((0.0, math.inf)), eps_floor)
    return float(np.sum(s * np.diag(fx.data).real))


@dataclass(frozen=True)
class ScoreReport:
    expected_self: float
    expected_report: float
    gap: float
    divergence_bregman: float
    divergence_petz: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def score_report(rho: DensityOperator, sigma: DensityOperator, g, eps_floor: float = EPS_FLOOR) -> ScoreReport:
    """Bundle expected scores, their gap and both divergences for one (truth, report) pair."""
    g = get_generator(g)
    e_self = expected_score(rho, rho, g, eps_floor)
    e_rep = expected_score(rho, sigma, g, eps_floor)
    gap = e_self - e_rep
    breg = bregman_divergence(rho, sigma, g, eps_floor)
    if __debug__ and math.isfinite(breg) and abs(gap - breg) > 1e-8 * (1.0 + abs(breg)):
        warnings.warn(f"score gap {gap:.12g} and Bregman divergence {breg:.12g} disagree", RuntimeWarning)
    return ScoreReport(e_self, e_rep, gap, breg, petz_f_divergence(rho, sigma, g, eps_floor))


@dataclass(frozen=True)
class ConvexityReport:
    generator: str
    passed: bool
    trials: int
    worst_min_eigenvalue: float
    witness: Optional[Tuple[np.ndarray, np.ndarray]] = None


def _random_spectrum(gen: np.random.Generator, d: int, lo: float, hi: float) -> np.ndarray:
    # mix interior spectra with spectra pinned to the interval ends
    w = gen.uniform(lo, hi, d)
    if gen.random() < 0.5:
        pin = gen.random(d) < 0.5
        w[pin] = np.where(gen.random(int(pin.sum())) < 0.5, lo, hi)
    return w


def check_operator_convexity(g, d: int = 3, trials: int = 500, rng=None,
                             tol: float = LOWNER_TOL) -> ConvexityReport:
    """Randomized search for a violation of the operator Jensen inequality.

    Draws Hermitian pairs ``(A, B)`` with spectra in ``[0, 1]`` and checks
    ``f((A+B)/2) <= (f(A)+f(B))/2`` in the Loewner order. Stops at the first
    pair whose difference has a minimum eigenvalue below ``-tol``.
    """
    if d < 2:
        raise ValidationError("operator convexity needs d >= 2")
    g = get_generator(g)
    gen = as_generator(rng)
    lo, hi = 0.0, 1.0
    worst = math.inf
    for t in range(trials):
        a = HermitianMatrix.from_eigen(_random_spectrum(gen, d, lo, hi), random_unitary(d, gen))
        b = HermitianMatrix.from_eigen(_random_spectrum(gen, d, lo, hi), random_unitary(d, gen))
        mid = HermitianMatrix(0.5 * (a.data + b.data))
        gap = 0.5 * (apply_function(a, g.scalar).data + apply_function(b, g.scalar).data) \
            - apply_function(mid, g.scalar).data
        m = float(HermitianMatrix(0.5 * (gap + gap.conj().T)).eigenvalues[0])
        worst = min(worst, m)
        if m < -tol:
            return ConvexityReport(g.name, False, t + 1, m, (a.data.copy(), b.data.copy()))
    return ConvexityReport(g.name, True, trials, worst, None)


def random_density_pair(d: int, rng=None) -> Tuple[DensityOperator, DensityOperator]:
    """Two independent Hilbert-Schmidt random states (test and demo helper)."""
    gen = as_generator(rng)
    return random_mixed(d, gen), random_mixed(d, gen)


__all__ = [
    "Generator", "LOG", "QUADRATIC", "register_generator", "get_generator", "power_generator",
    "value_functional", "gradient_operator", "score_operator", "score_offset", "expected_score",
    "bregman_divergence", "petz_f_divergence", "support_leak", "ScoreReport", "score_report",
    "ConvexityReport", "check_operator_convexity", "midpoint_convexity_defect", "random_density_pair",
]
