"""Monte Carlo n-copy experiments: classical fixed-basis vs quantum forecasting."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .estimation import crmc_bound, gell_mann_family, gell_mann_matrices, povm_probabilities
from .exceptions import ValidationError
from .hermitian import HermitianMatrix
from .rng import SeededRng, as_generator
from .scoring import bregman_divergence, get_generator
from .states import (DensityOperator, MeasurementBasis, basis_by_name, circular_basis, coherence,
                     computational_basis, floor_eigenvalues, fourier_state, hadamard_basis, make_density)

CLASSICAL = "classical-fixed-basis"
PAULI_TOMOGRAPHY = "quantum-pauli-tomography"
ORACLE = "quantum-oracle-basis"
KINDS = (CLASSICAL, PAULI_TOMOGRAPHY, ORACLE)

__all__ = [
    "Strategy", "RiskReport", "GapReport", "ScalingRow", "sample_outcomes", "classical_estimate",
    "pauli_tomography_estimate", "tomography_estimate", "radial_projection", "tomography_bases", "allocate",
    "estimate_risk", "forecasting_gap", "scaling_study", "default_trials", "trial_risks",
]


@dataclass(frozen=True)
class Strategy:
    """How n copies are measured and turned into a report.

    ``basis`` is the fixed basis of the classical strategy (a name or a
    :class:`MeasurementBasis`); ``eps_est=None`` means the default floor
    ``1/(2n)``.
    """

    kind: str = CLASSICAL
    basis: object = "Z"
    alpha: float = 0.5
    eps_est: Optional[float] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown strategy kind {self.kind!r}; expected one of {', '.join(KINDS)}")
        if not self.alpha > 0.0:
            raise ValidationError(f"smoothing constant must be > 0, got {self.alpha!r}")
        if self.eps_est is not None and not 0.0 <= self.eps_est < 1.0:
            raise ValidationError(f"eps_est must lie in [0, 1), got {self.eps_est!r}")

    @classmethod
    def classical(cls, basis="Z", alpha: float = 0.5, eps_est=None) -> "Strategy":
        return cls(CLASSICAL, basis, alpha, eps_est)

    @classmethod
    def tomography(cls, alpha: float = 0.5, eps_est=None) -> "Strategy":
        return cls(PAULI_TOMOGRAPHY, None, alpha, eps_est)

    @classmethod
    def oracle(cls, alpha: float = 0.5, eps_est=None) -> "Strategy":
        return cls(ORACLE, None, alpha, eps_est)

    def floor_for(self, n: int) -> float:
        return 1.0 / (2.0 * n) if self.eps_est is None else float(self.eps_est)

    def resolve_basis(self, d: int) -> MeasurementBasis:
        if isinstance(self.basis, MeasurementBasis):
            if self.basis.dim != d:
                raise ValidationError(f"strategy basis is {self.basis.dim}-dimensional, state is {d}")
            return self.basis
        return basis_by_name(str(self.basis or "Z"), d)

    def describe(self) -> str:
        if self.kind == CLASSICAL:
            b = self.basis.label if isinstance(self.basis, MeasurementBasis) else self.basis
            return f"{self.kind}[{b}]"
        return self.kind


@dataclass(frozen=True)
class RiskReport:
    risk_mean: float
    risk_stderr: float
    n: int
    trials: int
    strategy: Strategy
    generator: str
    clamp_events: int
    per_trial: np.ndarray = field(repr=False, compare=False, default=None)


@dataclass(frozen=True)
class GapReport:
    gap_mean: float
    gap_stderr: float
    unpaired_stderr: float
    coherence: float
    predicted_gap: float
    n: int
    trials: int
    classical: RiskReport
    quantum: RiskReport

    @property
    def ratio(self) -> float:
        return self.gap_mean / self.predicted_gap if self.predicted_gap > 0 else math.nan


def sample_outcomes(rho: DensityOperator, basis: MeasurementBasis, shots: int, rng=None) -> np.ndarray:
    """Multinomial outcome counts of ``shots`` measurements of ``rho`` in ``basis``."""
    if shots < 0:
        raise ValidationError(f"shots must be >= 0, got {shots}")
    p = povm_probabilities(rho, basis)
    return as_generator(rng).multinomial(int(shots), p)


def _diagonal_state(p: np.ndarray, basis: MeasurementBasis) -> DensityOperator:
    p = np.asarray(p, dtype=float)
    return DensityOperator(HermitianMatrix.from_eigen(p / p.sum(), basis.vectors))


def classical_estimate(counts, basis: MeasurementBasis, alpha: float = 0.5) -> DensityOperator:
    """Add-alpha frequency estimate, diagonal in ``basis``."""
    c = np.asarray(counts, dtype=float)
    if c.shape != (basis.dim,):
        raise ValidationError(f"need {basis.dim} counts, got shape {c.shape}")
    total = float(c.sum())
    if total < 1:
        raise ValidationError("classical estimate needs at least one shot")
    return _diagonal_state((c + alpha) / (total + basis.dim * alpha), basis)


def _prime_factors(d: int) -> List[int]:
    out, k = [], 2
    while d > 1:
        while d % k == 0:
            out.append(k)
            d //= k
        k += 1
    return out


def _mub_vectors(p: int) -> List[np.ndarray]:
    if p == 2:
        return [hadamard_basis().vectors, circular_basis().vectors, np.eye(2, dtype=complex)]
    j = np.arange(p)
    w = np.exp(2j * np.pi / p)
    sets = [np.eye(p, dtype=complex)]
    for a in range(p):
        cols = [w ** ((a * j * j + b * j) % p) / math.sqrt(p) for b in range(p)]
        sets.append(np.stack(cols, axis=1))
    return sets


@lru_cache(maxsize=None)
def tomography_bases(d: int) -> Tuple[MeasurementBasis, ...]:
    """Informationally complete basis set used by the tomography strategy.

    Qubits use X, Y, Z. Prime ``d`` uses its ``d + 1`` mutually unbiased
    bases; composite ``d`` uses tensor products of the prime-factor sets.
    """
    if d < 2:
        raise ValidationError(f"dimension must be >= 2, got {d}")
    if d == 2:
        return (hadamard_basis(), circular_basis(), computational_basis(2))
    sets = [np.eye(1, dtype=complex)]
    for p in _prime_factors(d):
        sets = [np.kron(a, b) for a in sets for b in _mub_vectors(p)]
    return tuple(MeasurementBasis(u, f"mub{k}") for k, u in enumerate(sets))


@lru_cache(maxsize=None)
def _inversion_map(d: int) -> np.ndarray:
    """Least-squares map from basis frequencies to Gell-Mann coordinates."""
    gm = gell_mann_matrices(d)
    rows = []
    for b in tomography_bases(d):
        for proj in b.projectors:
            rows.append([0.5 * np.vdot(proj, g).real for g in gm])
    a = np.asarray(rows)
    pinv = np.linalg.pinv(a)
    if np.linalg.matrix_rank(a) != len(gm):
        raise ValidationError(f"tomography bases for d = {d} are not informationally complete")
    pinv.setflags(write=False)
    return pinv


def allocate(n: int, k: int) -> List[int]:
    """``floor(n/k)`` copies per basis, remainder to the first bases."""
    base, rem = divmod(int(n), k)
    return [base + (1 if i < rem else 0) for i in range(k)]


def _project_simplex(w: np.ndarray) -> np.ndarray:
    u = np.sort(w)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, len(w) + 1)
    k = idx[u - css / idx > 0][-1]
    return np.maximum(w - css[k - 1] / k, 0.0)


def radial_projection(r, eps_est: float = 0.0) -> np.ndarray:
    """Pull a Bloch vector outside the unit ball back to norm ``1 - eps_est``.

    Vectors already inside are returned unchanged (the same object).
    """
    norm = float(np.linalg.norm(r))
    if norm <= 1.0:
        return r
    return np.asarray(r, dtype=float) * ((1.0 - eps_est) / norm)


def tomography_estimate(counts_per_basis, d: int, alpha: float = 0.5, eps_est: float = 0.0
                        ) -> Tuple[DensityOperator, bool]:
    """Linear-inversion estimate from counts in :func:`tomography_bases` order.

    Each basis contributes add-alpha frequencies. For qubits an estimate
    outside the Bloch ball is rescaled radially to norm ``1 - eps_est``;
    for larger ``d`` the spectrum is projected onto the simplex. The result
    is then floored at ``eps_est``. Returns the state and whether any
    regularization fired.
    """
    bases = tomography_bases(d)
    counts = [np.asarray(c, dtype=float) for c in counts_per_basis]
    if len(counts) != len(bases) or any(c.shape != (d,) for c in counts):
        raise ValidationError(f"need {len(bases)} count vectors of length {d}")
    if any(c.sum() < 1 for c in counts):
        raise ValidationError("every tomography basis needs at least one copy (empty allocation)")
    freq = np.concatenate([(c + alpha) / (c.sum() + d * alpha) for c in counts]) - 1.0 / d
    theta = _inversion_map(d) @ freq
    clamped = False
    if d == 2:
        projected = radial_projection(theta, eps_est)
        clamped = projected is not theta
        theta = projected
    m = np.eye(d, dtype=complex) / d + 0.5 * sum(t * g for t, g in zip(theta, gell_mann_matrices(d)))
    h = HermitianMatrix(m)
    w = h.eigenvalues
    if d > 2 and float(w[0]) < 0.0:
        w = _project_simplex(w)
        clamped = True
    w = np.clip(w, 0.0, None)
    rho = DensityOperator(HermitianMatrix.from_eigen(w / w.sum(), h.eigenvectors))
    rho, floored = floor_eigenvalues(rho, eps_est)
    return rho, clamped or floored


def pauli_tomography_estimate(counts_xyz, alpha: float = 0.5, eps_est: float = 0.0) -> DensityOperator:
    """Qubit tomography from (+, -) counts in the X, Y and Z bases."""
    return tomography_estimate(counts_xyz, 2, alpha, eps_est)[0]


def _one_trial(rho: DensityOperator, strategy: Strategy, g, n: int, rng: np.random.Generator,
               eps_est: float) -> Tuple[float, bool]:
    d = rho.dim
    if strategy.kind == PAULI_TOMOGRAPHY:
        bases = tomography_bases(d)
        counts = [sample_outcomes(rho, b, k, rng) for b, k in zip(bases, allocate(n, len(bases)))]
        est, clamped = tomography_estimate(counts, d, strategy.alpha, eps_est)
    else:
        basis = strategy.resolve_basis(d) if strategy.kind == CLASSICAL else MeasurementBasis.eigenbasis(rho)
        est = classical_estimate(sample_outcomes(rho, basis, n, rng), basis, strategy.alpha)
        est, clamped = floor_eigenvalues(est, eps_est)
    return bregman_divergence(rho, est, g), clamped


def trial_risks(rho, strategy: Strategy, g, n: int, trials: int, seed: int = 0,
                n_jobs: int = 1) -> Tuple[np.ndarray, int]:
    """Per-trial score gaps; trial ``t`` draws from stream ``SeededRng(seed, t)``."""
    rho = make_density(rho)
    if n < 1 or trials < 1:
        raise ValidationError(f"need n >= 1 and trials >= 1, got n={n}, trials={trials}")
    g = get_generator(g)
    if strategy.kind == PAULI_TOMOGRAPHY and n < len(tomography_bases(rho.dim)):
        raise ValidationError(f"tomography needs n >= {len(tomography_bases(rho.dim))} copies "
                              f"in d = {rho.dim} (empty allocation)")
    eps = strategy.floor_for(n)

    def run(idx):
        return [_one_trial(rho, strategy, g, n, SeededRng(seed, t).generator(), eps) for t in idx]

    chunks = [range(t, min(t + 64, trials)) for t in range(0, trials, 64)]
    if n_jobs > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            parts = list(pool.map(run, chunks))
    else:
        parts = [run(c) for c in chunks]
    flat = [r for part in parts for r in part]
    return np.array([r for r, _ in flat]), int(sum(c for _, c in flat))


def _stderr(x: np.ndarray) -> float:
    return float(np.std(x, ddof=1) / math.sqrt(len(x))) if len(x) > 1 else 0.0


def estimate_risk(rho, strategy: Strategy, g, n: int, trials: int, seed: int = 0,
                  n_jobs: int = 1) -> RiskReport:
    """Monte Carlo estimate of the expected score gap of ``strategy`` at ``n`` copies."""
    risks, clamps = trial_risks(rho, strategy, g, n, trials, seed, n_jobs)
    return RiskReport(float(np.mean(risks)), _stderr(risks), n, trials, strategy,
                      get_generator(g).name, clamps, risks)


def forecasting_gap(rho, g, n: int, trials: int, seed: int = 0, classical: Optional[Strategy] = None,
                    quantum: Optional[Strategy] = None, n_jobs: int = 1) -> GapReport:
    """Paired comparison of a classical and a quantum strategy on common trial streams.

    Defaults: classical Z-basis add-half estimator and the eigenbasis
    (oracle) quantum strategy. The predicted gap is ``C(rho)/n`` with the
    coherence taken in the classical basis.
    """
    rho = make_density(rho)
    classical = classical or Strategy.classical()
    quantum = quantum or Strategy.oracle()
    c = estimate_risk(rho, classical, g, n, trials, seed, n_jobs)
    q = estimate_risk(rho, quantum, g, n, trials, seed, n_jobs)
    coh = coherence(rho, classical.resolve_basis(rho.dim))
    return GapReport(c.risk_mean - q.risk_mean, _stderr(c.per_trial - q.per_trial),
                     math.hypot(c.risk_stderr, q.risk_stderr), coh, coh / n, n, trials, c, q)


def default_trials(d: int) -> int:
    return 2000 if d == 2 else 500


@dataclass(frozen=True)
class ScalingRow:
    d: int
    n: int
    generator: str
    classical_risk: float
    classical_stderr: float
    quantum_risk: float
    quantum_stderr: float
    gap: float
    gap_stderr: float
    coherence: float
    predicted_gap: float
    crmc_bound: float
    clamp_events: int
    seed: int


def _crmc_for(d: int, rho: DensityOperator, g, n: int) -> float:
    fam = gell_mann_family(d)
    try:
        return crmc_bound(fam, fam.coordinates(rho), g, n)
    except ArithmeticError:
        return math.nan


def scaling_study(dims: Sequence[int], ns: Sequence[int], g, trials: Optional[int] = None, seed: int = 0,
                  classical: Optional[Strategy] = None, quantum: Optional[Strategy] = None,
                  n_jobs: int = 1) -> List[ScalingRow]:
    """Grid over dimensions and copy counts at the Fourier (maximally coherent) state.

    The bound column is the full-state CRMC bound at the floored state.
    """
    dims, ns = [int(d) for d in dims], [int(n) for n in ns]
    if not dims or any(not 2 <= d <= 6 for d in dims):
        raise ValidationError(f"dims must be a non-empty subset of 2..6, got {dims}")
    if not ns or any(n < 1 for n in ns) or ns != sorted(ns):
        raise ValidationError(f"ns must be ascending positive integers, got {ns}")
    quantum = quantum or Strategy.tomography()
    name = get_generator(g).name
    rows = []
    for d in dims:
        rho = fourier_state(d)
        t = trials or default_trials(d)
        for n in ns:
            r = forecasting_gap(rho, g, n, t, seed, classical, quantum, n_jobs)
            rows.append(ScalingRow(d, n, name, r.classical.risk_mean, r.classical.risk_stderr,
                                   r.quantum.risk_mean, r.quantum.risk_stderr, r.gap_mean, r.gap_stderr,
                                   r.coherence, r.predicted_gap, _crmc_for(d, rho, g, n),
                                   r.classical.clamp_events + r.quantum.clamp_events, seed))
    return rows
