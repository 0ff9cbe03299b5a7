"""Tomography estimators with a scikit-learn style interface.

Estimators are fitted on raw outcome records and expose the estimate as
``density_``. ``score`` is the mean log-likelihood of held-out outcomes,
so larger is better, as in scikit-learn.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .estimation import povm_probabilities
from .rng import as_generator
from .scoring import expected_score
from .simulator import allocate, classical_estimate, tomography_bases, tomography_estimate
from .states import MeasurementBasis, basis_by_name, floor_eigenvalues
from .validation import check_density, check_generator, check_outcomes


class _StateEstimator(BaseEstimator):

    def _floor(self, n):
        return 1.0 / (2.0 * n) if self.eps_est is None else float(self.eps_est)

    def expected_score(self, rho, generator="log"):
        """Expected score ``Tr(rho S(density_))`` of the fitted report."""
        check_is_fitted(self, "density_")
        return expected_score(check_density(rho), self.density_, check_generator(generator))


class BasisTomography(_StateEstimator):
    """Add-alpha frequency estimate from outcomes in one fixed basis.

    Parameters
    ----------
    dim : int
    basis : str or MeasurementBasis
    alpha : float
        Smoothing added to every count.
    eps_est : float or None
        Eigenvalue floor; None means ``1/(2n)``.
    """

    def __init__(self, dim=2, basis="Z", alpha=0.5, eps_est=None):
        self.dim = dim
        self.basis = basis
        self.alpha = alpha
        self.eps_est = eps_est

    def _basis(self):
        return self.basis if isinstance(self.basis, MeasurementBasis) else basis_by_name(self.basis, self.dim)

    def fit(self, X, y=None):
        x = check_outcomes(X, self.dim)
        basis = self._basis()
        counts = np.bincount(x, minlength=self.dim)
        est = classical_estimate(counts, basis, self.alpha)
        self.density_, self.clamped_ = floor_eigenvalues(est, self._floor(len(x)))
        self.counts_ = counts
        self.n_samples_ = len(x)
        return self

    def predict_proba(self, X=None):
        check_is_fitted(self, "density_")
        return povm_probabilities(self.density_, self._basis())

    def score(self, X, y=None):
        x = check_outcomes(X, self.dim)
        return float(np.mean(np.log(self.predict_proba()[x])))

    def sample(self, rho, n, rng=None):
        """Draw ``n`` outcome indices from ``rho`` measured in this basis."""
        p = povm_probabilities(check_density(rho), self._basis())
        return as_generator(rng).choice(self.dim, size=int(n), p=p)


class Tomography(_StateEstimator):
    """Linear-inversion tomography over the informationally complete basis set.

    ``X`` rows are ``(setting, outcome)`` with settings indexed as in
    :func:`qscore.simulator.tomography_bases` (X, Y, Z for a qubit).
    """

    def __init__(self, dim=2, alpha=0.5, eps_est=None):
        self.dim = dim
        self.alpha = alpha
        self.eps_est = eps_est

    def fit(self, X, y=None):
        bases = tomography_bases(self.dim)
        x = check_outcomes(X, self.dim, len(bases))
        counts = np.zeros((len(bases), self.dim), dtype=np.int64)
        np.add.at(counts, (x[:, 0], x[:, 1]), 1)
        self.density_, self.clamped_ = tomography_estimate(counts, self.dim, self.alpha, self._floor(len(x)))
        self.counts_ = counts
        self.n_samples_ = len(x)
        return self

    def predict_proba(self, X=None):
        """Outcome distribution of the fitted state, one row per setting."""
        check_is_fitted(self, "density_")
        return np.array([povm_probabilities(self.density_, b) for b in tomography_bases(self.dim)])

    def score(self, X, y=None):
        x = check_outcomes(X, self.dim, len(tomography_bases(self.dim)))
        p = self.predict_proba()
        return float(np.mean(np.log(p[x[:, 0], x[:, 1]])))

    def sample(self, rho, n, rng=None):
        """Draw ``n`` ``(setting, outcome)`` rows, copies split evenly over settings."""
        rho = check_density(rho)
        g = as_generator(rng)
        rows = []
        for s, (b, k) in enumerate(zip(tomography_bases(self.dim), allocate(n, len(tomography_bases(self.dim))))):
            out = g.choice(self.dim, size=k, p=povm_probabilities(rho, b))
            rows.append(np.column_stack([np.full(k, s), out]))
        return np.vstack(rows)
