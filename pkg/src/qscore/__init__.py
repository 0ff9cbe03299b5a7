"""Quantum proper scoring rules, divergences, Fisher information and forecasting simulations."""

__version__ = "0.1.0"

from .exceptions import DomainError, QScoreError, SingularityError, ValidationError
from .hermitian import (HermitianMatrix, ScalarFunction, apply_function, directional_derivative_trace,
                        divided_difference_first, frechet_derivative, hessian_bilinear_form,
                        hessian_quadratic_form, hs_inner, jacobi_eigh)
from .rng import SeededRng
from .states import (BlochVector, DensityOperator, MeasurementBasis, basis_by_name, bloch_to_density,
                     coherence, computational_basis, dephase, density_to_bloch, fourier_state,
                     make_density, maximally_mixed, plus_state, von_neumann_entropy)
from .scoring import (LOG, QUADRATIC, Generator, bregman_divergence, check_operator_convexity,
                      expected_score, get_generator, petz_f_divergence, score_operator, score_report)
from .estimation import (FisherReport, ParametrizedFamily, Povm, classical_fisher, crmc_bound,
                         povm_probabilities, qfi_matrix, sld_operators)
from .simulator import (GapReport, RiskReport, Strategy, estimate_risk, forecasting_gap, sample_outcomes,
                        scaling_study)
