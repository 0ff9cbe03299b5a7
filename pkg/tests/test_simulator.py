import math

import numpy as np
import pytest

from qscore.estimation import crmc_details, gell_mann_family
from qscore.exceptions import ValidationError
from qscore.rng import SeededRng
from qscore.simulator import (Strategy, allocate, classical_estimate, estimate_risk, forecasting_gap,
                              pauli_tomography_estimate, radial_projection, sample_outcomes, scaling_study,
                              tomography_bases, tomography_estimate, trial_risks)
from qscore.states import (bloch_to_density, computational_basis, density_to_bloch, fourier_state,
                           hadamard_basis, make_density, maximally_mixed, plus_state, random_mixed)

LOG2 = math.log(2)


class TestSampling:
    def test_deterministic_outcome(self):
        assert sample_outcomes(plus_state(), hadamard_basis(), 100, SeededRng(1)).tolist() == [100, 0]

    def test_zero_shots(self):
        assert sample_outcomes(maximally_mixed(2), computational_basis(), 0, SeededRng(1)).tolist() == [0, 0]

    def test_binomial_spread(self):
        c = sample_outcomes(plus_state(), computational_basis(), 100_000, SeededRng(2))
        assert c.sum() == 100_000
        assert abs(c[0] - 50_000) < 5 * math.sqrt(100_000 / 4)

    def test_reproducible(self):
        a = sample_outcomes(random_mixed(3, 1), computational_basis(3), 50, SeededRng(9, 4))
        b = sample_outcomes(random_mixed(3, 1), computational_basis(3), 50, SeededRng(9, 4))
        assert a.tolist() == b.tolist()

    def test_negative_shots(self):
        with pytest.raises(ValidationError):
            sample_outcomes(plus_state(), computational_basis(), -1)


class TestClassicalEstimate:
    def test_symmetric(self):
        assert np.allclose(classical_estimate([50, 50], computational_basis()).data, np.eye(2) / 2)

    def test_add_half(self):
        est = classical_estimate([100, 0], computational_basis(), 0.5)
        assert np.allclose(np.diag(est.data).real, [100.5 / 101, 0.5 / 101], atol=1e-15)

    def test_z_data_on_plus_tends_to_half(self):
        c = sample_outcomes(plus_state(), computational_basis(), 200_000, SeededRng(3))
        est = classical_estimate(c, computational_basis())
        assert np.max(np.abs(est.data - np.eye(2) / 2)) < 5e-3
        from qscore.scoring import expected_score
        assert abs(expected_score(plus_state(), est, "log") - (math.log(0.5) + 1)) < 1e-4

    def test_zero_shots_rejected(self):
        with pytest.raises(ValidationError):
            classical_estimate([0, 0], computational_basis())


class TestTomography:
    def test_all_plus_in_x(self):
        est = pauli_tomography_estimate([[1000, 0], [500, 500], [500, 500]], alpha=0.5, eps_est=1e-3)
        r = density_to_bloch(est).as_array()
        assert r[0] > 0.99 and abs(r[1]) < 1e-12 and abs(r[2]) < 1e-12
        assert est.eigenvalues[0] >= 1e-3 / (1 + 2e-3)

    def test_maximally_mixed_limit(self):
        c = [sample_outcomes(maximally_mixed(2), b, 100_000, SeededRng(5, k))
             for k, b in enumerate(tomography_bases(2))]
        r = density_to_bloch(pauli_tomography_estimate(c)).as_array()
        assert np.max(np.abs(r)) < 0.02

    def test_radial_projection_norm(self):
        r = radial_projection(np.array([0.8, 0.8, 0.4]), 0.01)
        assert abs(np.linalg.norm(r) - 0.99) < 1e-15

    def test_radial_projection_noop_inside(self):
        v = np.array([0.1, 0.2, 0.3])
        assert radial_projection(v, 0.1) is v

    def test_outside_ball_then_floored(self):
        # r = (0.8, 0.8, 0.4) has norm 1.2
        est, clamped = tomography_estimate([[90, 10], [90, 10], [70, 30]], 2, alpha=1e-12, eps_est=0.01)
        assert clamped
        # flooring renormalizes, so the smallest eigenvalue is eps / (1 + excess)
        assert est.eigenvalues[0] >= 0.01 / (1 + 2 * 0.01)
        direction = density_to_bloch(est).as_array()
        assert np.allclose(direction / np.linalg.norm(direction), np.array([0.8, 0.8, 0.4]) / 1.2)

    def test_empty_allocation(self):
        with pytest.raises(ValidationError, match="empty allocation"):
            pauli_tomography_estimate([[3, 0], [1, 1], [0, 0]])

    @pytest.mark.parametrize("d", [2, 3, 4, 5, 6])
    def test_bases_informationally_complete(self, d):
        bases = tomography_bases(d)
        mats = np.array([p.reshape(-1) for b in bases for p in b.projectors])
        assert np.linalg.matrix_rank(mats) == d * d

    @pytest.mark.parametrize("d", [3, 5])
    def test_prime_bases_mutually_unbiased(self, d):
        bases = tomography_bases(d)
        assert len(bases) == d + 1
        for i in range(len(bases)):
            for j in range(i + 1, len(bases)):
                overlap = np.abs(bases[i].vectors.conj().T @ bases[j].vectors) ** 2
                assert np.allclose(overlap, 1 / d)

    @pytest.mark.parametrize("d", [3, 4])
    def test_consistent_in_higher_dimension(self, d):
        rho = random_mixed(d, 4)
        c = [sample_outcomes(rho, b, 200_000, SeededRng(6, k)) for k, b in enumerate(tomography_bases(d))]
        est, _ = tomography_estimate(c, d, 0.5, 0.0)
        assert np.max(np.abs(est.data - rho.data)) < 0.01

    def test_simplex_projection_valid(self):
        rho = fourier_state(3)
        c = [sample_outcomes(rho, b, 5, SeededRng(7, k)) for k, b in enumerate(tomography_bases(3))]
        est, _ = tomography_estimate(c, 3, 0.5, 0.1)
        assert est.eigenvalues[0] >= 0.1 / (1 + 3 * 0.1)
        assert abs(np.trace(est.data).real - 1) < 1e-12

    def test_allocate(self):
        assert allocate(10, 3) == [4, 3, 3]
        assert sum(allocate(256, 12)) == 256


class TestStrategy:
    def test_validation(self):
        with pytest.raises(ValidationError):
            Strategy("bogus")
        with pytest.raises(ValidationError, match="smoothing"):
            Strategy.classical(alpha=0.0)

    def test_default_floor(self):
        assert Strategy.classical().floor_for(8) == 1 / 16
        assert Strategy.classical(eps_est=1e-3).floor_for(8) == 1e-3


class TestRisk:
    def test_quadratic_risk_order_one_over_n(self):
        for n in (100, 400):
            r = estimate_risk(maximally_mixed(2), Strategy.classical(), "quadratic", n, 2000, 1)
            assert 0.35 < n * r.risk_mean < 0.65

    def test_oracle_pure_state_single_copy(self):
        r = estimate_risk(plus_state(), Strategy.oracle(alpha=1e-9, eps_est=1e-9), "log", 1, 200, 2)
        assert r.risk_mean < 1e-6

    def test_oracle_default_regularization_at_one_copy(self):
        # floor 1/(2n) = 1/2 turns (0.75, 0.25) into (0.6, 0.4)
        r = estimate_risk(plus_state(), Strategy.oracle(), "log", 1, 50, 2)
        assert abs(r.risk_mean + math.log(0.6)) < 1e-12 and r.risk_stderr == 0.0

    def test_classical_bias_floor(self):
        for n in (256, 1024):
            r = estimate_risk(plus_state(), Strategy.classical(), "log", n, 500, 3)
            assert LOG2 - 0.05 <= r.risk_mean <= LOG2 + 0.05

    def test_per_trial_nonnegative(self, rng):
        rho = random_mixed(3, rng)
        for s in (Strategy.classical(), Strategy.tomography(), Strategy.oracle()):
            for g in ("log", "quadratic"):
                risks, _ = trial_risks(rho, s, g, 40, 100, 5)
                assert risks.min() >= -1e-9

    def test_report_fields(self):
        r = estimate_risk(random_mixed(2, 3), Strategy.tomography(), "log", 30, 300, 4)
        assert r.risk_mean >= -3 * r.risk_stderr
        assert r.risk_stderr == pytest.approx(np.std(r.per_trial, ddof=1) / math.sqrt(300), rel=1e-12)
        assert r.trials == 300 and r.n == 30 and r.generator == "log"

    def test_clamp_events_counted(self):
        r = estimate_risk(plus_state(), Strategy.tomography(), "log", 30, 50, 4)
        assert 0 < r.clamp_events <= 50

    def test_thread_count_does_not_change_bits(self):
        rho = random_mixed(2, 8)
        a = trial_risks(rho, Strategy.tomography(), "log", 20, 300, 11, n_jobs=1)
        b = trial_risks(rho, Strategy.tomography(), "log", 20, 300, 11, n_jobs=4)
        assert np.array_equal(a[0], b[0]) and a[1] == b[1]

    def test_tomography_too_few_copies(self):
        with pytest.raises(ValidationError, match="empty allocation"):
            estimate_risk(plus_state(), Strategy.tomography(), "log", 2, 10)

    def test_invalid_counts(self):
        with pytest.raises(ValidationError):
            estimate_risk(plus_state(), Strategy.classical(), "log", 0, 10)


class TestTomographyConsistency:
    RHO = (0.3, -0.4, 0.5)

    def _bound_and_design(self):
        fam = gell_mann_family(2)
        det = crmc_details(fam, np.array(self.RHO), "log", 1)
        # separate X, Y, Z measurements on n/3 copies each
        design = 0.5 * np.trace(det.hessian @ np.diag(3 * (1 - np.array(self.RHO) ** 2)))
        return det.bound, design

    def test_risk_decreases(self):
        rho = bloch_to_density(self.RHO)
        for n in (64, 128):
            small = estimate_risk(rho, Strategy.tomography(), "log", n, 400, 1)
            large = estimate_risk(rho, Strategy.tomography(), "log", 4 * n, 400, 1)
            assert large.risk_mean < small.risk_mean

    def test_matches_design_asymptotics(self):
        _, design = self._bound_and_design()
        r = estimate_risk(bloch_to_density(self.RHO), Strategy.tomography(), "log", 512, 800, 2)
        assert abs(512 * r.risk_mean - design) < 0.1 * design

    @pytest.mark.xfail(strict=True, reason="per-basis Pauli design sits 3.2x above the bound for this state")
    def test_within_literal_band_of_bound(self):
        bound, _ = self._bound_and_design()
        r = estimate_risk(bloch_to_density(self.RHO), Strategy.tomography(), "log", 512, 800, 2)
        assert 0.3 * bound <= 512 * r.risk_mean <= 3 * bound


class TestGap:
    def test_report_consistency(self):
        rho = make_density(0.9 * plus_state().data + 0.05 * np.eye(2))
        g = forecasting_gap(rho, "log", 16, 400, 3)
        assert abs(g.gap_mean - (g.classical.risk_mean - g.quantum.risk_mean)) <= 1e-12
        assert g.gap_stderr <= g.unpaired_stderr
        assert g.predicted_gap == pytest.approx(g.coherence / 16)
        assert g.ratio == pytest.approx(g.gap_mean / g.predicted_gap)

    def test_incoherent_state_no_gap(self):
        g = forecasting_gap(make_density(np.diag([0.3, 0.7])), "log", 32, 500, 4)
        assert abs(g.gap_mean) <= 3 * g.gap_stderr + 1e-15
        assert g.coherence < 1e-15

    def test_incoherent_state_tomography_quantum(self):
        g = forecasting_gap(make_density(np.diag([0.3, 0.7])), "log", 96, 1000, 4,
                            quantum=Strategy.tomography())
        # tomography spends copies on X and Y, so it cannot beat the aligned classical basis
        assert g.gap_mean <= 3 * g.gap_stderr

    def test_paired_stderr_smaller(self):
        for seed in range(3):
            g = forecasting_gap(random_mixed(2, seed), "log", 24, 300, seed, quantum=Strategy.tomography())
            assert g.gap_stderr <= g.unpaired_stderr

    def test_thread_independent(self):
        a = forecasting_gap(plus_state(), "log", 12, 200, 7, quantum=Strategy.tomography(), n_jobs=1)
        b = forecasting_gap(plus_state(), "log", 12, 200, 7, quantum=Strategy.tomography(), n_jobs=3)
        assert (a.gap_mean, a.gap_stderr) == (b.gap_mean, b.gap_stderr)


class TestScaling:
    def test_single_cell_matches_gap(self):
        row = scaling_study([2], [1], "log", 300, 5, quantum=Strategy.oracle())[0]
        g = forecasting_gap(fourier_state(2), "log", 1, 300, 5)
        assert row.gap == g.gap_mean and row.classical_risk == g.classical.risk_mean
        assert row.coherence == pytest.approx(LOG2, abs=1e-12)

    def test_bound_halves(self):
        rows = scaling_study([2, 3], [8, 16], "log", 20, 1)
        by = {(r.d, r.n): r.crmc_bound for r in rows}
        for d in (2, 3):
            assert by[(d, 16)] == by[(d, 8)] / 2

    def test_grid_and_determinism(self):
        a = scaling_study([2, 3], [12, 24], "log", 30, 9)
        b = scaling_study([2, 3], [12, 24], "log", 30, 9, n_jobs=2)
        assert [(r.d, r.n) for r in a] == [(2, 12), (2, 24), (3, 12), (3, 24)]
        assert a == b

    def test_n_gap_grows_with_dimension(self):
        rows = scaling_study([2, 3, 4], [128], "log", 100, 3)
        ng = [r.n * r.gap for r in rows]
        assert ng[0] < ng[1] < ng[2]

    def test_validation(self):
        with pytest.raises(ValidationError):
            scaling_study([7], [10], "log")
        with pytest.raises(ValidationError):
            scaling_study([2], [20, 10], "log")
