import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from qscore.estimators import BasisTomography, Tomography
from qscore.exceptions import ValidationError
from qscore.rng import SeededRng
from qscore.scoring import expected_score
from qscore.simulator import classical_estimate, tomography_estimate
from qscore.states import computational_basis, density_to_bloch, plus_state, random_mixed


def test_params_round_trip():
    est = BasisTomography(dim=3, basis="fourier", alpha=1.0, eps_est=1e-3)
    assert est.get_params() == {"dim": 3, "basis": "fourier", "alpha": 1.0, "eps_est": 1e-3}
    c = clone(est)
    assert c.get_params() == est.get_params() and c is not est
    est.set_params(alpha=2.0)
    assert est.alpha == 2.0
    assert Tomography().get_params() == {"dim": 2, "alpha": 0.5, "eps_est": None}


def test_not_fitted():
    with pytest.raises(NotFittedError):
        BasisTomography().predict_proba()
    with pytest.raises(NotFittedError):
        Tomography().expected_score(plus_state())


def test_basis_fit_matches_functional_estimate():
    x = np.array([0, 0, 1, 0, 1, 0, 0, 0])
    est = BasisTomography(eps_est=0.0).fit(x)
    want = classical_estimate([6, 2], computational_basis(), 0.5)
    assert np.allclose(est.density_.data, want.data)
    assert est.counts_.tolist() == [6, 2] and est.n_samples_ == 8
    assert np.allclose(est.predict_proba(), [6.5 / 9, 2.5 / 9])


def test_basis_default_floor():
    est = BasisTomography().fit(np.zeros(4, dtype=int))
    # add-half gives 0.1; the 1/(2n) floor raises it to 0.125 before renormalizing
    assert est.clamped_
    assert est.density_.eigenvalues[0] == pytest.approx(0.125 / 1.025)


def test_basis_score_and_expected_score():
    rho = random_mixed(2, 3)
    est = BasisTomography()
    x = est.sample(rho, 5000, SeededRng(1))
    est.fit(x)
    ll = est.score(x)
    p = est.predict_proba()
    assert ll == pytest.approx(np.mean(np.log(p[x])))
    assert est.expected_score(rho) == pytest.approx(expected_score(rho, est.density_, "log"))


def test_tomography_fit_matches_functional_estimate():
    est = Tomography()
    x = est.sample(random_mixed(2, 5), 300, SeededRng(2))
    assert x.shape == (300, 2)
    est.fit(x)
    want, clamped = tomography_estimate(est.counts_, 2, 0.5, 1 / 600)
    assert np.allclose(est.density_.data, want.data) and est.clamped_ == clamped
    assert est.predict_proba().shape == (3, 2)
    assert est.score(x) < 0


def test_tomography_converges():
    rho = random_mixed(2, 7)
    est = Tomography().fit(Tomography().sample(rho, 60_000, SeededRng(3)))
    assert np.max(np.abs(density_to_bloch(est.density_).as_array() - density_to_bloch(rho).as_array())) < 0.02


def test_tomography_qutrit():
    rho = random_mixed(3, 4)
    est = Tomography(dim=3).fit(Tomography(dim=3).sample(rho, 20_000, SeededRng(4)))
    assert np.max(np.abs(est.density_.data - rho.data)) < 0.03


@pytest.mark.parametrize("bad", [[], [0, 2], [0.5, 1], [-1]])
def test_basis_rejects_bad_outcomes(bad):
    with pytest.raises(ValidationError):
        BasisTomography().fit(bad)


@pytest.mark.parametrize("bad", [[[0, 0, 1]], [[3, 0]], [[0, 2]]])
def test_tomography_rejects_bad_rows(bad):
    with pytest.raises(ValidationError):
        Tomography().fit(bad)


def test_tomography_needs_every_setting():
    with pytest.raises(ValidationError, match="empty allocation"):
        Tomography().fit([[0, 0], [1, 1]])
