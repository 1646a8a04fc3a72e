import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.model_selection import cross_val_score

from conftest import scalar_problem
from ensemble_oc.costs import total_cost
from ensemble_oc.estimator import EnsembleOptimalControl
from ensemble_oc.exceptions import InputError


def test_fit_two_atoms_matches_closed_form():
    est = EnsembleOptimalControl(scalar_problem(), solver="lq_exact").fit([[0.0], [1.0]])
    assert est.control_[0, 0] == pytest.approx(-0.25, abs=1e-14)
    assert est.value_ == pytest.approx(0.375, abs=1e-14)
    assert est.n_features_in_ == 1


def test_sample_weight_defines_the_measure():
    X = [[0.5], [1.0]]
    est = EnsembleOptimalControl(scalar_problem()).fit(X, sample_weight=[1.0, 0.0])
    assert est.value_ == pytest.approx(0.125, abs=1e-14)
    est2 = EnsembleOptimalControl(scalar_problem()).fit(X, sample_weight=[3.0, 0.0])
    assert est2.value_ == est.value_


def test_predict_score_transform():
    est = EnsembleOptimalControl(scalar_problem()).fit([[0.0], [1.0]])
    X = np.array([[0.0], [0.5], [1.0]])
    pred = est.predict(X)
    np.testing.assert_array_equal(pred, [total_cost(est.problem, est.control_, x) for x in X])
    assert est.score([[0.0], [1.0]]) == pytest.approx(-0.375, abs=1e-14)
    states = est.transform(X)
    assert states.shape == (3, 2)
    np.testing.assert_array_equal(states[:, 0], 1.0)


def test_sklearn_protocol():
    est = EnsembleOptimalControl(scalar_problem(), solver="nelder_mead", solver_options={"f_tol": 1e-12})
    params = est.get_params()
    assert params["solver"] == "nelder_mead"
    assert clone(est).get_params()["solver_options"] == {"f_tol": 1e-12}
    with pytest.raises(NotFittedError):
        est.predict([[0.1]])
    rng = np.random.default_rng(0)
    scores = cross_val_score(EnsembleOptimalControl(scalar_problem()), rng.uniform(0, 1, size=(40, 1)), cv=4)
    assert np.all(scores < 0) and np.all(scores > -1)


def test_input_validation():
    est = EnsembleOptimalControl(scalar_problem())
    with pytest.raises(InputError):
        est.fit([[0.0, 1.0]])
    with pytest.raises(ValueError):
        est.fit([[np.nan]])
    with pytest.raises(InputError):
        est.fit([[0.0]], sample_weight=[-1.0])
    with pytest.raises(InputError):
        EnsembleOptimalControl().fit([[0.0]])
