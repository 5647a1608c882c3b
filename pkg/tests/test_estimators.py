import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from santalo.borell import equality_triple, profile_m
from santalo.estimators import (
    BorellFit,
    DeficitEstimator,
    FMCenter,
    FunctionalStabilityFit,
    LegendreStabilityFit,
    SantaloPoint,
)
from santalo.transform import GridField


def test_santalo_point_estimator():
    X = np.array([[0.0, 0.0], [3.0, 0.0], [0.0, 3.0]])
    est = SantaloPoint(tol=1e-10).fit(X)
    assert np.allclose(est.center_, [1.0, 1.0], atol=1e-7)
    assert est.product_ == pytest.approx(6.75)
    assert est.n_features_in_ == 2
    assert np.allclose(est.transform(X).mean(axis=0), 0, atol=1e-7)


def test_params_and_clone():
    est = LegendreStabilityFit(tol=1e-5, restarts=3)
    assert est.get_params()["restarts"] == 3
    other = clone(est).set_params(seed=5)
    assert other.seed == 5 and est.seed == 0


@pytest.mark.parametrize("est", [SantaloPoint(), FMCenter(), LegendreStabilityFit(), FunctionalStabilityFit()])
def test_unfitted(est):
    with pytest.raises(NotFittedError):
        if hasattr(est, "transform"):
            est.transform(np.zeros((1, 2)))
        elif hasattr(est, "score"):
            est.score()
        else:
            from sklearn.utils.validation import check_is_fitted

            check_is_fitted(est)


def test_field_estimators():
    lo, hi = -6 * np.ones(2), 6 * np.ones(2)
    v = np.array([0.5, -0.25])
    f = GridField.from_function(lambda x: np.exp(-0.5 * np.sum((x - v) ** 2, -1)), lo, hi, 65, outside=0.0)
    assert np.allclose(FMCenter().fit(f).center_, v, atol=1e-7)
    phi = GridField.from_function(lambda x: 0.5 * np.sum(x * x, -1), lo, hi, 97)
    dec = DeficitEstimator(dual=(lo, hi)).fit(phi)
    assert dec.eps_ < 1e-4
    g = GridField.from_function(lambda x: np.exp(-np.sum(x * x, -1)), lo, hi, 65, outside=0.0)
    fit = FunctionalStabilityFit(center=np.zeros(2)).fit(g, g)
    assert fit.xi_ == pytest.approx(1.0, abs=1e-3) and fit.score() > -1e-3


def test_borell_estimator():
    m = profile_m(1.0, 1.0, 1.0)
    _, F, G = equality_triple(m, 2.0, 0.5)
    est = BorellFit().fit(m, F, G)
    assert est.a_ == pytest.approx(0.5, rel=1e-3) and est.b_ == pytest.approx(2.0, rel=1e-3)
    assert est.ratio_ == pytest.approx(1.0, abs=1e-6)
