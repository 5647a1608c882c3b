"""Estimator-style wrappers (scikit-learn conventions).

Hyperparameters are constructor arguments, ``fit`` stores results in
trailing-underscore attributes and returns ``self``. Inputs are the
library's own objects (point clouds, grid fields, half-line functions),
since these problems are not tabular.
"""

from __future__ import annotations

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .borell import borell_fit
from .functional import Convention, fm_center
from .geometry.bodies import Polytope, body_measures
from .geometry.ellipsoids import bm_ball_report
from .geometry.santalo import santalo_point
from .stability import best_center_deficit, stability_fit_functional, stability_fit_legendre
from .weights import validate_weight

_EXP = {"kind": "exp", "rate": 1.0}


class SantaloPoint(TransformerMixin, BaseEstimator):
    """Santalo point of the convex hull of a point cloud.

    Parameters
    ----------
    tol : float
        Scale-free gradient tolerance of the minimization.

    Attributes
    ----------
    center_ : ndarray
        Minimizer of ``z -> V(K^z)``.
    product_ : float
        ``V(K) V(K^center_)``.
    log_bm_ball_ : float
        Upper bound on the log Banach-Mazur distance to the ball.
    """

    def __init__(self, tol=1e-9):
        self.tol = tol

    def fit(self, X, y=None):
        X = check_array(X)
        body = Polytope(X)
        res = santalo_point(body, tol=self.tol)
        self.center_ = res.z
        self.product_ = res.product
        self.centroid_ = body_measures(body).centroid
        self.log_bm_ball_ = bm_ball_report(body)["log_lambda"]
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        """Translate so that the Santalo point is the origin."""
        check_is_fitted(self)
        return check_array(X) - self.center_


class FMCenter(BaseEstimator):
    """Center ``z`` at which Ball's body ``K_{f,z}`` has centroid ``z``.

    ``fit`` takes a density :class:`~santalo.transform.GridField`.
    """

    def __init__(self, tol=1e-8, grid_size=None):
        self.tol = tol
        self.grid_size = grid_size

    def fit(self, f, y=None):
        res = fm_center(f, tol=self.tol, grid_size=self.grid_size)
        self.center_ = res.z
        self.centroid_norm_ = res.centroid_norm
        self.n_iter_ = res.iterations
        return self


class LegendreStabilityFit(BaseEstimator):
    """Deficit and ``(z, c, T)`` fit of a potential on ``R(eps) B^n``.

    ``fit`` takes a potential field ``phi``. ``score`` returns minus the L1
    distance, so larger is closer to the equality manifold.
    """

    def __init__(self, weight=None, tol=1e-6, restarts=2, seed=0, dual=None):
        self.weight = weight
        self.tol = tol
        self.restarts = restarts
        self.seed = seed
        self.dual = dual

    def fit(self, phi, y=None):
        w = validate_weight(self.weight or _EXP)
        res = stability_fit_legendre(w, phi, tol=self.tol, dual=self.dual, restarts=self.restarts, seed=self.seed)
        self.result_ = res
        self.center_, self.c_, self.T_ = res.z, res.c, res.T
        self.eps_, self.R_eps_, self.l1_ = res.eps, res.R_eps, res.l1_primal
        return self

    def score(self, phi=None, y=None):
        check_is_fitted(self)
        return -self.l1_


class FunctionalStabilityFit(BaseEstimator):
    """``(xi, T)`` fit of a density pair ``(f, g)`` against the extremal profile.

    Call as ``fit(f, g)`` or ``fit((f, g))``.
    """

    def __init__(self, weight=None, convention="square", tol=1e-6, center=None, restarts=1, seed=0):
        self.weight = weight
        self.convention = convention
        self.tol = tol
        self.center = center
        self.restarts = restarts
        self.seed = seed

    def fit(self, f, g=None):
        if g is None:
            f, g = f
        w = validate_weight(self.weight or _EXP)
        res = stability_fit_functional(
            w, f, g, self.center, Convention.parse(self.convention), tol=self.tol,
            restarts=self.restarts, seed=self.seed,
        )
        self.result_ = res
        self.center_, self.xi_, self.T_ = res.z, res.xi, res.T
        self.l1_primal_, self.l1_dual_, self.eps_ = res.l1_primal, res.l1_dual, res.eps
        return self

    def score(self, f=None, g=None):
        check_is_fitted(self)
        return -max(self.l1_primal_, self.l1_dual_)


class DeficitEstimator(BaseEstimator):
    """Deficit of a potential at its best center (infimum over ``z``)."""

    def __init__(self, weight=None, convention="half-square", dual=None, reference=None):
        self.weight = weight
        self.convention = convention
        self.dual = dual
        self.reference = reference

    def fit(self, phi, y=None):
        w = validate_weight(self.weight or _EXP)
        res = best_center_deficit(w, phi, Convention.parse(self.convention), self.dual, self.reference)
        self.center_, self.eps_, self.report_ = res.z, res.eps, res.report
        return self


class BorellFit(BaseEstimator):
    """Fit of ``a, b`` with ``a F(b t) ~ M(t)`` for half-line functions."""

    def __init__(self, grid=256, restarts=2):
        self.grid = grid
        self.restarts = restarts

    def fit(self, M, F, G):
        rep = borell_fit(M, F, G, grid=self.grid, restarts=self.restarts)
        self.report_ = rep
        self.a_, self.b_ = rep.fit_a, rep.fit_b
        self.ratio_, self.margin_ = rep.ratio, rep.hypothesis_margin
        self.l1_ = max(rep.l1_f, rep.l1_g)
        return self


__all__ = [
    "SantaloPoint",
    "FMCenter",
    "LegendreStabilityFit",
    "FunctionalStabilityFit",
    "DeficitEstimator",
    "BorellFit",
]
