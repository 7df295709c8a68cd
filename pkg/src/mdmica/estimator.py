"""scikit-learn style wrapper around :func:`estimate_ica`."""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_data_matrix
from .measures import MeasureKind
from .optimizer import OptimizerConfig, estimate_ica


class MDMICA(TransformerMixin, BaseEstimator):
    """ICA by minimizing a mutual dependence measure of the recovered sources.

    The data are whitened, then the rotation minimizing the chosen measure
    is found by quasi-Newton descent from a sampled starting point.

    Parameters
    ----------
    measure : {"sym", "asym", "comp", "hsic"}
    scheme : {"parallel", "deflation"}
        Deflation is available only with ``measure="asym"``.
    init : {"lhs", "single", "lhs_bo"}
    lhs_points, bo_iters : int, optional
        Default to ``10 * n_features``.
    bo_kernel : {"matern52", "exp"}
    bandwidth : "median" or float or array, optional
        Gaussian kernel widths for ``measure="hsic"``.
    max_iters : int
    tol_grad, tol_obj : float
    random_state : int, optional

    Attributes
    ----------
    components_ : ndarray of shape (n_features, n_features)
        Unmixing matrix applied to centered data, ``rotation_ @ whitening_``.
    mixing_ : ndarray of shape (n_features, n_features)
        Pseudo-inverse of ``components_``.
    mean_ : ndarray of shape (n_features,)
    whitening_ : ndarray of shape (n_features, n_features)
    rotation_ : ndarray of shape (n_features, n_features)
    theta_ : ndarray
        Givens angles of ``rotation_``.
    objective_ : float
        Measure value of the training sources.
    result_ : ICAResult

    Examples
    --------
    >>> import numpy as np
    >>> rng = np.random.default_rng(0)
    >>> S = rng.uniform(-1, 1, size=(300, 2))
    >>> ica = MDMICA(measure="comp", random_state=0).fit(S @ [[1.0, 0.5], [0.2, 1.0]])
    >>> ica.components_.shape
    (2, 2)
    """

    def __init__(self, measure="sym", scheme="parallel", init="lhs", lhs_points=None,
                 bo_iters=None, bo_kernel="matern52", bandwidth="median", max_iters=200,
                 tol_grad=1e-8, tol_obj=1e-6, random_state=None):
        self.measure = measure
        self.scheme = scheme
        self.init = init
        self.lhs_points = lhs_points
        self.bo_iters = bo_iters
        self.bo_kernel = bo_kernel
        self.bandwidth = bandwidth
        self.max_iters = max_iters
        self.tol_grad = tol_grad
        self.tol_obj = tol_obj
        self.random_state = random_state

    def _config(self):
        bandwidth = self.bandwidth if self.measure == "hsic" else "median"
        return OptimizerConfig(
            scheme=self.scheme, measure=MeasureKind(self.measure, bandwidth),
            init=self.init, lhs_points=self.lhs_points, bo_iters=self.bo_iters,
            bo_kernel=self.bo_kernel, max_iters=self.max_iters, tol_grad=self.tol_grad,
            tol_obj=self.tol_obj, seed=0 if self.random_state is None else self.random_state)

    def fit(self, X, y=None):
        X = check_data_matrix(X, min_samples=3, name="X")
        self.n_features_in_ = X.shape[1]
        res = estimate_ica(X, self._config())
        self.result_ = res
        self.mean_ = res.mean
        self.whitening_ = res.H
        self.rotation_ = res.W_hat
        self.theta_ = res.theta_hat
        self.objective_ = res.objective
        self.components_ = res.W_hat @ res.H
        self.mixing_ = np.linalg.pinv(self.components_)
        return self

    def fit_transform(self, X, y=None):
        self.fit(X)
        # identical to transform(X) up to round-off; reuse the fitted sources
        return self.result_.X_hat.copy()

    def transform(self, X):
        check_is_fitted(self, "components_")
        X = check_data_matrix(X, min_samples=1, min_features=self.n_features_in_, name="X")
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return (X - self.mean_) @ self.components_.T

    def inverse_transform(self, S):
        check_is_fitted(self, "components_")
        S = np.asarray(S, dtype=float)
        return S @ self.mixing_.T + self.mean_
