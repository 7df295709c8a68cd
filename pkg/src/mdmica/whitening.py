"""Centering and symmetric whitening."""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_data_matrix
from .exceptions import InsufficientSampleError, SingularCovarianceError

_EIG_RTOL = 1e-12


@dataclass(frozen=True)
class WhiteningResult:
    """Whitened sample ``Z = (Y - mean) @ H.T`` with ``H = cov(Y)^(-1/2)``."""

    Z: np.ndarray
    H: np.ndarray
    mean: np.ndarray


def inverse_sqrt_cov(cov):
    """Symmetric inverse square root of a covariance matrix."""
    evals, evecs = np.linalg.eigh(cov)
    top = evals[-1]
    if top <= 0 or evals[0] <= _EIG_RTOL * top:
        raise SingularCovarianceError(
            f"sample covariance is singular: smallest eigenvalue {evals[0]:.6g} "
            f"vs largest {top:.6g}",
            eigenvalue=float(evals[0]),
        )
    H = (evecs / np.sqrt(evals)) @ evecs.T
    return 0.5 * (H + H.T)


def whiten(Y):
    """Center ``Y`` and transform it to identity sample covariance.

    Covariance uses the ``n - 1`` normalization.

    Raises
    ------
    SingularCovarianceError
        If the smallest covariance eigenvalue is at most 1e-12 times the
        largest.
    """
    Y = check_data_matrix(Y, min_features=1)
    n, d = Y.shape
    if n <= d:
        raise InsufficientSampleError(f"whitening needs n > d, got n={n}, d={d}")
    mean = Y.mean(axis=0)
    Yc = Y - mean
    cov = Yc.T @ Yc / (n - 1)
    H = inverse_sqrt_cov(cov)
    return WhiteningResult(Z=Yc @ H.T, H=H, mean=mean)


class Whitener(TransformerMixin, BaseEstimator):
    """Transformer wrapper around :func:`whiten`.

    Attributes
    ----------
    mean_ : ndarray of shape (n_features,)
    whitening_ : ndarray of shape (n_features, n_features)
        The symmetric matrix ``H``.
    """

    def fit(self, X, y=None):
        res = whiten(X)
        self.mean_ = res.mean
        self.whitening_ = res.H
        self.n_features_in_ = res.H.shape[0]
        return self

    def transform(self, X):
        check_is_fitted(self)
        X = check_data_matrix(X, min_samples=1, min_features=1)
        return (X - self.mean_) @ self.whitening_.T

    def inverse_transform(self, X):
        check_is_fitted(self)
        X = check_data_matrix(X, min_samples=1, min_features=1)
        return np.linalg.solve(self.whitening_, X.T).T + self.mean_
