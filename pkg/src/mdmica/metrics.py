"""Estimation error invariant to the scale, sign and order of components."""

from dataclasses import dataclass
import math

import numpy as np
from scipy.optimize import linear_sum_assignment

from .exceptions import ShapeError, SingularMatrixError


@dataclass(frozen=True)
class MDReport:
    """Result of :func:`md_index`.

    ``permutation[k]`` is the position row ``k`` of the gain matrix is sent
    to and ``scalings[k]`` the factor applied to that row, so that
    ``P @ diag(scalings) @ gain`` is as close to the identity as possible.
    """

    md: float
    permutation: np.ndarray
    scalings: np.ndarray
    gain: np.ndarray

    def permutation_matrix(self):
        d = len(self.permutation)
        P = np.zeros((d, d))
        P[self.permutation, np.arange(d)] = 1.0
        return P

    def residual(self):
        """``P D G - I``; its Frobenius norm over ``sqrt(d - 1)`` is ``md``."""
        P = self.permutation_matrix()
        return P @ (self.scalings[:, None] * self.gain) - np.eye(len(self.gain))


def hungarian(cost):
    """Optimal linear assignment minimizing the total cost.

    Returns
    -------
    assignment : ndarray of int
        ``assignment[i]`` is the column matched with row ``i``.
    total : float
    """
    cost = np.asarray(cost, dtype=float)
    if cost.ndim != 2 or cost.shape[0] != cost.shape[1]:
        raise ShapeError(f"cost must be a square matrix, got shape {cost.shape}")
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost matrix has non-finite entries")
    rows, cols = linear_sum_assignment(cost)
    assignment = np.empty(len(cost), dtype=int)
    assignment[rows] = cols
    return assignment, float(cost[rows, cols].sum())


def _square(A, name):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ShapeError(f"{name} must be a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} has non-finite entries")
    return A


def md_index(W_hat, W0):
    """Minimum distance index between an unmixing estimate and the truth.

    ``MD = inf_{P, D} ||P D W_hat W0^{-1} - I||_F / sqrt(d - 1)`` over
    permutations ``P`` and nonsingular diagonal ``D``. For row ``k`` of the
    gain ``G`` sent to position ``j`` the best scale is
    ``G[k, j] / ||G[k]||^2`` and leaves a squared residual of
    ``1 - G[k, j]^2 / ||G[k]||^2``, so the infimum reduces to an assignment
    problem over those residuals.

    Examples
    --------
    >>> import numpy as np
    >>> W0 = np.array([[2.0, 1.0], [0.0, 1.0]])
    >>> md_index(np.array([[0.0, -3.0], [0.5, 0.0]]) @ W0, W0).md
    0.0
    """
    W_hat = _square(W_hat, "W_hat")
    W0 = _square(W0, "W0")
    d = len(W0)
    if W_hat.shape != W0.shape:
        raise ShapeError(f"W_hat {W_hat.shape} and W0 {W0.shape} differ in shape")
    if d < 2:
        raise ShapeError("MD is defined for d >= 2")
    s = np.linalg.svd(W0, compute_uv=False)
    if s[-1] <= 1e-12 * s[0]:
        raise SingularMatrixError("W0 is singular")
    G = np.linalg.solve(W0.T, W_hat.T).T
    norms = np.einsum("ij,ij->i", G, G)
    if np.any(norms == 0):
        raise SingularMatrixError("gain matrix has a zero row; scaling is undefined")
    cost = 1.0 - G ** 2 / norms[:, None]
    perm, total = hungarian(cost)
    scalings = G[np.arange(d), perm] / norms
    md = math.sqrt(max(total, 0.0)) / math.sqrt(d - 1)
    return MDReport(md=md, permutation=perm, scalings=scalings, gain=G)


def align_components(X_hat, reference):
    """Signed column permutation of ``X_hat`` best matching ``reference``.

    Columns are matched by maximizing the summed absolute correlation, then
    each matched column is negated if its correlation is negative.

    Returns
    -------
    aligned : ndarray
        ``X_hat[:, perm] * signs``.
    perm, signs : ndarray
        ``aligned[:, j]`` comes from column ``perm[j]`` of ``X_hat``.
    """
    X_hat = np.asarray(X_hat, dtype=float)
    reference = np.asarray(reference, dtype=float)
    if X_hat.ndim != 2 or X_hat.shape != reference.shape:
        raise ShapeError(f"shapes {X_hat.shape} and {reference.shape} differ")
    d = X_hat.shape[1]
    A = X_hat - X_hat.mean(axis=0)
    B = reference - reference.mean(axis=0)
    sa = np.sqrt(np.einsum("ij,ij->j", A, A))
    sb = np.sqrt(np.einsum("ij,ij->j", B, B))
    if np.any(sa == 0) or np.any(sb == 0):
        raise ValueError("cannot align a zero-variance column")
    corr = (B.T @ A) / np.outer(sb, sa)
    # rows index reference columns, columns index X_hat columns
    perm, _ = hungarian(1.0 - np.abs(corr))
    signs = np.where(corr[np.arange(d), perm] < 0, -1.0, 1.0)
    return X_hat[:, perm] * signs, perm, signs
