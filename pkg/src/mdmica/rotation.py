"""Givens-rotation parameterization of SO(d).

Angles are stored as a flat float array of length ``p = d * (d - 1) / 2``
ordered lexicographically by plane ``(i, j)``, ``0 <= i < j < d``. The
angles with first index ``i`` form block ``i``. The rotation is

    W(theta) = G^(d-2) ... G^(1) G^(0),
    G^(k)    = Q[k, d-1](theta[k, d-1]) ... Q[k, k+1](theta[k, k+1]),

so row ``k`` of ``W`` depends only on blocks ``0..k``. The support keeps
block-0 angles in ``[0, 2*pi)`` and every other angle in ``[0, pi)``.
"""

import math

import numpy as np

from .exceptions import InvalidAnglesError, InvalidIndexError, InvalidRotationError

TWO_PI = 2.0 * np.pi

_DEGENERATE_TOL = 1e-12
_SUPPORT_TOL = 1e-12


def n_angles(d):
    """Number of rotation angles for dimension ``d``."""
    return d * (d - 1) // 2


def dim_from_n_angles(p):
    """Inverse of :func:`n_angles`; raises if ``p`` is not triangular."""
    d = int(round((1 + math.sqrt(1 + 8 * p)) / 2))
    if d < 2 or n_angles(d) != p:
        raise InvalidAnglesError(f"{p} angles do not match any dimension d >= 2")
    return d


def angle_planes(d):
    """Planes ``(i, j)`` in the storage order of an angle vector."""
    return [(i, j) for i in range(d - 1) for j in range(i + 1, d)]


def block_slices(d):
    """Slice of the angle vector occupied by each block ``0..d-2``."""
    slices = []
    start = 0
    for i in range(d - 1):
        stop = start + (d - 1 - i)
        slices.append(slice(start, stop))
        start = stop
    return slices


def support_upper(d):
    """Upper bound of the support for each angle (exclusive)."""
    upper = np.full(n_angles(d), np.pi)
    upper[block_slices(d)[0]] = TWO_PI
    return upper


def in_support(theta, d=None, atol=0.0):
    theta = np.asarray(theta, dtype=float)
    if d is None:
        d = dim_from_n_angles(theta.size)
    if theta.shape != (n_angles(d),):
        return False
    upper = support_upper(d)
    return bool(np.all(theta >= -atol) and np.all(theta < upper + atol))


def wrap_angles(theta, d=None):
    """Reduce every angle modulo ``2*pi`` into ``[0, 2*pi)``.

    The rotation is ``2*pi``-periodic in each angle, so this never changes
    ``W(theta)``. Use :func:`canonical_angles` to land inside the support.
    """
    theta = np.mod(np.asarray(theta, dtype=float), TWO_PI)
    # np.mod can return exactly 2*pi for tiny negative inputs
    theta[theta >= TWO_PI] = 0.0
    return theta


def check_angles(theta, d=None):
    """Validate shape and support of an angle vector; return it as an array."""
    theta = np.asarray(theta, dtype=float)
    if theta.ndim != 1:
        raise InvalidAnglesError("angle vector must be one-dimensional")
    if d is None:
        d = dim_from_n_angles(theta.size)
    elif theta.size != n_angles(d):
        raise InvalidAnglesError(
            f"expected {n_angles(d)} angles for d={d}, got {theta.size}")
    if not np.all(np.isfinite(theta)):
        raise InvalidAnglesError("angles must be finite")
    if not in_support(theta, d):
        raise InvalidAnglesError("angles lie outside the support")
    return theta


def givens(d, i, j, psi):
    """Plane rotation by ``psi`` in coordinates ``(i, j)``, zero-based."""
    if not (0 <= i < j < d):
        raise InvalidIndexError(f"need 0 <= i < j < d, got i={i}, j={j}, d={d}")
    Q = np.eye(d)
    c, s = math.cos(psi), math.sin(psi)
    Q[i, i] = Q[j, j] = c
    Q[i, j] = -s
    Q[j, i] = s
    return Q


def _rotate_rows(M, i, j, c, s):
    # M <- Q[i, j] @ M
    ri = M[i].copy()
    M[i] = c * ri - s * M[j]
    M[j] = s * ri + c * M[j]


def _rotate_cols_transposed(M, i, j, c, s):
    # M <- M @ Q[i, j].T
    ci = M[:, i].copy()
    M[:, i] = c * ci - s * M[:, j]
    M[:, j] = s * ci + c * M[:, j]


def rotation_from_angles(theta, d=None, check=True):
    """Build ``W(theta)`` as the ordered product of Givens factors.

    Angles outside the support are accepted when ``check`` is False; the
    product is well defined for any real angles.
    """
    theta = check_angles(theta, d) if check else np.asarray(theta, dtype=float)
    if d is None:
        d = dim_from_n_angles(theta.size)
    W = np.eye(d)
    for (i, j), a in zip(angle_planes(d), theta):
        _rotate_rows(W, i, j, math.cos(a), math.sin(a))
    return W


def check_rotation(W, atol=1e-8):
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1] or W.shape[0] < 2:
        raise InvalidRotationError(f"expected a square matrix of size >= 2, got {W.shape}")
    if not np.all(np.isfinite(W)):
        raise InvalidRotationError("rotation has non-finite entries")
    d = W.shape[0]
    err = np.max(np.abs(W @ W.T - np.eye(d)))
    if err > atol:
        raise InvalidRotationError(f"matrix is not orthogonal (max |WW' - I| = {err:.3g})")
    det = np.linalg.det(W)
    if abs(det - 1.0) > atol:
        raise InvalidRotationError(f"determinant is {det:.6g}, expected +1")
    return W


def _block_branches(v, k, d):
    """All angle solutions for one block given row ``k`` of the residual.

    ``v`` holds the row restricted to columns ``k..d-1``. Yields lists of
    angles for planes ``(k, k+1) .. (k, d-1)``. Every solution reproduces
    the row exactly; they differ in the sign chosen for each cosine.
    """
    m = d - 1 - k
    out = []

    def descend(rest, j, acc):
        # acc holds angles for planes (k, j+1) .. (k, d-1), last plane first
        if j == k + 1:
            x, y = rest[0], -rest[1]
            a = 0.0 if math.hypot(x, y) < _DEGENERATE_TOL else math.atan2(y, x)
            out.append([a] + acc)
            return
        s = min(1.0, max(-1.0, -rest[j - k]))
        rho = float(np.linalg.norm(rest[: j - k]))
        if rho < _DEGENERATE_TOL:
            # row is +-e_j; the remaining angles of the block do not matter
            out.append([0.0] * (j - k - 1) + [math.atan2(s, 0.0)] + acc)
            return
        for c in (rho, -rho):
            sub = rest[: j - k] / c
            descend(sub, j - 1, [math.atan2(s, c)] + acc)

    if m == 0:
        return out
    descend(np.asarray(v, dtype=float), d - 1, [])
    return out


def angles_from_rotation(W, atol=1e-8):
    """Recover support angles ``theta`` with ``W(theta) == W``.

    Blocks are peeled off in order 0, 1, ..., d-2. Each block has several
    cosine-sign branches that reproduce the current row; a depth-first
    search keeps the branch whose later blocks fit the ``[0, pi)`` range.
    Block-0 angles are reduced into ``[0, 2*pi)``.

    Where a cosine and sine are both below 1e-12 the remaining angles of
    that block are set to 0; the decomposition is not unique there. If no
    branch fits the support (only possible at such degenerate points) the
    branch with the smallest range violation is returned.
    """
    W = check_rotation(W, atol=atol)
    d = W.shape[0]
    best = [np.inf, None]

    def violation(k, angles):
        if k == 0:
            return 0.0
        a = np.asarray(angles)
        return float(np.sum(np.maximum(0.0, -a) + np.maximum(0.0, a - np.pi)))

    def search(k, M, acc, viol):
        if viol >= best[0]:
            return
        if k == d - 1:
            best[0], best[1] = viol, list(acc)
            return
        for angles in _block_branches(M[k, k:], k, d):
            v = viol + violation(k, angles)
            if v >= best[0]:
                continue
            M2 = M.copy()
            for j, a in zip(range(k + 1, d), angles):
                _rotate_cols_transposed(M2, k, j, math.cos(a), math.sin(a))
            search(k + 1, M2, acc + angles, v)
            if best[0] <= _SUPPORT_TOL:
                return

    search(0, W.copy(), [], 0.0)
    theta = np.array(best[1], dtype=float)
    sl = block_slices(d)
    theta[sl[0]] = wrap_angles(theta[sl[0]])
    rest = theta[sl[0].stop:]
    # tiny negative values from round-off sit on the closed boundary at 0
    rest[(rest < 0) & (rest > -_SUPPORT_TOL)] = 0.0
    return theta


def canonical_angles(theta, d=None):
    """Map arbitrary real angles to the support angles of the same rotation."""
    W = rotation_from_angles(theta, d, check=False)
    return angles_from_rotation(W)
