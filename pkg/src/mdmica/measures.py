"""Empirical mutual dependence measures.

All statistics are V-statistics over the ``n x n`` pairs of observations,
accumulated in O(n^2) time with O(n * d) memory. Pair loops run in a fixed
order, so repeated calls on the same input agree bitwise.

The sample is an ``n x p`` matrix whose columns are partitioned into ``d``
blocks. A plain 2-d array is treated as ``d = p`` scalar blocks, which is
the ICA setting.
"""

from dataclasses import dataclass, field
import math

import numba
import numpy as np
from scipy.spatial.distance import pdist

from ._validation import check_data_matrix
from .exceptions import DegenerateBandwidthError, InsufficientSampleError, ShapeError

MEASURES = ("asym", "sym", "comp", "hsic")

MEDIAN_HEURISTIC = "median"


@dataclass(frozen=True)
class GroupedSample:
    """An ``n x p`` sample whose columns are split into ordered blocks."""

    data: np.ndarray
    groups: tuple = field(default=None)

    def __post_init__(self):
        data = check_data_matrix(self.data, min_samples=1, min_features=1)
        p = data.shape[1]
        groups = self.groups
        if groups is None:
            groups = tuple((j,) for j in range(p))
        else:
            groups = tuple(tuple(int(c) for c in g) for g in groups)
        flat = sorted(c for g in groups for c in g)
        if flat != list(range(p)) or any(len(g) == 0 for g in groups):
            raise ShapeError(f"groups {groups} do not partition {p} columns")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "groups", groups)

    @property
    def n(self):
        return self.data.shape[0]

    @property
    def d(self):
        return len(self.groups)

    def column_blocks(self):
        """Block index of every column, as an int64 array."""
        out = np.empty(self.data.shape[1], dtype=np.int64)
        for b, g in enumerate(self.groups):
            out[list(g)] = b
        return out

    def block(self, j):
        return self.data[:, list(self.groups[j])]


def as_grouped(sample, groups=None, min_blocks=2):
    if isinstance(sample, GroupedSample):
        gs = sample if groups is None else GroupedSample(sample.data, groups)
    else:
        gs = GroupedSample(np.asarray(sample, dtype=float) if not hasattr(sample, "dtype")
                           else sample, groups)
    if gs.n < 2:
        raise InsufficientSampleError(f"need at least 2 observations, got {gs.n}")
    if gs.d < min_blocks:
        raise ShapeError(f"need at least {min_blocks} blocks, got {gs.d}")
    return gs


def _transposed(gs):
    return np.ascontiguousarray(gs.data.T)


# --- kernels -----------------------------------------------------------------


@numba.njit(cache=True)
def _block_sq_dists(XT, col_block, nblocks, k, sq):
    # sq[j, t] <- squared distance of block j between rows k and k + 1 + t
    m, n = XT.shape
    L = n - k - 1
    for j in range(nblocks):
        for t in range(L):
            sq[j, t] = 0.0
    for c in range(m):
        b = col_block[c]
        xk = XT[c, k]
        for t in range(L):
            diff = xk - XT[c, k + 1 + t]
            sq[b, t] += diff * diff
    return L


@numba.njit(cache=True)
def _single_vs_rest_sums(XT, col_block, nblocks, symmetric):
    # Split c pairs block c with blocks c+1.. (asymmetric) or with every
    # other block (symmetric). Prefix/suffix sums of the per-block squared
    # distances avoid the cancellation of "total minus own block".
    # Only pairs k < l are visited; diagonal distances are zero.
    m, n = XT.shape
    S = nblocks if symmetric else nblocks - 1
    sab = np.zeros(S)
    sa = np.zeros(S)
    sb = np.zeros(S)
    ra = np.zeros((S, n))
    rb = np.zeros((S, n))
    sq = np.empty((nblocks, n))
    suffix = np.empty((nblocks + 1, n))
    prefix = np.empty(n)
    right = np.empty(n)
    for k in range(n - 1):
        L = _block_sq_dists(XT, col_block, nblocks, k, sq)
        for t in range(L):
            suffix[nblocks, t] = 0.0
            prefix[t] = 0.0
        for j in range(nblocks - 1, -1, -1):
            for t in range(L):
                suffix[j, t] = suffix[j + 1, t] + sq[j, t]
        for s in range(S):
            ab = 0.0
            asum = 0.0
            bsum = 0.0
            if symmetric:
                for t in range(L):
                    right[t] = prefix[t] + suffix[s + 1, t]
                    prefix[t] += sq[s, t]
            else:
                for t in range(L):
                    right[t] = suffix[s + 1, t]
            for t in range(L):
                a = math.sqrt(sq[s, t])
                b = math.sqrt(right[t])
                ab += a * b
                asum += a
                bsum += b
                ra[s, k + 1 + t] += a
                rb[s, k + 1 + t] += b
            sab[s] += ab
            sa[s] += asum
            sb[s] += bsum
            ra[s, k] += asum
            rb[s, k] += bsum
    out = np.empty(S)
    n2 = float(n) * n
    for s in range(S):
        cross = 0.0
        for k in range(n):
            cross += ra[s, k] * rb[s, k]
        out[s] = (2.0 * sab[s] / n2 + (2.0 * sa[s] / n2) * (2.0 * sb[s] / n2)
                  - 2.0 * cross / (n2 * n))
    return out


@numba.njit(cache=True)
def _comp_star_sums(XT, XsT):
    m, n = XT.shape
    dist = np.empty(n)
    dist_s = np.empty(n)
    cross = 0.0
    for k in range(n):
        for t in range(n):
            dist[t] = 0.0
        for c in range(m):
            xk = XT[c, k]
            for t in range(n):
                diff = xk - XsT[c, t]
                dist[t] += diff * diff
        row = 0.0
        for t in range(n):
            row += math.sqrt(dist[t])
        cross += row
    within = 0.0
    within_s = 0.0
    for k in range(n - 1):
        L = n - k - 1
        for t in range(L):
            dist[t] = 0.0
            dist_s[t] = 0.0
        for c in range(m):
            xk = XT[c, k]
            sk = XsT[c, k]
            for t in range(L):
                diff = xk - XT[c, k + 1 + t]
                dist[t] += diff * diff
                diff = sk - XsT[c, k + 1 + t]
                dist_s[t] += diff * diff
        row = 0.0
        row_s = 0.0
        for t in range(L):
            row += math.sqrt(dist[t])
            row_s += math.sqrt(dist_s[t])
        within += row
        within_s += row_s
    return cross, 2.0 * within, 2.0 * within_s


@numba.njit(cache=True)
def _dhsic_sums(XT, col_block, nblocks, inv_two_sigma_sq):
    m, n = XT.shape
    rows = np.ones((nblocks, n))
    totals = np.full(nblocks, float(n))
    joint = float(n)
    sq = np.empty((nblocks, n))
    prod = np.empty(n)
    for k in range(n - 1):
        L = _block_sq_dists(XT, col_block, nblocks, k, sq)
        for t in range(L):
            prod[t] = 1.0
        for j in range(nblocks):
            scale = inv_two_sigma_sq[j]
            acc = 0.0
            for t in range(L):
                kv = math.exp(-sq[j, t] * scale)
                prod[t] *= kv
                acc += kv
                rows[j, k + 1 + t] += kv
            rows[j, k] += acc
            totals[j] += 2.0 * acc
        acc = 0.0
        for t in range(L):
            acc += prod[t]
        joint += 2.0 * acc
    n2 = float(n) * n
    term2 = 1.0
    for j in range(nblocks):
        term2 *= totals[j] / n2
    term3 = 0.0
    for k in range(n):
        p = 1.0
        for j in range(nblocks):
            p *= rows[j, k] / n
        term3 += p
    return joint / n2 + term2 - 2.0 * term3 / n


@numba.njit(cache=True)
def _count_le(xs, v):
    # pairs i < j of sorted xs with xs[j] - xs[i] <= v
    n = xs.size
    total = 0
    i = 0
    for j in range(n):
        while xs[j] - xs[i] > v:
            i += 1
        total += j - i
    return total


@numba.njit(cache=True)
def _kth_pair_diff(xs, k):
    # k-th smallest (1-based) of xs[j] - xs[i], i < j, for sorted xs
    lo = -1.0
    hi = xs[-1] - xs[0]
    c_lo = 0
    c_hi = _count_le(xs, hi)
    for _ in range(200):
        if c_hi - c_lo <= 4096:
            break
        mid = 0.5 * (lo + hi) if lo >= 0.0 else 0.5 * hi
        if mid <= lo or mid >= hi:
            break
        c = _count_le(xs, mid)
        if c >= k:
            hi, c_hi = mid, c
        else:
            lo, c_lo = mid, c
    # enumerate the pairs with lo < diff <= hi
    cand = np.empty(c_hi - c_lo)
    cnt = 0
    n = xs.size
    i_lo = 0
    i_hi = 0
    for j in range(n):
        while xs[j] - xs[i_hi] > hi:
            i_hi += 1
        while i_lo < j and xs[j] - xs[i_lo] > lo:
            i_lo += 1
        # i in [i_hi, i_lo) have lo < diff <= hi
        for i in range(i_hi, i_lo):
            cand[cnt] = xs[j] - xs[i]
            cnt += 1
    cand = np.sort(cand[:cnt])
    return cand[k - c_lo - 1]


# --- public measures ---------------------------------------------------------


def dcov_sq_terms(sample, symmetric, groups=None):
    """Raw ``V_n^2`` summands of the asymmetric or symmetric measure.

    Entry ``c`` is ``V_n^2(X_c, X_rest)`` where the rest is ``X_{c+1..d}``
    (asymmetric) or every block except ``c`` (symmetric). Not clamped.
    """
    gs = as_grouped(sample, groups)
    return _single_vs_rest_sums(_transposed(gs), gs.column_blocks(), gs.d, bool(symmetric))


def dcov_sq(sample, groups=None):
    """Squared empirical distance covariance ``V_n^2`` of a two-block sample.

    Clamped at 0, since round-off can push an exact zero slightly negative.
    """
    gs = as_grouped(sample, groups)
    if gs.d != 2:
        raise ShapeError(f"dcov_sq needs exactly two blocks, got {gs.d}")
    return max(0.0, float(dcov_sq_terms(gs, False)[0]))


def mdm_asym(sample, groups=None):
    """Asymmetric measure: sum over ``c`` of ``V_n^2(X_c, (X_c+1, ..., X_d))``."""
    return float(np.sum(np.maximum(dcov_sq_terms(sample, False, groups), 0.0)))


def mdm_sym(sample, groups=None):
    """Symmetric measure: sum over ``c`` of ``V_n^2(X_c, X_{-c})``."""
    return float(np.sum(np.maximum(dcov_sq_terms(sample, True, groups), 0.0)))


def shifted_sample(sample, groups=None):
    """Rows ``(X_1^k, X_2^(k+1), ..., X_d^(k+d-1))`` with cyclic row indices."""
    gs = as_grouped(sample, groups, min_blocks=1)
    out = np.empty_like(gs.data)
    for j, g in enumerate(gs.groups):
        cols = list(g)
        out[:, cols] = np.roll(gs.data[:, cols], -j, axis=0)
    return out


def mdm_comp_star(sample, groups=None):
    """Simplified complete measure ``Q*_n``.

    The energy distance between the sample and its cyclically shifted copy:
    ``2 E|X - X*'| - E|X - X'| - E|X* - X*'|`` over empirical pairs. Not
    clamped; it can come out a hair below zero.
    """
    gs = as_grouped(sample, groups)
    cross, within, within_s = _comp_star_sums(
        _transposed(gs), np.ascontiguousarray(shifted_sample(gs).T))
    n2 = float(gs.n) ** 2
    return float((2.0 * cross - within - within_s) / n2)


def _median_pair_distance(block):
    """Median of the nonzero pairwise distances between rows of ``block``."""
    if block.shape[1] == 1:
        xs = np.sort(block[:, 0])
        n_pairs = xs.size * (xs.size - 1) // 2
        zeros = _count_le(xs, 0.0)
        m = n_pairs - zeros
        if m == 0:
            return 0.0
        upper = _kth_pair_diff(xs, zeros + m // 2 + 1)
        if m % 2:
            return upper
        return 0.5 * (_kth_pair_diff(xs, zeros + m // 2) + upper)
    dist = pdist(block)
    dist = dist[dist > 0]
    return float(np.median(dist)) if dist.size else 0.0


def median_bandwidths(sample, groups=None):
    """Median of the nonzero pairwise distances within each block."""
    gs = as_grouped(sample, groups, min_blocks=1)
    out = np.empty(gs.d)
    for j in range(gs.d):
        out[j] = _median_pair_distance(gs.block(j))
        if not out[j] > 0:
            raise DegenerateBandwidthError(
                f"component {j} has zero median pairwise distance; "
                "median heuristic bandwidth is undefined", component=j)
    return out


def resolve_bandwidths(sample, bandwidth=MEDIAN_HEURISTIC, groups=None):
    gs = as_grouped(sample, groups, min_blocks=1)
    if bandwidth is None or (isinstance(bandwidth, str) and bandwidth == MEDIAN_HEURISTIC):
        return median_bandwidths(gs)
    sigma = np.broadcast_to(np.asarray(bandwidth, dtype=float), (gs.d,)).copy()
    if not np.all(np.isfinite(sigma)) or np.any(sigma <= 0):
        raise ValueError(f"bandwidths must be strictly positive, got {sigma}")
    return sigma


def dhsic(sample, bandwidth=MEDIAN_HEURISTIC, groups=None):
    """d-variable HSIC V-statistic with Gaussian kernels.

    Parameters
    ----------
    bandwidth : "median", float or array of shape (d,)
        Kernel width ``sigma_j`` in ``exp(-|x - y|^2 / (2 sigma_j^2))``.
        ``"median"`` uses the median nonzero pairwise distance per block.
    """
    gs = as_grouped(sample, groups)
    sigma = resolve_bandwidths(gs, bandwidth)
    val = _dhsic_sums(_transposed(gs), gs.column_blocks(), gs.d, 1.0 / (2.0 * sigma ** 2))
    return max(0.0, float(val))


@dataclass(frozen=True)
class MeasureKind:
    """Which dependence measure to use as the objective."""

    tag: str = "sym"
    bandwidth: object = MEDIAN_HEURISTIC

    def __post_init__(self):
        if self.tag not in MEASURES:
            raise ValueError(f"unknown measure {self.tag!r}; choose from {MEASURES}")
        bw = self.bandwidth
        if self.tag == "hsic" and not (isinstance(bw, str) and bw == MEDIAN_HEURISTIC):
            if bw is None:
                object.__setattr__(self, "bandwidth", MEDIAN_HEURISTIC)
            else:
                arr = np.atleast_1d(np.asarray(bw, dtype=float))
                if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
                    raise ValueError(f"hsic bandwidths must be strictly positive, got {bw}")
                object.__setattr__(
                    self, "bandwidth", float(arr[0]) if arr.size == 1 else tuple(arr.tolist()))

    def __call__(self, sample, groups=None):
        return evaluate(sample, self, groups=groups)


def as_measure(measure):
    if isinstance(measure, MeasureKind):
        return measure
    return MeasureKind(measure)


def evaluate(sample, measure="sym", groups=None):
    """Evaluate a measure given by name or :class:`MeasureKind`."""
    kind = as_measure(measure)
    if kind.tag == "asym":
        return mdm_asym(sample, groups)
    if kind.tag == "sym":
        return mdm_sym(sample, groups)
    if kind.tag == "comp":
        return mdm_comp_star(sample, groups)
    return dhsic(sample, kind.bandwidth, groups)
