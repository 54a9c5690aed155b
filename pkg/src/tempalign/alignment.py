"""Exact and smoothed dynamic time warping over precomputed cost matrices.

An alignment of an ``n x m`` cost matrix is a monotone path from the
top-left cell to the bottom-right cell using single steps down, right, or
diagonal; its cost is the sum of the entries it visits. :func:`dtw` returns
the exact minimum cost together with a backtracked optimal path.
:func:`soft_dtw` replaces the hard minimum in the recurrence

    r(i, j) = D(i, j) + min(r(i-1, j), r(i, j-1), r(i-1, j-1))

with the smoothed minimum of :func:`tempalign.numeric.softmin`, which makes
the value differentiable in every entry of ``D``. :func:`soft_dtw_grad`
computes that gradient by reverse accumulation: the three smoothed-minimum
weights of each cell are stored during the forward sweep and the adjoint is
propagated from the bottom-right corner back to the top-left.

The smoothed value lower-bounds the exact one:

    dtw(D) - gamma * log(3) * (n + m) <= soft_dtw(D, gamma) <= dtw(D)

and may be negative for near-zero cost matrices; it is reported unclamped.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolationError, ParameterError
from .numeric import pairwise_sq_dist

# Path-count limit for brute-force enumeration: n + m must not exceed this.
BRUTEFORCE_SIZE_LIMIT = 14


@dataclass(frozen=True)
class AlignmentPath:
    """Monotone warping path as 1-based ``(row, col)`` pairs from (1, 1) to (n, m).

    Consecutive deltas are restricted to (1, 0), (0, 1), (1, 1); the path is
    the nonzero support of a binary alignment matrix.
    """

    steps: tuple[tuple[int, int], ...]

    def as_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """0-based row and column index arrays, convenient for numpy indexing."""
        arr = np.asarray(self.steps, dtype=np.int64)
        return arr[:, 0] - 1, arr[:, 1] - 1

    def cost(self, d: np.ndarray) -> float:
        """Sum of cost-matrix entries along the path."""
        rows, cols = self.as_arrays()
        return float(np.asarray(d, dtype=np.float64)[rows, cols].sum())


@dataclass
class AlignmentResult:
    """Outcome of an alignment computation.

    ``value`` is the (soft-)DTW cost. ``path`` is set by :func:`dtw`,
    ``cumulative`` holds the forward recurrence table ``r(i, j)``, and
    ``grad_d`` holds ``d soft_dtw / d D`` when a gradient was requested;
    its entries lie in [0, 1] and both corners equal 1.
    """

    value: float
    path: AlignmentPath | None = None
    grad_d: np.ndarray | None = None
    cumulative: np.ndarray | None = None


def _checked_cost_matrix(d: np.ndarray) -> np.ndarray:
    d = np.asarray(d, dtype=np.float64)
    if d.ndim != 2 or d.shape[0] < 1 or d.shape[1] < 1:
        raise ContractViolationError("cost matrix must be 2-D with at least one row and column")
    if not np.all(np.isfinite(d)):
        raise ContractViolationError("cost matrix must be finite")
    return d


def _diagonal_cells(s: int, n: int, m: int) -> tuple[np.ndarray, np.ndarray]:
    """1-based cell coordinates on anti-diagonal i + j == s of an n x m grid."""
    i = np.arange(max(1, s - m), min(n, s - 1) + 1)
    return i, s - i


def _hard_forward(d: np.ndarray) -> np.ndarray:
    """Cumulative table of the exact recurrence, vectorized per anti-diagonal."""
    n, m = d.shape
    rp = np.full((n + 1, m + 1), np.inf)
    rp[0, 0] = 0.0
    for s in range(2, n + m + 1):
        i, j = _diagonal_cells(s, n, m)
        preds = np.stack((rp[i - 1, j - 1], rp[i - 1, j], rp[i, j - 1]))
        rp[i, j] = d[i - 1, j - 1] + preds.min(axis=0)
    return rp[1:, 1:]


def _soft_forward(
    d: np.ndarray, gamma: float, keep_weights: bool
) -> tuple[np.ndarray, np.ndarray | None]:
    """Smoothed cumulative table; optionally the per-cell predecessor weights.

    Weight slots are ordered (diagonal, up, left). Infinite sentinel
    predecessors outside the grid get exact zero weight because the
    exponents are shifted by the finite minimum before exponentiation.
    """
    n, m = d.shape
    rp = np.full((n + 1, m + 1), np.inf)
    rp[0, 0] = 0.0
    weights = np.zeros((n, m, 3)) if keep_weights else None
    for s in range(2, n + m + 1):
        i, j = _diagonal_cells(s, n, m)
        preds = np.stack((rp[i - 1, j - 1], rp[i - 1, j], rp[i, j - 1]))
        lo = preds.min(axis=0)
        z = np.exp((lo - preds) / gamma)
        total = z.sum(axis=0)
        rp[i, j] = d[i - 1, j - 1] + (lo - gamma * np.log(total))
        if weights is not None:
            weights[i - 1, j - 1, :] = (z / total).T
    return rp[1:, 1:], weights


def dtw(d: np.ndarray) -> AlignmentResult:
    """Exact minimum-cost monotone alignment of ``d`` with a backtracked path.

    Ties during backtracking are broken deterministically: diagonal
    predecessor first, then vertical (row above), then horizontal. The value
    is unaffected by the tie order.
    """
    d = _checked_cost_matrix(d)
    n, m = d.shape
    r = _hard_forward(d)
    steps = [(n, m)]
    i, j = n - 1, m - 1
    while (i, j) != (0, 0):
        best = None
        best_val = np.inf
        for pi, pj in ((i - 1, j - 1), (i - 1, j), (i, j - 1)):
            if pi < 0 or pj < 0:
                continue
            if r[pi, pj] < best_val:
                best_val = r[pi, pj]
                best = (pi, pj)
        i, j = best
        steps.append((i + 1, j + 1))
    steps.reverse()
    return AlignmentResult(
        value=float(r[n - 1, m - 1]),
        path=AlignmentPath(tuple(steps)),
        cumulative=r,
    )


def dtw_bruteforce(d: np.ndarray) -> float:
    """Minimum alignment cost by explicit enumeration of every monotone path.

    Only valid for small matrices (``n + m <= BRUTEFORCE_SIZE_LIMIT``); used
    as an independent oracle for :func:`dtw`.
    """
    d = _checked_cost_matrix(d)
    n, m = d.shape
    if n + m > BRUTEFORCE_SIZE_LIMIT:
        raise ParameterError(
            f"matrix too large for enumeration: n + m = {n + m} > {BRUTEFORCE_SIZE_LIMIT}"
        )
    best = np.inf
    stack = [(0, 0, float(d[0, 0]))]
    while stack:
        i, j, acc = stack.pop()
        if i == n - 1 and j == m - 1:
            if acc < best:
                best = acc
            continue
        if i + 1 < n and j + 1 < m:
            stack.append((i + 1, j + 1, acc + float(d[i + 1, j + 1])))
        if i + 1 < n:
            stack.append((i + 1, j, acc + float(d[i + 1, j])))
        if j + 1 < m:
            stack.append((i, j + 1, acc + float(d[i, j + 1])))
    return float(best)


def soft_dtw(d: np.ndarray, gamma: float, normalize: bool = False) -> AlignmentResult:
    """Smoothed alignment cost of ``d``; differentiable but computed value-only.

    With ``normalize=True`` the value is divided by ``n + m`` (a path-length
    proxy); the default reports the raw unnormalized cost.
    """
    d = _checked_cost_matrix(d)
    gamma = float(gamma)
    if not np.isfinite(gamma) or gamma <= 0.0:
        raise ParameterError(f"gamma must be a positive finite float, got {gamma!r}")
    r, _ = _soft_forward(d, gamma, keep_weights=False)
    value = float(r[-1, -1])
    if normalize:
        value /= d.shape[0] + d.shape[1]
    return AlignmentResult(value=value, cumulative=r)


def soft_dtw_grad(d: np.ndarray, gamma: float, normalize: bool = False) -> AlignmentResult:
    """Smoothed alignment cost plus its gradient with respect to ``d``.

    Reverse accumulation over the stored forward weights: the adjoint of the
    bottom-right cell is 1 and every cell receives its successors' adjoints
    scaled by the weight that cell contributed as a predecessor. The
    resulting ``grad_d`` is the occupation measure of the Gibbs distribution
    over paths, so every entry lies in [0, 1].
    """
    d = _checked_cost_matrix(d)
    gamma = float(gamma)
    if not np.isfinite(gamma) or gamma <= 0.0:
        raise ParameterError(f"gamma must be a positive finite float, got {gamma!r}")
    n, m = d.shape
    r, weights = _soft_forward(d, gamma, keep_weights=True)

    # Padded adjoint and weight tables make out-of-grid successors exact zeros.
    epad = np.zeros((n + 1, m + 1))
    wdiag = np.zeros((n + 1, m + 1))
    wup = np.zeros((n + 1, m + 1))
    wleft = np.zeros((n + 1, m + 1))
    wdiag[:n, :m] = weights[:, :, 0]
    wup[:n, :m] = weights[:, :, 1]
    wleft[:n, :m] = weights[:, :, 2]
    epad[n - 1, m - 1] = 1.0
    for s in range(n + m - 3, -1, -1):
        i = np.arange(max(0, s - (m - 1)), min(n - 1, s) + 1)
        j = s - i
        epad[i, j] = (
            epad[i + 1, j + 1] * wdiag[i + 1, j + 1]
            + epad[i + 1, j] * wup[i + 1, j]
            + epad[i, j + 1] * wleft[i, j + 1]
        )
    # The true occupation measure lies in [0, 1]; shave off the few ulps of
    # accumulated roundoff that can push entries past 1.
    grad = np.minimum(epad[:n, :m], 1.0)
    value = float(r[-1, -1])
    if normalize:
        scale = 1.0 / (n + m)
        value *= scale
        grad *= scale
    return AlignmentResult(value=value, grad_d=grad, cumulative=r)


def soft_dtw_embedding_grad(
    x_emb: np.ndarray, y_emb: np.ndarray, gamma: float
) -> tuple[np.ndarray, np.ndarray, float]:
    """Smoothed alignment cost of two embedding sequences and its gradients.

    The cost matrix is the pairwise squared Euclidean distance
    ``D(i, j) = ||x_i - y_j||^2``; the chain rule through it gives

        grad_x[i] = sum_j E[i, j] * 2 * (x_i - y_j)
        grad_y[j] = sum_i E[i, j] * 2 * (y_j - x_i)

    with ``E`` the gradient of the smoothed cost with respect to ``D``.
    Returns ``(grad_x, grad_y, value)``.
    """
    x = np.asarray(x_emb, dtype=np.float64)
    y = np.asarray(y_emb, dtype=np.float64)
    d = pairwise_sq_dist(x, y)
    res = soft_dtw_grad(d, gamma)
    e = res.grad_d
    grad_x = 2.0 * (e.sum(axis=1, keepdims=True) * x - e @ y)
    grad_y = 2.0 * (e.sum(axis=0)[:, None] * y - e.T @ x)
    return grad_x, grad_y, res.value
