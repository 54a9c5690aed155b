"""Dense float64 numeric primitives: smoothed minimum, pairwise distances, RNG.

Matrices throughout the package are plain ``numpy.ndarray`` objects with
dtype float64 in row-major layout. All randomness flows through
:func:`make_rng`, which builds a PCG64 generator from a
``numpy.random.SeedSequence``; identical ``(seed, *salts)`` tuples produce
bit-identical streams on every platform, distinct tuples produce
independent streams. Generators are single-owner: create one per worker,
never share one across concurrent callers.
"""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from .errors import ContractViolationError, ParameterError

# Below this smoothing value the shifted log-sum-exp is numerically
# indistinguishable from a hard minimum, so the exact minimum is returned.
HARD_MIN_GAMMA = 1e-8


def make_rng(seed: int, *salts: int) -> np.random.Generator:
    """Deterministic PCG64 generator keyed by ``seed`` and optional salts."""
    entropy = (int(seed),) + tuple(int(s) for s in salts)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def _as_values(values: Sequence[float] | np.ndarray, name: str = "values") -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ContractViolationError(f"{name} must be a non-empty 1-D sequence of floats")
    if not np.all(np.isfinite(arr)):
        raise ContractViolationError(f"{name} must contain only finite floats")
    return arr


def _checked_gamma(gamma: float) -> float:
    gamma = float(gamma)
    if not np.isfinite(gamma) or gamma <= 0.0:
        raise ParameterError(f"gamma must be a positive finite float, got {gamma!r}")
    return gamma


def softmin(values: Sequence[float] | np.ndarray, gamma: float) -> float:
    """Smoothed minimum ``-gamma * log(sum_i exp(-v_i / gamma))``.

    Evaluated in shifted form (exponents are taken relative to the hard
    minimum), so it never overflows for any positive ``gamma``. The result
    satisfies ``min(v) - gamma * log(len(v)) <= softmin(v, gamma) <= min(v)``.
    For ``gamma <= HARD_MIN_GAMMA`` the exact minimum is returned.
    """
    arr = _as_values(values)
    gamma = _checked_gamma(gamma)
    lo = float(arr.min())
    if gamma <= HARD_MIN_GAMMA:
        return lo
    return lo - gamma * float(np.log(np.exp((lo - arr) / gamma).sum()))


def softmin_weights(values: Sequence[float] | np.ndarray, gamma: float) -> np.ndarray:
    """Weights ``w_i = exp(-v_i / gamma) / sum_j exp(-v_j / gamma)``.

    These are the partial derivatives of :func:`softmin` with respect to its
    inputs; they are nonnegative and sum to one. In the hard-minimum regime
    (``gamma <= HARD_MIN_GAMMA``) the weight collapses onto the first
    minimizing entry.
    """
    arr = _as_values(values)
    gamma = _checked_gamma(gamma)
    if gamma <= HARD_MIN_GAMMA:
        w = np.zeros_like(arr)
        w[int(np.argmin(arr))] = 1.0
        return w
    z = np.exp((arr.min() - arr) / gamma)
    return z / z.sum()


def pairwise_sq_dist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances between rows: ``D[i, j] = ||a_i - b_j||^2``.

    Computed from explicit row differences (never the expanded dot-product
    form), so entries are exactly nonnegative and ``D[i, i]`` is exactly zero
    when ``a is b``.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise ContractViolationError("embedding sequences must be 2-D arrays")
    if a.shape[1] != b.shape[1]:
        raise ContractViolationError(
            f"embedding dimensions differ: {a.shape[1]} vs {b.shape[1]}"
        )
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ContractViolationError("embedding sequences must be finite")
    diff = a[:, None, :] - b[None, :, :]
    return (diff * diff).sum(axis=2)
