"""Temporal regularizers on a single embedding sequence.

All regularizers act on the self-distance matrix
``D_X(i, j) = ||x_i - x_j||^2`` of one sequence and weight frame pairs by
their index gap. Two weight profiles appear:

    W(i, j)    = 1 / ((i - j)^2 + 1)   (inverse difference moment)
    Wbar(i, j) = (i - j)^2 + 1

:func:`idm_similarity` scores an externally supplied self-similarity matrix
with ``W``. :func:`idm_loss` is the minimization form
``sum_ij Wbar(i, j) * (-D_X(i, j))``, which pulls temporally close frames
together but also rewards spreading far pairs without bound.
:func:`contrastive_idm` separates the two regimes with a hinge: pairs
further apart than a window ``sigma`` are pushed to at least a margin
``lambda``, pairs inside the window are pulled together. Dropping both
weight profiles (``weighted=False``) treats all pairs equally, which is the
classic slow-feature / temporal-coherence objective.

Every loss returns ``(value, grad)`` with the gradient taken analytically
with respect to the embedding rows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolationError, ParameterError
from .numeric import pairwise_sq_dist


@dataclass(frozen=True)
class CIdmConfig:
    """Contrastive regularizer settings.

    ``sigma`` is the index window separating positive (``|i - j| <= sigma``)
    from negative (``|i - j| > sigma``) pairs, ``lambda_margin`` the hinge
    margin for negatives, and ``weighted=False`` switches both pair-weight
    profiles to 1 (the slow-feature variant).
    """

    sigma: int = 15
    lambda_margin: float = 2.0
    weighted: bool = True

    def __post_init__(self) -> None:
        if self.sigma < 0:
            raise ParameterError(f"sigma must be >= 0, got {self.sigma}")
        if not self.lambda_margin > 0:
            raise ParameterError(f"lambda_margin must be > 0, got {self.lambda_margin}")


def _gap_squared(n: int) -> np.ndarray:
    idx = np.arange(n, dtype=np.float64)
    gap = idx[:, None] - idx[None, :]
    return gap * gap


def _self_dist_grad(x: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Chain rule from a gradient ``g`` w.r.t. ``D_X`` back to the rows of ``x``.

    ``d D_X(i, j) / d x_k = 2 (x_i - x_j) (delta_ik - delta_jk)``, so row k
    collects ``2 * (g + g^T)[k, j] * (x_k - x_j)`` over j.
    """
    m = g + g.T
    return 2.0 * (m.sum(axis=1, keepdims=True) * x - m @ x)


def idm_similarity(s: np.ndarray) -> float:
    """Inverse-difference-moment score ``sum_ij S(i, j) / ((i - j)^2 + 1)``.

    ``s`` is any square self-similarity matrix; this module does not impose
    a particular similarity kernel.
    """
    s = np.asarray(s, dtype=np.float64)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise ContractViolationError(f"self-similarity matrix must be square, got {s.shape}")
    if not np.all(np.isfinite(s)):
        raise ContractViolationError("self-similarity matrix must be finite")
    return float((s / (_gap_squared(s.shape[0]) + 1.0)).sum())


def idm_loss(x_emb: np.ndarray) -> tuple[float, np.ndarray]:
    """Minimization-form temporal smoothness ``sum_ij ((i-j)^2 + 1) * (-D_X(i, j))``.

    Returns the value and its gradient with respect to the embedding rows.
    """
    x = np.asarray(x_emb, dtype=np.float64)
    d = pairwise_sq_dist(x, x)
    wbar = _gap_squared(x.shape[0]) + 1.0
    value = float((wbar * (-d)).sum())
    grad = _self_dist_grad(x, -wbar)
    return value, grad


def contrastive_idm(x_emb: np.ndarray, cfg: CIdmConfig) -> tuple[float, np.ndarray]:
    """Contrastive temporal regularizer with window ``sigma`` and margin ``lambda``.

    Value:

        sum_ij  y_ij * Wbar(i, j) * max(0, lambda - D_X(i, j))
              + (1 - y_ij) * W(i, j) * D_X(i, j)

    with ``y_ij = 1`` iff ``|i - j| > sigma``. Both summands are
    nonnegative, so the value is always >= 0. The hinge subgradient at
    ``D_X = lambda`` is taken as 0. With ``weighted=False`` both weight
    profiles are replaced by 1. Returns ``(value, grad)`` with the gradient
    with respect to the embedding rows.
    """
    x = np.asarray(x_emb, dtype=np.float64)
    d = pairwise_sq_dist(x, x)
    n = x.shape[0]
    gap2 = _gap_squared(n)
    if cfg.weighted:
        wbar = gap2 + 1.0
        w = 1.0 / (gap2 + 1.0)
    else:
        wbar = np.ones((n, n))
        w = np.ones((n, n))
    negative = gap2 > float(cfg.sigma) ** 2
    lam = float(cfg.lambda_margin)

    hinge = np.maximum(0.0, lam - d)
    value = float((wbar * hinge)[negative].sum() + (w * d)[~negative].sum())

    g = np.where(negative, np.where(d < lam, -wbar, 0.0), w)
    grad = _self_dist_grad(x, g)
    return value, grad
