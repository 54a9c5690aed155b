"""The combined training objective on a pair of embedding sequences.

Both sequences are first L2-normalized row-wise (the canonical embedding
space for training and evaluation alike), then

    total = soft_dtw(X, Y) + alpha * (reg(X) + reg(Y))

where the regularizer is applied to each sequence separately. Gradients are
chained back through the normalization, so the reported gradients are with
respect to the pre-normalization embeddings, ready for encoder
backpropagation.

Selectable loss arms reuse the same machinery: the alignment term can be
dropped and the regularizer can be the contrastive one, its unweighted
slow-feature variant, the plain smoothness form, or absent. The arm names
accepted by :func:`resolve_loss_arm` match the command-line interface.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .alignment import soft_dtw_embedding_grad
from .errors import DegenerateEmbeddingError, ParameterError
from .regularizer import CIdmConfig, contrastive_idm, idm_loss

# Row norms below this are considered degenerate (collapsed to the origin).
MIN_ROW_NORM = 1e-12

LOSS_ARMS = ("lav", "sdtw", "cidm", "sfa", "idm", "sdtw+idm", "sdtw+sfa")


@dataclass(frozen=True)
class LavConfig:
    """Weights of the combined objective: smoothing ``gamma``, regularization
    weight ``alpha``, and the contrastive regularizer settings."""

    gamma: float = 0.1
    alpha: float = 1.0
    cidm: CIdmConfig = field(default_factory=CIdmConfig)

    def __post_init__(self) -> None:
        if not self.gamma > 0:
            raise ParameterError(f"gamma must be > 0, got {self.gamma}")
        if self.alpha < 0:
            raise ParameterError(f"alpha must be >= 0, got {self.alpha}")


@dataclass
class LossReport:
    """Per-pair loss breakdown and gradients.

    ``total == alignment + alpha * (reg_x + reg_y)`` by construction;
    ``grad_x`` and ``grad_y`` are with respect to the pre-normalization
    embeddings.
    """

    total: float
    alignment: float
    reg_x: float
    reg_y: float
    grad_x: np.ndarray
    grad_y: np.ndarray


def l2_normalize(emb: np.ndarray) -> tuple[np.ndarray, Callable[[np.ndarray], np.ndarray]]:
    """Normalize each row to unit Euclidean norm; also return the backward map.

    The returned ``vjp`` maps a gradient with respect to the normalized rows
    to a gradient with respect to the original rows via the Jacobian
    ``(I - u u^T) / ||v||`` of ``u = v / ||v||``.

    Raises :class:`DegenerateEmbeddingError` if any row norm falls below
    ``MIN_ROW_NORM``.
    """
    emb = np.asarray(emb, dtype=np.float64)
    norms = np.linalg.norm(emb, axis=1, keepdims=True)
    if np.any(norms < MIN_ROW_NORM):
        bad = int(np.argmin(norms))
        raise DegenerateEmbeddingError(
            f"embedding row {bad} has norm {float(norms[bad, 0]):.3e} < {MIN_ROW_NORM}; "
            "all frames collapsed to the origin cannot be normalized"
        )
    unit = emb / norms

    def vjp(grad_out: np.ndarray) -> np.ndarray:
        grad_out = np.asarray(grad_out, dtype=np.float64)
        radial = (grad_out * unit).sum(axis=1, keepdims=True)
        return (grad_out - radial * unit) / norms

    return unit, vjp


def pair_loss(
    x_emb: np.ndarray,
    y_emb: np.ndarray,
    cfg: LavConfig,
    *,
    use_alignment: bool = True,
    regularizer: str = "cidm",
) -> LossReport:
    """Evaluate one loss arm on a pair of raw embedding sequences.

    ``regularizer`` is one of ``"cidm"`` (contrastive, honoring
    ``cfg.cidm.weighted``), ``"idm"`` (plain smoothness form) or ``"none"``.
    """
    x_unit, x_vjp = l2_normalize(x_emb)
    y_unit, y_vjp = l2_normalize(y_emb)

    if use_alignment:
        ax, ay, alignment = soft_dtw_embedding_grad(x_unit, y_unit, cfg.gamma)
    else:
        alignment = 0.0
        ax = np.zeros_like(x_unit)
        ay = np.zeros_like(y_unit)

    if regularizer == "cidm":
        reg_x, rx = contrastive_idm(x_unit, cfg.cidm)
        reg_y, ry = contrastive_idm(y_unit, cfg.cidm)
    elif regularizer == "idm":
        reg_x, rx = idm_loss(x_unit)
        reg_y, ry = idm_loss(y_unit)
    elif regularizer == "none":
        reg_x = reg_y = 0.0
        rx = np.zeros_like(x_unit)
        ry = np.zeros_like(y_unit)
    else:
        raise ParameterError(f"unknown regularizer {regularizer!r}")

    total = alignment + cfg.alpha * (reg_x + reg_y)
    grad_x = x_vjp(ax + cfg.alpha * rx)
    grad_y = y_vjp(ay + cfg.alpha * ry)
    return LossReport(
        total=float(total),
        alignment=float(alignment),
        reg_x=float(reg_x),
        reg_y=float(reg_y),
        grad_x=grad_x,
        grad_y=grad_y,
    )


def lav_loss(x_emb: np.ndarray, y_emb: np.ndarray, cfg: LavConfig) -> LossReport:
    """The full combined objective: smoothed alignment plus weighted
    contrastive regularization of both sequences."""
    return pair_loss(x_emb, y_emb, cfg, use_alignment=True, regularizer="cidm")


def resolve_loss_arm(arm: str, cfg: LavConfig) -> tuple[bool, str, LavConfig]:
    """Map a loss-arm name to ``(use_alignment, regularizer, config)``.

    Arms: ``lav`` (alignment + weighted contrastive), ``sdtw`` (alignment
    only), ``cidm`` / ``sfa`` / ``idm`` (regularizer only; ``sfa`` is the
    unweighted contrastive variant), ``sdtw+idm`` and ``sdtw+sfa``
    (alignment plus the named regularizer).
    """
    table: dict[str, tuple[bool, str, bool | None]] = {
        "lav": (True, "cidm", True),
        "sdtw": (True, "none", None),
        "cidm": (False, "cidm", True),
        "sfa": (False, "cidm", False),
        "idm": (False, "idm", None),
        "sdtw+idm": (True, "idm", None),
        "sdtw+sfa": (True, "cidm", False),
    }
    if arm not in table:
        raise ParameterError(f"unknown loss arm {arm!r}; expected one of {LOSS_ARMS}")
    use_alignment, regularizer, weighted = table[arm]
    if weighted is not None and cfg.cidm.weighted != weighted:
        cfg = replace(cfg, cidm=replace(cfg.cidm, weighted=weighted))
    return use_alignment, regularizer, cfg
