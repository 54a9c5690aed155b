"""Evaluation metrics on frozen embeddings.

All metrics operate in the canonical embedding space: encoder outputs are
L2-normalized per frame (see :func:`embed_video`), matching the space the
training objective sees. The four metrics:

* phase classification: accuracy of a multinomial logistic-regression probe
  trained on a video-subsampled labeled fraction of the training frames;
* phase progression: validation R^2 of a closed-form ridge regression onto
  per-frame progression targets;
* Kendall's tau: rank correlation of nearest-neighbor frame matching
  between two videos (tau-a; nearest-neighbor ties count as neither
  concordant nor discordant);
* retrieval precision AP@K: fraction of the K nearest support frames that
  share the query frame's phase label.

:func:`evaluate` computes all four per action on a train/validation split
and averages across actions into an :class:`EvalReport`. Everything is
deterministic given the supplied seeds.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .encoder import EncoderConfig, EncoderParams, encode
from .errors import ContractViolationError, ParameterError, UndefinedMetricError
from .loss import l2_normalize
from .numeric import make_rng, pairwise_sq_dist
from .synthdata import SyntheticVideo

logger = logging.getLogger(__name__)

DEFAULT_RETRIEVAL_KS = (5, 10, 15)


@dataclass
class EvalReport:
    """Aggregate metric values plus the per-action breakdown.

    ``per_action`` maps action id to a flat dict with keys
    ``classification_acc``, ``progression_r2``, ``kendall_tau`` and
    ``ap_at_<K>``; the top-level fields are unweighted means over actions.
    """

    classification_acc: float
    progression_r2: float
    kendall_tau: float
    ap_at_k: dict[int, float]
    per_action: dict[str, dict[str, float]]

    def to_text(self) -> str:
        """Deterministic ``key = value`` serialization (documented key set)."""
        lines = [
            f"classification_acc = {self.classification_acc!r}",
            f"progression_r2 = {self.progression_r2!r}",
            f"kendall_tau = {self.kendall_tau!r}",
        ]
        for k in sorted(self.ap_at_k):
            lines.append(f"ap_at_{k} = {self.ap_at_k[k]!r}")
        for action in sorted(self.per_action):
            for key in sorted(self.per_action[action]):
                lines.append(f"action.{action}.{key} = {self.per_action[action][key]!r}")
        return "\n".join(lines) + "\n"


def embed_video(
    video: SyntheticVideo, enc_cfg: EncoderConfig, params: EncoderParams
) -> np.ndarray:
    """Encode all frames of a video and L2-normalize (the canonical space)."""
    return l2_normalize(encode(video.frames, enc_cfg, params))[0]


def mean_offdiag_selfdist(embeddings: Sequence[np.ndarray]) -> float:
    """Mean off-diagonal squared self-distance, averaged over sequences.

    The collapse indicator: near zero when all frames of each sequence map
    to one point.
    """
    vals = []
    for emb in embeddings:
        d = pairwise_sq_dist(emb, emb)
        n = d.shape[0]
        if n < 2:
            continue
        vals.append((d.sum() / (n * n - n)))
    if not vals:
        raise ContractViolationError("need at least one sequence with two or more frames")
    return float(np.mean(vals))


def _power_iteration_lmax(gram: np.ndarray, iters: int = 60) -> float:
    vec = np.ones(gram.shape[0]) / np.sqrt(gram.shape[0])
    for _ in range(iters):
        nxt = gram @ vec
        norm = np.linalg.norm(nxt)
        if norm == 0:
            return 0.0
        vec = nxt / norm
    return float(vec @ (gram @ vec))


def fit_multinomial_logreg(
    x: np.ndarray,
    y: np.ndarray,
    classes: np.ndarray,
    *,
    ridge: float = 1e-6,
    max_iter: int = 2000,
    tol: float = 1e-7,
) -> np.ndarray:
    """Full-batch gradient descent on softmax cross-entropy; deterministic.

    The step size is the inverse of the Lipschitz bound
    ``0.5 * lambda_max(X^T X) / N + ridge`` of the gradient, so convergence
    does not depend on feature scaling tricks. Returns the (d+1) x C weight
    matrix including the intercept row.
    """
    n = x.shape[0]
    xi = np.concatenate([x, np.ones((n, 1))], axis=1)
    class_index = {c: i for i, c in enumerate(classes.tolist())}
    onehot = np.zeros((n, len(classes)))
    onehot[np.arange(n), [class_index[v] for v in y.tolist()]] = 1.0

    lmax = _power_iteration_lmax(xi.T @ xi)
    lr = 1.0 / (0.5 * lmax / n + ridge)
    w = np.zeros((xi.shape[1], len(classes)))
    for _ in range(max_iter):
        logits = xi @ w
        logits -= logits.max(axis=1, keepdims=True)
        expl = np.exp(logits)
        probs = expl / expl.sum(axis=1, keepdims=True)
        grad = xi.T @ (probs - onehot) / n + ridge * w
        if float(np.abs(grad).max()) < tol:
            break
        w -= lr * grad
    return w


def phase_classification(
    train_videos: Sequence[tuple[np.ndarray, np.ndarray]],
    val_videos: Sequence[tuple[np.ndarray, np.ndarray]],
    label_fraction: float,
    rng: np.random.Generator,
) -> float:
    """Per-frame phase accuracy of a logistic probe on frozen embeddings.

    ``label_fraction`` subsamples whole training *videos* (at least one)
    before any frames are pooled; validation frames are never subsampled.
    """
    if not 0 < label_fraction <= 1:
        raise ParameterError(f"label_fraction must be in (0, 1], got {label_fraction}")
    if not train_videos or not val_videos:
        raise ContractViolationError("need non-empty train and validation video lists")
    n_train = len(train_videos)
    n_labeled = max(1, int(np.ceil(label_fraction * n_train)))
    chosen = rng.permutation(n_train)[:n_labeled]
    x_train = np.concatenate([train_videos[i][0] for i in chosen])
    y_train = np.concatenate([train_videos[i][1] for i in chosen])
    x_val = np.concatenate([emb for emb, _ in val_videos])
    y_val = np.concatenate([labels for _, labels in val_videos])

    classes = np.unique(y_train)
    missing = sorted(set(y_val.tolist()) - set(classes.tolist()))
    if missing:
        logger.warning(
            "phases %s absent from the labeled training frames; classifier "
            "trained on %d present classes", missing, len(classes),
        )
    w = fit_multinomial_logreg(x_train, y_train, classes)
    xi = np.concatenate([x_val, np.ones((x_val.shape[0], 1))], axis=1)
    predicted = classes[np.argmax(xi @ w, axis=1)]
    return float(np.mean(predicted == y_val))


def phase_progression(
    train_x: np.ndarray,
    train_y: np.ndarray,
    val_x: np.ndarray,
    val_y: np.ndarray,
    ridge: float = 1e-6,
) -> float:
    """Validation R^2 of closed-form ridge regression onto progression targets.

    Features and targets are centered on training statistics (the intercept
    is unpenalized); R^2 is ``1 - SS_res / SS_tot`` about the validation
    target mean. Raises :class:`UndefinedMetricError` when the validation
    targets have zero variance.
    """
    val_y = np.asarray(val_y, dtype=np.float64)
    ss_tot = float(((val_y - val_y.mean()) ** 2).sum())
    if ss_tot == 0.0:
        raise UndefinedMetricError("validation targets have zero variance; R^2 undefined")
    train_x = np.asarray(train_x, dtype=np.float64)
    train_y = np.asarray(train_y, dtype=np.float64)
    x_mean = train_x.mean(axis=0)
    y_mean = float(train_y.mean())
    xc = train_x - x_mean
    beta = np.linalg.solve(
        xc.T @ xc + ridge * np.eye(train_x.shape[1]), xc.T @ (train_y - y_mean)
    )
    pred = (np.asarray(val_x, dtype=np.float64) - x_mean) @ beta + y_mean
    ss_res = float(((val_y - pred) ** 2).sum())
    return 1.0 - ss_res / ss_tot


def kendall_tau(emb_u: np.ndarray, emb_v: np.ndarray) -> float:
    """Rank correlation of nearest-neighbor matching from ``emb_u`` into ``emb_v``.

    Each frame i of U is matched to its nearest frame nu(i) of V by squared
    distance (first minimum on ties). Over all index pairs i < j, pairs with
    nu(i) < nu(j) are concordant, nu(i) > nu(j) discordant, and equal
    matches count as neither; the result is (C - D) / (n(n-1)/2).
    """
    emb_u = np.asarray(emb_u, dtype=np.float64)
    if emb_u.ndim != 2 or emb_u.shape[0] < 2:
        raise ContractViolationError("emb_u must be 2-D with at least 2 frames")
    nu = np.argmin(pairwise_sq_dist(emb_u, emb_v), axis=1)
    diff = nu[None, :] - nu[:, None]
    upper = np.triu_indices(len(nu), k=1)
    concordant = int((diff[upper] > 0).sum())
    discordant = int((diff[upper] < 0).sum())
    n = len(nu)
    return (concordant - discordant) / (n * (n - 1) / 2)


def frame_retrieval_ap(
    query_emb: np.ndarray,
    query_labels: np.ndarray,
    support: Sequence[tuple[str, np.ndarray, np.ndarray]],
    k: int,
) -> float:
    """Mean fraction of the K nearest support frames sharing the query label.

    ``support`` holds ``(video_id, embeddings, labels)`` triples and must
    not contain the query video. Distance ties are broken by
    ``(video_id, frame_index)`` order.
    """
    if k < 1:
        raise ParameterError(f"k must be >= 1, got {k}")
    order = sorted(range(len(support)), key=lambda i: support[i][0])
    support_emb = np.concatenate([support[i][1] for i in order])
    support_labels = np.concatenate([support[i][2] for i in order])
    if support_emb.shape[0] < k:
        raise ParameterError(
            f"support has {support_emb.shape[0]} frames, fewer than k={k}"
        )
    d = pairwise_sq_dist(np.asarray(query_emb, dtype=np.float64), support_emb)
    # Stable argsort on rows pre-ordered by (video_id, frame_index) implements
    # the documented tie-break.
    nearest = np.argsort(d, axis=1, kind="stable")[:, :k]
    hits = support_labels[nearest] == np.asarray(query_labels)[:, None]
    return float(hits.mean())


def evaluate(
    train_videos: Sequence[SyntheticVideo],
    val_videos: Sequence[SyntheticVideo],
    enc_cfg: EncoderConfig,
    params: EncoderParams,
    *,
    label_fraction: float = 1.0,
    ks: Sequence[int] = DEFAULT_RETRIEVAL_KS,
    seed: int = 0,
) -> EvalReport:
    """Frozen-encoder evaluation of all four metrics, per action then averaged.

    Kendall's tau is averaged over all ordered validation pairs within each
    action; retrieval uses each validation video as query against the other
    validation videos of the same action.
    """
    if not train_videos or not val_videos:
        raise ContractViolationError("need non-empty train and validation sets")
    emb = {v.video_id: embed_video(v, enc_cfg, params) for v in (*train_videos, *val_videos)}
    actions = sorted({v.action_id for v in val_videos})
    rng = make_rng(seed, 0xE7A1)

    per_action: dict[str, dict[str, float]] = {}
    for action in actions:
        train_a = [v for v in train_videos if v.action_id == action]
        val_a = [v for v in val_videos if v.action_id == action]
        if not train_a or not val_a:
            raise ContractViolationError(f"action {action!r} missing from a split")
        metrics: dict[str, float] = {}

        metrics["classification_acc"] = phase_classification(
            [(emb[v.video_id], v.phase_labels) for v in train_a],
            [(emb[v.video_id], v.phase_labels) for v in val_a],
            label_fraction,
            rng,
        )
        metrics["progression_r2"] = phase_progression(
            np.concatenate([emb[v.video_id] for v in train_a]),
            np.concatenate([v.progression for v in train_a]),
            np.concatenate([emb[v.video_id] for v in val_a]),
            np.concatenate([v.progression for v in val_a]),
        )

        taus = [
            kendall_tau(emb[u.video_id], emb[v.video_id])
            for u in val_a
            for v in val_a
            if u.video_id != v.video_id
        ]
        metrics["kendall_tau"] = float(np.mean(taus)) if taus else float("nan")

        for k in ks:
            aps = []
            for query in val_a:
                support = [
                    (v.video_id, emb[v.video_id], v.phase_labels)
                    for v in val_a
                    if v.video_id != query.video_id
                ]
                if not support:
                    continue
                aps.append(
                    frame_retrieval_ap(emb[query.video_id], query.phase_labels, support, k)
                )
            metrics[f"ap_at_{k}"] = float(np.mean(aps)) if aps else float("nan")
        per_action[action] = metrics

    def action_mean(key: str) -> float:
        return float(np.mean([per_action[a][key] for a in actions]))

    return EvalReport(
        classification_acc=action_mean("classification_acc"),
        progression_r2=action_mean("progression_r2"),
        kendall_tau=action_mean("kendall_tau"),
        ap_at_k={k: action_mean(f"ap_at_{k}") for k in ks},
        per_action=per_action,
    )
