"""Frame encoder, optimizer, and training loop.

The encoder is a small per-frame MLP over context-stacked features: each
frame is concatenated with ``k`` later frames taken at a fixed stride
(clamped at the end of the sequence), passed through tanh hidden layers,
and linearly projected to the embedding width. tanh keeps the forward map
smooth so analytic gradients can be validated against finite differences.

Training minimizes a selected loss arm over randomly paired videos of the
same action. Each step draws a batch of pairs, samples ``p`` frames per
video (one uniformly per chunk of a ``p``-way partition), evaluates the
pair loss on the sampled embeddings, and applies one ADAM update with
decoupled weight decay (the decay term is subtracted from the parameters
directly and never enters the moment estimates). Every run is bit
reproducible from its seed, and every run starts with a finite-difference
gradient check of the full pipeline on a miniature instance.

Checkpoints are JSON documents (format_version 1) storing the encoder
configuration, all weights and biases, and optionally the training RNG
state; floats are serialized with full round-trip precision.
"""

from __future__ import annotations

import json
import logging
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolationError, ParameterError, TrainingDivergedError
from .loss import LavConfig, LossReport, pair_loss, resolve_loss_arm
from .numeric import make_rng
from .regularizer import CIdmConfig

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT_VERSION = 1


@dataclass(frozen=True)
class EncoderConfig:
    """Shape of the frame encoder.

    ``input_dim`` is the width of raw frames; the MLP consumes
    ``input_dim * (context_frames + 1)`` features after context stacking.
    """

    input_dim: int
    hidden_dims: tuple[int, ...] = (64,)
    embed_dim: int = 128
    context_frames: int = 1
    context_stride: int = 15
    activation: str = "tanh"

    def __post_init__(self) -> None:
        if self.input_dim < 1:
            raise ParameterError(f"input_dim must be >= 1, got {self.input_dim}")
        if self.embed_dim < 1:
            raise ParameterError(f"embed_dim must be >= 1, got {self.embed_dim}")
        if self.context_frames < 0:
            raise ParameterError(f"context_frames must be >= 0, got {self.context_frames}")
        if self.context_stride < 1:
            raise ParameterError(f"context_stride must be >= 1, got {self.context_stride}")
        if self.activation != "tanh":
            raise ParameterError(f"unsupported activation {self.activation!r}")
        if any(h < 1 for h in self.hidden_dims):
            raise ParameterError(f"hidden widths must be >= 1, got {self.hidden_dims}")

    @property
    def stacked_dim(self) -> int:
        return self.input_dim * (self.context_frames + 1)

    def layer_dims(self) -> list[tuple[int, int]]:
        widths = [self.stacked_dim, *self.hidden_dims, self.embed_dim]
        return list(zip(widths[:-1], widths[1:]))


@dataclass
class EncoderParams:
    """Per-layer weight matrices (fan_in x fan_out) and bias vectors."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    init_seed: int

    def copy(self) -> "EncoderParams":
        return EncoderParams(
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            init_seed=self.init_seed,
        )

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(w)) for w in self.weights) and all(
            np.all(np.isfinite(b)) for b in self.biases
        )


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer and sampling settings for one training run."""

    learning_rate: float = 1e-4
    weight_decay: float = 1e-5
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    frames_per_video: int = 20
    batch_pairs: int = 2
    steps: int = 500
    seed: int = 0

    def __post_init__(self) -> None:
        if self.frames_per_video < 2:
            raise ParameterError(f"frames_per_video must be >= 2, got {self.frames_per_video}")
        if self.learning_rate < 0 or self.weight_decay < 0:
            raise ParameterError("learning_rate and weight_decay must be >= 0")
        if not (0 <= self.adam_beta1 < 1 and 0 <= self.adam_beta2 < 1):
            raise ParameterError("adam betas must lie in [0, 1)")
        if self.adam_eps <= 0:
            raise ParameterError("adam_eps must be > 0")
        if self.batch_pairs < 1:
            raise ParameterError("batch_pairs must be >= 1")
        if self.steps < 0:
            raise ParameterError("steps must be >= 0")


def init_params(cfg: EncoderConfig, seed: int) -> EncoderParams:
    """Initialize weights uniformly in ``+-1/sqrt(fan_in)``; biases at zero."""
    rng = make_rng(seed, 0xE17C0DE)
    weights, biases = [], []
    for fan_in, fan_out in cfg.layer_dims():
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return EncoderParams(weights=weights, biases=biases, init_seed=int(seed))


def stack_context(frames: np.ndarray, k: int, stride: int) -> np.ndarray:
    """Concatenate each frame with its ``k`` context frames at ``t + stride * c``.

    Context indices past the end of the sequence are clamped to the last
    frame. ``k=0`` returns the input unchanged (as a copy).
    """
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 2 or frames.shape[0] < 1:
        raise ContractViolationError("frames must be a non-empty 2-D array")
    if k < 0 or stride < 1:
        raise ParameterError("need k >= 0 and stride >= 1")
    t_total, d = frames.shape
    offsets = stride * np.arange(k + 1)
    idx = np.minimum(np.arange(t_total)[:, None] + offsets[None, :], t_total - 1)
    return frames[idx].reshape(t_total, d * (k + 1))


def _forward_activations(
    frames: np.ndarray, cfg: EncoderConfig, params: EncoderParams
) -> list[np.ndarray]:
    """Activations per layer, starting with the context-stacked input."""
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 2 or frames.shape[1] != cfg.input_dim:
        raise ContractViolationError(
            f"frames must be T x {cfg.input_dim}, got {frames.shape}"
        )
    acts = [stack_context(frames, cfg.context_frames, cfg.context_stride)]
    n_layers = len(params.weights)
    for layer, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = acts[-1] @ w + b
        acts.append(z if layer == n_layers - 1 else np.tanh(z))
    return acts


def encode(frames: np.ndarray, cfg: EncoderConfig, params: EncoderParams) -> np.ndarray:
    """Deterministic forward pass; returns T x embed_dim pre-normalization embeddings."""
    return _forward_activations(frames, cfg, params)[-1]


def encode_backward(
    frames: np.ndarray,
    cfg: EncoderConfig,
    params: EncoderParams,
    grad_embeddings: np.ndarray,
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Backpropagate an embedding gradient to per-layer parameter gradients.

    Recomputes the forward activations internally; returns
    ``(grad_weights, grad_biases)`` aligned with ``params``.
    """
    grad = np.asarray(grad_embeddings, dtype=np.float64)
    acts = _forward_activations(frames, cfg, params)
    if grad.shape != acts[-1].shape:
        raise ContractViolationError(
            f"grad_embeddings must have shape {acts[-1].shape}, got {grad.shape}"
        )
    n_layers = len(params.weights)
    grad_w: list[np.ndarray] = [None] * n_layers
    grad_b: list[np.ndarray] = [None] * n_layers
    for layer in range(n_layers - 1, -1, -1):
        if layer != n_layers - 1:
            grad = grad * (1.0 - acts[layer + 1] ** 2)  # tanh'
        grad_w[layer] = acts[layer].T @ grad
        grad_b[layer] = grad.sum(axis=0)
        if layer > 0:
            grad = grad @ params.weights[layer].T
    return grad_w, grad_b


def sample_frames(t_total: int, p: int, rng: np.random.Generator) -> np.ndarray:
    """Sample one frame index uniformly from each chunk of a p-way partition.

    Chunk ``i`` covers ``[floor(i*T/p), floor((i+1)*T/p))``; the returned
    indices are strictly increasing.
    """
    if p < 1:
        raise ParameterError(f"p must be >= 1, got {p}")
    if t_total < p:
        raise ParameterError(f"cannot sample {p} chunks from {t_total} frames")
    idx = np.empty(p, dtype=np.int64)
    for i in range(p):
        lo = (i * t_total) // p
        hi = ((i + 1) * t_total) // p
        idx[i] = rng.integers(lo, hi)
    return idx


def make_pairs(
    groups: dict[str, list[str]], rng: np.random.Generator
) -> list[tuple[str, str]]:
    """Randomly pair videos within each action group; disjoint pairs only.

    Groups are visited in sorted key order for determinism. A group with a
    single video is skipped with a warning; in odd-sized groups one video
    sits out (a fresh draw next epoch gives it another chance).
    """
    pairs: list[tuple[str, str]] = []
    for action in sorted(groups):
        ids = list(groups[action])
        if len(ids) < 2:
            logger.warning("action %r has %d video(s); skipped for pairing", action, len(ids))
            continue
        order = rng.permutation(len(ids))
        for a, b in zip(order[0::2], order[1::2]):
            pairs.append((ids[int(a)], ids[int(b)]))
    return pairs


class AdamOptimizer:
    """ADAM with decoupled weight decay over an :class:`EncoderParams` pytree."""

    def __init__(self, params: EncoderParams, cfg: TrainConfig):
        self.cfg = cfg
        self.t = 0
        self.m_w = [np.zeros_like(w) for w in params.weights]
        self.v_w = [np.zeros_like(w) for w in params.weights]
        self.m_b = [np.zeros_like(b) for b in params.biases]
        self.v_b = [np.zeros_like(b) for b in params.biases]

    def step(
        self,
        params: EncoderParams,
        grad_w: list[np.ndarray],
        grad_b: list[np.ndarray],
    ) -> None:
        cfg = self.cfg
        self.t += 1
        bc1 = 1.0 - cfg.adam_beta1**self.t
        bc2 = 1.0 - cfg.adam_beta2**self.t
        for tensors, grads, ms, vs in (
            (params.weights, grad_w, self.m_w, self.v_w),
            (params.biases, grad_b, self.m_b, self.v_b),
        ):
            for theta, g, m, v in zip(tensors, grads, ms, vs):
                m *= cfg.adam_beta1
                m += (1.0 - cfg.adam_beta1) * g
                v *= cfg.adam_beta2
                v += (1.0 - cfg.adam_beta2) * (g * g)
                update = (m / bc1) / (np.sqrt(v / bc2) + cfg.adam_eps)
                theta -= cfg.learning_rate * update
                if cfg.weight_decay:
                    theta -= cfg.learning_rate * cfg.weight_decay * theta


@dataclass
class StepRecord:
    """Mean loss components over the pairs of one optimizer step."""

    step: int
    total: float
    alignment: float
    reg_x: float
    reg_y: float


@dataclass
class TrainResult:
    params: EncoderParams
    history: list[StepRecord] = field(default_factory=list)


def _pair_param_grads(
    frames: np.ndarray,
    sampled: np.ndarray,
    cfg: EncoderConfig,
    params: EncoderParams,
    grad_emb_sampled: np.ndarray,
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    full = np.zeros((frames.shape[0], cfg.embed_dim))
    full[sampled] = grad_emb_sampled
    return encode_backward(frames, cfg, params, full)


def evaluate_pair(
    frames_x: np.ndarray,
    frames_y: np.ndarray,
    idx_x: np.ndarray,
    idx_y: np.ndarray,
    enc_cfg: EncoderConfig,
    params: EncoderParams,
    lav_cfg: LavConfig,
    *,
    use_alignment: bool = True,
    regularizer: str = "cidm",
) -> tuple[LossReport, list[np.ndarray], list[np.ndarray]]:
    """Loss and parameter gradients of one video pair at the sampled indices."""
    emb_x = encode(frames_x, enc_cfg, params)[idx_x]
    emb_y = encode(frames_y, enc_cfg, params)[idx_y]
    report = pair_loss(
        emb_x, emb_y, lav_cfg, use_alignment=use_alignment, regularizer=regularizer
    )
    gw_x, gb_x = _pair_param_grads(frames_x, idx_x, enc_cfg, params, report.grad_x)
    gw_y, gb_y = _pair_param_grads(frames_y, idx_y, enc_cfg, params, report.grad_y)
    grad_w = [a + b for a, b in zip(gw_x, gw_y)]
    grad_b = [a + b for a, b in zip(gb_x, gb_y)]
    return report, grad_w, grad_b


def gradient_check(tolerance: float = 1e-4) -> float:
    """Finite-difference check of the full pipeline gradient on a tiny instance.

    Builds a fixed miniature problem (T=6, input_dim=3, hidden=(5,),
    embed_dim=4), compares the analytic loss-to-parameter gradient against
    central differences, and raises ``TrainingDivergedError`` if the worst
    relative error exceeds ``tolerance``. Returns the worst error.
    """
    enc_cfg = EncoderConfig(
        input_dim=3, hidden_dims=(5,), embed_dim=4, context_frames=0, context_stride=1
    )
    # Small window so the miniature instance exercises both hinge branches.
    lav_cfg = LavConfig(gamma=0.1, alpha=1.0, cidm=CIdmConfig(sigma=2, lambda_margin=2.0))
    rng = make_rng(0xC0FFEE)
    params = init_params(enc_cfg, seed=0xC0FFEE)
    frames_x = rng.normal(size=(6, 3))
    frames_y = rng.normal(size=(6, 3))
    idx = np.arange(6)

    def loss_value(p: EncoderParams) -> float:
        emb_x = encode(frames_x, enc_cfg, p)[idx]
        emb_y = encode(frames_y, enc_cfg, p)[idx]
        return pair_loss(emb_x, emb_y, lav_cfg).total

    _, grad_w, grad_b = evaluate_pair(
        frames_x, frames_y, idx, idx, enc_cfg, params, lav_cfg
    )
    eps = 1e-6
    worst = 0.0
    for tensors, grads in ((params.weights, grad_w), (params.biases, grad_b)):
        for theta, g in zip(tensors, grads):
            flat = theta.ravel()
            gflat = g.ravel()
            for k in range(flat.size):
                orig = flat[k]
                flat[k] = orig + eps
                hi = loss_value(params)
                flat[k] = orig - eps
                lo = loss_value(params)
                flat[k] = orig
                fd = (hi - lo) / (2 * eps)
                err = abs(gflat[k] - fd) / max(abs(fd), abs(gflat[k]), 1e-8)
                worst = max(worst, err)
    if worst > tolerance:
        raise TrainingDivergedError(
            f"pipeline gradient check failed: relative error {worst:.3e} > {tolerance:.1e}"
        )
    return worst


def train(
    dataset,
    enc_cfg: EncoderConfig,
    train_cfg: TrainConfig,
    lav_cfg: LavConfig,
    *,
    loss_arm: str = "lav",
    run_gradient_check: bool = True,
) -> TrainResult:
    """Train the encoder on a list of videos; deterministic given the seed.

    ``dataset`` is a sequence of objects with ``video_id``, ``action_id``
    and ``frames`` attributes (see :mod:`tempalign.synthdata`). Videos of
    the same action are re-paired every epoch; each step consumes
    ``batch_pairs`` pairs and applies one ADAM update on the mean of the
    per-pair gradients. Aborts with :class:`TrainingDivergedError` if the
    loss or any parameter becomes non-finite.
    """
    use_alignment, regularizer, lav_cfg = resolve_loss_arm(loss_arm, lav_cfg)
    if run_gradient_check:
        gradient_check()

    videos = {v.video_id: v for v in dataset}
    groups: dict[str, list[str]] = {}
    for v in dataset:
        groups.setdefault(v.action_id, []).append(v.video_id)
    for ids in groups.values():
        ids.sort()
    if not any(len(ids) >= 2 for ids in groups.values()):
        raise ParameterError("no action group has two or more videos; nothing to pair")

    params = init_params(enc_cfg, seed=train_cfg.seed)
    optimizer = AdamOptimizer(params, train_cfg)
    rng = make_rng(train_cfg.seed, 0x7EA1)
    queue: list[tuple[str, str]] = []
    history: list[StepRecord] = []

    for step in range(train_cfg.steps):
        while len(queue) < train_cfg.batch_pairs:
            queue.extend(make_pairs(groups, rng))
        batch = [queue.pop(0) for _ in range(train_cfg.batch_pairs)]

        sum_w = [np.zeros_like(w) for w in params.weights]
        sum_b = [np.zeros_like(b) for b in params.biases]
        totals = np.zeros(4)
        for id_x, id_y in batch:
            vx, vy = videos[id_x], videos[id_y]
            idx_x = sample_frames(vx.frames.shape[0], train_cfg.frames_per_video, rng)
            idx_y = sample_frames(vy.frames.shape[0], train_cfg.frames_per_video, rng)
            report, grad_w, grad_b = evaluate_pair(
                vx.frames, vy.frames, idx_x, idx_y, enc_cfg, params, lav_cfg,
                use_alignment=use_alignment, regularizer=regularizer,
            )
            totals += (report.total, report.alignment, report.reg_x, report.reg_y)
            for acc, g in zip(sum_w, grad_w):
                acc += g
            for acc, g in zip(sum_b, grad_b):
                acc += g

        scale = 1.0 / len(batch)
        totals *= scale
        if not np.all(np.isfinite(totals)):
            raise TrainingDivergedError(
                f"non-finite loss at step {step}: total={totals[0]!r} "
                f"alignment={totals[1]!r} reg_x={totals[2]!r} reg_y={totals[3]!r}"
            )
        optimizer.step(params, [g * scale for g in sum_w], [g * scale for g in sum_b])
        if not params.all_finite():
            raise TrainingDivergedError(f"non-finite parameters after step {step}")
        history.append(StepRecord(step, *(float(t) for t in totals)))

    return TrainResult(params=params, history=history)


def _cfg_to_dict(cfg: EncoderConfig) -> dict:
    return {
        "input_dim": cfg.input_dim,
        "hidden_dims": list(cfg.hidden_dims),
        "embed_dim": cfg.embed_dim,
        "context_frames": cfg.context_frames,
        "context_stride": cfg.context_stride,
        "activation": cfg.activation,
    }


def _cfg_from_dict(doc: dict) -> EncoderConfig:
    return EncoderConfig(
        input_dim=int(doc["input_dim"]),
        hidden_dims=tuple(int(h) for h in doc["hidden_dims"]),
        embed_dim=int(doc["embed_dim"]),
        context_frames=int(doc["context_frames"]),
        context_stride=int(doc["context_stride"]),
        activation=str(doc["activation"]),
    )


def save_checkpoint(
    path: str,
    enc_cfg: EncoderConfig,
    params: EncoderParams,
    rng_state: dict | None = None,
    meta: dict | None = None,
) -> None:
    """Write a versioned JSON checkpoint atomically (temp file + rename).

    Layout: ``{"format_version": 1, "encoder": {...}, "params":
    {"init_seed", "layers": [{"weight": [[...]], "bias": [...]}, ...]},
    "rng_state": ..., "meta": ...}``. Floats round-trip exactly.
    """
    doc = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "encoder": _cfg_to_dict(enc_cfg),
        "params": {
            "init_seed": params.init_seed,
            "layers": [
                {"weight": w.tolist(), "bias": b.tolist()}
                for w, b in zip(params.weights, params.biases)
            ],
        },
        "rng_state": rng_state,
        "meta": meta or {},
    }
    write_text_atomic(path, json.dumps(doc, sort_keys=True))


def load_checkpoint(path: str) -> tuple[EncoderConfig, EncoderParams, dict | None, dict]:
    """Read a checkpoint written by :func:`save_checkpoint`."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    version = doc.get("format_version")
    if version != CHECKPOINT_FORMAT_VERSION:
        raise ContractViolationError(
            f"unsupported checkpoint format_version {version!r}"
        )
    cfg = _cfg_from_dict(doc["encoder"])
    layers = doc["params"]["layers"]
    params = EncoderParams(
        weights=[np.asarray(layer["weight"], dtype=np.float64) for layer in layers],
        biases=[np.asarray(layer["bias"], dtype=np.float64) for layer in layers],
        init_seed=int(doc["params"]["init_seed"]),
    )
    expected = cfg.layer_dims()
    actual = [(w.shape[0], w.shape[1]) for w in params.weights]
    if expected != actual:
        raise ContractViolationError(
            f"checkpoint layer shapes {actual} do not match encoder config {expected}"
        )
    return cfg, params, doc.get("rng_state"), doc.get("meta", {})


def write_text_atomic(path: str, text: str) -> None:
    """Write ``text`` to ``path`` via a temp file and atomic rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
