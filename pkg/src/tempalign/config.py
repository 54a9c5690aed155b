"""Flat key-value run configuration shared by every CLI command.

A config file holds ``key = value`` lines (``#`` comments allowed); CLI
``--set key=value`` overrides win over the file, which wins over the
defaults below. Unknown keys are rejected by name. The defaults for
learning rate, weight decay, smoothing, margin, window, context settings,
frames per video, and batch size are the published ones for this objective;
generator and evaluation knobs are artifacts of the desk-scale harness.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

from .encoder import EncoderConfig, TrainConfig
from .errors import ParameterError
from .loss import LavConfig
from .regularizer import CIdmConfig
from .synthdata import GenConfig


@dataclass(frozen=True)
class RunConfig:
    """Every tunable of the pipeline as one flat document."""

    seed: int = 0
    # synthetic data generation
    num_actions: int = 3
    videos_per_action: int = 12
    phases_per_action: int = 4
    t_min: int = 40
    t_max: int = 80
    feature_dim: int = 8
    noise_std: float = 0.05
    warp_strength: float = 0.5
    # encoder
    hidden_dims: tuple[int, ...] = (64,)
    embed_dim: int = 128
    context_frames: int = 1
    context_stride: int = 15
    activation: str = "tanh"
    # training
    learning_rate: float = 1e-4
    weight_decay: float = 1e-5
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    frames_per_video: int = 20
    batch_pairs: int = 2
    steps: int = 500
    # objective
    gamma: float = 0.1
    alpha: float = 1.0
    sigma: int = 15
    lambda_margin: float = 2.0
    cidm_weighted: bool = True
    # evaluation
    val_fraction: float = 0.25
    label_fraction: float = 1.0
    retrieval_ks: tuple[int, ...] = (5, 10, 15)

    def gen_config(self) -> GenConfig:
        return GenConfig(
            num_actions=self.num_actions,
            videos_per_action=self.videos_per_action,
            phases_per_action=self.phases_per_action,
            t_min=self.t_min,
            t_max=self.t_max,
            feature_dim=self.feature_dim,
            noise_std=self.noise_std,
            warp_strength=self.warp_strength,
            seed=self.seed,
        )

    def encoder_config(self, input_dim: int) -> EncoderConfig:
        return EncoderConfig(
            input_dim=input_dim,
            hidden_dims=self.hidden_dims,
            embed_dim=self.embed_dim,
            context_frames=self.context_frames,
            context_stride=self.context_stride,
            activation=self.activation,
        )

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate,
            weight_decay=self.weight_decay,
            adam_beta1=self.adam_beta1,
            adam_beta2=self.adam_beta2,
            adam_eps=self.adam_eps,
            frames_per_video=self.frames_per_video,
            batch_pairs=self.batch_pairs,
            steps=self.steps,
            seed=self.seed,
        )

    def lav_config(self) -> LavConfig:
        return LavConfig(
            gamma=self.gamma,
            alpha=self.alpha,
            cidm=CIdmConfig(
                sigma=self.sigma,
                lambda_margin=self.lambda_margin,
                weighted=self.cidm_weighted,
            ),
        )

    def to_text(self) -> str:
        """Full resolved configuration as sorted ``key = value`` lines."""
        lines = []
        for f in sorted(fields(self), key=lambda f: f.name):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = ",".join(str(v) for v in value)
            lines.append(f"{f.name} = {value}")
        return "\n".join(lines) + "\n"


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key: str, raw: str):
    kind = _FIELD_TYPES[key]
    raw = raw.strip()
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if kind == "str":
            return raw
        if kind.startswith("tuple"):
            if raw == "":
                return ()
            return tuple(int(v.strip()) for v in raw.split(","))
    except ValueError as exc:
        raise ParameterError(f"bad value for config key {key!r}: {exc}") from exc
    raise ParameterError(f"unhandled config field type {kind!r} for key {key!r}")


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    """Parse ``key = value`` lines into a raw string mapping."""
    doc: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ParameterError(f"{source}:{lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        doc[key.strip()] = value.strip()
    return doc


def build_run_config(
    file_values: dict[str, str] | None = None,
    overrides: dict[str, str] | None = None,
) -> RunConfig:
    """Merge defaults, config-file values, and overrides into a RunConfig.

    Rejects unknown keys by name; overrides win over file values.
    """
    merged: dict[str, str] = {}
    merged.update(file_values or {})
    merged.update(overrides or {})
    values = {}
    for key, raw in merged.items():
        if key not in _FIELD_TYPES:
            raise ParameterError(f"unknown config key: {key}")
        values[key] = _coerce(key, raw)
    return RunConfig(**values)
