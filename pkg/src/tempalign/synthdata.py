"""Generator and on-disk format for phase-structured synthetic sequences.

Each action owns a smooth latent trajectory ``f(u)`` mapping a progress
value ``u`` in [0, 1] to ``feature_dim`` dimensions (a random low-frequency
Fourier curve plus a linear drift), together with fixed phase boundaries in
progress space shared by all of the action's videos. A video samples that
trajectory at monotonically increasing progress values whose spacing is
randomly warped (speed variation), applies a random orthogonal channel mix
(a viewpoint stand-in), and adds i.i.d. Gaussian noise. Phase labels and
key events come from the latent progress before any warping, so they are
consistent across differently warped videos of one action.

Per-frame annotations:

* ``phase_labels``: integer in [0, P); changes exactly at key-event frames.
* ``key_events``: the P-1 interior frame indices where the label increments.
* ``progression``: latent progress normalized to [0, 1] over the video
  (frame 0 maps to 0, the last frame to 1); non-decreasing by construction.

Dataset directory layout: a ``manifest.txt`` of ``key = value`` lines plus
one CSV per video:

    line 1: video_id,action_id,T,d_in,P
    line 2: comma-separated key-event frame indices
    lines 3..T+2: frame_index,phase_label,progression,feat_0,...,feat_{d-1}

Floats are written in scientific notation with 17 significant digits, so a
write/read round-trip is bit exact.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields

import numpy as np

from .encoder import write_text_atomic
from .errors import DatasetFormatError, ParameterError
from .numeric import make_rng

MANIFEST_NAME = "manifest.txt"
DATASET_FORMAT_VERSION = 1


def format_float(x: float) -> str:
    """Fixed-width scientific form with 17 significant digits (round-trip exact)."""
    return format(float(x), ".16e")


@dataclass
class SyntheticVideo:
    """One labeled sequence: raw frames plus per-frame annotations."""

    video_id: str
    action_id: str
    frames: np.ndarray  # T x d_in
    phase_labels: np.ndarray  # T, int64 in [0, num_phases)
    key_events: tuple[int, ...]  # P - 1 interior boundaries, strictly increasing
    progression: np.ndarray  # T, float64 in [0, 1], non-decreasing
    num_phases: int

    @property
    def num_frames(self) -> int:
        return int(self.frames.shape[0])


@dataclass(frozen=True)
class GenConfig:
    """Knobs of the synthetic generator."""

    num_actions: int = 3
    videos_per_action: int = 12
    phases_per_action: int = 4
    t_min: int = 40
    t_max: int = 80
    feature_dim: int = 8
    noise_std: float = 0.05
    warp_strength: float = 0.5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.num_actions < 1 or self.videos_per_action < 1:
            raise ParameterError("need at least one action and one video per action")
        if self.phases_per_action < 2:
            raise ParameterError(f"phases_per_action must be >= 2, got {self.phases_per_action}")
        if self.t_min < 2 * self.phases_per_action:
            raise ParameterError(
                f"t_min must be >= 2 * phases_per_action, got {self.t_min} < "
                f"{2 * self.phases_per_action}"
            )
        if self.t_max < self.t_min:
            raise ParameterError("t_max must be >= t_min")
        if self.feature_dim < 1:
            raise ParameterError("feature_dim must be >= 1")
        if self.noise_std < 0 or self.warp_strength < 0:
            raise ParameterError("noise_std and warp_strength must be >= 0")


class _ActionModel:
    """Latent trajectory and phase boundaries shared by one action's videos."""

    N_HARMONICS = 3

    def __init__(self, cfg: GenConfig, action_index: int):
        rng = make_rng(cfg.seed, action_index)
        d = cfg.feature_dim
        p = cfg.phases_per_action
        h = self.N_HARMONICS
        self.freqs = rng.uniform(0.5, 2.0, size=h)
        self.amps = rng.normal(size=(h, d)) / np.sqrt(h)
        self.phases = rng.uniform(0.0, 2.0 * np.pi, size=(h, d))
        self.drift = rng.normal(size=d)
        # Interior boundaries jittered around the even grid; the jitter is
        # bounded so every phase keeps width >= 0.5 / P in progress space.
        jitter = (rng.uniform(size=p - 1) - 0.5) * (0.5 / p)
        self.boundaries = np.arange(1, p) / p + jitter

    def trajectory(self, u: np.ndarray) -> np.ndarray:
        out = u[:, None] * self.drift[None, :]
        for h in range(self.N_HARMONICS):
            out = out + self.amps[h] * np.sin(
                2.0 * np.pi * self.freqs[h] * u[:, None] + self.phases[h]
            )
        return out


def _apportion(total: int, weights: np.ndarray) -> np.ndarray:
    """Largest-remainder split of ``total`` items proportional to ``weights``."""
    raw = weights / weights.sum() * total
    counts = np.floor(raw).astype(np.int64)
    remainder = total - int(counts.sum())
    if remainder:
        order = np.argsort(-(raw - counts), kind="stable")
        counts[order[:remainder]] += 1
    return counts


def _warped_increment_positions(n: int, strength: float, rng: np.random.Generator) -> np.ndarray:
    """n monotone offsets in [0, 1) starting at 0, spacing warped by ``strength``."""
    gaps = np.exp(strength * rng.normal(size=n))
    cum = np.concatenate(([0.0], np.cumsum(gaps[:-1])))
    return cum / gaps.sum()


def generate(cfg: GenConfig) -> list[SyntheticVideo]:
    """Deterministically generate the full dataset described by ``cfg``."""
    videos: list[SyntheticVideo] = []
    p = cfg.phases_per_action
    for a in range(cfg.num_actions):
        action_id = f"action{a:02d}"
        model = _ActionModel(cfg, a)
        edges = np.concatenate(([0.0], model.boundaries, [1.0]))
        widths = np.diff(edges)
        for v in range(cfg.videos_per_action):
            rng = make_rng(cfg.seed, a, v + 1)
            t_total = int(rng.integers(cfg.t_min, cfg.t_max + 1))

            # Phase durations: latent widths skewed by a per-video speed warp,
            # with at least one frame per phase.
            skew = np.exp(cfg.warp_strength * rng.normal(size=p))
            counts = 1 + _apportion(t_total - p, widths * skew)

            u_parts = [
                edges[i] + widths[i] * _warped_increment_positions(
                    int(counts[i]), cfg.warp_strength, rng
                )
                for i in range(p)
            ]
            u = np.concatenate(u_parts)
            progression = (u - u[0]) / (u[-1] - u[0])
            labels = np.repeat(np.arange(p, dtype=np.int64), counts)
            key_events = tuple(int(k) for k in np.cumsum(counts)[:-1])

            latent = model.trajectory(u)
            gaussian = rng.normal(size=(cfg.feature_dim, cfg.feature_dim))
            q, r = np.linalg.qr(gaussian)
            q = q * np.sign(np.diag(r))
            frames = latent @ q
            if cfg.noise_std > 0:
                frames = frames + cfg.noise_std * rng.normal(size=frames.shape)

            videos.append(
                SyntheticVideo(
                    video_id=f"{action_id}_v{v:03d}",
                    action_id=action_id,
                    frames=frames,
                    phase_labels=labels,
                    key_events=key_events,
                    progression=progression,
                    num_phases=p,
                )
            )
    return videos


def split_dataset(
    videos: list[SyntheticVideo], val_fraction: float = 0.25
) -> tuple[list[SyntheticVideo], list[SyntheticVideo]]:
    """Deterministic per-action train/validation split by video id order.

    The last ``round(val_fraction * n)`` videos of each action (at least one
    when the fraction is positive, never all of them) go to validation.
    """
    if not 0 <= val_fraction < 1:
        raise ParameterError(f"val_fraction must be in [0, 1), got {val_fraction}")
    by_action: dict[str, list[SyntheticVideo]] = {}
    for vid in videos:
        by_action.setdefault(vid.action_id, []).append(vid)
    train: list[SyntheticVideo] = []
    val: list[SyntheticVideo] = []
    for action in sorted(by_action):
        group = sorted(by_action[action], key=lambda v: v.video_id)
        if val_fraction == 0:
            n_val = 0
        else:
            n_val = min(len(group) - 1, max(1, int(round(val_fraction * len(group)))))
        cut = len(group) - n_val
        train.extend(group[:cut])
        val.extend(group[cut:])
    return train, val


def _video_text(video: SyntheticVideo) -> str:
    t_total, d = video.frames.shape
    lines = [
        f"{video.video_id},{video.action_id},{t_total},{d},{video.num_phases}",
        ",".join(str(k) for k in video.key_events),
    ]
    for t in range(t_total):
        feats = ",".join(format_float(x) for x in video.frames[t])
        lines.append(
            f"{t},{int(video.phase_labels[t])},{format_float(video.progression[t])},{feats}"
        )
    return "\n".join(lines) + "\n"


def write_dataset(
    videos: list[SyntheticVideo],
    path: str,
    dataset_name: str = "synthetic",
    config_echo: dict | None = None,
) -> None:
    """Write the manifest and one CSV per video under directory ``path``.

    Every file is written atomically; the manifest lists the video files so
    readers can detect missing ones.
    """
    os.makedirs(path, exist_ok=True)
    actions = sorted({v.action_id for v in videos})
    ordered = sorted(videos, key=lambda v: v.video_id)
    feature_dim = ordered[0].frames.shape[1] if ordered else 0
    lines = [
        f"format_version = {DATASET_FORMAT_VERSION}",
        f"dataset_name = {dataset_name}",
        f"feature_dim = {feature_dim}",
        f"actions = {','.join(actions)}",
        f"videos = {','.join(v.video_id for v in ordered)}",
    ]
    for key in sorted(config_echo or {}):
        lines.append(f"gen.{key} = {config_echo[key]}")
    for video in ordered:
        write_text_atomic(os.path.join(path, f"{video.video_id}.csv"), _video_text(video))
    write_text_atomic(os.path.join(path, MANIFEST_NAME), "\n".join(lines) + "\n")


def _parse_manifest(path: str) -> dict[str, str]:
    doc: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if " = " not in line:
                raise DatasetFormatError(f"{path}:{lineno}: expected 'key = value'")
            key, value = line.split(" = ", 1)
            doc[key.strip()] = value.strip()
    return doc


def _parse_video_file(path: str) -> SyntheticVideo:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if len(lines) < 2:
        raise DatasetFormatError(f"{path}: truncated file ({len(lines)} lines)")
    header = lines[0].split(",")
    if len(header) != 5:
        raise DatasetFormatError(f"{path}:1: header must have 5 fields, got {len(header)}")
    video_id, action_id = header[0], header[1]
    try:
        t_total, d, p = int(header[2]), int(header[3]), int(header[4])
    except ValueError as exc:
        raise DatasetFormatError(f"{path}:1: non-integer header field: {exc}") from exc
    if len(lines) != t_total + 2:
        raise DatasetFormatError(
            f"{path}: expected {t_total + 2} lines for T={t_total}, got {len(lines)}"
        )
    try:
        key_events = tuple(int(k) for k in lines[1].split(",") if k != "")
    except ValueError as exc:
        raise DatasetFormatError(f"{path}:2: bad key-events line: {exc}") from exc

    frames = np.empty((t_total, d))
    labels = np.empty(t_total, dtype=np.int64)
    progression = np.empty(t_total)
    for t in range(t_total):
        lineno = t + 3
        parts = lines[t + 2].split(",")
        if len(parts) != 3 + d:
            raise DatasetFormatError(
                f"{path}:{lineno}: expected {3 + d} fields, got {len(parts)}"
            )
        try:
            frame_index = int(parts[0])
            labels[t] = int(parts[1])
            progression[t] = float(parts[2])
            frames[t] = [float(x) for x in parts[3:]]
        except ValueError as exc:
            raise DatasetFormatError(f"{path}:{lineno}: bad numeric field: {exc}") from exc
        if frame_index != t:
            raise DatasetFormatError(f"{path}:{lineno}: frame_index {frame_index} != {t}")
    return SyntheticVideo(
        video_id=video_id,
        action_id=action_id,
        frames=frames,
        phase_labels=labels,
        key_events=key_events,
        progression=progression,
        num_phases=p,
    )


def read_dataset(path: str) -> tuple[list[SyntheticVideo], dict[str, str]]:
    """Read a dataset directory; returns ``(videos, manifest)``.

    Raises :class:`DatasetFormatError` on any malformed or missing file;
    nothing partial is ever returned.
    """
    manifest_path = os.path.join(path, MANIFEST_NAME)
    if not os.path.exists(manifest_path):
        raise DatasetFormatError(f"{manifest_path}: manifest not found")
    manifest = _parse_manifest(manifest_path)
    if manifest.get("format_version") != str(DATASET_FORMAT_VERSION):
        raise DatasetFormatError(
            f"{manifest_path}: unsupported format_version {manifest.get('format_version')!r}"
        )
    listed = manifest.get("videos", "")
    video_ids = [v for v in listed.split(",") if v] if listed else []
    videos = []
    for video_id in video_ids:
        file_path = os.path.join(path, f"{video_id}.csv")
        if not os.path.exists(file_path):
            raise DatasetFormatError(f"{file_path}: listed in manifest but missing")
        video = _parse_video_file(file_path)
        if video.video_id != video_id:
            raise DatasetFormatError(
                f"{file_path}: header video_id {video.video_id!r} != filename {video_id!r}"
            )
        videos.append(video)
    return videos, manifest


def gen_config_echo(cfg: GenConfig) -> dict[str, str]:
    """Flat string mapping of every generator field, for manifest echoing."""
    return {f.name: str(getattr(cfg, f.name)) for f in fields(cfg)}
