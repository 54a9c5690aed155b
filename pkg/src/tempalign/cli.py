"""Command-line interface: gen, train, eval, align, retrieve.

Every command takes ``--config`` (flat key-value file), repeatable
``--set key=value`` overrides (flag wins over file), and ``--seed`` as a
shortcut for ``--set seed=N``. Outputs are written atomically and every
output directory receives the fully resolved configuration as
``config.cfg``. All commands exit 0 on success and nonzero on any error.
"""

from __future__ import annotations

import os
import sys

import click
import numpy as np

from .alignment import dtw
from .config import RunConfig, build_run_config, parse_config_text
from .encoder import load_checkpoint, save_checkpoint, train, write_text_atomic
from .metrics import (
    DEFAULT_RETRIEVAL_KS,
    embed_video,
    evaluate,
    frame_retrieval_ap,
    kendall_tau,
)
from .numeric import pairwise_sq_dist
from .svgplot import render_heatmap_svg
from .synthdata import (
    gen_config_echo,
    generate,
    read_dataset,
    split_dataset,
    write_dataset,
)

LOSS_LOG_HEADER = "step,total,alignment,reg_x,reg_y"


def _fail(message: str) -> "NoReturn":  # noqa: F821 - doc-only annotation
    click.echo(f"error: {message}", err=True)
    sys.exit(1)


def _load_run_config(config_path: str | None, sets: tuple[str, ...], seed: int | None) -> RunConfig:
    file_values = None
    if config_path:
        with open(config_path, "r", encoding="utf-8") as fh:
            file_values = parse_config_text(fh.read(), source=config_path)
    overrides: dict[str, str] = {}
    for item in sets:
        if "=" not in item:
            raise click.UsageError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key.strip()] = value.strip()
    if seed is not None:
        overrides["seed"] = str(seed)
    return build_run_config(file_values, overrides)


def common_options(fn):
    fn = click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
                      default=None, help="Flat key-value config file.")(fn)
    fn = click.option("--set", "sets", multiple=True, metavar="KEY=VALUE",
                      help="Override a config key; repeatable, wins over --config.")(fn)
    fn = click.option("--seed", type=int, default=None,
                      help="Shortcut for --set seed=N.")(fn)
    return fn


@click.group()
@click.version_option(package_name="tempalign")
def main() -> None:
    """Temporal-alignment toolkit: data generation, training, evaluation."""


@main.command("gen")
@common_options
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False),
              help="Output dataset directory.")
@click.option("--force", is_flag=True, help="Allow writing into a non-empty directory.")
def cmd_gen(config_path, sets, seed, out_dir, force) -> None:
    """Generate a synthetic dataset on disk."""
    try:
        cfg = _load_run_config(config_path, sets, seed)
        if os.path.isdir(out_dir) and os.listdir(out_dir) and not force:
            _fail(f"output directory {out_dir!r} is not empty; pass --force to overwrite")
        gen_cfg = cfg.gen_config()
        videos = generate(gen_cfg)
        write_dataset(videos, out_dir, config_echo=gen_config_echo(gen_cfg))
        write_text_atomic(os.path.join(out_dir, "config.cfg"), cfg.to_text())
        click.echo(f"wrote {len(videos)} videos to {out_dir}")
    except SystemExit:
        raise
    except Exception as exc:
        _fail(str(exc))


@main.command("train")
@common_options
@click.option("--dataset", "dataset_dir", required=True,
              type=click.Path(exists=True, file_okay=False), help="Dataset directory.")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False),
              help="Output directory for checkpoint, loss log, and config echo.")
@click.option("--loss", "loss_arm", default="lav",
              type=click.Choice(["lav", "sdtw", "cidm", "sfa", "idm", "sdtw+idm", "sdtw+sfa"]),
              help="Loss arm to train.")
def cmd_train(config_path, sets, seed, dataset_dir, out_dir, loss_arm) -> None:
    """Train the encoder on the training split of a dataset."""
    try:
        cfg = _load_run_config(config_path, sets, seed)
        videos, _ = read_dataset(dataset_dir)
        train_videos, _ = split_dataset(videos, cfg.val_fraction)
        input_dim = videos[0].frames.shape[1]
        result = train(
            train_videos,
            cfg.encoder_config(input_dim),
            cfg.train_config(),
            cfg.lav_config(),
            loss_arm=loss_arm,
        )
        os.makedirs(out_dir, exist_ok=True)
        save_checkpoint(
            os.path.join(out_dir, "checkpoint.json"),
            cfg.encoder_config(input_dim),
            result.params,
            meta={"loss_arm": loss_arm, "steps": cfg.steps, "seed": cfg.seed},
        )
        rows = [LOSS_LOG_HEADER]
        rows.extend(
            f"{rec.step},{rec.total!r},{rec.alignment!r},{rec.reg_x!r},{rec.reg_y!r}"
            for rec in result.history
        )
        write_text_atomic(os.path.join(out_dir, "loss_log.csv"), "\n".join(rows) + "\n")
        write_text_atomic(os.path.join(out_dir, "config.cfg"), cfg.to_text())
        click.echo(f"trained {loss_arm} for {len(result.history)} steps -> {out_dir}")
    except SystemExit:
        raise
    except Exception as exc:
        _fail(str(exc))


@main.command("eval")
@common_options
@click.option("--checkpoint", "checkpoint_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--dataset", "dataset_dir", required=True,
              type=click.Path(exists=True, file_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--label-fraction", "label_fraction", type=float, default=None,
              help="Fraction of labeled training videos for the classification probe.")
@click.option("--k", "ks_text", default=None, metavar="K1,K2,...",
              help="Retrieval cutoffs; default from config.")
def cmd_eval(config_path, sets, seed, checkpoint_path, dataset_dir, out_dir,
             label_fraction, ks_text) -> None:
    """Evaluate a frozen checkpoint on the validation split of a dataset."""
    try:
        cfg = _load_run_config(config_path, sets, seed)
        enc_cfg, params, _, _ = load_checkpoint(checkpoint_path)
        videos, _ = read_dataset(dataset_dir)
        train_videos, val_videos = split_dataset(videos, cfg.val_fraction)
        fraction = cfg.label_fraction if label_fraction is None else label_fraction
        ks = cfg.retrieval_ks if ks_text is None else tuple(
            int(v) for v in ks_text.split(",") if v
        )
        report = evaluate(
            train_videos, val_videos, enc_cfg, params,
            label_fraction=fraction, ks=ks, seed=cfg.seed,
        )
        os.makedirs(out_dir, exist_ok=True)
        write_text_atomic(os.path.join(out_dir, "report.txt"), report.to_text())
        write_text_atomic(os.path.join(out_dir, "config.cfg"), cfg.to_text())
        click.echo(report.to_text(), nl=False)
    except SystemExit:
        raise
    except Exception as exc:
        _fail(str(exc))


@main.command("align")
@common_options
@click.option("--checkpoint", "checkpoint_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--dataset", "dataset_dir", required=True,
              type=click.Path(exists=True, file_okay=False))
@click.option("--out-prefix", "out_prefix", required=True,
              help="Prefix for <prefix>_distance.csv, <prefix>_heatmap.svg, <prefix>_summary.txt")
@click.argument("video_a")
@click.argument("video_b")
def cmd_align(config_path, sets, seed, checkpoint_path, dataset_dir, out_prefix,
              video_a, video_b) -> None:
    """Align two videos of a dataset under a checkpoint's embedding space."""
    try:
        _load_run_config(config_path, sets, seed)
        enc_cfg, params, _, _ = load_checkpoint(checkpoint_path)
        videos, _ = read_dataset(dataset_dir)
        by_id = {v.video_id: v for v in videos}
        for vid in (video_a, video_b):
            if vid not in by_id:
                _fail(f"video {vid!r} not found in dataset {dataset_dir!r}")
        emb_a = embed_video(by_id[video_a], enc_cfg, params)
        emb_b = embed_video(by_id[video_b], enc_cfg, params)
        d = pairwise_sq_dist(emb_a, emb_b)
        result = dtw(d)
        tau = kendall_tau(emb_a, emb_b)

        csv_text = "\n".join(",".join(repr(x) for x in row) for row in d) + "\n"
        write_text_atomic(f"{out_prefix}_distance.csv", csv_text)
        write_text_atomic(
            f"{out_prefix}_heatmap.svg",
            render_heatmap_svg(d, result.path.steps, title=f"{video_a} vs {video_b}"),
        )
        summary = (
            f"video_a = {video_a}\n"
            f"video_b = {video_b}\n"
            f"dtw_value = {result.value!r}\n"
            f"kendall_tau = {tau!r}\n"
        )
        write_text_atomic(f"{out_prefix}_summary.txt", summary)
        click.echo(summary, nl=False)
    except SystemExit:
        raise
    except Exception as exc:
        _fail(str(exc))


@main.command("retrieve")
@common_options
@click.option("--checkpoint", "checkpoint_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--dataset", "dataset_dir", required=True,
              type=click.Path(exists=True, file_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False),
              help="Output table file.")
@click.option("--k", "ks_text", default=None, metavar="K1,K2,...",
              help="Retrieval cutoffs; defaults to 5,10,15.")
def cmd_retrieve(config_path, sets, seed, checkpoint_path, dataset_dir, out_path,
                 ks_text) -> None:
    """Frame-retrieval precision over every validation video as query."""
    try:
        cfg = _load_run_config(config_path, sets, seed)
        enc_cfg, params, _, _ = load_checkpoint(checkpoint_path)
        videos, _ = read_dataset(dataset_dir)
        _, val_videos = split_dataset(videos, cfg.val_fraction)
        ks = DEFAULT_RETRIEVAL_KS if ks_text is None else tuple(
            int(v) for v in ks_text.split(",") if v
        )
        emb = {v.video_id: embed_video(v, enc_cfg, params) for v in val_videos}
        actions = sorted({v.action_id for v in val_videos})
        lines = ["action," + ",".join(f"ap_at_{k}" for k in ks)]
        overall: dict[int, list[float]] = {k: [] for k in ks}
        for action in actions:
            val_a = [v for v in val_videos if v.action_id == action]
            row = [action]
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
                        frame_retrieval_ap(
                            emb[query.video_id], query.phase_labels, support, k
                        )
                    )
                mean_ap = float(np.mean(aps)) if aps else float("nan")
                overall[k].append(mean_ap)
                row.append(repr(mean_ap))
            lines.append(",".join(row))
        lines.append(
            "mean," + ",".join(repr(float(np.mean(overall[k]))) for k in ks)
        )
        table = "\n".join(lines) + "\n"
        write_text_atomic(out_path, table)
        click.echo(table, nl=False)
    except SystemExit:
        raise
    except Exception as exc:
        _fail(str(exc))


if __name__ == "__main__":
    main()
