"""Command-line entry points for training, evaluation, and serving."""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

import click

from ocgnet.data import import_cvogl as import_cvogl_fn
from ocgnet.data import make_synthetic_fixture
from ocgnet.model import ModelConfig
from ocgnet.pipeline import (
    FewShotConfig,
    SweepConfig,
    TrainConfig,
    evaluate,
    finetune_fewshot,
    sweep_sigma,
    train,
)

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if p.suffix == ".toml":
        with open(p, "rb") as fh:
            return tomllib.load(fh)
    return json.loads(p.read_text())


def _train_config(config_path, **overrides) -> TrainConfig:
    data = _load_config_file(config_path).get("train", _load_config_file(config_path))
    cfg = TrainConfig(**{k: v for k, v in data.items() if k in TrainConfig.__dataclass_fields__})
    cleaned = {k: v for k, v in overrides.items() if v is not None}
    return dataclasses.replace(cfg, **cleaned) if cleaned else cfg


def _model_config(config_path, tiny: bool) -> ModelConfig:
    if tiny:
        return ModelConfig.tiny()
    data = _load_config_file(config_path).get("model")
    return ModelConfig.from_dict(data) if data else ModelConfig()


def _preprocess_config(config_path):
    """Optional [preprocess] section: query_sizes / satellite_size / sigma_overrides."""
    data = _load_config_file(config_path).get("preprocess")
    if not data:
        return None
    from ocgnet.data import PreprocessConfig

    kwargs = {}
    if "query_sizes" in data:
        kwargs["query_sizes"] = {k: tuple(v) for k, v in data["query_sizes"].items()}
    if "satellite_size" in data:
        kwargs["satellite_size"] = tuple(data["satellite_size"])
    if "sigma_overrides" in data:
        kwargs["sigma_overrides"] = dict(data["sigma_overrides"])
    return PreprocessConfig(**kwargs)


common = [
    click.option("--config", "config_path", type=click.Path(exists=True), default=None,
                 help="TOML/JSON config file"),
    click.option("--seed", type=int, default=None),
    click.option("--deterministic/--no-deterministic", default=None),
]


def add_common(fn):
    for deco in reversed(common):
        fn = deco(fn)
    return fn


@click.group()
def main():
    """Click-prompted cross-view geo-localization."""


@main.command("train")
@click.option("--manifest", required=True, type=click.Path(exists=True))
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--tiny", is_flag=True, help="use the desk-scale model config")
@add_common
def train_cmd(manifest, out_dir, tiny, config_path, seed, deterministic):
    cfg = _train_config(config_path, seed=seed, deterministic=deterministic)
    ckpt = train(
        cfg,
        manifest,
        out_dir,
        model_config=_model_config(config_path, tiny),
        preprocess_cfg=_preprocess_config(config_path),
    )
    click.echo(f"best checkpoint: {ckpt}")


@main.command("eval")
@click.option("--manifest", required=True, type=click.Path(exists=True))
@click.option("--checkpoint", required=True, type=click.Path(exists=True))
@click.option("--split", default="test", type=click.Choice(["train", "validation", "test"]))
@click.option("--json-out", "json_out", type=click.Path(), default=None)
def eval_cmd(manifest, checkpoint, split, json_out):
    report = evaluate(checkpoint, manifest, split)
    click.echo(report.to_table())
    if json_out:
        Path(json_out).write_text(report.to_json())


@main.command("sweep-sigma")
@click.option("--manifest", required=True, type=click.Path(exists=True))
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--split", default="train")
@click.option("--tiny", is_flag=True)
@add_common
def sweep_cmd(manifest, out_dir, split, tiny, config_path, seed, deterministic):
    cfg = _train_config(config_path, seed=seed, deterministic=deterministic)
    sweep_data = _load_config_file(config_path).get("sweep", {})
    sweep = SweepConfig(**{k: v for k, v in sweep_data.items()
                           if k in SweepConfig.__dataclass_fields__})
    csv_path = sweep_sigma(
        sweep, cfg, manifest, out_dir, split=split,
        model_config=_model_config(config_path, tiny),
        preprocess_cfg=_preprocess_config(config_path),
    )
    click.echo(f"sweep written to {csv_path}")


@main.command("finetune-fewshot")
@click.option("--checkpoint", required=True, type=click.Path(exists=True))
@click.option("--train-manifest", required=True, type=click.Path(exists=True))
@click.option("--test-manifest", required=True, type=click.Path(exists=True))
@click.option("--out-dir", required=True, type=click.Path())
@add_common
def fewshot_cmd(checkpoint, train_manifest, test_manifest, out_dir,
                config_path, seed, deterministic):
    cfg = _train_config(config_path, seed=seed, deterministic=deterministic)
    ckpt, report = finetune_fewshot(
        checkpoint, train_manifest, test_manifest, out_dir,
        fs_cfg=FewShotConfig(), train_cfg=cfg,
    )
    click.echo(report.to_table())
    click.echo(f"fine-tuned checkpoint: {ckpt}")


@main.command("predict")
@click.option("--checkpoint", required=True, type=click.Path(exists=True))
@click.option("--manifest", required=True, type=click.Path(exists=True))
@click.option("--split", default="test")
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="JSONL of prediction records")
def predict_cmd(checkpoint, manifest, split, out_path):
    import torch

    from ocgnet.data import load_manifest
    from ocgnet.detection import decode_and_select
    from ocgnet.pipeline import _load_inputs, load_checkpoint

    model, anchors, pre, _ = load_checkpoint(checkpoint)
    samples, _ = load_manifest(manifest)
    chosen = [s for s in samples if s.split == split]
    inputs = _load_inputs(chosen, pre, Path(manifest).parent)
    lines = []
    with torch.no_grad():
        for b in inputs:
            raw, _ = model(b.query.unsqueeze(0), b.heatmap.unsqueeze(0),
                           b.satellite.unsqueeze(0))
            pred = decode_and_select(raw[0], anchors)
            lines.append(json.dumps(pred.to_dict(sample_id=b.sample_id), sort_keys=True))
    text = "\n".join(lines)
    if out_path:
        Path(out_path).write_text(text + "\n")
    else:
        click.echo(text)


@main.command("serve")
@click.option("--checkpoint", required=True, type=click.Path(exists=True))
@click.option("--fixture-dir", type=click.Path(exists=True), default=None)
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8008, type=int)
def serve_cmd(checkpoint, fixture_dir, host, port):
    from ocgnet.serve import run_server

    run_server(checkpoint, fixture_dir, host=host, port=port)


@main.command("make-fixture")
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--seed", type=int, default=0)
@click.option("--n", type=int, default=8)
@click.option("--query-size", type=int, default=64)
@click.option("--satellite-size", type=int, default=128)
@click.option("--split", default="train")
def make_fixture_cmd(out_dir, seed, n, query_size, satellite_size, split):
    path = make_synthetic_fixture(
        out_dir, seed=seed, n=n,
        query_size=(query_size, query_size),
        satellite_size=(satellite_size, satellite_size),
        split=split,
    )
    click.echo(f"manifest written to {path}")


@main.command("import-cvogl")
@click.option("--root", required=True, type=click.Path(exists=True))
@click.option("--out", "out_manifest", required=True, type=click.Path())
def import_cvogl_cmd(root, out_manifest):
    n = import_cvogl_fn(root, out_manifest)
    click.echo(f"imported {n} samples to {out_manifest}")


if __name__ == "__main__":
    main()
