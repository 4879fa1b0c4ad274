"""Training, evaluation, sigma sweep, few-shot fine-tuning, checkpoints."""

from __future__ import annotations

import csv
import dataclasses
import json
import random
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np
import torch

from ocgnet.data import (
    GeoSample,
    ModelInputs,
    PreprocessConfig,
    load_manifest,
    preprocess,
)
from ocgnet.detection import AnchorTable, compute_loss, decode_and_select
from ocgnet.errors import CheckpointError, InvalidConfigError, InvalidInputError
from ocgnet.gkt import SIGMA_DRONE, SIGMA_GROUND
from ocgnet.metrics import EvalReport, per_class_report
from ocgnet.model import ModelConfig, OCGNet

CHECKPOINT_FORMAT_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 12
    learning_rate: float = 1e-4
    epochs: int = 25
    sigma_drone: float | None = None  # None -> modality default
    sigma_ground: float | None = None
    seed: int = 0
    deterministic: bool = True
    device: str = "cpu"
    mse_weight: float = 1.0
    max_steps: int | None = None  # cap on optimizer steps, for desk-scale runs

    def __post_init__(self):
        if self.batch_size < 1:
            raise InvalidConfigError("batch_size must be >= 1")
        if self.learning_rate < 0:
            raise InvalidConfigError("learning_rate must be >= 0")


@dataclass(frozen=True)
class FewShotConfig:
    batch_size: int = 6
    epochs: int = 20
    shots_per_category: int = 7


@dataclass(frozen=True)
class SweepConfig:
    sigma_start: float = 0.025
    sigma_end: float = 0.20
    sigma_step: float = 0.025
    thresholds: tuple[float, float] = (0.25, 0.50)

    def __post_init__(self):
        if self.sigma_start > self.sigma_end or self.sigma_step <= 0:
            raise InvalidConfigError("need sigma_start <= sigma_end and step > 0")

    def sigma_values(self) -> list[float]:
        n = int(round((self.sigma_end - self.sigma_start) / self.sigma_step)) + 1
        return [round(self.sigma_start + i * self.sigma_step, 6) for i in range(n)]


def seed_everything(seed: int, deterministic: bool = True):
    random.seed(seed)
    np.random.seed(seed)
    torch.manual_seed(seed)
    if deterministic:
        torch.use_deterministic_algorithms(True)


def save_checkpoint(
    path: str | Path,
    model: OCGNet,
    anchors: AnchorTable,
    preprocess_cfg: PreprocessConfig,
    train_cfg: TrainConfig | None = None,
    extra: dict | None = None,
):
    """Single archive: weight tensors plus a JSON-serializable header."""
    header = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "model_config": model.config.to_dict(),
        "nc": model.config.nc,
        "strides": {"c2": 16, "c3": 32},
        "sigma_defaults": {"drone": SIGMA_DRONE, "ground": SIGMA_GROUND},
        "norm_mean": list(preprocess_cfg.norm_mean),
        "norm_std": list(preprocess_cfg.norm_std),
        "anchors": anchors.to_list(),
        "query_sizes": {k: list(v) for k, v in preprocess_cfg.query_sizes.items()},
        "satellite_size": list(preprocess_cfg.satellite_size),
        "sigma_overrides": dict(preprocess_cfg.sigma_overrides),
        "optimizer": "adam",
        "train_config": asdict(train_cfg) if train_cfg else None,
    }
    if extra:
        header.update(extra)
    json.dumps(header)  # fail fast if anything is not serializable
    torch.save({"header": header, "state_dict": model.state_dict()}, path)


def load_checkpoint(path: str | Path, device: str = "cpu"):
    """-> (model in eval mode, anchors, preprocess config, header)."""
    try:
        blob = torch.load(path, map_location=device, weights_only=False)
    except Exception as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    header = blob.get("header")
    if not header or header.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint format in {path}: {header and header.get('format_version')}"
        )
    model = OCGNet(ModelConfig.from_dict(header["model_config"]))
    try:
        model.load_state_dict(blob["state_dict"])
    except RuntimeError as exc:
        raise CheckpointError(f"state dict incompatible with header config: {exc}") from exc
    model.to(device).eval()
    anchors = AnchorTable.from_list(header["anchors"])
    pre = PreprocessConfig(
        query_sizes={k: tuple(v) for k, v in header["query_sizes"].items()},
        satellite_size=tuple(header["satellite_size"]),
        norm_mean=tuple(header["norm_mean"]),
        norm_std=tuple(header["norm_std"]),
        sigma_overrides=dict(header.get("sigma_overrides", {})),
    )
    return model, anchors, pre, header


def _load_inputs(
    samples: list[GeoSample], pre: PreprocessConfig, base_dir: Path
) -> list[ModelInputs]:
    return [preprocess(s, pre, base_dir) for s in samples]


def _batch_loss(model, batch: list[ModelInputs], anchors, cfg: TrainConfig):
    query = torch.stack([b.query for b in batch]).to(cfg.device)
    heat = torch.stack([b.heatmap for b in batch]).to(cfg.device)
    sat = torch.stack([b.satellite for b in batch]).to(cfg.device)
    raw, _ = model(query, heat, sat)
    totals, mses, bces = [], [], []
    for i, b in enumerate(batch):
        lb = compute_loss(raw[i], b.gt_box, anchors, mse_weight=cfg.mse_weight)
        totals.append(lb.total)
        mses.append(lb.mse)
        bces.append(lb.bce)
    return (
        torch.stack(totals).mean(),
        torch.stack(mses).mean(),
        torch.stack(bces).mean(),
    )


def evaluate_model(
    model: OCGNet,
    inputs: list[ModelInputs],
    anchors: AnchorTable,
    device: str = "cpu",
) -> EvalReport:
    """Deterministic forward pass over preprocessed samples."""
    if not inputs:
        raise InvalidInputError("nothing to evaluate")
    model.eval()
    pairs = []
    with torch.no_grad():
        for b in sorted(inputs, key=lambda x: x.sample_id):
            raw, _ = model(
                b.query.unsqueeze(0).to(device),
                b.heatmap.unsqueeze(0).to(device),
                b.satellite.unsqueeze(0).to(device),
            )
            pred = decode_and_select(raw[0].cpu(), anchors)
            pairs.append((pred.box, b.gt_box, b.class_label))
    return per_class_report(pairs)


def train(
    cfg: TrainConfig,
    manifest: str | Path,
    out_dir: str | Path,
    model_config: ModelConfig | None = None,
    anchors: AnchorTable | None = None,
    preprocess_cfg: PreprocessConfig | None = None,
    base_model: OCGNet | None = None,
) -> Path:
    """Train on the manifest's train split; returns the best checkpoint path.

    Writes ``train_log.jsonl`` (one row per epoch with total/mse/bce and
    validation metrics when a validation split exists), ``best.pt`` and
    ``final.pt`` under ``out_dir``.
    """
    manifest = Path(manifest)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    anchors = anchors or AnchorTable.default()
    pre = preprocess_cfg or PreprocessConfig()
    if cfg.sigma_drone is not None or cfg.sigma_ground is not None:
        overrides = dict(pre.sigma_overrides)
        if cfg.sigma_drone is not None:
            overrides["drone"] = cfg.sigma_drone
        if cfg.sigma_ground is not None:
            overrides["ground"] = cfg.sigma_ground
        pre = dataclasses.replace(pre, sigma_overrides=overrides)

    seed_everything(cfg.seed, cfg.deterministic)
    samples, _ = load_manifest(manifest)
    train_samples = [s for s in samples if s.split == "train"]
    val_samples = [s for s in samples if s.split == "validation"]
    if not train_samples:
        raise InvalidInputError("manifest has no train split")
    base_dir = manifest.parent
    train_inputs = _load_inputs(train_samples, pre, base_dir)
    val_inputs = _load_inputs(val_samples, pre, base_dir)

    model = base_model if base_model is not None else OCGNet(model_config)
    model.to(cfg.device).train()
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate)

    log_path = out_dir / "train_log.jsonl"
    best_path = out_dir / "best.pt"
    final_path = out_dir / "final.pt"
    best_acc = -1.0
    rng = random.Random(cfg.seed)
    step = 0
    with open(log_path, "a", encoding="utf-8") as log:
        for epoch in range(cfg.epochs):
            model.train()
            order = list(range(len(train_inputs)))
            rng.shuffle(order)
            ep_total = ep_mse = ep_bce = 0.0
            n_batches = 0
            for i in range(0, len(order), cfg.batch_size):
                if cfg.max_steps is not None and step >= cfg.max_steps:
                    break
                batch = [train_inputs[j] for j in order[i : i + cfg.batch_size]]
                total, mse, bce = _batch_loss(model, batch, anchors, cfg)
                if not torch.isfinite(total):
                    raise RuntimeError(
                        "training diverged (non-finite loss) on batch "
                        f"{[b.sample_id for b in batch]}"
                    )
                optimizer.zero_grad()
                total.backward()
                optimizer.step()
                step += 1
                ep_total += total.item()
                ep_mse += mse.item()
                ep_bce += bce.item()
                n_batches += 1
            if n_batches == 0:
                break
            row = {
                "epoch": epoch,
                "step": step,
                "loss_total": ep_total / n_batches,
                "loss_mse": ep_mse / n_batches,
                "loss_bce": ep_bce / n_batches,
            }
            select_inputs = val_inputs or train_inputs
            report = evaluate_model(model, select_inputs, anchors, cfg.device)
            row["val_acc_at_25"] = report.acc_at_25
            row["val_acc_at_50"] = report.acc_at_50
            log.write(json.dumps(row, sort_keys=True) + "\n")
            log.flush()
            if report.acc_at_25 > best_acc:
                best_acc = report.acc_at_25
                save_checkpoint(best_path, model, anchors, pre, cfg, {"epoch": epoch})
            if cfg.max_steps is not None and step >= cfg.max_steps:
                break
    save_checkpoint(final_path, model, anchors, pre, cfg, {"epoch": cfg.epochs - 1})
    if not best_path.exists():
        save_checkpoint(best_path, model, anchors, pre, cfg)
    return best_path


def evaluate(
    checkpoint: str | Path, manifest: str | Path, split: str = "test", device: str = "cpu"
) -> EvalReport:
    manifest = Path(manifest)
    model, anchors, pre, _ = load_checkpoint(checkpoint, device)
    samples, _ = load_manifest(manifest)
    chosen = [s for s in samples if s.split == split]
    if not chosen:
        raise InvalidInputError(f"split {split!r} not present in manifest")
    inputs = _load_inputs(chosen, pre, manifest.parent)
    return evaluate_model(model, inputs, anchors, device)


def sweep_sigma(
    sweep: SweepConfig,
    train_cfg: TrainConfig,
    manifest: str | Path,
    out_dir: str | Path,
    split: str = "train",
    model_config: ModelConfig | None = None,
    preprocess_cfg: PreprocessConfig | None = None,
) -> Path:
    """Train one model per sigma and record accuracy per row.

    CSV header is fixed: ``sigma,acc_at_25,acc_at_50,split``; a failed
    run keeps its row with empty metrics and split ``failed``.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "sigma_sweep.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sigma", "acc_at_25", "acc_at_50", "split"])
        for sigma in sweep.sigma_values():
            run_cfg = dataclasses.replace(
                train_cfg, sigma_drone=sigma, sigma_ground=sigma
            )
            run_dir = out_dir / f"sigma_{sigma:g}"
            try:
                ckpt = train(
                    run_cfg,
                    manifest,
                    run_dir,
                    model_config=model_config,
                    preprocess_cfg=preprocess_cfg,
                )
                report = evaluate(ckpt, manifest, split, device=train_cfg.device)
                writer.writerow(
                    [sigma, f"{report.acc_at_25:.4f}", f"{report.acc_at_50:.4f}", split]
                )
            except Exception:
                writer.writerow([sigma, "", "", "failed"])
    return csv_path


def finetune_fewshot(
    base_checkpoint: str | Path,
    train_manifest: str | Path,
    test_manifest: str | Path,
    out_dir: str | Path,
    fs_cfg: FewShotConfig | None = None,
    train_cfg: TrainConfig | None = None,
) -> tuple[Path, EvalReport]:
    """Fine-tune all weights from a base checkpoint on a few-shot corpus."""
    fs = fs_cfg or FewShotConfig()
    base_cfg = train_cfg or TrainConfig()
    cfg = dataclasses.replace(base_cfg, batch_size=fs.batch_size, epochs=fs.epochs)
    model, anchors, pre, _ = load_checkpoint(base_checkpoint, cfg.device)
    ckpt = train(
        cfg,
        train_manifest,
        out_dir,
        anchors=anchors,
        preprocess_cfg=pre,
        base_model=model,
    )
    report = evaluate(ckpt, test_manifest, split="test", device=cfg.device)
    return ckpt, report
