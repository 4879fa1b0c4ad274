"""Estimator-style wrapper so the localizer composes with sklearn tooling.

``ClickGeoLocalizer`` follows the fit/predict/get_params protocol:
``fit`` trains on a manifest (path or sample list), ``predict`` returns
one box per sample, ``score`` is acc@0.25 as a fraction.  Duck-typed
against sklearn's estimator contract, no sklearn import required.
"""

from __future__ import annotations

import tempfile
from pathlib import Path

from ocgnet.data import GeoSample, PreprocessConfig, load_manifest, write_manifest
from ocgnet.detection import PredictedBox, decode_and_select
from ocgnet.errors import InvalidInputError
from ocgnet.metrics import acc_at_t
from ocgnet.model import ModelConfig
from ocgnet.pipeline import TrainConfig, load_checkpoint, train, _load_inputs

import torch


def _check_samples(X) -> tuple[list[GeoSample], Path]:
    """Accept a manifest path or a list of GeoSample; return (samples, base_dir)."""
    if isinstance(X, (str, Path)):
        samples, errors = load_manifest(X)
        if errors.rows:
            raise InvalidInputError(f"manifest has invalid rows: {errors.rows}")
        return samples, Path(X).parent
    if isinstance(X, (list, tuple)) and all(isinstance(s, GeoSample) for s in X):
        return list(X), Path(".")
    raise InvalidInputError(
        "X must be a manifest path or a list of GeoSample, got " f"{type(X).__name__}"
    )


class ClickGeoLocalizer:
    def __init__(
        self,
        model_size: str = "full",
        batch_size: int = 12,
        learning_rate: float = 1e-4,
        epochs: int = 25,
        seed: int = 0,
        deterministic: bool = True,
        sigma_drone: float | None = None,
        sigma_ground: float | None = None,
        device: str = "cpu",
        max_steps: int | None = None,
        query_size: tuple[int, int] | None = None,
        satellite_size: tuple[int, int] | None = None,
        work_dir: str | None = None,
    ):
        self.model_size = model_size
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.seed = seed
        self.deterministic = deterministic
        self.sigma_drone = sigma_drone
        self.sigma_ground = sigma_ground
        self.device = device
        self.max_steps = max_steps
        self.query_size = query_size
        self.satellite_size = satellite_size
        self.work_dir = work_dir

    _param_names = (
        "model_size",
        "batch_size",
        "learning_rate",
        "epochs",
        "seed",
        "deterministic",
        "sigma_drone",
        "sigma_ground",
        "device",
        "max_steps",
        "query_size",
        "satellite_size",
        "work_dir",
    )

    def get_params(self, deep: bool = True) -> dict:
        return {name: getattr(self, name) for name in self._param_names}

    def set_params(self, **params) -> "ClickGeoLocalizer":
        for name, value in params.items():
            if name not in self._param_names:
                raise InvalidInputError(f"unknown parameter {name!r}")
            setattr(self, name, value)
        return self

    def _preprocess_config(self) -> PreprocessConfig:
        kwargs = {}
        if self.query_size is not None:
            kwargs["query_sizes"] = {
                "drone": tuple(self.query_size),
                "ground": (self.query_size[0], self.query_size[1] * 2),
            }
        if self.satellite_size is not None:
            kwargs["satellite_size"] = tuple(self.satellite_size)
        return PreprocessConfig(**kwargs)

    def fit(self, X, y=None) -> "ClickGeoLocalizer":
        """Train on the manifest's train split.  y is ignored (targets
        live inside the samples)."""
        samples, base_dir = _check_samples(X)
        if isinstance(X, (str, Path)):
            manifest = Path(X)
        else:
            self._tmp = tempfile.TemporaryDirectory(prefix="ocgnet_fit_")
            manifest = Path(self._tmp.name) / "manifest.jsonl"
            write_manifest(samples, manifest)
        out_dir = Path(self.work_dir) if self.work_dir else Path(
            tempfile.mkdtemp(prefix="ocgnet_run_")
        )
        cfg = TrainConfig(
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            epochs=self.epochs,
            sigma_drone=self.sigma_drone,
            sigma_ground=self.sigma_ground,
            seed=self.seed,
            deterministic=self.deterministic,
            device=self.device,
            max_steps=self.max_steps,
        )
        model_config = ModelConfig.tiny() if self.model_size == "tiny" else ModelConfig()
        self.checkpoint_path_ = train(
            cfg,
            manifest,
            out_dir,
            model_config=model_config,
            preprocess_cfg=self._preprocess_config(),
        )
        self.model_, self.anchors_, self.preprocess_, _ = load_checkpoint(
            self.checkpoint_path_, self.device
        )
        return self

    def _require_fitted(self):
        if not hasattr(self, "model_"):
            raise InvalidInputError("estimator is not fitted; call fit() first")

    def predict(self, X) -> list[PredictedBox]:
        """One predicted box (satellite pixels) per sample, in input order."""
        self._require_fitted()
        samples, base_dir = _check_samples(X)
        inputs = _load_inputs(samples, self.preprocess_, base_dir)
        out = []
        with torch.no_grad():
            for b in inputs:
                raw, _ = self.model_(
                    b.query.unsqueeze(0).to(self.device),
                    b.heatmap.unsqueeze(0).to(self.device),
                    b.satellite.unsqueeze(0).to(self.device),
                )
                out.append(decode_and_select(raw[0].cpu(), self.anchors_))
        return out

    def score(self, X, y=None) -> float:
        """acc@0.25 as a fraction in [0, 1]."""
        samples, base_dir = _check_samples(X)
        preds = self.predict(X)
        inputs = _load_inputs(samples, self.preprocess_, base_dir)
        pairs = [(p.box, b.gt_box) for p, b in zip(preds, inputs)]
        return acc_at_t(pairs, 0.25) / 100.0
