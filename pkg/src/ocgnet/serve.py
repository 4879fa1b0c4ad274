"""HTTP prediction service.

Loads one checkpoint and answers click-to-locate requests; optionally
serves a fixture manifest so a browser client can pick sample pairs.
"""

from __future__ import annotations

import base64
import io
import time
from pathlib import Path

import numpy as np
import torch
from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import Response
from pydantic import BaseModel, Field
from PIL import Image

from ocgnet.data import load_manifest
from ocgnet.detection import decode_and_select
from ocgnet.errors import OcgnetError
from ocgnet.gkt import ClickPoint, GktConfig, default_sigma, gkt_map
from ocgnet.model import normalize_image
from ocgnet.pipeline import load_checkpoint

API_VERSION = 1


class PredictRequest(BaseModel):
    v: int = API_VERSION
    sample_id: str | None = None
    query_image: str | None = None  # base64 PNG/JPEG
    satellite_image: str | None = None
    query_kind: str = "drone"
    click: tuple[float, float] = Field(..., description="normalized (x, y) in [0,1]")
    sigma: float | None = None
    return_attention: bool = False


class HeatmapPayload(BaseModel):
    data: list[float]  # row-major
    dims: tuple[int, int]  # (h, w)


class PredictResponse(BaseModel):
    v: int = API_VERSION
    bbox: tuple[float, float, float, float]  # normalized cx, cy, w, h
    score: float
    latency_ms: float
    a_s: HeatmapPayload | None = None
    f_u_l: HeatmapPayload | None = None


def _decode_image(b64: str) -> Image.Image:
    try:
        img = Image.open(io.BytesIO(base64.b64decode(b64)))
        img.load()
        return img.convert("RGB")
    except Exception as exc:
        raise HTTPException(status_code=400, detail=f"undecodable image: {exc}") from exc


class PredictionService:
    """Checkpoint + fixture state behind the HTTP endpoints.

    Weights are immutable after load; concurrent requests share them
    read-only and keep all per-request tensors private.
    """

    def __init__(self, checkpoint: str | Path, fixture_dir: str | Path | None = None):
        self.model, self.anchors, self.pre, self.header = load_checkpoint(checkpoint)
        self.checkpoint_id = Path(checkpoint).name
        self.fixture_dir = Path(fixture_dir) if fixture_dir else None
        self.samples = {}
        if self.fixture_dir is not None:
            manifest = self.fixture_dir / "manifest.jsonl"
            if manifest.is_file():
                rows, _ = load_manifest(manifest)
                self.samples = {s.sample_id: s for s in rows}

    def _resolve_images(self, req: PredictRequest) -> tuple[Image.Image, Image.Image, str]:
        has_images = req.query_image is not None and req.satellite_image is not None
        if bool(req.sample_id) == has_images:
            raise HTTPException(
                status_code=422,
                detail="provide either sample_id or both images, not both or neither",
            )
        if req.sample_id:
            sample = self.samples.get(req.sample_id)
            if sample is None:
                raise HTTPException(status_code=404, detail=f"unknown sample {req.sample_id}")
            q = Image.open(self.fixture_dir / sample.query_path).convert("RGB")
            s = Image.open(self.fixture_dir / sample.satellite_path).convert("RGB")
            return q, s, sample.query_kind
        return _decode_image(req.query_image), _decode_image(req.satellite_image), req.query_kind

    def predict(self, req: PredictRequest) -> PredictResponse:
        nx, ny = req.click
        if not (0 <= nx <= 1 and 0 <= ny <= 1):
            raise HTTPException(status_code=422, detail="click outside the unit square")
        query_img, sat_img, kind = self._resolve_images(req)
        if kind not in self.pre.query_sizes:
            raise HTTPException(status_code=422, detail=f"unknown query_kind {kind!r}")
        start = time.perf_counter()
        qh, qw = self.pre.query_sizes[kind]
        sh, sw = self.pre.satellite_size

        query = torch.from_numpy(
            np.asarray(query_img.resize((qw, qh), Image.BILINEAR), dtype=np.float32) / 255.0
        ).permute(2, 0, 1)
        sat = torch.from_numpy(
            np.asarray(sat_img.resize((sw, sh), Image.BILINEAR), dtype=np.float32) / 255.0
        ).permute(2, 0, 1)
        query = normalize_image(query, self.pre.norm_mean, self.pre.norm_std)
        sat = normalize_image(sat, self.pre.norm_mean, self.pre.norm_std)

        click = ClickPoint(min(nx * qw, qw - 1e-6), min(ny * qh, qh - 1e-6))
        sigma = req.sigma or self.pre.sigma_overrides.get(kind) or default_sigma(kind)
        try:
            heat = gkt_map(click, GktConfig(sigma=sigma, height=qh, width=qw))
        except OcgnetError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc

        with torch.no_grad():
            raw, art = self.model(
                query.unsqueeze(0),
                torch.from_numpy(heat).unsqueeze(0).unsqueeze(0),
                sat.unsqueeze(0),
                return_attention=req.return_attention,
            )
        pred = decode_and_select(raw[0], self.anchors)
        b = pred.box
        bbox = (
            float(np.clip(b.cx / sw, 0, 1)),
            float(np.clip(b.cy / sh, 0, 1)),
            float(np.clip(b.w / sw, 0, 1)),
            float(np.clip(b.h / sh, 0, 1)),
        )
        latency_ms = (time.perf_counter() - start) * 1000.0
        resp = PredictResponse(bbox=bbox, score=pred.score, latency_ms=latency_ms)
        if req.return_attention:
            a_s = art.a_s[0, 0].numpy()
            f_u_l = art.f_u_l[0, 0].numpy()
            resp.a_s = HeatmapPayload(data=a_s.ravel().tolist(), dims=a_s.shape)
            resp.f_u_l = HeatmapPayload(data=f_u_l.ravel().tolist(), dims=f_u_l.shape)
        return resp


def measure_latency(
    service: PredictionService, request: PredictRequest, runs: int = 100, warmup: int = 3
) -> dict:
    """Average warm single-request latency; reporting only, no threshold."""
    for _ in range(warmup):
        service.predict(request)
    times = []
    for _ in range(runs):
        start = time.perf_counter()
        service.predict(request)
        times.append((time.perf_counter() - start) * 1000.0)
    return {
        "runs": runs,
        "mean_ms": float(np.mean(times)),
        "p50_ms": float(np.median(times)),
        "max_ms": float(np.max(times)),
    }


def create_app(
    checkpoint: str | Path | None = None,
    fixture_dir: str | Path | None = None,
    service: PredictionService | None = None,
) -> FastAPI:
    app = FastAPI(title="ocgnet")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    if service is None and checkpoint is not None:
        service = PredictionService(checkpoint, fixture_dir)
    app.state.service = service

    def _svc() -> PredictionService:
        if app.state.service is None:
            raise HTTPException(status_code=503, detail="model not loaded")
        return app.state.service

    @app.get("/health")
    def health():
        svc = _svc()
        return {
            "v": API_VERSION,
            "status": "ok",
            "checkpoint_id": svc.checkpoint_id,
            "model_params": svc.model.param_count(),
        }

    @app.post("/predict", response_model=PredictResponse)
    def predict(req: PredictRequest):
        return _svc().predict(req)

    @app.get("/samples")
    def samples():
        svc = _svc()
        return {
            "v": API_VERSION,
            "samples": [
                {
                    "sample_id": s.sample_id,
                    "query_kind": s.query_kind,
                    "class_label": s.class_label,
                    "split": s.split,
                }
                for s in sorted(svc.samples.values(), key=lambda s: s.sample_id)
            ],
        }

    @app.get("/image/{sample_id}/{role}")
    def image(sample_id: str, role: str):
        svc = _svc()
        sample = svc.samples.get(sample_id)
        if sample is None or role not in ("query", "satellite"):
            raise HTTPException(status_code=404, detail="unknown sample or role")
        rel = sample.query_path if role == "query" else sample.satellite_path
        path = svc.fixture_dir / rel
        if not path.is_file():
            raise HTTPException(status_code=404, detail="image missing on disk")
        return Response(content=path.read_bytes(), media_type="image/png")

    return app


def run_server(
    checkpoint: str | Path,
    fixture_dir: str | Path | None = None,
    host: str = "127.0.0.1",
    port: int = 8008,
):
    import uvicorn

    uvicorn.run(create_app(checkpoint, fixture_dir), host=host, port=port)
