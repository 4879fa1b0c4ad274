import base64
import io

import pytest
from fastapi.testclient import TestClient
from PIL import Image

from ocgnet.serve import (
    PredictRequest,
    PredictionService,
    create_app,
    measure_latency,
)


@pytest.fixture(scope="module")
def service(overfit_run):
    return PredictionService(overfit_run["checkpoint"], overfit_run["root"])


@pytest.fixture(scope="module")
def client(service):
    return TestClient(create_app(service=service))


def _png_b64(size=(64, 64), color=(120, 40, 40)):
    buf = io.BytesIO()
    Image.new("RGB", size, color).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode()


def _first_sample_id(client):
    return client.get("/samples").json()["samples"][0]["sample_id"]


class TestHealth:
    def test_reports_checkpoint_and_params(self, client, service):
        body = client.get("/health").json()
        assert body["status"] == "ok"
        assert body["checkpoint_id"] == "best.pt"
        assert body["model_params"] == service.model.param_count()

    def test_unloaded_app_returns_503(self):
        bare = TestClient(create_app())
        assert bare.get("/health").status_code == 503
        assert bare.get("/samples").status_code == 503


class TestSamples:
    def test_lists_fixture_sorted(self, client):
        rows = client.get("/samples").json()["samples"]
        assert len(rows) == 16
        ids = [r["sample_id"] for r in rows]
        assert ids == sorted(ids)
        assert all(r["query_kind"] in ("drone", "ground") for r in rows)

    def test_image_roles(self, client):
        sid = _first_sample_id(client)
        for role in ("query", "satellite"):
            r = client.get(f"/image/{sid}/{role}")
            assert r.status_code == 200
            img = Image.open(io.BytesIO(r.content))
            assert img.size[0] > 0
        assert client.get(f"/image/{sid}/thermal").status_code == 404
        assert client.get("/image/nope/query").status_code == 404


class TestPredict:
    def test_by_sample_id(self, client):
        sid = _first_sample_id(client)
        r = client.post("/predict", json={"sample_id": sid, "click": [0.5, 0.5]})
        assert r.status_code == 200
        body = r.json()
        cx, cy, w, h = body["bbox"]
        assert all(0 <= v <= 1 for v in (cx, cy, w, h))
        assert 0 <= body["score"] <= 1
        assert body["latency_ms"] > 0
        assert body["a_s"] is None and body["f_u_l"] is None

    def test_center_click_denormalization(self, service, client):
        # normalized (0.5, 0.5) on a drone query maps to pixel (qw/2, qh/2)
        sid = _first_sample_id(client)
        req = PredictRequest(sample_id=sid, click=(0.5, 0.5))
        qh, qw = service.pre.query_sizes["drone"]
        import numpy as np
        from ocgnet.gkt import ClickPoint, GktConfig, default_sigma, gkt_map

        expected = gkt_map(
            ClickPoint(0.5 * qw, 0.5 * qh),
            GktConfig(default_sigma("drone"), qh, qw),
        )
        peak = np.unravel_index(expected.argmax(), expected.shape)
        assert peak == (qh // 2, qw // 2)
        service.predict(req)  # must accept the boundary-safe denormalized click

    def test_deterministic_except_latency(self, client):
        sid = _first_sample_id(client)
        payload = {"sample_id": sid, "click": [0.25, 0.75], "return_attention": True}
        a = client.post("/predict", json=payload).json()
        b = client.post("/predict", json=payload).json()
        a.pop("latency_ms"), b.pop("latency_ms")
        assert a == b

    def test_attention_payload_dims(self, client, service):
        sid = _first_sample_id(client)
        r = client.post(
            "/predict",
            json={"sample_id": sid, "click": [0.5, 0.5], "return_attention": True},
        ).json()
        sh, sw = service.pre.satellite_size
        assert tuple(r["a_s"]["dims"]) == (sh // 32, sw // 32)
        assert len(r["a_s"]["data"]) == (sh // 32) * (sw // 32)
        assert all(0 <= v <= 1 for v in r["a_s"]["data"])
        qh, qw = service.pre.query_sizes["drone"]
        assert tuple(r["f_u_l"]["dims"]) == (qh // 32, qw // 32)

    def test_uploaded_images(self, client, service):
        qh, qw = service.pre.query_sizes["drone"]
        sh, sw = service.pre.satellite_size
        r = client.post(
            "/predict",
            json={
                "query_image": _png_b64((qw, qh)),
                "satellite_image": _png_b64((sw, sh), (20, 90, 20)),
                "click": [0.1, 0.9],
            },
        )
        assert r.status_code == 200

    def test_click_outside_unit_square_422(self, client):
        sid = _first_sample_id(client)
        r = client.post("/predict", json={"sample_id": sid, "click": [1.2, 0.5]})
        assert r.status_code == 422

    def test_corner_clicks_accepted(self, client):
        sid = _first_sample_id(client)
        for click in ([0, 0], [1, 1], [0, 1], [1, 0]):
            assert (
                client.post("/predict", json={"sample_id": sid, "click": click}).status_code
                == 200
            )

    def test_sample_id_xor_images_422(self, client):
        sid = _first_sample_id(client)
        both = {
            "sample_id": sid,
            "query_image": _png_b64(),
            "satellite_image": _png_b64(),
            "click": [0.5, 0.5],
        }
        assert client.post("/predict", json=both).status_code == 422
        neither = {"click": [0.5, 0.5]}
        assert client.post("/predict", json=neither).status_code == 422

    def test_unknown_sample_404(self, client):
        r = client.post("/predict", json={"sample_id": "ghost", "click": [0.5, 0.5]})
        assert r.status_code == 404

    def test_undecodable_image_400(self, client):
        r = client.post(
            "/predict",
            json={
                "query_image": base64.b64encode(b"junk").decode(),
                "satellite_image": _png_b64((128, 128)),
                "click": [0.5, 0.5],
            },
        )
        assert r.status_code == 400

    def test_unknown_query_kind_422(self, client):
        r = client.post(
            "/predict",
            json={
                "query_image": _png_b64(),
                "satellite_image": _png_b64((128, 128)),
                "query_kind": "thermal",
                "click": [0.5, 0.5],
            },
        )
        assert r.status_code == 422


def test_memorized_fixture_localizes(service, client, overfit_run):
    """Requests on the corpus the model memorized return boxes that overlap
    the ground truth (IoU >= 0.5) for nearly every sample."""
    from PIL import Image as PILImage

    from ocgnet.data import load_manifest
    from ocgnet.metrics import Box, iou

    samples, _ = load_manifest(overfit_run["manifest"])
    sh, sw = service.pre.satellite_size
    hits = 0
    for s in samples:
        with PILImage.open(overfit_run["root"] / s.query_path) as img:
            qw0, qh0 = img.size
        body = client.post(
            "/predict",
            json={
                "sample_id": s.sample_id,
                "click": [s.click.x / qw0, s.click.y / qh0],
            },
        ).json()
        cx, cy, w, h = body["bbox"]
        pred = Box(cx * sw, cy * sh, w * sw, h * sh)
        if iou(pred, s.gt_box) >= 0.5:
            hits += 1
    assert hits >= int(0.85 * len(samples))


def test_measure_latency_smoke(service, client):
    sid = _first_sample_id(client)
    stats = measure_latency(
        service, PredictRequest(sample_id=sid, click=(0.5, 0.5)), runs=3, warmup=1
    )
    assert stats["runs"] == 3
    assert 0 < stats["p50_ms"] <= stats["max_ms"]
    assert stats["mean_ms"] > 0
