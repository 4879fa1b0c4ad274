"""Dataset manifest, preprocessing, and synthetic fixtures.

Manifests are JSON-Lines, one sample per line, with coordinates stored
in source-image pixels; all scaling happens in :func:`preprocess` so
manifests stay resolution-independent.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
import torch
from PIL import Image, ImageDraw

from ocgnet.errors import AnnotationError, InvalidInputError
from ocgnet.gkt import ClickPoint, GktConfig, default_sigma, gkt_map
from ocgnet.metrics import Box
from ocgnet.model import DEFAULT_MEAN, DEFAULT_STD, normalize_image

QUERY_SIZES = {"drone": (256, 256), "ground": (256, 512)}  # (H, W)
SATELLITE_SIZE = (1024, 1024)
SPLITS = ("train", "validation", "test")


@dataclass
class GeoSample:
    sample_id: str
    query_path: str
    query_kind: str  # drone | ground
    click: ClickPoint  # source query pixels
    satellite_path: str
    gt_box: Box  # source satellite pixels
    class_label: str
    split: str

    def to_json(self) -> str:
        d = asdict(self)
        d["click"] = [self.click.x, self.click.y]
        d["gt_box"] = [self.gt_box.cx, self.gt_box.cy, self.gt_box.w, self.gt_box.h]
        return json.dumps(d, sort_keys=True)

    @staticmethod
    def from_dict(d: dict) -> "GeoSample":
        return GeoSample(
            sample_id=d["sample_id"],
            query_path=d["query_path"],
            query_kind=d["query_kind"],
            click=ClickPoint(*d["click"]),
            satellite_path=d["satellite_path"],
            gt_box=Box(*d["gt_box"]),
            class_label=d["class_label"],
            split=d["split"],
        )


@dataclass
class ManifestErrors:
    """Per-row rejections collected while loading a manifest."""

    rows: list[tuple[int, str]] = field(default_factory=list)

    def add(self, line_no: int, reason: str):
        self.rows.append((line_no, reason))


def _validate(sample: GeoSample, base_dir: Path) -> str | None:
    if sample.query_kind not in QUERY_SIZES:
        return f"unknown query_kind {sample.query_kind!r}"
    if sample.split not in SPLITS:
        return f"unknown split {sample.split!r}"
    qpath = base_dir / sample.query_path
    spath = base_dir / sample.satellite_path
    if not qpath.is_file():
        return f"missing query image {sample.query_path}"
    if not spath.is_file():
        return f"missing satellite image {sample.satellite_path}"
    with Image.open(qpath) as im:
        qw, qh = im.size
    with Image.open(spath) as im:
        sw, sh = im.size
    if not (0 <= sample.click.x < qw and 0 <= sample.click.y < qh):
        return "click out of bounds"
    if sample.gt_box.w <= 0 or sample.gt_box.h <= 0:
        return "degenerate gt box"
    x0, y0, x1, y1 = sample.gt_box.corners()
    if x0 < -1 or y0 < -1 or x1 > sw + 1 or y1 > sh + 1:
        return "gt box out of bounds"
    return None


def load_manifest(
    path: str | Path, strict: bool = False
) -> tuple[list[GeoSample], ManifestErrors]:
    """Read a JSONL manifest; invalid rows go into the error report."""
    path = Path(path)
    base_dir = path.parent
    samples: list[GeoSample] = []
    errors = ManifestErrors()
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                sample = GeoSample.from_dict(json.loads(line))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                errors.add(line_no, f"schema violation: {exc}")
                continue
            if sample.sample_id in seen:
                errors.add(line_no, f"duplicate sample_id {sample.sample_id!r}")
                continue
            reason = _validate(sample, base_dir)
            if reason is not None:
                errors.add(line_no, reason)
                continue
            seen.add(sample.sample_id)
            samples.append(sample)
    if strict and errors.rows:
        raise InvalidInputError(f"manifest has invalid rows: {errors.rows}")
    return samples, errors


def write_manifest(samples: list[GeoSample], path: str | Path):
    with open(path, "w", encoding="utf-8") as fh:
        for s in samples:
            fh.write(s.to_json() + "\n")


@dataclass(frozen=True)
class PreprocessConfig:
    """Canonical tensor sizes and pixel normalization.

    Defaults follow the standard protocol (256x256 drone, 256x512
    ground, 1024x1024 satellite); tests override them for desk scale.
    """

    query_sizes: dict = field(default_factory=lambda: dict(QUERY_SIZES))
    satellite_size: tuple[int, int] = SATELLITE_SIZE
    norm_mean: tuple[float, float, float] = DEFAULT_MEAN
    norm_std: tuple[float, float, float] = DEFAULT_STD
    sigma_overrides: dict = field(default_factory=dict)  # query_kind -> sigma


@dataclass
class ModelInputs:
    query: torch.Tensor  # (3, H, W) normalized
    heatmap: torch.Tensor  # (1, H, W)
    satellite: torch.Tensor  # (3, Hs, Ws) normalized
    gt_box: Box  # scaled to canonical satellite pixels
    click: ClickPoint  # scaled to canonical query pixels
    class_label: str
    sample_id: str


def _load_image(path: Path, size_hw: tuple[int, int]) -> torch.Tensor:
    try:
        with Image.open(path) as im:
            im = im.convert("RGB").resize((size_hw[1], size_hw[0]), Image.BILINEAR)
            arr = np.asarray(im, dtype=np.float32) / 255.0
    except OSError as exc:
        raise InvalidInputError(f"cannot decode image {path}: {exc}") from exc
    return torch.from_numpy(arr).permute(2, 0, 1)


def preprocess(
    sample: GeoSample,
    cfg: PreprocessConfig | None = None,
    base_dir: str | Path = ".",
) -> ModelInputs:
    """Resize, normalize, build the click heatmap, and scale annotations."""
    cfg = cfg or PreprocessConfig()
    base_dir = Path(base_dir)
    qh, qw = cfg.query_sizes[sample.query_kind]
    sh, sw = cfg.satellite_size

    qpath = base_dir / sample.query_path
    spath = base_dir / sample.satellite_path
    with Image.open(qpath) as im:
        src_qw, src_qh = im.size
    with Image.open(spath) as im:
        src_sw, src_sh = im.size

    query = normalize_image(_load_image(qpath, (qh, qw)), cfg.norm_mean, cfg.norm_std)
    satellite = normalize_image(
        _load_image(spath, (sh, sw)), cfg.norm_mean, cfg.norm_std
    )

    click = ClickPoint(sample.click.x * qw / src_qw, sample.click.y * qh / src_qh)
    rx, ry = sw / src_sw, sh / src_sh
    gt = Box(sample.gt_box.cx * rx, sample.gt_box.cy * ry, sample.gt_box.w * rx, sample.gt_box.h * ry)
    if gt.w <= 0 or gt.h <= 0:
        raise AnnotationError(f"zero-area gt box after scaling in {sample.sample_id}")

    sigma = cfg.sigma_overrides.get(sample.query_kind) or default_sigma(sample.query_kind)
    heat = gkt_map(click, GktConfig(sigma=sigma, height=qh, width=qw))
    return ModelInputs(
        query=query,
        heatmap=torch.from_numpy(heat).unsqueeze(0),
        satellite=satellite,
        gt_box=gt,
        click=click,
        class_label=sample.class_label,
        sample_id=sample.sample_id,
    )


FIXTURE_CLASSES = ("building", "tank", "roundabout", "baseball")
_CLASS_COLORS = {
    "building": (200, 60, 60),
    "tank": (60, 200, 60),
    "roundabout": (60, 60, 200),
    "baseball": (200, 180, 40),
}


def make_synthetic_fixture(
    out_dir: str | Path,
    seed: int = 0,
    n: int = 8,
    query_size: tuple[int, int] = (64, 64),
    satellite_size: tuple[int, int] = (128, 128),
    split: str = "train",
    classes: tuple[str, ...] = FIXTURE_CLASSES,
    manifest_name: str = "manifest.jsonl",
) -> Path:
    """Procedurally drawn query/satellite pairs with known correspondence.

    Each satellite canvas gets a handful of colored shapes; the query is
    a zoomed crop around one target shape, the click sits on the target
    in the query, and the gt box bounds the target in the satellite.
    Deterministic for a fixed seed.
    """
    if n < 1:
        raise InvalidInputError("n must be >= 1")
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    qh, qw = query_size
    sh, sw = satellite_size
    samples = []
    for idx in range(n):
        label = classes[idx % len(classes)]
        sat = Image.new("RGB", (sw, sh), (40 + int(rng.integers(0, 30)),) * 3)
        draw = ImageDraw.Draw(sat)
        # distractor shapes
        for _ in range(4):
            x, y = rng.integers(0, sw - 12), rng.integers(0, sh - 12)
            c = tuple(int(v) for v in rng.integers(60, 255, size=3))
            draw.rectangle([int(x), int(y), int(x) + 10, int(y) + 10], fill=c)
        # target shape
        tw = int(rng.integers(max(8, sw // 8), max(10, sw // 4)))
        th = int(rng.integers(max(8, sh // 8), max(10, sh // 4)))
        tx = int(rng.integers(2, sw - tw - 2))
        ty = int(rng.integers(2, sh - th - 2))
        color = _CLASS_COLORS[label] if label in _CLASS_COLORS else tuple(
            int(v) for v in rng.integers(60, 255, size=3)
        )
        if label == "roundabout":
            draw.ellipse([tx, ty, tx + tw, ty + th], fill=color)
        else:
            draw.rectangle([tx, ty, tx + tw, ty + th], fill=color)
        gt = Box(tx + tw / 2.0, ty + th / 2.0, float(tw + 1), float(th + 1))

        # query: crop around the target with context, then resize
        pad = max(tw, th)
        cx0 = max(0, tx - pad)
        cy0 = max(0, ty - pad)
        cx1 = min(sw, tx + tw + pad)
        cy1 = min(sh, ty + th + pad)
        crop = sat.crop((cx0, cy0, cx1, cy1)).resize((qw, qh), Image.BILINEAR)
        click = ClickPoint(
            (gt.cx - cx0) * qw / (cx1 - cx0),
            (gt.cy - cy0) * qh / (cy1 - cy0),
        )

        sat_name = f"images/sat_{idx:03d}.png"
        query_name = f"images/query_{idx:03d}.png"
        sat.save(out_dir / sat_name)
        crop.save(out_dir / query_name)
        samples.append(
            GeoSample(
                sample_id=f"fix_{seed}_{idx:03d}",
                query_path=query_name,
                query_kind="drone",
                click=click,
                satellite_path=sat_name,
                gt_box=gt,
                class_label=label,
                split=split,
            )
        )
    manifest_path = out_dir / manifest_name
    write_manifest(samples, manifest_path)
    return manifest_path


def few_shot_split(
    samples: list[GeoSample], shots_per_category: int = 7
) -> tuple[list[GeoSample], list[GeoSample]]:
    """First ``shots`` samples of each class train, the rest test."""
    by_class: dict[str, list[GeoSample]] = {}
    for s in samples:
        by_class.setdefault(s.class_label, []).append(s)
    train, test = [], []
    for label in sorted(by_class):
        rows = by_class[label]
        if len(rows) < shots_per_category:
            raise InvalidInputError(
                f"class {label!r} has {len(rows)} samples, need {shots_per_category}"
            )
        for i, s in enumerate(rows):
            dest, split = (train, "train") if i < shots_per_category else (test, "test")
            d = asdict(s)
            d["click"] = [s.click.x, s.click.y]
            d["gt_box"] = [s.gt_box.cx, s.gt_box.cy, s.gt_box.w, s.gt_box.h]
            d["split"] = split
            dest.append(GeoSample.from_dict(d))
    return train, test


def import_cvogl(root: str | Path, out_manifest: str | Path) -> int:
    """Best-effort adapter from a CVOGL-style directory layout.

    Expects ``<root>/{train,val,test}.txt`` index files with tab-separated
    fields (query image, satellite image, click x, click y, box cx cy w h,
    class) and images referenced relative to ``root``.  Rows that do not
    parse are skipped.  Returns the number of imported samples.
    """
    root = Path(root)
    split_map = {"train": "train", "val": "validation", "test": "test"}
    samples = []
    for stem, split in split_map.items():
        index = root / f"{stem}.txt"
        if not index.is_file():
            continue
        for i, line in enumerate(index.read_text().splitlines()):
            parts = line.split("\t")
            if len(parts) < 9:
                continue
            try:
                qp, sp = parts[0], parts[1]
                cx, cy = float(parts[2]), float(parts[3])
                bx, by, bw, bh = (float(v) for v in parts[4:8])
                label = parts[8]
            except ValueError:
                continue
            kind = "ground" if "ground" in qp.lower() else "drone"
            samples.append(
                GeoSample(
                    sample_id=f"cvogl_{stem}_{i:05d}",
                    query_path=qp,
                    query_kind=kind,
                    click=ClickPoint(cx, cy),
                    satellite_path=sp,
                    gt_box=Box(bx, by, bw, bh),
                    class_label=label,
                    split=split,
                )
            )
    write_manifest(samples, out_manifest)
    return len(samples)
