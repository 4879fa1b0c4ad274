"""The assembled network: encoders + matching + detection head."""

from __future__ import annotations

from dataclasses import dataclass, asdict

import torch
import torch.nn as nn

from ocgnet.detection import DetectionHead
from ocgnet.encoders import QueryEncoder, ReferenceEncoder
from ocgnet.matching import MatchArtifacts, MatchingBlock

# pixel normalization applied to both views; recorded in checkpoint headers
DEFAULT_MEAN = (0.485, 0.456, 0.406)
DEFAULT_STD = (0.229, 0.224, 0.225)


@dataclass(frozen=True)
class ModelConfig:
    nc: int = 512
    heads: int = 8
    d_k: int = 64
    d_v: int = 64
    query_stem: int = 32
    query_widths: tuple[int, int, int, int] = (64, 128, 256, 512)
    query_blocks: tuple[int, int, int, int] = (2, 2, 2, 2)
    ref_base: int = 32
    ref_blocks: tuple[int, ...] = (1, 2, 8, 8, 4)
    ref_neck: bool = True
    norm_mean: tuple[float, float, float] = DEFAULT_MEAN
    norm_std: tuple[float, float, float] = DEFAULT_STD

    @staticmethod
    def tiny() -> "ModelConfig":
        """Desk-scale configuration for tests and the synthetic corpus."""
        return ModelConfig(
            nc=32,
            heads=2,
            d_k=16,
            d_v=16,
            query_stem=8,
            query_widths=(8, 16, 16, 32),
            query_blocks=(1, 1, 1, 1),
            ref_base=4,
            ref_blocks=(1, 1, 1, 1, 1),
            ref_neck=False,
        )

    def to_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_dict(d: dict) -> "ModelConfig":
        d = dict(d)
        for key in ("query_widths", "query_blocks", "ref_blocks", "norm_mean", "norm_std"):
            if key in d:
                d[key] = tuple(d[key])
        return ModelConfig(**d)


class OCGNet(nn.Module):
    """Click-prompted cross-view localizer.

    forward() takes the normalized query image, its click heatmap, and
    the normalized satellite image, and returns the raw anchor grid plus
    the matching block's intermediate artifacts.
    """

    def __init__(self, config: ModelConfig | None = None):
        super().__init__()
        cfg = config or ModelConfig()
        self.config = cfg
        self.query_encoder = QueryEncoder(
            cfg.nc, stem_ch=cfg.query_stem, widths=cfg.query_widths, blocks=cfg.query_blocks
        )
        self.reference_encoder = ReferenceEncoder(
            cfg.nc, base_ch=cfg.ref_base, stage_blocks=cfg.ref_blocks, neck=cfg.ref_neck
        )
        self.matching = MatchingBlock(cfg.nc, heads=cfg.heads, d_k=cfg.d_k, d_v=cfg.d_v)
        self.head = DetectionHead(cfg.nc)

    def forward(
        self,
        query: torch.Tensor,
        heatmap: torch.Tensor,
        satellite: torch.Tensor,
        return_attention: bool = False,
    ) -> tuple[torch.Tensor, MatchArtifacts]:
        f_u_c2, f_u_c3 = self.query_encoder(query, heatmap)
        f_s_c3 = self.reference_encoder(satellite)
        artifacts = self.matching(
            f_u_c3, f_s_c3, heatmap, f_u_c2, return_attention=return_attention
        )
        raw = self.head(artifacts.f_s_hat, artifacts.a_s)
        return raw, artifacts

    def param_count(self) -> int:
        return sum(p.numel() for p in self.parameters())

    def param_breakdown(self) -> dict[str, int]:
        return {
            name: sum(p.numel() for p in module.parameters())
            for name, module in (
                ("query_encoder", self.query_encoder),
                ("reference_encoder", self.reference_encoder),
                ("matching", self.matching),
                ("head", self.head),
            )
        }


def normalize_image(
    img: torch.Tensor,
    mean: tuple[float, float, float] = DEFAULT_MEAN,
    std: tuple[float, float, float] = DEFAULT_STD,
) -> torch.Tensor:
    """(3, H, W) float image in [0, 1] -> zero-mean unit-variance channels."""
    m = torch.tensor(mean, dtype=img.dtype).view(3, 1, 1)
    s = torch.tensor(std, dtype=img.dtype).view(3, 1, 1)
    return (img - m) / s
