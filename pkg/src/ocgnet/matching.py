"""Cross-view feature matching.

Query C3 tokens attend over (pooled) reference C3 tokens via multi-head
cross attention; the attended map re-weights the query features, the
click heatmap is re-injected as a spatial gate (location enhancement),
and a cosine-similarity spatial attention projects the enhanced query
descriptor onto every reference cell, yielding the reference-domain
attention map used by the detection head.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from ocgnet.encoders import CBR
from ocgnet.errors import ShapeError


@dataclass
class MatchArtifacts:
    """Intermediate tensors of the matching block, kept for export."""

    f_mhca: torch.Tensor  # (B, nc, Hu', Wu')
    f_u_e: torch.Tensor  # (B, nc, Hu', Wu')
    f_u_l: torch.Tensor  # (B, 1, Hu', Wu')
    f_u_le: torch.Tensor  # (B, nc, Hu', Wu')
    f_s_hat: torch.Tensor  # (B, nc, Hs', Ws') channel-L2-normalized reference
    a_s: torch.Tensor  # (B, 1, Hs', Ws') in [0, 1]
    head_attention: torch.Tensor | None = None  # (B, n, Tq, Tk)


def scaled_dot_attention(q: torch.Tensor, k: torch.Tensor, v: torch.Tensor):
    """softmax(q k^T / sqrt(d_k)) v over the last two dims.

    Accepts (..., T, d) tensors; returns (output, attention_weights).
    """
    if q.shape[-1] != k.shape[-1]:
        raise ShapeError(f"q dim {q.shape[-1]} != k dim {k.shape[-1]}")
    if k.shape[-2] != v.shape[-2]:
        raise ShapeError(f"k tokens {k.shape[-2]} != v tokens {v.shape[-2]}")
    scores = q @ k.transpose(-2, -1) / math.sqrt(q.shape[-1])
    weights = torch.softmax(scores, dim=-1)
    return weights @ v, weights


def enhance_query(f_mhca: torch.Tensor, f_u_c3: torch.Tensor) -> torch.Tensor:
    """Element-wise product of the attended map with the query features."""
    if f_mhca.shape != f_u_c3.shape:
        raise ShapeError(f"{tuple(f_mhca.shape)} != {tuple(f_u_c3.shape)}")
    return f_mhca * f_u_c3


def fuse_le(f_u_l: torch.Tensor, f_u_e: torch.Tensor) -> torch.Tensor:
    """Broadcast the 1-channel location gate over the enhanced features."""
    if f_u_l.shape[-2:] != f_u_e.shape[-2:]:
        raise ShapeError(f"{tuple(f_u_l.shape)} vs {tuple(f_u_e.shape)}")
    return f_u_l * f_u_e


def channel_l2_normalize(x: torch.Tensor, eps: float = 1e-12) -> torch.Tensor:
    """Normalize each spatial cell's channel vector to unit L2 norm."""
    return x / x.norm(dim=1, keepdim=True).clamp_min(eps)


class MHCA(nn.Module):
    """Multi-head cross attention: query tokens attend over reference tokens.

    Spatial positions are tokens; the reference map is average-pooled to
    the query grid before tokenization to cap the key/value count.
    """

    def __init__(self, nc: int, heads: int = 8, d_k: int = 64, d_v: int = 64):
        super().__init__()
        if heads < 1 or d_k < 1 or d_v < 1:
            raise ShapeError("heads, d_k, d_v must all be >= 1")
        self.nc = nc
        self.heads = heads
        self.d_k = d_k
        self.d_v = d_v
        self.q_proj = nn.Linear(nc, heads * d_k)
        self.k_proj = nn.Linear(nc, heads * d_k)
        self.v_proj = nn.Linear(nc, heads * d_v)
        self.out_proj = nn.Linear(heads * d_v, nc)

    def tokenize(self, f_u_c3: torch.Tensor, f_s_c3: torch.Tensor):
        """Pool the reference to the query grid and flatten both to tokens."""
        if f_u_c3.shape[1] != self.nc or f_s_c3.shape[1] != self.nc:
            raise ShapeError(
                f"expected {self.nc} channels, got "
                f"{f_u_c3.shape[1]} / {f_s_c3.shape[1]}"
            )
        pooled = F.adaptive_avg_pool2d(f_s_c3, f_u_c3.shape[-2:])
        tokens_u = f_u_c3.flatten(2).transpose(1, 2)  # (B, Tq, nc)
        tokens_s = pooled.flatten(2).transpose(1, 2)  # (B, Tk, nc)
        return tokens_u, tokens_s

    def project_qkv(self, f_u_c3: torch.Tensor, f_s_c3: torch.Tensor):
        """Full-width projections before the per-head split."""
        tokens_u, tokens_s = self.tokenize(f_u_c3, f_s_c3)
        return self.q_proj(tokens_u), self.k_proj(tokens_s), self.v_proj(tokens_s)

    def forward(self, f_u_c3, f_s_c3, return_attention: bool = False):
        b, _, hu, wu = f_u_c3.shape
        q, k, v = self.project_qkv(f_u_c3, f_s_c3)

        def split(x, d):
            return x.view(b, x.shape[1], self.heads, d).transpose(1, 2)

        out, weights = scaled_dot_attention(
            split(q, self.d_k), split(k, self.d_k), split(v, self.d_v)
        )
        out = out.transpose(1, 2).reshape(b, -1, self.heads * self.d_v)
        f_mhca = self.out_proj(out).transpose(1, 2).view(b, self.nc, hu, wu)
        if return_attention:
            return f_mhca, weights
        return f_mhca


class LocationEnhance(nn.Module):
    """Late-stage click re-injection.

    The full-resolution heatmap is block-averaged down to the C2 grid,
    concatenated with the channel-averaged C2 features, and fused by a
    stride-2 CBR into a single-channel gate on the C3 grid.
    """

    def __init__(self):
        super().__init__()
        self.fuse = CBR(2, 1, kernel=3, stride=2)

    def forward(self, m: torch.Tensor, f_u_c2: torch.Tensor) -> torch.Tensor:
        if m.shape[1] != 1:
            raise ShapeError(f"heatmap must be 1-channel, got {m.shape[1]}")
        c2_grid = f_u_c2.shape[-2:]
        if m.shape[-2] % c2_grid[0] or m.shape[-1] % c2_grid[1]:
            raise ShapeError(
                f"heatmap {tuple(m.shape[-2:])} not divisible by C2 grid {tuple(c2_grid)}"
            )
        m_pooled = F.adaptive_avg_pool2d(m, c2_grid)
        c2_avg = f_u_c2.mean(dim=1, keepdim=True)
        return self.fuse(torch.cat([m_pooled, c2_avg], dim=1))


class SpatialAttention(nn.Module):
    """Cosine similarity between the pooled query descriptor and each
    reference cell, squashed to [0, 1] by a learnable-temperature sigmoid.
    """

    def __init__(self, init_scale: float = 10.0):
        super().__init__()
        self.scale = nn.Parameter(torch.tensor(float(init_scale)))

    def forward(self, f_u_le: torch.Tensor, f_s_hat: torch.Tensor) -> torch.Tensor:
        if f_u_le.shape[1] != f_s_hat.shape[1]:
            raise ShapeError(
                f"channel mismatch {f_u_le.shape[1]} vs {f_s_hat.shape[1]}"
            )
        desc = f_u_le.mean(dim=(-2, -1))  # (B, nc)
        desc = desc / desc.norm(dim=1, keepdim=True).clamp_min(1e-12)
        cos = torch.einsum("bc,bchw->bhw", desc, f_s_hat).unsqueeze(1)
        return torch.sigmoid(self.scale * cos)


class MatchingBlock(nn.Module):
    """MHCA + location enhancement + spatial attention, end to end."""

    def __init__(self, nc: int, heads: int = 8, d_k: int = 64, d_v: int = 64):
        super().__init__()
        self.mhca = MHCA(nc, heads=heads, d_k=d_k, d_v=d_v)
        self.le = LocationEnhance()
        self.sa = SpatialAttention()

    def forward(
        self,
        f_u_c3: torch.Tensor,
        f_s_c3: torch.Tensor,
        m: torch.Tensor,
        f_u_c2: torch.Tensor,
        return_attention: bool = False,
    ) -> MatchArtifacts:
        if return_attention:
            f_mhca, head_attn = self.mhca(f_u_c3, f_s_c3, return_attention=True)
        else:
            f_mhca, head_attn = self.mhca(f_u_c3, f_s_c3), None
        f_u_e = enhance_query(f_mhca, f_u_c3)
        f_u_l = self.le(m, f_u_c2)
        f_u_le = fuse_le(f_u_l, f_u_e)
        f_s_hat = channel_l2_normalize(f_s_c3)
        a_s = self.sa(f_u_le, f_s_hat)
        return MatchArtifacts(
            f_mhca=f_mhca,
            f_u_e=f_u_e,
            f_u_l=f_u_l,
            f_u_le=f_u_le,
            f_s_hat=f_s_hat,
            a_s=a_s,
            head_attention=head_attn,
        )
