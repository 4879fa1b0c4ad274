"""Hierarchical image encoders for query and reference views.

The query branch is a ResNet18-style convolutional backbone fed with a
4-channel input (RGB plus the click heatmap); it exposes the stride-16
(C2) and stride-32 (C3) feature maps.  The reference branch is a
DarkNet-53-style backbone followed by the stride-32 convolutional block
of its detection family.  Both branches end in a CBR that aligns
channel counts to a shared width.
"""

from __future__ import annotations

import torch
import torch.nn as nn

from ocgnet.errors import ShapeError


class CBR(nn.Module):
    """Convolution -> BatchNorm -> ReLU."""

    def __init__(self, in_ch: int, out_ch: int, kernel: int = 3, stride: int = 1):
        super().__init__()
        self.conv = nn.Conv2d(
            in_ch, out_ch, kernel, stride=stride, padding=kernel // 2, bias=False
        )
        self.bn = nn.BatchNorm2d(out_ch)
        self.relu = nn.ReLU(inplace=True)

    def forward(self, x):
        if x.shape[1] != self.conv.in_channels:
            raise ShapeError(
                f"expected {self.conv.in_channels} input channels, got {x.shape[1]}"
            )
        return self.relu(self.bn(self.conv(x)))


class BasicBlock(nn.Module):
    """Two 3x3 convs with identity (or projected) skip."""

    def __init__(self, in_ch: int, out_ch: int, stride: int = 1):
        super().__init__()
        self.conv1 = nn.Conv2d(in_ch, out_ch, 3, stride=stride, padding=1, bias=False)
        self.bn1 = nn.BatchNorm2d(out_ch)
        self.conv2 = nn.Conv2d(out_ch, out_ch, 3, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(out_ch)
        self.relu = nn.ReLU(inplace=True)
        if stride != 1 or in_ch != out_ch:
            self.skip = nn.Sequential(
                nn.Conv2d(in_ch, out_ch, 1, stride=stride, bias=False),
                nn.BatchNorm2d(out_ch),
            )
        else:
            self.skip = nn.Identity()

    def forward(self, x):
        out = self.relu(self.bn1(self.conv1(x)))
        out = self.bn2(self.conv2(out))
        return self.relu(out + self.skip(x))


class DarkResidual(nn.Module):
    """1x1 squeeze then 3x3 expand, added back to the input."""

    def __init__(self, ch: int):
        super().__init__()
        self.squeeze = CBR(ch, ch // 2, kernel=1)
        self.expand = CBR(ch // 2, ch, kernel=3)

    def forward(self, x):
        return x + self.expand(self.squeeze(x))


class QueryEncoder(nn.Module):
    """4-channel query encoder with C2 (stride 16) and C3 (stride 32) taps.

    The C3 tap goes through an alignment CBR to ``nc`` channels; the C2
    tap is returned raw since downstream only channel-averages it.
    """

    def __init__(
        self,
        nc: int,
        stem_ch: int = 32,
        widths: tuple[int, int, int, int] = (64, 128, 256, 512),
        blocks: tuple[int, int, int, int] = (2, 2, 2, 2),
    ):
        super().__init__()
        self.stem = CBR(4, stem_ch, kernel=3)
        self.conv1 = CBR(stem_ch, widths[0], kernel=7, stride=2)
        self.pool = nn.MaxPool2d(3, stride=2, padding=1)
        stages = []
        in_ch = widths[0]
        for i, (w, n) in enumerate(zip(widths, blocks)):
            stride = 1 if i == 0 else 2
            layers = [BasicBlock(in_ch, w, stride=stride)]
            layers += [BasicBlock(w, w) for _ in range(n - 1)]
            stages.append(nn.Sequential(*layers))
            in_ch = w
        self.stage1, self.stage2, self.stage3, self.stage4 = stages
        self.align = CBR(widths[3], nc, kernel=3)
        self.c2_channels = widths[2]

    def forward(self, u: torch.Tensor, m: torch.Tensor):
        """u: (B,3,H,W) query image; m: (B,1,H,W) click heatmap."""
        if u.shape[-2:] != m.shape[-2:]:
            raise ShapeError(f"query {tuple(u.shape)} vs heatmap {tuple(m.shape)}")
        if u.shape[1] != 3 or m.shape[1] != 1:
            raise ShapeError("query must be 3-channel and heatmap 1-channel")
        x = self.stem(torch.cat([u, m], dim=1))
        x = self.pool(self.conv1(x))
        x = self.stage2(self.stage1(x))
        c2 = self.stage3(x)
        c3 = self.align(self.stage4(c2))
        return c2, c3


class ReferenceEncoder(nn.Module):
    """3-channel satellite encoder producing an nc-channel stride-32 map."""

    def __init__(
        self,
        nc: int,
        base_ch: int = 32,
        stage_blocks: tuple[int, ...] = (1, 2, 8, 8, 4),
        neck: bool = True,
    ):
        super().__init__()
        self.conv0 = CBR(3, base_ch, kernel=3)
        layers = []
        ch = base_ch
        for n in stage_blocks:
            layers.append(CBR(ch, ch * 2, kernel=3, stride=2))
            ch *= 2
            layers += [DarkResidual(ch) for _ in range(n)]
        self.body = nn.Sequential(*layers)
        if neck:
            # stride-32 conv block of the detection-family neck, plus the
            # pre-head 3x3 expansion
            half = ch // 2
            self.neck = nn.Sequential(
                CBR(ch, half, kernel=1),
                CBR(half, ch, kernel=3),
                CBR(ch, half, kernel=1),
                CBR(half, ch, kernel=3),
                CBR(ch, half, kernel=1),
                CBR(half, ch, kernel=3),
            )
        else:
            self.neck = nn.Identity()
        self.align = CBR(ch, nc, kernel=1)

    def forward(self, s: torch.Tensor) -> torch.Tensor:
        if s.shape[1] != 3:
            raise ShapeError(f"satellite must be 3-channel, got {s.shape[1]}")
        return self.align(self.neck(self.body(self.conv0(s))))
