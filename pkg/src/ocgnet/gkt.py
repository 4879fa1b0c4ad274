"""Gaussian click-point embedding.

A user click at (x, y) in the query image becomes a single-channel
heatmap whose value decays with squared distance from the click.  The
kernel width is a fixed fraction ``sigma`` of the image diagonal, so the
same ``sigma`` covers a comparable portion of the scene regardless of
resolution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ocgnet.errors import InvalidConfigError, InvalidInputError

# widths that worked best per query modality
SIGMA_DRONE = 0.075
SIGMA_GROUND = 0.15


@dataclass(frozen=True)
class ClickPoint:
    """A click position in query-image pixels, origin top-left.

    ``x`` runs along columns, ``y`` along rows; floats are accepted
    as-is, there is no snapping to the pixel grid.
    """

    x: float
    y: float


@dataclass(frozen=True)
class GktConfig:
    sigma: float
    height: int
    width: int

    def __post_init__(self):
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise InvalidConfigError(f"sigma must be finite and > 0, got {self.sigma}")
        if self.height < 1 or self.width < 1:
            raise InvalidConfigError(
                f"image dims must be >= 1, got {self.height}x{self.width}"
            )

    @property
    def sigma_n(self) -> float:
        """Kernel standard deviation in pixels: sigma times the diagonal."""
        return self.sigma * math.sqrt(self.height**2 + self.width**2)


def default_sigma(query_kind: str) -> float:
    if query_kind == "drone":
        return SIGMA_DRONE
    if query_kind == "ground":
        return SIGMA_GROUND
    raise InvalidInputError(f"unknown query kind {query_kind!r}")


def gkt_map(click: ClickPoint, cfg: GktConfig) -> np.ndarray:
    """Evaluate the Gaussian click embedding on the full pixel grid.

    Returns a float32 array of shape (height, width) with values in
    (0, 1]; the maximum sits at the pixel nearest the click.
    """
    if not (0 <= click.x < cfg.width and 0 <= click.y < cfg.height):
        raise InvalidInputError(
            f"click ({click.x}, {click.y}) outside {cfg.width}x{cfg.height} image"
        )
    ys = np.arange(cfg.height, dtype=np.float32)[:, None]
    xs = np.arange(cfg.width, dtype=np.float32)[None, :]
    d2 = (xs - np.float32(click.x)) ** 2 + (ys - np.float32(click.y)) ** 2
    return np.exp(-d2 / np.float32(2.0 * cfg.sigma_n**2))
