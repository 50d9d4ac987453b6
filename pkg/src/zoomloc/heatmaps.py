"""Gaussian target rendering and peak decoding on framed score grids."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .frames import CoordFrame
from .tensor import Tensor


class DegenerateHeatmapWarning(UserWarning):
    """All grid values equal; the decoded peak is meaningless."""


@dataclass
class Heatmap:
    """A 1x1xHxW score grid tied to the frame that places it in an image."""

    grid: Tensor
    frame: CoordFrame = field(default_factory=CoordFrame.identity)
    off_grid: bool = False  # landmark used to render this target fell outside

    @property
    def height(self) -> int:
        return self.grid.shape[2]

    @property
    def width(self) -> int:
        return self.grid.shape[3]


def gaussian_values(u0: float, v0: float, h: int, w: int, delta: float) -> np.ndarray:
    """exp(-((u-u0)^2 + (v-v0)^2) / (2 delta^2)) on the integer grid, float64."""
    uu = np.arange(w, dtype=np.float64)
    vv = np.arange(h, dtype=np.float64)
    du2 = (uu - u0) ** 2
    dv2 = (vv - v0) ** 2
    return np.exp(-(du2[None, :] + dv2[:, None]) / (2.0 * delta * delta))


def gaussian_target(u0: float, v0: float, h: int, w: int, delta: float = 2.0, frame: CoordFrame | None = None, dtype=None) -> Heatmap:
    """Render a Gaussian ground-truth heatmap centered at grid coords (u0, v0).

    Coordinates are in the target grid's own units (the frame only records
    how that grid maps to the parent image); the landmark may be subpixel
    or even outside the grid, in which case the low-mass map is flagged.
    """
    if h < 1 or w < 1:
        raise ValueError(f"heatmap size must be >= 1, got {h}x{w}")
    if delta <= 0:
        raise ValueError(f"delta must be positive, got {delta}")
    g = gaussian_values(u0, v0, h, w, delta)
    if dtype is not None:
        g = g.astype(dtype)
    off = not (0.0 <= u0 <= w - 1.0 and 0.0 <= v0 <= h - 1.0)
    return Heatmap(
        grid=Tensor(g.reshape(1, 1, h, w)),
        frame=frame if frame is not None else CoordFrame.identity(),
        off_grid=off,
    )


def peak_grid_cell(values: np.ndarray) -> tuple[int, int]:
    """Argmax cell (u, v); ties resolve to the smallest row-major index."""
    flat = np.argmax(values)
    v, u = np.unravel_index(flat, values.shape)
    return int(u), int(v)


def is_degenerate(values: np.ndarray) -> bool:
    return bool(values.max() == values.min())


def peak_coords(hm: Heatmap) -> tuple[float, float]:
    """Peak cell mapped through the heatmap's frame to parent coordinates."""
    values = hm.grid.data[0, 0]
    if values.size == 0:
        raise ValueError("peak_coords: empty heatmap grid")
    if is_degenerate(values):
        warnings.warn("heatmap is constant; returning the frame origin cell", DegenerateHeatmapWarning)
    u, v = peak_grid_cell(values)
    return hm.frame.to_original(float(u), float(v))


def save_heatmap_png(hm: Heatmap, path):
    """Export as 16-bit grayscale, values scaled by 65535."""
    from PIL import Image

    values = np.clip(hm.grid.data[0, 0], 0.0, 1.0)
    img = (values * 65535.0).astype(np.uint16)
    Image.fromarray(img, mode="I;16").save(path)
