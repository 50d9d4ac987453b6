"""Affine coordinate frames between processing grids and image pixels.

A frame maps continuous grid coordinates (u along columns, v along rows,
integer values at pixel centers) to coordinates of a parent image:
``parent = offset + scale * grid``. Downsampling by s with half-pixel
centers is the frame (scale=s, offset=(s-1)/2); a crop starting at column
c0 is (scale=1, offset=c0). For the dyadic scales and integer-ish offsets
used throughout, composition and inversion are exact in floating point.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class CoordFrame:
    scale_u: float
    scale_v: float
    offset_u: float
    offset_v: float

    def __post_init__(self):
        if self.scale_u <= 0 or self.scale_v <= 0:
            raise ValueError(f"frame scales must be positive, got ({self.scale_u}, {self.scale_v})")

    @staticmethod
    def identity() -> "CoordFrame":
        return CoordFrame(1.0, 1.0, 0.0, 0.0)

    @staticmethod
    def downsample(factor: float) -> "CoordFrame":
        """Half-pixel-center downsampling by ``factor``."""
        return CoordFrame(factor, factor, (factor - 1.0) / 2.0, (factor - 1.0) / 2.0)

    @staticmethod
    def crop(u0: float, v0: float) -> "CoordFrame":
        return CoordFrame(1.0, 1.0, u0, v0)

    def to_original(self, u, v):
        return self.offset_u + self.scale_u * u, self.offset_v + self.scale_v * v

    def from_original(self, u, v):
        return (u - self.offset_u) / self.scale_u, (v - self.offset_v) / self.scale_v

    def cell_size(self):
        return self.scale_u, self.scale_v


def frame_compose(outer: CoordFrame, inner: CoordFrame) -> CoordFrame:
    """Frame mapping inner-grid coordinates through ``inner`` then ``outer``."""
    return CoordFrame(
        outer.scale_u * inner.scale_u,
        outer.scale_v * inner.scale_v,
        outer.offset_u + outer.scale_u * inner.offset_u,
        outer.offset_v + outer.scale_v * inner.offset_v,
    )


def frame_invert(f: CoordFrame) -> CoordFrame:
    return CoordFrame(
        1.0 / f.scale_u,
        1.0 / f.scale_v,
        -f.offset_u / f.scale_u,
        -f.offset_v / f.scale_v,
    )


def frame_apply(f: CoordFrame, u, v):
    return f.to_original(u, v)
