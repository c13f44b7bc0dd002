"""Axis-aligned pixel regions used for ROIs, target rectangles and plots."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyRoiError

# Ground sampling distance of the reference flights at 30 m AGL.
DEFAULT_CM_PER_PIXEL = 2.08


@dataclass(frozen=True)
class RegionSpec:
    """A labeled rectangle ``(x, y, width, height)`` in pixel units.

    ``x`` is the column and ``y`` the row of the top-left corner.
    """

    label: str
    x: int
    y: int
    width: int
    height: int

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise EmptyRoiError(f"region {self.label!r} has non-positive extent")

    @classmethod
    def from_physical(
        cls,
        label: str,
        center: tuple[float, float],
        side_cm: float,
        cm_per_pixel: float = DEFAULT_CM_PER_PIXEL,
    ) -> "RegionSpec":
        """Square region of ``side_cm`` centred on pixel ``center=(x, y)``."""
        if side_cm <= 0 or cm_per_pixel <= 0:
            raise EmptyRoiError("physical region needs positive size and scale")
        side = max(1, int(round(side_cm / cm_per_pixel)))
        cx, cy = center
        x0 = int(round(cx - side / 2.0))
        y0 = int(round(cy - side / 2.0))
        return cls(label, x0, y0, side, side)

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + self.width / 2.0, self.y + self.height / 2.0)

    @property
    def area(self) -> int:
        return self.width * self.height

    def inside(self, width: int, height: int) -> bool:
        return (
            self.x >= 0
            and self.y >= 0
            and self.x + self.width <= width
            and self.y + self.height <= height
        )

    def contains(self, other: "RegionSpec") -> bool:
        return (
            other.x >= self.x
            and other.y >= self.y
            and other.x + other.width <= self.x + self.width
            and other.y + other.height <= self.y + self.height
        )

    def overlaps(self, other: "RegionSpec") -> bool:
        return not (
            other.x >= self.x + self.width
            or other.x + other.width <= self.x
            or other.y >= self.y + self.height
            or other.y + other.height <= self.y
        )

    def shrink(self, side: int, label: str | None = None) -> "RegionSpec":
        """Centred square of ``side`` pixels strictly inside this region."""
        if side <= 0 or side > min(self.width, self.height):
            raise EmptyRoiError(f"cannot fit {side}px square in {self.label!r}")
        x0 = self.x + (self.width - side) // 2
        y0 = self.y + (self.height - side) // 2
        return RegionSpec(label or self.label, x0, y0, side, side)

    def slices(self) -> tuple[slice, slice]:
        return (slice(self.y, self.y + self.height), slice(self.x, self.x + self.width))

    def take(self, values: np.ndarray) -> np.ndarray:
        """Pixels of a (rows, cols) array inside the region; raises if outside."""
        rows, cols = np.shape(values)[:2]
        if not self.inside(cols, rows):
            raise EmptyRoiError(
                f"region {self.label!r} {self.x, self.y, self.width, self.height} "
                f"outside {cols}x{rows} image"
            )
        return np.asarray(values)[self.slices()]

    def to_dict(self) -> dict:
        return {"label": self.label, "x": self.x, "y": self.y,
                "width": self.width, "height": self.height}
