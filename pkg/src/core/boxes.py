"""
Pixel bounding boxes

Coordinates follow the score-map convention: x is the column, y the row,
origin top-left, both corners inclusive.
"""

from dataclasses import dataclass
from typing import List, Sequence, Tuple

from .errors import InvalidInputError


@dataclass(frozen=True)
class BoundingBox:
    """Inclusive pixel rectangle (x1, y1) top-left to (x2, y2) bottom-right"""

    x1: int
    y1: int
    x2: int
    y2: int

    def __post_init__(self):
        if self.x1 > self.x2 or self.y1 > self.y2:
            raise InvalidInputError(f"Degenerate box {self.as_list()}")
        if self.x1 < 0 or self.y1 < 0:
            raise InvalidInputError(f"Negative box coordinate {self.as_list()}")

    @classmethod
    def from_sequence(cls, values: Sequence) -> "BoundingBox":
        """
        Build a box from [x1, y1, x2, y2]

        Args:
            values: Four integer coordinates

        Returns:
            BoundingBox
        """
        if len(values) != 4:
            raise InvalidInputError(f"A box needs 4 coordinates, got {len(values)}")
        coords = []
        for value in values:
            if isinstance(value, bool) or int(value) != value:
                raise InvalidInputError(f"Box coordinates must be integers, got {list(values)}")
            coords.append(int(value))
        return cls(*coords)

    @classmethod
    def full_image(cls, width: int, height: int) -> "BoundingBox":
        return cls(0, 0, width - 1, height - 1)

    @property
    def width(self) -> int:
        return self.x2 - self.x1 + 1

    @property
    def height(self) -> int:
        return self.y2 - self.y1 + 1

    @property
    def area(self) -> int:
        return self.width * self.height

    @property
    def sort_key(self) -> Tuple[int, int, int, int]:
        # tie order for equally good boxes
        return (self.y1, self.x1, self.y2, self.x2)

    def fits(self, width: int, height: int) -> bool:
        return self.x2 < width and self.y2 < height

    def require_within(self, width: int, height: int):
        if not self.fits(width, height):
            raise InvalidInputError(
                f"Box {self.as_list()} exceeds image bounds {width}x{height}"
            )

    def intersection_area(self, other: "BoundingBox") -> int:
        ix = min(self.x2, other.x2) - max(self.x1, other.x1) + 1
        iy = min(self.y2, other.y2) - max(self.y1, other.y1) + 1
        if ix <= 0 or iy <= 0:
            return 0
        return ix * iy

    def as_list(self) -> List[int]:
        return [self.x1, self.y1, self.x2, self.y2]
