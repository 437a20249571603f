"""
Efficient subwindow search

Best-first branch-and-bound over sets of boxes. A box set is the product
of four integer intervals (one per corner coordinate). The set bound adds
the positive mass of the largest box in the set to the negative mass of
the smallest one, which is admissible and tight on singletons.
"""

import heapq
import itertools
import logging
from dataclasses import dataclass
from typing import Iterator, NamedTuple, Optional, Tuple

import numpy as np

from ..utils.config import ACTIVATION_AREA, ACTIVATION_CONFIDENCE, BRUTE_FORCE_LIMIT
from .boxes import BoundingBox
from .errors import InvalidInputError, SearchLimitError
from .scoremap import ScoreMap

logger = logging.getLogger(__name__)


class BoxSet(NamedTuple):
    """Closed coordinate intervals X1 x Y1 x X2 x Y2"""

    x1_lo: int
    x1_hi: int
    y1_lo: int
    y1_hi: int
    x2_lo: int
    x2_hi: int
    y2_lo: int
    y2_hi: int

    @classmethod
    def full(cls, width: int, height: int) -> "BoxSet":
        return cls(0, width - 1, 0, height - 1, 0, width - 1, 0, height - 1)

    @classmethod
    def single(cls, box: BoundingBox) -> "BoxSet":
        return cls(box.x1, box.x1, box.y1, box.y1, box.x2, box.x2, box.y2, box.y2)

    @property
    def is_feasible(self) -> bool:
        return self.x1_lo <= self.x2_hi and self.y1_lo <= self.y2_hi

    @property
    def is_singleton(self) -> bool:
        return (self.x1_lo == self.x1_hi and self.y1_lo == self.y1_hi
                and self.x2_lo == self.x2_hi and self.y2_lo == self.y2_hi)

    @property
    def total_width(self) -> int:
        return ((self.x1_hi - self.x1_lo) + (self.y1_hi - self.y1_lo)
                + (self.x2_hi - self.x2_lo) + (self.y2_hi - self.y2_lo))

    def split(self) -> Tuple["BoxSet", "BoxSet"]:
        """
        Halve the widest interval (ties: X1, Y1, X2, Y2)

        Returns:
            (left, right) children; left keeps [lo, mid], right [mid + 1, hi]
        """
        left, right = _halve(self)
        return BoxSet(*left), BoxSet(*right)

    def contains(self, box: BoundingBox) -> bool:
        return (self.x1_lo <= box.x1 <= self.x1_hi and self.y1_lo <= box.y1 <= self.y1_hi
                and self.x2_lo <= box.x2 <= self.x2_hi and self.y2_lo <= box.y2 <= self.y2_hi)

    def boxes(self) -> Iterator[BoundingBox]:
        """Every valid box in the set"""
        for y1 in range(self.y1_lo, self.y1_hi + 1):
            for x1 in range(self.x1_lo, self.x1_hi + 1):
                for y2 in range(max(y1, self.y2_lo), self.y2_hi + 1):
                    for x2 in range(max(x1, self.x2_lo), self.x2_hi + 1):
                        yield BoundingBox(x1, y1, x2, y2)

    def as_box(self) -> BoundingBox:
        if not self.is_singleton:
            raise InvalidInputError("Box set is not a singleton")
        return BoundingBox(self.x1_lo, self.y1_lo, self.x2_lo, self.y2_lo)


def _halve(intervals: Tuple[int, ...]) -> Tuple[Tuple[int, ...], Tuple[int, ...]]:
    widths = (intervals[1] - intervals[0], intervals[3] - intervals[2],
              intervals[5] - intervals[4], intervals[7] - intervals[6])
    # index() returns the first widest axis
    lo_index = 2 * widths.index(max(widths))
    lo = intervals[lo_index]
    hi = intervals[lo_index + 1]
    mid = lo + (hi - lo) // 2
    head = tuple(intervals[:lo_index])
    tail = tuple(intervals[lo_index + 2:])
    return head + (lo, mid) + tail, head + (mid + 1, hi) + tail


def _min_key(intervals: Tuple[int, ...]) -> Tuple[int, int, int, int]:
    """Smallest (y1, x1, y2, x2) any box of the set can have"""
    x1_lo, _, y1_lo, _, x2_lo, _, y2_lo, _ = intervals
    return (y1_lo, x1_lo, max(y1_lo, y2_lo), max(x1_lo, x2_lo))


def _bound(box_set: Tuple[int, ...], pos_rows, neg_rows) -> float:
    x1_lo, x1_hi, y1_lo, y1_hi, x2_lo, x2_hi, y2_lo, y2_hi = box_set
    top = pos_rows[y1_lo]
    bottom = pos_rows[y2_hi + 1]
    value = (bottom[x2_hi + 1] - top[x2_hi + 1]) - (bottom[x1_lo] - top[x1_lo])
    if x1_hi <= x2_lo and y1_hi <= y2_lo:
        top = neg_rows[y1_hi]
        bottom = neg_rows[y2_lo + 1]
        value += (bottom[x2_lo + 1] - top[x2_lo + 1]) - (bottom[x1_hi] - top[x1_hi])
    return value


def upper_bound(box_set: BoxSet, score_map: ScoreMap) -> float:
    """
    Admissible bound on box_sum over every box of the set

    Args:
        box_set: Feasible set inside the map
        score_map: Map being searched

    Returns:
        Positive mass of the largest box plus negative mass of the smallest box
    """
    if not box_set.is_feasible:
        raise InvalidInputError(f"Infeasible box set {tuple(box_set)}")
    if (min(box_set.x1_lo, box_set.y1_lo, box_set.x2_lo, box_set.y2_lo) < 0
            or box_set.x2_hi >= score_map.width or box_set.y2_hi >= score_map.height
            or box_set.x1_hi >= score_map.width or box_set.y1_hi >= score_map.height):
        raise InvalidInputError(f"Box set {tuple(box_set)} exceeds map bounds")
    return _bound(box_set, score_map.integral_pos.rows, score_map.integral_neg.rows)


@dataclass(frozen=True)
class SearchResult:
    """Outcome of one subwindow search"""

    box: BoundingBox
    value: float
    bound_evaluations: int
    iterations: int


def _first_maximum_pixel(score_map: ScoreMap) -> SearchResult:
    # Without positive scores no box beats its best single pixel, and the
    # first such pixel in row-major order is the lexicographically smallest
    flat_index = int(np.argmax(score_map.scores))
    y, x = divmod(flat_index, score_map.width)
    box = BoundingBox(x, y, x, y)
    return SearchResult(box, score_map.box_sum(box), 0, 0)


def run_ess(score_map: ScoreMap) -> SearchResult:
    """
    Branch-and-bound search for the highest-scoring box

    Among equally good boxes the one minimal under (y1, x1, y2, x2) wins.
    Sets are popped by descending bound. A set is dropped as soon as its
    bound falls below the best box found, or ties it while every box it
    holds ranks after that box.

    Args:
        score_map: Map to search

    Returns:
        SearchResult with the optimal box, its score and work counters
    """
    if score_map.max_score <= 0.0:
        return _first_maximum_pixel(score_map)

    width, height = score_map.width, score_map.height
    pos_rows = score_map.integral_pos.rows
    neg_rows = score_map.integral_neg.rows
    integral = score_map.integral
    # bounds within rounding of the best value still count as ties
    tolerance = 1e-9 * (1.0 + float(np.abs(score_map.scores).sum()))

    # start from the better of the whole image and the first best pixel
    best_value = integral.box_sum(0, 0, width - 1, height - 1)
    best_key = (0, 0, height - 1, width - 1)
    pixel = _first_maximum_pixel(score_map)
    pixel_key = (pixel.box.y1, pixel.box.x1, pixel.box.y2, pixel.box.x2)
    if pixel.value > best_value or (pixel.value == best_value and pixel_key < best_key):
        best_value, best_key = pixel.value, pixel_key

    counter = itertools.count()
    root = tuple(BoxSet.full(width, height))
    heap = [(-_bound(root, pos_rows, neg_rows), next(counter), root)]
    evaluations = 1
    iterations = 0

    while heap:
        neg_bound, _, intervals = heapq.heappop(heap)
        bound = -neg_bound
        if bound < best_value - tolerance:
            break
        if bound <= best_value and _min_key(intervals) >= best_key:
            continue
        iterations += 1
        x1_lo, x1_hi, y1_lo, y1_hi, x2_lo, x2_hi, y2_lo, y2_hi = intervals
        if x1_lo == x1_hi and y1_lo == y1_hi and x2_lo == x2_hi and y2_lo == y2_hi:
            value = integral.box_sum(x1_lo, y1_lo, x2_lo, y2_lo)
            key = (y1_lo, x1_lo, y2_lo, x2_lo)
            if value > best_value or (value == best_value and key < best_key):
                best_value, best_key = value, key
            continue
        for child in _halve(intervals):
            if child[0] > child[5] or child[2] > child[7]:
                continue
            evaluations += 1
            child_bound = _bound(child, pos_rows, neg_rows)
            if child_bound < best_value - tolerance:
                continue
            if child_bound <= best_value and _min_key(child) >= best_key:
                continue
            heapq.heappush(heap, (-child_bound, next(counter), child))

    y1, x1, y2, x2 = best_key
    logger.debug("ESS on %s: %d iterations, %d bound evaluations", score_map, iterations, evaluations)
    return SearchResult(BoundingBox(x1, y1, x2, y2), best_value, evaluations, iterations)


def ess_search(score_map: ScoreMap) -> Tuple[BoundingBox, float]:
    result = run_ess(score_map)
    return result.box, result.value


def candidate_box_count(width: int, height: int) -> int:
    """Number of distinct boxes in a W x H image"""
    return (width * (width + 1) // 2) * (height * (height + 1) // 2)


def brute_force_search(score_map: ScoreMap) -> Tuple[BoundingBox, float]:
    """
    Score every box and keep the best (same tie rule as ess_search)

    Args:
        score_map: Map with W * H <= 4096

    Returns:
        (box, value)
    """
    width, height = score_map.width, score_map.height
    if width * height > BRUTE_FORCE_LIMIT:
        raise SearchLimitError(
            f"Brute force refused for {width}x{height} (limit W*H <= {BRUTE_FORCE_LIMIT})"
        )
    table = score_map.integral.table
    upper = np.triu(np.ones((width, width), dtype=bool))

    best_key = None
    best_value = 0.0
    for y1 in range(height):
        for y2 in range(y1, height):
            strip = table[y2 + 1] - table[y1]
            # sums[x1, x2] = strip[x2 + 1] - strip[x1]
            sums = strip[None, 1:] - strip[:-1, None]
            sums = np.where(upper, sums, -np.inf)
            flat = int(np.argmax(sums))
            x1, x2 = divmod(flat, width)
            value = float(sums[x1, x2])
            key = (y1, x1, y2, x2)
            if best_key is None or value > best_value or (value == best_value and key < best_key):
                best_key = key
                best_value = value
    y1, x1, y2, x2 = best_key
    return BoundingBox(x1, y1, x2, y2), best_value


@dataclass(frozen=True)
class ActivationThresholds:
    """Confidence and area-fraction rule for an active concept"""

    confidence: float = ACTIVATION_CONFIDENCE
    area: float = ACTIVATION_AREA


@dataclass(frozen=True)
class ConceptActivation:
    """Best box of one concept map and whether the concept fires"""

    concept_id: str
    box: BoundingBox
    confidence: float
    area_fraction: float
    active: bool
    score: float = 0.0

    def to_record(self) -> dict:
        return {
            "concept": self.concept_id,
            "box": self.box.as_list(),
            "confidence": self.confidence,
            "area_fraction": self.area_fraction,
            "active": self.active,
        }


def detect_activation(score_map: ScoreMap,
                      thresholds: Optional[ActivationThresholds] = None) -> ConceptActivation:
    """
    Run the subwindow search and apply the activation rule

    Args:
        score_map: Concept map
        thresholds: Activation rule (defaults: confidence > 0.5, area >= 5%)

    Returns:
        ConceptActivation
    """
    thresholds = thresholds or ActivationThresholds()
    box, value = ess_search(score_map)
    confidence = score_map.box_mean_prob(box)
    area_fraction = box.area / float(score_map.width * score_map.height)
    active = confidence > thresholds.confidence and area_fraction >= thresholds.area
    return ConceptActivation(
        concept_id=score_map.concept_id,
        box=box,
        confidence=confidence,
        area_fraction=area_fraction,
        active=active,
        score=value,
    )
