"""
Per-concept score maps

A score map holds one real value per pixel for a single image concept.
Positive values mark presence. Maps are built from segmentation
probabilities or from detector boxes, and answer box-sum and box-mean
queries in constant time through integral images.
"""

import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Union

import numpy as np

from ..utils.config import (
    DETECTION_MIN_CONFIDENCE,
    SEGMENTATION_THRESHOLD,
    SMAP_MAGIC,
    SMAP_VERSION,
)
from ..utils.files import atomic_write_bytes
from .boxes import BoundingBox
from .errors import FormatError, InvalidInputError

logger = logging.getLogger(__name__)

_HEADER_RE = re.compile(rb"^(\S+) (\d+) (\d+) (\d+)$")


class IntegralImage:
    """(H+1) x (W+1) prefix-sum table of a grid"""

    def __init__(self, grid: np.ndarray):
        height, width = grid.shape
        table = np.zeros((height + 1, width + 1), dtype=np.float64)
        table[1:, 1:] = np.cumsum(np.cumsum(grid, axis=0, dtype=np.float64), axis=1)
        table.setflags(write=False)
        self.table = table
        # plain nested lists: scalar lookups in the search loop are much
        # faster than numpy item access
        self.rows: List[List[float]] = table.tolist()

    def box_sum(self, x1: int, y1: int, x2: int, y2: int) -> float:
        """Sum over the inclusive rectangle; no bounds checking"""
        top = self.rows[y1]
        bottom = self.rows[y2 + 1]
        return (bottom[x2 + 1] - top[x2 + 1]) - (bottom[x1] - top[x1])


class ScoreMap:
    """
    Immutable W x H score grid for one concept

    Attributes:
        width: Columns (W)
        height: Rows (H)
        scores: Read-only float64 array of shape (H, W), row 0 at the top
        concept_id: Opaque concept label
        integral: Integral image of the scores
        integral_pos: Integral image of max(score, 0)
        integral_neg: Integral image of min(score, 0)
        integral_prob: Integral image of the probability view
    """

    def __init__(self, scores, concept_id: str = ""):
        grid = np.array(scores, dtype=np.float64)
        if grid.ndim != 2 or grid.shape[0] < 1 or grid.shape[1] < 1:
            raise InvalidInputError(f"Score map must be a non-empty 2-D grid, got shape {grid.shape}")
        if not np.all(np.isfinite(grid)):
            raise InvalidInputError("Score map contains non-finite values")
        grid.setflags(write=False)

        self.scores = grid
        self.height, self.width = grid.shape
        self.concept_id = concept_id

        self.integral = IntegralImage(grid)
        self.integral_pos = IntegralImage(np.maximum(grid, 0.0))
        self.integral_neg = IntegralImage(np.minimum(grid, 0.0))
        self.integral_prob = IntegralImage(self.probability)

    def __repr__(self):
        return f"ScoreMap(concept_id={self.concept_id!r}, width={self.width}, height={self.height})"

    @property
    def probability(self) -> np.ndarray:
        """Probability view p = clamp((score + 1) / 2, 0, 1)"""
        return np.clip((self.scores + 1.0) / 2.0, 0.0, 1.0)

    @property
    def max_score(self) -> float:
        return float(self.scores.max())

    @property
    def total(self) -> float:
        return self.integral.box_sum(0, 0, self.width - 1, self.height - 1)

    def with_concept(self, concept_id: str) -> "ScoreMap":
        return ScoreMap(self.scores, concept_id=concept_id)

    def box_sum(self, box: BoundingBox) -> float:
        """
        Sum of scores inside box

        Args:
            box: Inclusive pixel rectangle within the map

        Returns:
            Score total over the box
        """
        box.require_within(self.width, self.height)
        return self.integral.box_sum(box.x1, box.y1, box.x2, box.y2)

    def box_sum_positive(self, box: BoundingBox) -> float:
        box.require_within(self.width, self.height)
        return self.integral_pos.box_sum(box.x1, box.y1, box.x2, box.y2)

    def box_sum_negative(self, box: BoundingBox) -> float:
        box.require_within(self.width, self.height)
        return self.integral_neg.box_sum(box.x1, box.y1, box.x2, box.y2)

    def box_mean_prob(self, box: BoundingBox) -> float:
        """
        Mean of the probability view inside box

        Args:
            box: Inclusive pixel rectangle within the map

        Returns:
            Confidence in [0, 1]
        """
        box.require_within(self.width, self.height)
        total = self.integral_prob.box_sum(box.x1, box.y1, box.x2, box.y2)
        return min(1.0, max(0.0, total / box.area))


@dataclass(frozen=True)
class Detection:
    """One detector output box"""

    box: BoundingBox
    confidence: float
    concept_id: str = ""

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise InvalidInputError(f"Detection confidence {self.confidence} outside [0, 1]")


def from_segmentation(prob_grid, concept_id: str = "") -> ScoreMap:
    """
    Threshold a per-pixel class probability grid into a +1/-1 score map

    Args:
        prob_grid: H x W probabilities in [0, 1]
        concept_id: Label for the resulting map

    Returns:
        ScoreMap with +1 where probability > 0.5 and -1 elsewhere
    """
    probs = np.asarray(prob_grid, dtype=np.float64)
    if probs.ndim != 2 or probs.size == 0:
        raise InvalidInputError(f"Probability grid must be a non-empty 2-D grid, got shape {probs.shape}")
    if not np.all(np.isfinite(probs)) or probs.min() < 0.0 or probs.max() > 1.0:
        raise InvalidInputError("Probability grid values must lie in [0, 1]")
    return ScoreMap(np.where(probs > SEGMENTATION_THRESHOLD, 1.0, -1.0), concept_id=concept_id)


def from_detections(detections: Iterable[Detection], width: int, height: int,
                    concept_id: Optional[str] = None) -> ScoreMap:
    """
    Paint detector boxes into a +1/-1 score map

    Boxes with confidence below 0.5 are dropped; the union of the others is +1.

    Args:
        detections: Detector boxes for one concept
        width: Image width in pixels
        height: Image height in pixels
        concept_id: Label for the map (defaults to the detections' concept)

    Returns:
        ScoreMap
    """
    if width < 1 or height < 1:
        raise InvalidInputError(f"Image size must be positive, got {width}x{height}")
    detections = list(detections)
    grid = np.full((height, width), -1.0)
    kept = 0
    for det in detections:
        det.box.require_within(width, height)
        if det.confidence < DETECTION_MIN_CONFIDENCE:
            continue
        grid[det.box.y1:det.box.y2 + 1, det.box.x1:det.box.x2 + 1] = 1.0
        kept += 1
    if concept_id is None:
        concept_id = detections[0].concept_id if detections else ""
    logger.debug("Concept %s: kept %d of %d detections", concept_id, kept, len(detections))
    return ScoreMap(grid, concept_id=concept_id)


def maps_from_detections(detections: Iterable[Detection], width: int, height: int,
                         concepts: Iterable[str]) -> Dict[str, ScoreMap]:
    """
    Build one score map per concept from a mixed detector output

    Args:
        detections: Boxes of any concept
        width: Image width
        height: Image height
        concepts: Concept set; concepts without detections get an all -1 map

    Returns:
        Concept id -> ScoreMap
    """
    grouped: Dict[str, List[Detection]] = {c: [] for c in concepts}
    for det in detections:
        if det.concept_id in grouped:
            grouped[det.concept_id].append(det)
    return {c: from_detections(dets, width, height, concept_id=c) for c, dets in grouped.items()}


def encode_smap(score_map: ScoreMap) -> bytes:
    header = f"{SMAP_MAGIC} {SMAP_VERSION} {score_map.width} {score_map.height}\n".encode("ascii")
    return header + score_map.scores.astype("<f4").tobytes(order="C")


def decode_smap(data: bytes, concept_id: str = "", source: Optional[str] = None) -> ScoreMap:
    """
    Parse SMAP bytes

    Args:
        data: File content
        concept_id: Label for the map
        source: File name for diagnostics

    Returns:
        ScoreMap
    """
    newline = data.find(b"\n")
    if newline < 0:
        raise FormatError("missing SMAP header line", path=source)
    match = _HEADER_RE.match(data[:newline])
    if match is None or match.group(1) != SMAP_MAGIC.encode("ascii"):
        raise FormatError("malformed SMAP header", path=source)
    version, width, height = (int(g) for g in match.group(2, 3, 4))
    if version != SMAP_VERSION:
        raise FormatError(f"unsupported SMAP version {version}", path=source)
    if width < 1 or height < 1:
        raise FormatError(f"invalid SMAP size {width}x{height}", path=source)
    payload = data[newline + 1:]
    if len(payload) != 4 * width * height:
        raise FormatError(
            f"expected {4 * width * height} payload bytes for {width}x{height}, got {len(payload)}",
            path=source,
        )
    values = np.frombuffer(payload, dtype="<f4").reshape(height, width)
    try:
        return ScoreMap(values, concept_id=concept_id)
    except InvalidInputError as e:
        raise FormatError(str(e), path=source) from e


def write_smap(path: Union[str, Path], score_map: ScoreMap):
    atomic_write_bytes(path, encode_smap(score_map))


def read_smap(path: Union[str, Path], concept_id: str = "") -> ScoreMap:
    """
    Load a score map file

    Args:
        path: SMAP file
        concept_id: Label for the map

    Returns:
        ScoreMap
    """
    with open(path, "rb") as f:
        data = f.read()
    return decode_smap(data, concept_id=concept_id, source=str(path))
