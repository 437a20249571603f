"""
Evaluation: IoU, accuracy at an IoU threshold, per-category breakdown and baselines
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

from ..utils.config import IOU_THRESHOLD
from ..utils.files import iter_json_lines, require_fields
from .boxes import BoundingBox
from .errors import FormatError, InvalidInputError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EvalRecord:
    """One prediction paired with its ground truth"""

    example_id: str
    predicted: BoundingBox
    ground_truth: BoundingBox
    category: Optional[str] = None

    @property
    def iou(self) -> float:
        return iou(self.predicted, self.ground_truth)


@dataclass(frozen=True)
class CategoryScore:
    count: int
    correct: int

    @property
    def percent(self) -> float:
        return 100.0 * self.correct / self.count if self.count else 0.0


@dataclass(frozen=True)
class AccuracyReport:
    """Overall and per-category accuracy"""

    threshold: float
    count: int
    correct: int
    categories: Dict[str, CategoryScore] = field(default_factory=dict)

    @property
    def percent(self) -> float:
        return 100.0 * self.correct / self.count

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "count": self.count,
            "correct": self.correct,
            "accuracy": round(self.percent, 2),
            "categories": {
                name: {"count": s.count, "correct": s.correct, "accuracy": round(s.percent, 2)}
                for name, s in self.categories.items()
            },
        }


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """
    Intersection over union with inclusive pixel areas

    Args:
        a: First box
        b: Second box

    Returns:
        IoU in [0, 1]
    """
    inter = a.intersection_area(b)
    union = a.area + b.area - inter
    return inter / union


def accuracy(records: Sequence[EvalRecord], threshold: float = IOU_THRESHOLD) -> AccuracyReport:
    """
    Share of records whose IoU is strictly above threshold

    Args:
        records: Evaluation records
        threshold: IoU threshold (a hit needs IoU > threshold)

    Returns:
        AccuracyReport; categories only for tagged records, sorted by name
    """
    if not records:
        raise InvalidInputError("Cannot compute accuracy of zero records")
    correct = 0
    tallies: Dict[str, List[int]] = {}
    for record in records:
        hit = record.iou > threshold
        correct += hit
        if record.category is not None:
            tally = tallies.setdefault(record.category, [0, 0])
            tally[0] += 1
            tally[1] += hit
    categories = {name: CategoryScore(*tallies[name]) for name in sorted(tallies)}
    return AccuracyReport(threshold, len(records), correct, categories)


def baseline_entire_image(width: int, height: int) -> BoundingBox:
    return BoundingBox.full_image(width, height)


def baseline_largest_proposal(proposals: Sequence[BoundingBox]) -> BoundingBox:
    """
    Largest-area proposal, first listed on ties

    Args:
        proposals: Candidate boxes

    Returns:
        BoundingBox
    """
    if not proposals:
        raise InvalidInputError("No proposals to choose from")
    best = proposals[0]
    for box in proposals[1:]:
        if box.area > best.area:
            best = box
    return best


def format_report(report: AccuracyReport, by_category: bool = False) -> str:
    """
    Aligned plain-text report

    Args:
        report: Accuracy report
        by_category: Append the per-category table

    Returns:
        Report text ending with a newline
    """
    lines = [
        f"IoU threshold : > {report.threshold:.2f}",
        f"Examples      : {report.count}",
        f"Correct       : {report.correct}",
        f"Accuracy (%)  : {report.percent:.2f}",
    ]
    if by_category and report.categories:
        width = max(len("Category"), max(len(name) for name in report.categories))
        lines.append("")
        lines.append(f"{'Category':<{width}}  {'Count':>7}  {'Correct':>7}  {'Accuracy':>8}")
        lines.append("-" * (width + 30))
        for name, score in report.categories.items():
            lines.append(f"{name:<{width}}  {score.count:>7}  {score.correct:>7}  {score.percent:>8.2f}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class TruthEntry:
    box: BoundingBox
    category: Optional[str] = None
    width: Optional[int] = None
    height: Optional[int] = None


def _parse_box(value, path, line) -> BoundingBox:
    try:
        return BoundingBox.from_sequence(value)
    except (InvalidInputError, TypeError, ValueError) as e:
        raise FormatError(f"invalid box {value!r}: {e}", path=str(path), line=line) from e


def load_predictions(path: Union[str, Path]) -> Dict[str, BoundingBox]:
    """
    Read a predictions file (JSON Lines with "id" and "box")

    Args:
        path: Predictions file

    Returns:
        Example id -> predicted box
    """
    predictions: Dict[str, BoundingBox] = {}
    for line, record in iter_json_lines(path):
        require_fields(record, ("id", "box"), path, line)
        example_id = str(record["id"])
        if example_id in predictions:
            raise FormatError(f"duplicate id {example_id}", path=str(path), line=line)
        predictions[example_id] = _parse_box(record["box"], path, line)
    return predictions


def load_ground_truth(path: Union[str, Path]) -> Dict[str, TruthEntry]:
    """
    Read ground truth; a corpus manifest with "gt_box" works as well

    Args:
        path: JSON Lines file with "id" and "box" (or "gt_box")

    Returns:
        Example id -> TruthEntry
    """
    truth: Dict[str, TruthEntry] = {}
    for line, record in iter_json_lines(path):
        if "box" not in record and "gt_box" in record:
            record = dict(record, box=record["gt_box"])
        require_fields(record, ("id", "box"), path, line)
        example_id = str(record["id"])
        if example_id in truth:
            raise FormatError(f"duplicate id {example_id}", path=str(path), line=line)
        box = _parse_box(record["box"], path, line)
        width, height = record.get("width"), record.get("height")
        if width is not None and height is not None and not box.fits(int(width), int(height)):
            raise FormatError(f"ground-truth box {box.as_list()} exceeds {width}x{height}",
                              path=str(path), line=line)
        category = record.get("category")
        truth[example_id] = TruthEntry(box, None if category is None else str(category),
                                       width, height)
    return truth


def load_proposals(path: Union[str, Path]) -> Dict[str, List[BoundingBox]]:
    proposals: Dict[str, List[BoundingBox]] = {}
    for line, record in iter_json_lines(path):
        require_fields(record, ("id", "boxes"), path, line)
        proposals[str(record["id"])] = [_parse_box(b, path, line) for b in record["boxes"]]
    return proposals


def join_records(predictions: Dict[str, BoundingBox],
                 truth: Dict[str, TruthEntry]) -> List[EvalRecord]:
    """
    Pair predictions with ground truth by id (ground-truth order)

    Args:
        predictions: id -> predicted box
        truth: id -> TruthEntry

    Returns:
        EvalRecord list
    """
    missing = [i for i in truth if i not in predictions]
    extra = [i for i in predictions if i not in truth]
    if missing or extra:
        parts = []
        if missing:
            parts.append(f"no prediction for id(s): {', '.join(missing)}")
        if extra:
            parts.append(f"no ground truth for id(s): {', '.join(extra)}")
        raise InvalidInputError("; ".join(parts))
    records = []
    for example_id, entry in truth.items():
        predicted = predictions[example_id]
        if entry.width is not None and entry.height is not None:
            if not predicted.fits(int(entry.width), int(entry.height)):
                raise InvalidInputError(
                    f"Prediction for {example_id} {predicted.as_list()} exceeds {entry.width}x{entry.height}"
                )
        records.append(EvalRecord(example_id, predicted, entry.box, entry.category))
    return records
