"""
Corpus manifest: image-query pairs with their concept score maps
"""

import logging
import os
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Tuple, Union

from ..utils.files import iter_json_lines, require_fields
from .boxes import BoundingBox
from .errors import FormatError, InvalidInputError
from .inference import GroundingInput
from .scoremap import ScoreMap, read_smap

logger = logging.getLogger(__name__)

REQUIRED_FIELDS = ("id", "query", "width", "height", "maps")


@lru_cache(maxsize=512)
def _cached_map(path: str, concept_id: str, inode: int, mtime_ns: int, size: int) -> ScoreMap:
    # synthetic corpora point many concepts at one shared empty map
    return read_smap(path, concept_id=concept_id)


def load_map(path: Union[str, Path], concept_id: str = "") -> ScoreMap:
    """
    Read a score map, reusing the parsed map while the file is unchanged

    Args:
        path: SMAP file
        concept_id: Label for the map

    Returns:
        ScoreMap
    """
    stat = os.stat(path)
    return _cached_map(str(path), concept_id, stat.st_ino, stat.st_mtime_ns, stat.st_size)


@dataclass(frozen=True)
class CorpusExample:
    """One manifest record"""

    example_id: str
    query: str
    width: int
    height: int
    map_paths: Dict[str, Path] = field(default_factory=dict)
    gt_box: Optional[BoundingBox] = None
    category: Optional[str] = None
    line: int = 0


class CorpusManifest:
    """
    Parsed JSON Lines manifest

    Map paths are resolved relative to the manifest's directory. Score maps
    are read lazily, one example at a time.
    """

    def __init__(self, path: Union[str, Path], examples: List[CorpusExample]):
        self.path = Path(path)
        self.examples = examples

    def __len__(self):
        return len(self.examples)

    def __iter__(self) -> Iterator[CorpusExample]:
        return iter(self.examples)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "CorpusManifest":
        """
        Parse a manifest and check that every referenced map file exists

        Args:
            path: Manifest file

        Returns:
            CorpusManifest
        """
        path = Path(path)
        base = path.parent
        examples: List[CorpusExample] = []
        seen = set()
        for line, record in iter_json_lines(path):
            require_fields(record, REQUIRED_FIELDS, path, line)
            example_id = str(record["id"])
            if example_id in seen:
                raise FormatError(f"duplicate id {example_id}", path=str(path), line=line)
            seen.add(example_id)
            try:
                width, height = int(record["width"]), int(record["height"])
            except (TypeError, ValueError):
                raise FormatError("width/height must be integers", path=str(path), line=line) from None
            if width < 1 or height < 1:
                raise FormatError(f"invalid image size {width}x{height}", path=str(path), line=line)
            maps = record["maps"]
            if not isinstance(maps, dict):
                raise FormatError("maps must be an object of concept -> path", path=str(path), line=line)
            map_paths: Dict[str, Path] = {}
            for concept, rel in maps.items():
                map_path = (base / str(rel)) if not Path(str(rel)).is_absolute() else Path(str(rel))
                if not map_path.is_file():
                    raise FormatError(f"score map file not found: {map_path}", path=str(path), line=line)
                map_paths[str(concept)] = map_path
            gt_box = None
            if record.get("gt_box") is not None:
                try:
                    gt_box = BoundingBox.from_sequence(record["gt_box"])
                except (InvalidInputError, TypeError, ValueError) as e:
                    raise FormatError(f"invalid gt_box: {e}", path=str(path), line=line) from e
                if not gt_box.fits(width, height):
                    raise FormatError(f"gt_box {gt_box.as_list()} exceeds {width}x{height}",
                                      path=str(path), line=line)
            category = record.get("category")
            examples.append(CorpusExample(
                example_id=example_id,
                query=str(record["query"]),
                width=width,
                height=height,
                map_paths=map_paths,
                gt_box=gt_box,
                category=None if category is None else str(category),
                line=line,
            ))
        if not examples:
            raise FormatError("corpus is empty", path=str(path))
        logger.info("Loaded %d examples from %s", len(examples), path)
        return cls(path, examples)

    @property
    def concepts(self) -> Tuple[str, ...]:
        """Concept ids in order of first appearance"""
        ordered: Dict[str, None] = {}
        for example in self.examples:
            for concept in example.map_paths:
                ordered.setdefault(concept, None)
        return tuple(ordered)

    def queries(self) -> List[str]:
        return [example.query for example in self.examples]

    def load_maps(self, example: CorpusExample) -> Dict[str, ScoreMap]:
        """
        Read the score maps of one example

        Args:
            example: Manifest record

        Returns:
            Concept id -> ScoreMap, in manifest order
        """
        maps: Dict[str, ScoreMap] = {}
        for concept, map_path in example.map_paths.items():
            score_map = load_map(map_path, concept)
            if (score_map.width, score_map.height) != (example.width, example.height):
                raise FormatError(
                    f"{map_path} is {score_map.width}x{score_map.height}, "
                    f"manifest declares {example.width}x{example.height}",
                    path=str(self.path), line=example.line,
                )
            maps[concept] = score_map
        return maps

    def grounding_input(self, example: CorpusExample) -> GroundingInput:
        return GroundingInput(
            query=example.query,
            image_id=example.example_id,
            width=example.width,
            height=example.height,
            maps=self.load_maps(example),
        )

    def grounding_inputs(self) -> Iterator[GroundingInput]:
        for example in self.examples:
            yield self.grounding_input(example)


def manifest_record(example_id: str, query: str, width: int, height: int,
                    maps: Dict[str, str], gt_box: Optional[BoundingBox] = None,
                    category: Optional[str] = None) -> dict:
    record = {
        "id": example_id,
        "query": query,
        "width": width,
        "height": height,
        "maps": maps,
    }
    if gt_box is not None:
        record["gt_box"] = gt_box.as_list()
    if category is not None:
        record["category"] = category
    return record
