"""
Shared fixtures: hand-built corpora on disk and small synthetic worlds
"""

import os
import sys
from pathlib import Path

import numpy as np
import pytest

# Add the project root to path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from src.core.boxes import BoundingBox  # noqa: E402
from src.core.corpus import manifest_record  # noqa: E402
from src.core.scoremap import ScoreMap, write_smap  # noqa: E402
from src.core.synth import SynthConfig, generate  # noqa: E402
from src.utils.files import write_json_lines  # noqa: E402

DATA_DIR = Path(__file__).parent / "data"


def planted_grid(width, height, box=None):
    """+1 inside box, -1 elsewhere (all -1 without a box)"""
    grid = -np.ones((height, width))
    if box is not None:
        grid[box.y1:box.y2 + 1, box.x1:box.x2 + 1] = 1.0
    return grid


class CorpusBuilder:
    """Writes manifest records and their SMAP files under a directory"""

    def __init__(self, root: Path):
        self.root = root
        self.records = []
        (root / "maps").mkdir(parents=True, exist_ok=True)

    def add(self, example_id, query, width, height, boxes, gt_box=None, category=None):
        """
        boxes: concept -> BoundingBox of its +1 region, or None for an all -1 map
        """
        maps = {}
        for concept, box in boxes.items():
            name = f"maps/{example_id}_{concept}.smap"
            write_smap(self.root / name, ScoreMap(planted_grid(width, height, box)))
            maps[concept] = name
        self.records.append(manifest_record(example_id, query, width, height, maps,
                                            gt_box=gt_box, category=category))

    def write(self, name="corpus.jsonl") -> Path:
        path = self.root / name
        write_json_lines(path, self.records)
        return path


@pytest.fixture
def corpus_builder(tmp_path):
    return CorpusBuilder(tmp_path / "corpus")


@pytest.fixture
def dog_corpus(tmp_path):
    """
    Three 10x10 examples where "dog" always comes with an active "animal" map
    """
    builder = CorpusBuilder(tmp_path / "dog")
    dog_box = BoundingBox(2, 2, 6, 6)
    builder.add("a", "a dog on grass", 10, 10,
                {"animal": dog_box, "sky": None}, gt_box=dog_box, category="animals")
    builder.add("b", "the sky", 10, 10,
                {"animal": None, "sky": BoundingBox(0, 0, 9, 2)},
                gt_box=BoundingBox(0, 0, 9, 2), category="scene")
    builder.add("c", "dog", 10, 10,
                {"animal": BoundingBox(4, 3, 8, 8), "sky": BoundingBox(0, 0, 9, 1)},
                gt_box=BoundingBox(4, 3, 8, 8), category="animals")
    return builder.write()


@pytest.fixture(scope="session")
def small_world_config():
    return SynthConfig(seed=3, num_concepts=6, num_words=12, num_distractor_words=3,
                       num_examples=300, width=12, height=12, activation_prob=0.3,
                       num_proposals=5)


@pytest.fixture(scope="session")
def small_world(small_world_config):
    return generate(small_world_config)
