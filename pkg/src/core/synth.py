"""
Seeded synthetic world for link recovery and end-to-end grounding checks

Every concept owns a set of planted words. In each example a random subset
of concepts is active; an active concept's map scores +1 inside a random
box and -1 elsewhere, and every pixel then flips sign with probability
flip_noise. The query carries one planted word of a designated active
concept, a planted word of each other active concept with probability
extra_word_prob, and random distractor words. The ground-truth box is
always the designated concept's box.

Randomness comes from numpy's PCG64 generator seeded with config.seed,
consumed in a fixed order, so a seed always yields the same corpus.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from tqdm import tqdm

from ..utils.config import DEFAULT_SYNTH_SETTINGS, DEFAULT_VOCAB_SIZE, STATISTIC_NORMAL
from ..utils.files import read_json, write_json, write_json_lines
from .boxes import BoundingBox
from .corpus import manifest_record
from .errors import InvalidInputError
from .ess import ActivationThresholds, ConceptActivation
from .evaluation import AccuracyReport, EvalRecord, accuracy
from .inference import GroundingInput, compute_activations, resolve
from .linker import RelevanceMatrix, accumulate, build_relevance_matrix, top_relevant_concepts
from .model import default_tau_for
from .scoremap import ScoreMap, write_smap
from .vocab import build_vocab, normalize, tokenize

logger = logging.getLogger(__name__)

EMPTY_MAP_NAME = "empty.smap"


@dataclass(frozen=True)
class SynthConfig:
    """Settings of a synthetic world; see templates/synth_config.json"""

    seed: int = DEFAULT_SYNTH_SETTINGS["seed"]
    num_concepts: int = DEFAULT_SYNTH_SETTINGS["num_concepts"]
    num_words: int = DEFAULT_SYNTH_SETTINGS["num_words"]
    num_distractor_words: int = DEFAULT_SYNTH_SETTINGS["num_distractor_words"]
    num_examples: int = DEFAULT_SYNTH_SETTINGS["num_examples"]
    width: int = DEFAULT_SYNTH_SETTINGS["width"]
    height: int = DEFAULT_SYNTH_SETTINGS["height"]
    planted: Optional[Dict[str, str]] = None
    activation_prob: float = DEFAULT_SYNTH_SETTINGS["activation_prob"]
    distractor_prob: float = DEFAULT_SYNTH_SETTINGS["distractor_prob"]
    extra_word_prob: float = DEFAULT_SYNTH_SETTINGS["extra_word_prob"]
    flip_noise: float = DEFAULT_SYNTH_SETTINGS["flip_noise"]
    box_area_min: float = DEFAULT_SYNTH_SETTINGS["box_area_min"]
    box_area_max: float = DEFAULT_SYNTH_SETTINGS["box_area_max"]
    num_proposals: int = DEFAULT_SYNTH_SETTINGS["num_proposals"]
    concept_prefixes: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        for name in ("num_concepts", "num_examples", "width", "height"):
            if getattr(self, name) < 1:
                raise InvalidInputError(f"{name} must be >= 1, got {getattr(self, name)}")
        for name in ("num_words", "num_distractor_words", "num_proposals"):
            if getattr(self, name) < 0:
                raise InvalidInputError(f"{name} must be >= 0, got {getattr(self, name)}")
        for name in ("activation_prob", "distractor_prob", "extra_word_prob"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise InvalidInputError(f"{name} must be in [0, 1], got {value}")
        if not 0.0 <= self.flip_noise < 1.0:
            raise InvalidInputError(f"flip_noise must be in [0, 1), got {self.flip_noise}")
        if not (0.0 < self.box_area_min <= self.box_area_max <= 1.0):
            raise InvalidInputError(
                f"Box area range must satisfy 0 < min <= max <= 1, got "
                f"[{self.box_area_min}, {self.box_area_max}]"
            )
        if self.concept_prefixes is not None:
            prefixes = tuple(str(p) for p in self.concept_prefixes)
            if not prefixes or any(not p or ":" in p for p in prefixes):
                raise InvalidInputError("concept_prefixes must be non-empty names without ':'")
            object.__setattr__(self, "concept_prefixes", prefixes)
        if self.planted is not None:
            planted = {str(w): str(c) for w, c in dict(self.planted).items()}
            concepts = set(self.concept_names())
            for word, concept in planted.items():
                if concept not in concepts:
                    raise InvalidInputError(f"Planted word {word!r} targets unknown concept {concept!r}")
                if normalize(word) != [word]:
                    raise InvalidInputError(f"Planted word {word!r} is not a single normalized word")
            if not planted:
                raise InvalidInputError("planted map must not be empty")
            object.__setattr__(self, "planted", planted)
        elif self.num_words < 1:
            raise InvalidInputError("num_words must be >= 1 without an explicit planted map")

    @classmethod
    def from_dict(cls, settings: dict) -> "SynthConfig":
        """
        Build a config from a settings dictionary

        Missing keys take their default value.

        Args:
            settings: Key/value settings

        Returns:
            SynthConfig
        """
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(settings) - known)
        if unknown:
            raise InvalidInputError(f"Unknown synth setting(s): {', '.join(unknown)}")
        values = dict(settings)
        if values.get("concept_prefixes") is not None:
            values["concept_prefixes"] = tuple(values["concept_prefixes"])
        try:
            return cls(**values)
        except TypeError as e:
            raise InvalidInputError(f"Invalid synth settings: {e}") from e

    @classmethod
    def load(cls, path: Union[str, Path]) -> "SynthConfig":
        settings = read_json(path)
        if not isinstance(settings, dict):
            raise InvalidInputError(f"{path}: synth settings must be a JSON object")
        return cls.from_dict(settings)

    def to_dict(self) -> dict:
        settings = asdict(self)
        if self.concept_prefixes is not None:
            settings["concept_prefixes"] = list(self.concept_prefixes)
        return settings

    def concept_names(self) -> List[str]:
        digits = len(str(self.num_concepts - 1))
        names = [f"c{k:0{digits}d}" for k in range(self.num_concepts)]
        if self.concept_prefixes:
            # round-robin over feature families
            names = [f"{self.concept_prefixes[k % len(self.concept_prefixes)]}:{name}"
                     for k, name in enumerate(names)]
        return names

    def planted_map(self) -> Dict[str, str]:
        """Word -> concept; word i is planted on concept i mod num_concepts by default"""
        if self.planted is not None:
            return dict(self.planted)
        concepts = self.concept_names()
        digits = len(str(self.num_words - 1))
        return {f"w{i:0{digits}d}": concepts[i % len(concepts)] for i in range(self.num_words)}

    def distractor_words(self) -> List[str]:
        if not self.num_distractor_words:
            return []
        digits = len(str(self.num_distractor_words - 1))
        return [f"d{i:0{digits}d}" for i in range(self.num_distractor_words)]


def write_template(path: Union[str, Path]):
    write_json(path, SynthConfig().to_dict())


@dataclass
class SynthExample:
    """
    One generated example

    grids holds the +1/-1 map of every concept as int8; clean inactive
    concepts share a single read-only all -1 array.
    """

    example_id: str
    query: str
    width: int
    height: int
    grids: Dict[str, np.ndarray]
    planted_boxes: Dict[str, BoundingBox]
    gt_box: BoundingBox
    category: str
    proposals: List[BoundingBox] = field(default_factory=list)

    def score_maps(self) -> Dict[str, ScoreMap]:
        return {concept: ScoreMap(grid, concept_id=concept) for concept, grid in self.grids.items()}

    def grounding_input(self) -> GroundingInput:
        return GroundingInput(self.query, self.example_id, self.width, self.height, self.score_maps())


@dataclass
class SynthCorpus:
    config: SynthConfig
    concepts: List[str]
    examples: List[SynthExample]
    empty_grid: np.ndarray

    def __len__(self):
        return len(self.examples)

    def queries(self) -> List[str]:
        return [example.query for example in self.examples]


def box_shapes(config: SynthConfig) -> List[Tuple[int, int]]:
    """
    Every (box width, box height) whose area fraction lies in the configured range

    Args:
        config: Synth settings

    Returns:
        Shapes in (width, height) order
    """
    total = float(config.width * config.height)
    shapes = [
        (bw, bh)
        for bh in range(1, config.height + 1)
        for bw in range(1, config.width + 1)
        if config.box_area_min <= bw * bh / total <= config.box_area_max
    ]
    if not shapes:
        raise InvalidInputError(
            f"No box of a {config.width}x{config.height} image covers "
            f"[{config.box_area_min}, {config.box_area_max}] of its area"
        )
    return shapes


def _random_box(rng: np.random.Generator, shapes: Sequence[Tuple[int, int]],
                width: int, height: int) -> BoundingBox:
    bw, bh = shapes[int(rng.integers(len(shapes)))]
    x1 = int(rng.integers(width - bw + 1))
    y1 = int(rng.integers(height - bh + 1))
    return BoundingBox(x1, y1, x1 + bw - 1, y1 + bh - 1)


def _random_proposal(rng: np.random.Generator, width: int, height: int) -> BoundingBox:
    xs = np.sort(rng.integers(width, size=2))
    ys = np.sort(rng.integers(height, size=2))
    return BoundingBox(int(xs[0]), int(ys[0]), int(xs[1]), int(ys[1]))


def generate(config: SynthConfig) -> Tuple[SynthCorpus, Dict[str, str]]:
    """
    Generate a corpus from its settings

    Args:
        config: Synth settings

    Returns:
        (corpus, planted word -> concept map)
    """
    rng = np.random.Generator(np.random.PCG64(config.seed))
    shapes = box_shapes(config)
    concepts = config.concept_names()
    planted = config.planted_map()
    distractors = config.distractor_words()
    words_of: Dict[str, List[str]] = {}
    for word, concept in planted.items():
        words_of.setdefault(concept, []).append(word)
    worded = [c for c in concepts if c in words_of]

    empty = np.full((config.height, config.width), -1, dtype=np.int8)
    empty.setflags(write=False)
    digits = len(str(config.num_examples - 1))

    examples: List[SynthExample] = []
    for index in range(config.num_examples):
        active = rng.random(len(concepts)) < config.activation_prob
        candidates = [c for c, on in zip(concepts, active) if on and c in words_of]
        if not candidates:
            forced = worded[int(rng.integers(len(worded)))]
            active[concepts.index(forced)] = True
            candidates = [forced]

        grids: Dict[str, np.ndarray] = {}
        planted_boxes: Dict[str, BoundingBox] = {}
        for concept, on in zip(concepts, active):
            if on:
                box = _random_box(rng, shapes, config.width, config.height)
                planted_boxes[concept] = box
                grid = np.full((config.height, config.width), -1, dtype=np.int8)
                grid[box.y1:box.y2 + 1, box.x1:box.x2 + 1] = 1
            else:
                grid = empty
            if config.flip_noise > 0.0:
                flips = rng.random((config.height, config.width)) < config.flip_noise
                grid = np.where(flips, -grid, grid).astype(np.int8)
            grids[concept] = grid

        designated = candidates[int(rng.integers(len(candidates)))]
        options = words_of[designated]
        words = [options[int(rng.integers(len(options)))]]
        if config.extra_word_prob > 0.0:
            # the ground truth stays on the designated concept
            others = [c for c in candidates if c != designated]
            mentioned = rng.random(len(others)) < config.extra_word_prob
            for concept, on in zip(others, mentioned):
                if on:
                    choices = words_of[concept]
                    words.append(choices[int(rng.integers(len(choices)))])
        if distractors:
            picked = rng.random(len(distractors)) < config.distractor_prob
            words.extend(d for d, on in zip(distractors, picked) if on)
        order = rng.permutation(len(words))
        query = " ".join(words[i] for i in order)

        proposals = [_random_proposal(rng, config.width, config.height)
                     for _ in range(config.num_proposals)]
        examples.append(SynthExample(
            example_id=f"ex{index:0{digits}d}",
            query=query,
            width=config.width,
            height=config.height,
            grids=grids,
            planted_boxes=planted_boxes,
            gt_box=planted_boxes[designated],
            category=designated,
            proposals=proposals,
        ))

    logger.info("Generated %d synthetic examples over %d concepts and %d planted words",
                len(examples), len(concepts), len(planted))
    return SynthCorpus(config, concepts, examples, empty), planted


def _map_file_name(example_id: str, concept: str) -> str:
    return f"{example_id}_{concept.replace(':', '-')}.smap"


def write_corpus(corpus: SynthCorpus, planted: Dict[str, str], out_dir: Union[str, Path]) -> Path:
    """
    Write a corpus in the on-disk layout the pipeline reads

    Layout: corpus.jsonl (manifest with gt_box and category), maps/*.smap,
    planted.json and proposals.jsonl.

    Args:
        corpus: Generated corpus
        planted: Planted word -> concept map
        out_dir: Output directory (created when missing)

    Returns:
        Path of the manifest
    """
    out_dir = Path(out_dir)
    maps_dir = out_dir / "maps"
    maps_dir.mkdir(parents=True, exist_ok=True)
    empty_written = False

    records = []
    proposals = []
    for example in tqdm(corpus.examples, desc="Writing corpus", unit="example", leave=False):
        map_refs: Dict[str, str] = {}
        for concept, grid in example.grids.items():
            if grid is corpus.empty_grid:
                if not empty_written:
                    write_smap(maps_dir / EMPTY_MAP_NAME, ScoreMap(grid))
                    empty_written = True
                map_refs[concept] = f"maps/{EMPTY_MAP_NAME}"
                continue
            name = _map_file_name(example.example_id, concept)
            write_smap(maps_dir / name, ScoreMap(grid))
            map_refs[concept] = f"maps/{name}"
        records.append(manifest_record(example.example_id, example.query, example.width,
                                       example.height, map_refs, gt_box=example.gt_box,
                                       category=example.category))
        proposals.append({"id": example.example_id,
                          "boxes": [box.as_list() for box in example.proposals]})

    manifest = out_dir / "corpus.jsonl"
    write_json_lines(manifest, records)
    write_json_lines(out_dir / "proposals.jsonl", proposals)
    write_json(out_dir / "planted.json", {
        "planted": planted,
        "concepts": list(corpus.concepts),
        "settings": corpus.config.to_dict(),
    })
    logger.info("✅ Wrote %d examples to %s", len(records), out_dir)
    return manifest


@dataclass(frozen=True)
class RecoveryReport:
    """
    How well training on a synthetic corpus recovers what was planted

    Attributes:
        recovered: Planted words whose most relevant concept is their own
        words: Number of planted words
        accuracy: Grounding accuracy over all examples
        fallbacks: Examples answered with the whole image
        matrix: Relevance matrix trained on the corpus
    """

    recovered: int
    words: int
    accuracy: AccuracyReport
    fallbacks: int
    matrix: RelevanceMatrix = field(repr=False, compare=False)

    @property
    def link_recovery(self) -> float:
        return 100.0 * self.recovered / self.words

    @property
    def grounding_accuracy(self) -> float:
        return self.accuracy.percent

    def to_dict(self) -> dict:
        return {
            "link_recovery": round(self.link_recovery, 2),
            "recovered": self.recovered,
            "words": self.words,
            "grounding_accuracy": round(self.grounding_accuracy, 2),
            "fallbacks": self.fallbacks,
        }


def link_recovery(matrix: RelevanceMatrix, planted: Dict[str, str]) -> int:
    """
    Count planted words whose lowest-E concept is the planted one

    Words missing from the matrix count as not recovered.

    Args:
        matrix: Relevance matrix
        planted: Word -> concept

    Returns:
        Number of recovered words
    """
    vocab = set(matrix.tokens)
    return sum(
        1 for word, concept in planted.items()
        if word in vocab and top_relevant_concepts(matrix, word, 1) == [concept]
    )


def recovery_report(corpus: SynthCorpus, planted: Dict[str, str],
                    vocab_size: int = DEFAULT_VOCAB_SIZE, statistic: str = STATISTIC_NORMAL,
                    tau: Optional[float] = None, thresholds: Optional[ActivationThresholds] = None,
                    workers: int = 1) -> RecoveryReport:
    """
    Train on a synthetic corpus and ground each of its examples

    Concept activations are computed once and serve both training and
    grounding.

    Args:
        corpus: Generated corpus
        planted: Planted word -> concept map
        vocab_size: Vocabulary size K
        statistic: Relevance statistic
        tau: Significance threshold (default for the statistic when None)
        thresholds: Activation rule
        workers: Threads for the activation pass

    Returns:
        RecoveryReport
    """
    tau = default_tau_for(statistic) if tau is None else tau
    vocab = build_vocab(corpus.queries(), vocab_size)

    def activate(example: SynthExample) -> List[ConceptActivation]:
        # maps are built per example and dropped once searched
        return compute_activations(example.score_maps(), thresholds)

    progress = dict(desc="Activating concepts", unit="example", total=len(corpus), leave=False)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            activations = list(tqdm(pool.map(activate, corpus.examples), **progress))
    else:
        activations = [activate(example) for example in tqdm(corpus.examples, **progress)]

    token_bits = [tokenize(example.query, vocab) for example in corpus.examples]
    concept_bits = [[a.active for a in acts] for acts in activations]
    stats = accumulate(zip(token_bits, concept_bits), vocab.tokens, corpus.concepts)
    matrix = build_relevance_matrix(stats, statistic)

    records = []
    fallbacks = 0
    for example, bits, acts in zip(corpus.examples, token_bits, activations):
        shell = GroundingInput(example.query, example.example_id, example.width, example.height)
        result = resolve(shell, bits, acts, matrix, vocab, tau)
        fallbacks += result.is_fallback
        records.append(EvalRecord(example.example_id, result.box, example.gt_box, example.category))

    report = RecoveryReport(
        recovered=link_recovery(matrix, planted),
        words=len(planted),
        accuracy=accuracy(records),
        fallbacks=fallbacks,
        matrix=matrix,
    )
    logger.info("Link recovery %.2f%%, grounding accuracy %.2f%% (%d fallbacks)",
                report.link_recovery, report.grounding_accuracy, fallbacks)
    return report
