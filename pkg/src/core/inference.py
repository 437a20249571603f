"""
Grounding a query in an image

Concepts are activated by subwindow search on their score maps, tokens
by the vocabulary, and the concept with the smallest E(s, c) over the
active pairs supplies the answer box. Without enough evidence the whole
image is returned.
"""

import logging
from concurrent.futures import Executor, ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple

from ..utils.config import FALLBACK, UNKNOWN_TOKEN
from .boxes import BoundingBox
from .errors import InvalidInputError, ModelMismatchError
from .ess import ActivationThresholds, ConceptActivation, detect_activation
from .linker import RelevanceMatrix
from .scoremap import ScoreMap
from .vocab import TokenActivations, Vocabulary, tokenize

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GroundingInput:
    """One query against one image and its concept maps"""

    query: str
    image_id: str
    width: int
    height: int
    maps: Mapping[str, ScoreMap] = field(default_factory=dict)

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise InvalidInputError(f"Image {self.image_id}: invalid size {self.width}x{self.height}")
        for concept, score_map in self.maps.items():
            if (score_map.width, score_map.height) != (self.width, self.height):
                raise InvalidInputError(
                    f"Image {self.image_id}: map for {concept} is {score_map.width}x{score_map.height}, "
                    f"image is {self.width}x{self.height}"
                )


@dataclass(frozen=True)
class Selection:
    """
    Outcome of the concept choice

    concept is FALLBACK when no pair passed; token/value then hold the best
    pair that was considered, if any.
    """

    concept: str
    token: Optional[str] = None
    value: Optional[float] = None

    @property
    def is_fallback(self) -> bool:
        return self.concept == FALLBACK


@dataclass(frozen=True)
class GroundingResult:
    """Predicted box with its provenance"""

    image_id: str
    box: BoundingBox
    concept: str
    token: Optional[str]
    value: Optional[float]
    activations: Tuple[ConceptActivation, ...] = ()

    @property
    def is_fallback(self) -> bool:
        return self.concept == FALLBACK

    def to_record(self) -> dict:
        return {
            "id": self.image_id,
            "box": self.box.as_list(),
            "concept": self.concept,
            "token": self.token,
            "E": self.value,
        }


def select_concept(matrix: RelevanceMatrix, active_tokens: Iterable[str],
                   active_concepts: Iterable[str], tau: float,
                   include_unknown: bool = False) -> Selection:
    """
    Pick the active concept with the lowest E over the active tokens

    A pair passes when its E is strictly below tau. Ties are broken by
    concept-list order, then token-list order.

    Args:
        matrix: Relevance matrix
        active_tokens: Tokens present in the query
        active_concepts: Concepts active in the image
        tau: Significance threshold
        include_unknown: Let the unknown token take part

    Returns:
        Selection
    """
    token_set = set(active_tokens)
    concept_set = set(active_concepts)
    for token in token_set:
        matrix.token_index(token)
    for concept in concept_set:
        matrix.concept_index(concept)
    if not include_unknown:
        token_set.discard(UNKNOWN_TOKEN)
    if not token_set or not concept_set:
        return Selection(FALLBACK)

    rows = [i for i, t in enumerate(matrix.tokens) if t in token_set]
    best: Optional[Tuple[float, int, int]] = None
    for j, concept in enumerate(matrix.concepts):
        if concept not in concept_set:
            continue
        for i in rows:
            value = float(matrix.values[i, j])
            if best is None or value < best[0]:
                best = (value, i, j)
    value, i, j = best
    token = matrix.tokens[i]
    if not value < tau:
        return Selection(FALLBACK, token, value)
    return Selection(matrix.concepts[j], token, value)


def compute_activations(maps: Mapping[str, ScoreMap],
                        thresholds: Optional[ActivationThresholds] = None,
                        executor: Optional[Executor] = None) -> List[ConceptActivation]:
    """
    Activation of every concept map, in map order

    Args:
        maps: Concept id -> ScoreMap
        thresholds: Activation rule
        executor: Optional pool for per-concept searches

    Returns:
        ConceptActivation list aligned with maps
    """
    items = list(maps.items())

    def activate(item):
        concept, score_map = item
        activation = detect_activation(score_map, thresholds)
        if activation.concept_id != concept:
            activation = ConceptActivation(concept, activation.box, activation.confidence,
                                           activation.area_fraction, activation.active,
                                           activation.score)
        return activation

    if executor is None:
        return [activate(item) for item in items]
    return list(executor.map(activate, items))


def resolve(grounding_input: GroundingInput, token_activations: TokenActivations,
            activations: Sequence[ConceptActivation], matrix: RelevanceMatrix,
            vocab: Vocabulary, tau: float, include_unknown: bool = False) -> GroundingResult:
    """
    Turn precomputed activations into a grounding result

    Args:
        grounding_input: Query and image
        token_activations: Query token bits
        activations: Per-concept activations
        matrix: Relevance matrix
        vocab: Vocabulary behind token_activations
        tau: Significance threshold
        include_unknown: Let the unknown token take part

    Returns:
        GroundingResult
    """
    active_concepts = [a.concept_id for a in activations if a.active]
    selection = select_concept(matrix, token_activations.tokens(vocab), active_concepts,
                               tau, include_unknown=include_unknown)
    if selection.is_fallback:
        box = BoundingBox.full_image(grounding_input.width, grounding_input.height)
    else:
        box = next(a.box for a in activations if a.concept_id == selection.concept)
    return GroundingResult(
        image_id=grounding_input.image_id,
        box=box,
        concept=selection.concept,
        token=selection.token,
        value=selection.value,
        activations=tuple(activations),
    )


def ground(grounding_input: GroundingInput, matrix: RelevanceMatrix, vocab: Vocabulary,
           tau: float, thresholds: Optional[ActivationThresholds] = None,
           include_unknown: bool = False, executor: Optional[Executor] = None) -> GroundingResult:
    """
    Ground one query in one image

    Args:
        grounding_input: Query, image size and concept maps
        matrix: Relevance matrix over vocab's tokens
        vocab: Vocabulary
        tau: Significance threshold
        thresholds: Activation rule
        include_unknown: Let the unknown token take part
        executor: Optional pool for per-concept searches

    Returns:
        GroundingResult; the whole image when no concept is selected
    """
    if tuple(vocab.tokens) != tuple(matrix.tokens):
        raise ModelMismatchError("Vocabulary does not match the relevance matrix tokens")
    token_activations = tokenize(grounding_input.query, vocab)
    activations = compute_activations(grounding_input.maps, thresholds, executor)
    return resolve(grounding_input, token_activations, activations, matrix, vocab, tau,
                   include_unknown=include_unknown)


def ground_batch(inputs: Iterable[GroundingInput], matrix: RelevanceMatrix, vocab: Vocabulary,
                 tau: float, thresholds: Optional[ActivationThresholds] = None,
                 include_unknown: bool = False, workers: int = 1) -> Iterator[GroundingResult]:
    """
    Ground many examples, results in input order

    Args:
        inputs: Examples
        matrix: Relevance matrix
        vocab: Vocabulary
        tau: Significance threshold
        thresholds: Activation rule
        include_unknown: Let the unknown token take part
        workers: Thread count (1 runs inline)

    Yields:
        GroundingResult per input
    """
    def run(grounding_input):
        return ground(grounding_input, matrix, vocab, tau, thresholds, include_unknown)

    if workers <= 1:
        for grounding_input in inputs:
            yield run(grounding_input)
        return
    # bounded chunks so a long manifest is never fully loaded at once
    chunk_size = workers * 4
    with ThreadPoolExecutor(max_workers=workers) as pool:
        chunk: List[GroundingInput] = []
        for grounding_input in inputs:
            chunk.append(grounding_input)
            if len(chunk) == chunk_size:
                yield from pool.map(run, chunk)
                chunk = []
        if chunk:
            yield from pool.map(run, chunk)
