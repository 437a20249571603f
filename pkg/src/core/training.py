"""
Training: vocabulary, per-example concept activations and the relevance matrix
"""

import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence

import numpy as np
from tqdm import tqdm

from ..utils.config import DEFAULT_VOCAB_SIZE, STATISTIC_NORMAL, STATISTICS
from ..utils.summary import log_training_summary
from .corpus import CorpusExample, CorpusManifest
from .errors import InvalidInputError
from .ess import ActivationThresholds
from .inference import compute_activations
from .linker import CooccurrenceStats, build_relevance_matrix
from .model import GroundingModel, default_tau_for
from .vocab import Vocabulary, build_vocab, coverage, tokenize

logger = logging.getLogger(__name__)


def _shards(items: Sequence, count: int) -> List[Sequence]:
    size = -(-len(items) // count)
    return [items[i:i + size] for i in range(0, len(items), size)]


def count_shard(manifest: CorpusManifest, examples: Sequence[CorpusExample], vocab: Vocabulary,
                concepts: Sequence[str], thresholds: ActivationThresholds,
                progress: Optional[tqdm] = None) -> CooccurrenceStats:
    """
    Co-occurrence counts of a run of examples

    Concepts without a map in an example count as inactive there.

    Args:
        manifest: Corpus the examples belong to
        examples: Examples to count
        vocab: Vocabulary
        concepts: Concept order of the stats
        thresholds: Activation rule
        progress: Optional bar advanced once per example

    Returns:
        CooccurrenceStats of the shard
    """
    stats = CooccurrenceStats(vocab.tokens, concepts)
    position = {c: j for j, c in enumerate(concepts)}
    for example in examples:
        bits = np.zeros(len(concepts), dtype=bool)
        for activation in compute_activations(manifest.load_maps(example), thresholds):
            bits[position[activation.concept_id]] = activation.active
        stats.add(tokenize(example.query, vocab).bits, bits)
        if progress is not None:
            progress.update(1)
    return stats


def train_model(manifest: CorpusManifest, vocab_size: int = DEFAULT_VOCAB_SIZE,
                thresholds: Optional[ActivationThresholds] = None,
                statistic: str = STATISTIC_NORMAL, workers: int = 1,
                show_progress: bool = False) -> GroundingModel:
    """
    Learn a grounding model from image-query pairs alone

    Args:
        manifest: Training corpus
        vocab_size: Number of words K kept in the vocabulary
        thresholds: Activation rule used for counting (stored in the model)
        statistic: Relevance statistic
        workers: Threads; shards are merged in corpus order
        show_progress: Draw a progress bar on stderr

    Returns:
        GroundingModel
    """
    if statistic not in STATISTICS:
        raise InvalidInputError(f"Unknown statistic {statistic!r}; choose from {', '.join(STATISTICS)}")
    thresholds = thresholds or ActivationThresholds()
    queries = manifest.queries()
    vocab = build_vocab(queries, vocab_size)
    concepts = manifest.concepts
    if not concepts:
        raise InvalidInputError(f"{manifest.path}: no concept maps listed")

    shards = _shards(manifest.examples, max(1, workers))
    with tqdm(total=len(manifest), desc="Counting", unit="example", file=sys.stderr,
              disable=not show_progress) as progress:
        if len(shards) == 1:
            parts = [count_shard(manifest, shards[0], vocab, concepts, thresholds, progress)]
        else:
            with ThreadPoolExecutor(max_workers=len(shards)) as pool:
                futures = [pool.submit(count_shard, manifest, shard, vocab, concepts, thresholds, progress)
                           for shard in shards]
                parts = [f.result() for f in futures]
    stats = parts[0]
    for part in parts[1:]:
        stats = stats.merge(part)

    log_training_summary(stats, coverage(queries, vocab))
    matrix = build_relevance_matrix(stats, statistic)
    return GroundingModel(vocab, matrix, thresholds, default_tau_for(statistic), vocab_size)
