"""
Summary blocks logged after training and inference
"""

import logging
from collections import Counter
from typing import Sequence

logger = logging.getLogger(__name__)


def log_training_summary(stats, vocab_coverage: float):
    """
    Log corpus size and concept activation counts

    Args:
        stats: CooccurrenceStats of the training corpus
        vocab_coverage: Fraction of queries fully covered by the vocabulary
    """
    logger.info("=== Training Summary ===")
    logger.info("Examples: %d", stats.D)
    logger.info("Tokens: %d (query coverage %.1f%%)", len(stats.tokens), 100.0 * vocab_coverage)
    logger.info("Concepts: %d", len(stats.concepts))
    if stats.D:
        mean_active = float(stats.Nc.sum()) / stats.D
        logger.info("Active concepts per example: %.2f", mean_active)
        never = [c for c, n in zip(stats.concepts, stats.Nc) if n == 0]
        if never:
            logger.info("Never active: %d/%d concepts", len(never), len(stats.concepts))
    logger.info("========================")


def log_inference_summary(results: Sequence):
    """
    Log how many examples fell back to the whole image and the most chosen concepts

    Args:
        results: GroundingResult list
    """
    total = len(results)
    fallbacks = sum(1 for r in results if r.is_fallback)
    logger.info("=== Inference Summary ===")
    logger.info("Examples: %d", total)
    if total:
        logger.info("Fallbacks: %d/%d (%.1f%%)", fallbacks, total, 100.0 * fallbacks / total)
        chosen = Counter(r.concept for r in results if not r.is_fallback)
        for concept, count in chosen.most_common(5):
            logger.info("  %s: %d", concept, count)
    logger.info("=========================")
