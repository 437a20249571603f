"""
Core modules for unsupervised textual grounding
"""

from .boxes import BoundingBox
from .errors import FormatError, GroundingError, InvalidInputError, ModelMismatchError, SearchLimitError
from .ess import ActivationThresholds, brute_force_search, detect_activation, ess_search
from .inference import GroundingInput, GroundingResult, ground, ground_batch, select_concept
from .linker import CooccurrenceStats, RelevanceMatrix, build_relevance_matrix, relevance
from .model import GroundingModel
from .scoremap import ScoreMap, from_detections, from_segmentation, read_smap, write_smap
from .vocab import Vocabulary, build_vocab, tokenize

__all__ = [
    'BoundingBox',
    'FormatError', 'GroundingError', 'InvalidInputError', 'ModelMismatchError', 'SearchLimitError',
    'ActivationThresholds', 'brute_force_search', 'detect_activation', 'ess_search',
    'GroundingInput', 'GroundingResult', 'ground', 'ground_batch', 'select_concept',
    'CooccurrenceStats', 'RelevanceMatrix', 'build_relevance_matrix', 'relevance',
    'GroundingModel',
    'ScoreMap', 'from_detections', 'from_segmentation', 'read_smap', 'write_smap',
    'Vocabulary', 'build_vocab', 'tokenize',
]
