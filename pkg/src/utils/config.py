"""
Configuration settings for the textual grounding engine
"""

import os

# Concept activation (a concept fires when its best box passes both)
ACTIVATION_CONFIDENCE = 0.5
ACTIVATION_AREA = 0.05

# Score-map construction thresholds
SEGMENTATION_THRESHOLD = 0.5
DETECTION_MIN_CONFIDENCE = 0.5

# Inference
DEFAULT_TAU = 0.05
DEFAULT_MI_TAU = 0.0
FALLBACK = "FALLBACK"

# Language processing
DEFAULT_VOCAB_SIZE = 200
UNKNOWN_TOKEN = "<UKN>"

# Search guards
BRUTE_FORCE_LIMIT = 4096
EXACT_TAIL_LIMIT = 100_000

# Evaluation
IOU_THRESHOLD = 0.5

# File formats
SMAP_MAGIC = "SMAP"
SMAP_VERSION = 1
MODEL_FORMAT = "ground-model"
MODEL_VERSION = 1
JSON_INDENT = 2

# Statistics a model can be trained with
STATISTIC_NORMAL = "normal"
STATISTIC_EXACT = "exact"
STATISTIC_MUTUAL_INFORMATION = "mutual-information"
STATISTICS = (STATISTIC_NORMAL, STATISTIC_EXACT, STATISTIC_MUTUAL_INFORMATION)

# Processing settings
THREADS_ENV = "GROUND_THREADS"

# Default synthetic world (see templates/synth_config.json)
DEFAULT_SYNTH_SETTINGS = {
    "seed": 7,
    "num_concepts": 20,
    "num_words": 50,
    "num_distractor_words": 10,
    "num_examples": 5000,
    "width": 20,
    "height": 20,
    "planted": None,
    "activation_prob": 0.2,
    "distractor_prob": 0.3,
    "extra_word_prob": 0.03,
    "flip_noise": 0.0,
    "box_area_min": 0.06,
    "box_area_max": 0.3,
    "num_proposals": 10,
    "concept_prefixes": None,
}


def worker_count() -> int:
    """
    Number of worker threads for per-example work

    Returns:
        Value of GROUND_THREADS when set to a positive integer, else the machine parallelism
    """
    raw = os.environ.get(THREADS_ENV, "").strip()
    if raw:
        try:
            value = int(raw)
            if value >= 1:
                return value
        except ValueError:
            pass
    return max(1, os.cpu_count() or 1)
