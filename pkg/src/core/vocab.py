"""
Query vocabulary and token activations
"""

import logging
import string
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple, Union

import numpy as np

from ..utils.config import UNKNOWN_TOKEN
from ..utils.files import atomic_write_text
from .errors import FormatError, InvalidInputError

logger = logging.getLogger(__name__)

_PUNCTUATION_TO_SPACE = str.maketrans({ch: " " for ch in string.punctuation})


def normalize(query: str) -> List[str]:
    """
    Lowercase, replace ASCII punctuation with spaces and split on whitespace

    Args:
        query: Free-form text

    Returns:
        Word list in query order (duplicates kept)
    """
    return query.lower().translate(_PUNCTUATION_TO_SPACE).split()


@dataclass(frozen=True)
class Vocabulary:
    """Ordered token list; the unknown token is always last"""

    tokens: Tuple[str, ...]
    index: Dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.tokens or self.tokens[-1] != UNKNOWN_TOKEN:
            raise InvalidInputError(f"Vocabulary must end with {UNKNOWN_TOKEN}")
        if self.tokens.count(UNKNOWN_TOKEN) != 1:
            raise InvalidInputError(f"{UNKNOWN_TOKEN} must appear exactly once")
        for token in self.tokens[:-1]:
            if not token or normalize(token) != [token]:
                raise InvalidInputError(f"Invalid vocabulary token {token!r}")
        if len(set(self.tokens)) != len(self.tokens):
            raise InvalidInputError("Vocabulary tokens must be unique")
        object.__setattr__(self, "index", {t: i for i, t in enumerate(self.tokens)})

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    @property
    def unknown_index(self) -> int:
        return len(self.tokens) - 1

    def to_text(self) -> str:
        return "".join(token + "\n" for token in self.tokens)

    @classmethod
    def from_text(cls, text: str, source: str = None) -> "Vocabulary":
        tokens = tuple(line for line in text.split("\n") if line)
        try:
            return cls(tokens)
        except InvalidInputError as e:
            raise FormatError(str(e), path=source) from e

    def save(self, path: Union[str, Path]):
        atomic_write_text(path, self.to_text())

    @classmethod
    def load(cls, path: Union[str, Path]) -> "Vocabulary":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_text(f.read(), source=str(path))


@dataclass(frozen=True)
class TokenActivations:
    """Existence bit per vocabulary token for one query"""

    bits: np.ndarray

    @property
    def indices(self) -> List[int]:
        return [int(i) for i in np.flatnonzero(self.bits)]

    def tokens(self, vocab: Vocabulary) -> List[str]:
        return [vocab.tokens[i] for i in self.indices]

    def as_dict(self, vocab: Vocabulary) -> Dict[str, int]:
        return {token: int(bit) for token, bit in zip(vocab.tokens, self.bits)}


def build_vocab(queries: Iterable[str], k: int) -> Vocabulary:
    """
    Keep the K most frequent words of a corpus plus the unknown token

    Frequency ties at the cutoff are broken lexicographically.

    Args:
        queries: Training queries
        k: Number of words to keep

    Returns:
        Vocabulary
    """
    if k < 1:
        raise InvalidInputError(f"Vocabulary size must be >= 1, got {k}")
    counts: Counter = Counter()
    seen = 0
    for query in queries:
        seen += 1
        counts.update(normalize(query))
    if seen == 0:
        raise InvalidInputError("Cannot build a vocabulary from an empty corpus")
    ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    tokens = tuple(word for word, _ in ranked[:k]) + (UNKNOWN_TOKEN,)
    logger.info("Vocabulary: kept %d of %d distinct words", len(tokens) - 1, len(counts))
    return Vocabulary(tokens)


def tokenize(query: str, vocab: Vocabulary) -> TokenActivations:
    """
    Binary token activations of a query

    Args:
        query: Free-form text
        vocab: Vocabulary

    Returns:
        TokenActivations; out-of-vocabulary words set the unknown token
    """
    bits = np.zeros(len(vocab), dtype=bool)
    for word in normalize(query):
        bits[vocab.index.get(word, vocab.unknown_index)] = True
    return TokenActivations(bits)


def coverage(queries: Sequence[str], vocab: Vocabulary) -> float:
    """
    Fraction of queries whose words are all in the vocabulary

    Args:
        queries: Queries to check
        vocab: Vocabulary

    Returns:
        Fraction in [0, 1] (0 for no queries)
    """
    if not queries:
        return 0.0
    covered = sum(1 for q in queries if all(w in vocab.index for w in normalize(q)))
    return covered / len(queries)
