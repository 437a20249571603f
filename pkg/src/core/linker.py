"""
Word-concept linking by one-sided hypothesis testing

For every token s and concept c the null hypothesis says that concept
activation is independent of seeing s in the query. E(s, c) is the tail
probability of observing more co-occurrences than counted, under that
null. Small values mean a strong link.
"""

import logging
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import erfc, gammaln, logsumexp

from ..utils.config import (
    EXACT_TAIL_LIMIT,
    STATISTIC_EXACT,
    STATISTIC_MUTUAL_INFORMATION,
    STATISTIC_NORMAL,
    STATISTICS,
)
from .errors import FormatError, InvalidInputError, SearchLimitError

logger = logging.getLogger(__name__)

_SQRT2 = np.sqrt(2.0)


class CooccurrenceStats:
    """
    Exact corpus counters

    Attributes:
        tokens: Token order (rows)
        concepts: Concept order (columns)
        D: Number of examples
        Ns: Per-token occurrence counts N(s)
        Nc: Per-concept activation counts N(c)
        Nsc: Co-occurrence counts N(s, c)
    """

    def __init__(self, tokens: Sequence[str], concepts: Sequence[str], D: int = 0,
                 Ns=None, Nc=None, Nsc=None):
        self.tokens = tuple(tokens)
        self.concepts = tuple(concepts)
        n_tokens, n_concepts = len(self.tokens), len(self.concepts)
        self.D = int(D)
        self.Ns = np.zeros(n_tokens, dtype=np.int64) if Ns is None else np.array(Ns, dtype=np.int64)
        self.Nc = np.zeros(n_concepts, dtype=np.int64) if Nc is None else np.array(Nc, dtype=np.int64)
        self.Nsc = (np.zeros((n_tokens, n_concepts), dtype=np.int64) if Nsc is None
                    else np.array(Nsc, dtype=np.int64).reshape(n_tokens, n_concepts))
        if self.Ns.shape != (n_tokens,) or self.Nc.shape != (n_concepts,):
            raise InvalidInputError("Count vectors do not match the token/concept lists")

    def __repr__(self):
        return f"CooccurrenceStats(D={self.D}, tokens={len(self.tokens)}, concepts={len(self.concepts)})"

    def __eq__(self, other):
        if not isinstance(other, CooccurrenceStats):
            return NotImplemented
        return (self.tokens == other.tokens and self.concepts == other.concepts
                and self.D == other.D and np.array_equal(self.Ns, other.Ns)
                and np.array_equal(self.Nc, other.Nc) and np.array_equal(self.Nsc, other.Nsc))

    def add(self, token_bits, concept_bits):
        """
        Count one example

        Args:
            token_bits: Existence bit per token
            concept_bits: Activation bit per concept
        """
        t = np.asarray(token_bits, dtype=bool)
        a = np.asarray(concept_bits, dtype=bool)
        if t.shape != (len(self.tokens),) or a.shape != (len(self.concepts),):
            raise InvalidInputError(
                f"Example has {t.shape} token bits and {a.shape} concept bits; "
                f"expected {len(self.tokens)} and {len(self.concepts)}"
            )
        self.D += 1
        self.Ns += t
        self.Nc += a
        self.Nsc += np.outer(t, a)

    def merge(self, other: "CooccurrenceStats") -> "CooccurrenceStats":
        """
        Combine counts from two shards over the same token/concept lists

        Args:
            other: Partial counts

        Returns:
            New CooccurrenceStats equal to counting both shards together
        """
        if self.tokens != other.tokens or self.concepts != other.concepts:
            raise InvalidInputError("Cannot merge stats over different token/concept lists")
        return CooccurrenceStats(self.tokens, self.concepts, self.D + other.D,
                                 self.Ns + other.Ns, self.Nc + other.Nc, self.Nsc + other.Nsc)

    def validate(self):
        if self.D < 0 or (self.Ns < 0).any() or (self.Nc < 0).any() or (self.Nsc < 0).any():
            raise InvalidInputError("Counts must be non-negative")
        if (self.Ns > self.D).any() or (self.Nc > self.D).any():
            raise InvalidInputError("N(s) and N(c) cannot exceed D")
        limit = np.minimum(self.Ns[:, None], self.Nc[None, :])
        if (self.Nsc > limit).any():
            raise InvalidInputError("N(s, c) cannot exceed min(N(s), N(c))")

    def token_index(self, token: str) -> int:
        try:
            return self.tokens.index(token)
        except ValueError:
            raise InvalidInputError(f"Unknown token {token!r}") from None

    def concept_index(self, concept: str) -> int:
        try:
            return self.concepts.index(concept)
        except ValueError:
            raise InvalidInputError(f"Unknown concept {concept!r}") from None

    @property
    def concept_probability(self) -> np.ndarray:
        """Maximum-likelihood P(a_c = 1) = N(c) / D (zeros for an empty corpus)"""
        if self.D == 0:
            return np.zeros(len(self.concepts))
        return self.Nc / float(self.D)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "D": self.D,
            "Ns": self.Ns.tolist(),
            "Nc": self.Nc.tolist(),
            "Nsc": self.Nsc.tolist(),
        }

    @classmethod
    def from_dict(cls, tokens: Sequence[str], concepts: Sequence[str],
                  payload: Dict[str, Any]) -> "CooccurrenceStats":
        try:
            stats = cls(tokens, concepts, payload["D"], payload["Ns"], payload["Nc"], payload["Nsc"])
        except (KeyError, TypeError, ValueError) as e:
            raise FormatError(f"invalid counts: {e}") from e
        stats.validate()
        return stats


def accumulate(examples: Iterable[Tuple[Any, Any]], tokens: Sequence[str],
               concepts: Sequence[str]) -> CooccurrenceStats:
    """
    Count a stream of (token bits, concept bits) examples

    Args:
        examples: Iterable of per-example activation vectors
        tokens: Token list shared by every example
        concepts: Concept list shared by every example

    Returns:
        CooccurrenceStats
    """
    stats = CooccurrenceStats(tokens, concepts)
    for token_bits, concept_bits in examples:
        stats.add(getattr(token_bits, "bits", token_bits), concept_bits)
    return stats


def normal_tail_probability(n_sc, n_s, p) -> np.ndarray:
    """
    Continuity-corrected normal approximation of P(n > N(s, c)) under the null

    n ~ Binomial(N(s), p); the tail is evaluated as
    1/2 - 1/2 erf((N(s,c) + 1/2 - mu) / (sigma sqrt 2)) with mu = N(s) p and
    sigma = sqrt(N(s) p (1 - p)), computed through erfc to keep precision in
    the far tail. Degenerate cells (N(s) = 0, p in {0, 1}) give 1.0.

    Args:
        n_sc: Observed co-occurrence counts
        n_s: Token counts
        p: Concept activation probabilities

    Returns:
        Array of tail probabilities in [0, 1]
    """
    n_sc, n_s, p = np.broadcast_arrays(np.asarray(n_sc, dtype=np.float64),
                                       np.asarray(n_s, dtype=np.float64),
                                       np.asarray(p, dtype=np.float64))
    out = np.ones(n_sc.shape, dtype=np.float64)
    valid = (n_s >= 1) & (p > 0.0) & (p < 1.0)
    if valid.any():
        mu = n_s[valid] * p[valid]
        sigma = np.sqrt(n_s[valid] * p[valid] * (1.0 - p[valid]))
        z = (n_sc[valid] + 0.5 - mu) / (sigma * _SQRT2)
        out[valid] = 0.5 * erfc(z)
    return np.clip(out, 0.0, 1.0)


def exact_tail_probability(n_sc: int, n_s: int, p: float) -> float:
    """
    Exact binomial tail P(n > N(s, c)) summed in log space

    Args:
        n_sc: Observed co-occurrence count
        n_s: Number of trials N(s)
        p: Success probability

    Returns:
        Tail probability (1.0 for degenerate inputs)
    """
    if n_s > EXACT_TAIL_LIMIT:
        raise SearchLimitError(f"Exact tail refused for N(s) = {n_s} (limit {EXACT_TAIL_LIMIT})")
    if n_s < 1 or p <= 0.0 or p >= 1.0:
        return 1.0
    k = np.arange(int(n_sc) + 1, int(n_s) + 1, dtype=np.float64)
    if k.size == 0:
        return 0.0
    log_terms = (gammaln(n_s + 1.0) - gammaln(k + 1.0) - gammaln(n_s - k + 1.0)
                 + k * np.log(p) + (n_s - k) * np.log1p(-p))
    return float(min(1.0, np.exp(logsumexp(log_terms))))


def _cell(stats: CooccurrenceStats, s: str, c: str) -> Tuple[int, int, float]:
    i = stats.token_index(s)
    j = stats.concept_index(c)
    return int(stats.Nsc[i, j]), int(stats.Ns[i]), float(stats.concept_probability[j])


def relevance(stats: CooccurrenceStats, s: str, c: str) -> float:
    """
    E(s, c) by the normal approximation

    Args:
        stats: Corpus counts
        s: Token
        c: Concept

    Returns:
        Tail probability in [0, 1]
    """
    n_sc, n_s, p = _cell(stats, s, c)
    return float(normal_tail_probability(n_sc, n_s, p))


def exact_binomial_tail(stats: CooccurrenceStats, s: str, c: str) -> float:
    n_sc, n_s, p = _cell(stats, s, c)
    return exact_tail_probability(n_sc, n_s, p)


def mutual_information_table(D, n_s, n_c, n_sc) -> np.ndarray:
    """
    Plug-in mutual information (nats) between token and concept bits

    Args:
        D: Example count (>= 1)
        n_s: Token counts
        n_c: Concept counts
        n_sc: Co-occurrence counts

    Returns:
        Non-negative MI values, broadcast over the inputs
    """
    D = float(D)
    if D < 1:
        raise InvalidInputError("Mutual information needs at least one example")
    n_s, n_c, n_sc = np.broadcast_arrays(np.asarray(n_s, dtype=np.float64),
                                         np.asarray(n_c, dtype=np.float64),
                                         np.asarray(n_sc, dtype=np.float64))
    cells = (
        (n_sc, n_s, n_c),
        (n_s - n_sc, n_s, D - n_c),
        (n_c - n_sc, D - n_s, n_c),
        (D - n_s - n_c + n_sc, D - n_s, D - n_c),
    )
    total = np.zeros(n_s.shape, dtype=np.float64)
    for joint, row, col in cells:
        with np.errstate(divide="ignore", invalid="ignore"):
            term = (joint / D) * np.log(joint * D / (row * col))
        total += np.where(joint > 0, term, 0.0)
    return np.maximum(total, 0.0)


def mutual_information(stats: CooccurrenceStats, s: str, c: str) -> float:
    i = stats.token_index(s)
    j = stats.concept_index(c)
    return float(mutual_information_table(stats.D, stats.Ns[i], stats.Nc[j], stats.Nsc[i, j]))


class RelevanceMatrix:
    """
    E(s, c) for every token/concept pair

    For the mutual-information baseline the matrix stores -MI so that the
    same argmin selection applies; only hypothesis-test statistics are
    guaranteed to lie in [0, 1].
    """

    def __init__(self, tokens: Sequence[str], concepts: Sequence[str], values,
                 stats: Optional[CooccurrenceStats] = None, statistic: str = STATISTIC_NORMAL):
        if statistic not in STATISTICS:
            raise InvalidInputError(f"Unknown statistic {statistic!r}")
        self.tokens = tuple(tokens)
        self.concepts = tuple(concepts)
        grid = np.array(values, dtype=np.float64).reshape(len(self.tokens), len(self.concepts))
        if not np.all(np.isfinite(grid)):
            raise InvalidInputError("Relevance values must be finite")
        if statistic != STATISTIC_MUTUAL_INFORMATION and (grid.min(initial=0.0) < 0.0
                                                          or grid.max(initial=0.0) > 1.0):
            raise InvalidInputError("Relevance values must lie in [0, 1]")
        grid.setflags(write=False)
        self.values = grid
        self.stats = stats
        self.statistic = statistic
        self._token_index = {t: i for i, t in enumerate(self.tokens)}
        self._concept_index = {c: j for j, c in enumerate(self.concepts)}

    def __repr__(self):
        return (f"RelevanceMatrix(statistic={self.statistic!r}, tokens={len(self.tokens)}, "
                f"concepts={len(self.concepts)})")

    def token_index(self, token: str) -> int:
        if token not in self._token_index:
            raise InvalidInputError(f"Unknown token {token!r}")
        return self._token_index[token]

    def concept_index(self, concept: str) -> int:
        if concept not in self._concept_index:
            raise InvalidInputError(f"Unknown concept {concept!r}")
        return self._concept_index[concept]

    def has_concept(self, concept: str) -> bool:
        return concept in self._concept_index

    def value(self, token: str, concept: str) -> float:
        return float(self.values[self.token_index(token), self.concept_index(concept)])

    def row(self, token: str) -> np.ndarray:
        return self.values[self.token_index(token)]

    def map_values(self, func) -> "RelevanceMatrix":
        """Apply an element-wise transform, keeping provenance"""
        return RelevanceMatrix(self.tokens, self.concepts, func(self.values.copy()),
                               stats=self.stats, statistic=self.statistic)

    def to_dict(self) -> Dict[str, Any]:
        payload = {
            "tokens": list(self.tokens),
            "concepts": list(self.concepts),
            "statistic": self.statistic,
            "values": [float(v) for v in self.values.ravel()],
        }
        if self.stats is not None:
            payload["counts"] = self.stats.to_dict()
        return payload

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "RelevanceMatrix":
        try:
            tokens = payload["tokens"]
            concepts = payload["concepts"]
            values = payload["values"]
            statistic = payload.get("statistic", STATISTIC_NORMAL)
        except (KeyError, TypeError) as e:
            raise FormatError(f"invalid relevance matrix: missing {e}") from e
        if len(values) != len(tokens) * len(concepts):
            raise FormatError(
                f"relevance matrix has {len(values)} values for {len(tokens)}x{len(concepts)} cells"
            )
        stats = None
        if payload.get("counts") is not None:
            stats = CooccurrenceStats.from_dict(tokens, concepts, payload["counts"])
        return cls(tokens, concepts, values, stats=stats, statistic=statistic)


def build_relevance_matrix(stats: CooccurrenceStats,
                           statistic: str = STATISTIC_NORMAL) -> RelevanceMatrix:
    """
    Evaluate the chosen statistic for every token/concept pair

    Args:
        stats: Corpus counts
        statistic: "normal" (default), "exact" or "mutual-information"

    Returns:
        RelevanceMatrix
    """
    stats.validate()
    if statistic == STATISTIC_NORMAL:
        values = normal_tail_probability(stats.Nsc, stats.Ns[:, None],
                                         stats.concept_probability[None, :])
    elif statistic == STATISTIC_EXACT:
        p = stats.concept_probability
        values = np.ones(stats.Nsc.shape)
        for i in range(len(stats.tokens)):
            for j in range(len(stats.concepts)):
                values[i, j] = exact_tail_probability(int(stats.Nsc[i, j]), int(stats.Ns[i]), float(p[j]))
    elif statistic == STATISTIC_MUTUAL_INFORMATION:
        if stats.D == 0:
            values = np.zeros(stats.Nsc.shape)
        else:
            values = -mutual_information_table(stats.D, stats.Ns[:, None], stats.Nc[None, :], stats.Nsc)
    else:
        raise InvalidInputError(f"Unknown statistic {statistic!r}")
    logger.info("Built %s relevance matrix (%d tokens x %d concepts) from %d examples",
                statistic, len(stats.tokens), len(stats.concepts), stats.D)
    return RelevanceMatrix(stats.tokens, stats.concepts, values, stats=stats, statistic=statistic)


def word_embedding_distance(matrix: RelevanceMatrix, s: str, s_other: str) -> float:
    """
    Euclidean distance between the rows E(s, :) and E(s', :)

    Args:
        matrix: Relevance matrix
        s: First token
        s_other: Second token

    Returns:
        Row distance
    """
    return float(np.linalg.norm(matrix.row(s) - matrix.row(s_other)))


def top_relevant_concepts(matrix: RelevanceMatrix, s: str, k: int) -> List[str]:
    """
    Concepts ordered from most to least relevant for a token

    Args:
        matrix: Relevance matrix
        s: Token
        k: How many to keep

    Returns:
        Up to k concept ids, ascending E, ties in concept-list order
    """
    if k < 1:
        raise InvalidInputError(f"k must be >= 1, got {k}")
    order = np.argsort(matrix.row(s), kind="stable")
    return [matrix.concepts[j] for j in order[:k]]


def nearest_tokens(matrix: RelevanceMatrix, s: str, k: int) -> List[Tuple[str, float]]:
    """
    Tokens whose relevance rows are closest to that of s

    Args:
        matrix: Relevance matrix
        s: Query token
        k: How many neighbours

    Returns:
        (token, distance) pairs, nearest first, s itself excluded
    """
    if k < 1:
        raise InvalidInputError(f"k must be >= 1, got {k}")
    distances = np.linalg.norm(matrix.values - matrix.row(s)[None, :], axis=1)
    own = matrix.token_index(s)
    order = [i for i in np.argsort(distances, kind="stable") if i != own]
    return [(matrix.tokens[i], float(distances[i])) for i in order[:k]]
