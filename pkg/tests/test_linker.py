"""
Co-occurrence counting and the word-concept relevance statistics
"""

import json
import math

import numpy as np
import pytest
from scipy.stats import kstest

from src.core.errors import InvalidInputError, SearchLimitError
from src.core.linker import (
    CooccurrenceStats,
    RelevanceMatrix,
    accumulate,
    build_relevance_matrix,
    exact_binomial_tail,
    exact_tail_probability,
    mutual_information,
    mutual_information_table,
    nearest_tokens,
    normal_tail_probability,
    relevance,
    top_relevant_concepts,
    word_embedding_distance,
)


def single_cell(D, n_s, n_c, n_sc):
    return CooccurrenceStats(["s"], ["c"], D, [n_s], [n_c], [[n_sc]])


def series_erf(x):
    """erf by its all-positive-term series, vectorised"""
    x = np.asarray(x, dtype=np.float64)
    term = x.copy()
    total = x.copy()
    for n in range(1, 400):
        term = term * 2.0 * x * x / (2 * n + 1)
        total = total + term
    return 2.0 / math.sqrt(math.pi) * np.exp(-x * x) * total


def test_accumulate_two_examples():
    stats = accumulate([([1], [1]), ([1], [0])], ["s"], ["c"])
    assert (stats.D, stats.Ns.tolist(), stats.Nc.tolist(), stats.Nsc.tolist()) == (2, [2], [1], [[1]])


def test_accumulate_empty_stream():
    stats = accumulate([], ["a", "b"], ["c"])
    assert stats.D == 0
    assert stats.Nsc.tolist() == [[0], [0]]


def test_accumulate_rejects_misaligned_examples():
    with pytest.raises(InvalidInputError):
        accumulate([([1, 0], [1])], ["s"], ["c"])


def test_merge_equals_recount():
    rng = np.random.default_rng(0)
    tokens, concepts = ["a", "b", "c", "d"], ["x", "y", "z"]
    for _ in range(20):
        examples = [(rng.random(4) < 0.3, rng.random(3) < 0.4) for _ in range(int(rng.integers(1, 60)))]
        cut = int(rng.integers(0, len(examples) + 1))
        first = accumulate(examples[:cut], tokens, concepts)
        second = accumulate(examples[cut:], tokens, concepts)
        whole = accumulate(examples, tokens, concepts)
        assert first.merge(second) == whole
        assert second.merge(first) == whole
        whole.validate()


def test_merge_needs_same_lists():
    with pytest.raises(InvalidInputError):
        CooccurrenceStats(["a"], ["x"]).merge(CooccurrenceStats(["b"], ["x"]))


def test_validate_rejects_impossible_counts():
    with pytest.raises(InvalidInputError):
        single_cell(10, 3, 5, 4).validate()
    with pytest.raises(InvalidInputError):
        single_cell(2, 3, 1, 1).validate()


def test_relevance_centre_example():
    stats = single_cell(800, 400, 400, 200)
    expected = 0.5 - 0.5 * float(series_erf(0.5 / (10 * math.sqrt(2))))
    assert relevance(stats, "s", "c") == pytest.approx(expected, abs=1e-9)
    assert relevance(stats, "s", "c") == pytest.approx(0.4801, abs=1e-4)


def test_relevance_full_cooccurrence_is_tiny():
    assert relevance(single_cell(800, 400, 400, 400), "s", "c") < 1e-15


@pytest.mark.parametrize("D, n_s, n_c", [(10, 0, 5), (10, 4, 0), (10, 4, 10)])
def test_degenerate_cells_give_one(D, n_s, n_c):
    assert relevance(single_cell(D, n_s, n_c, min(n_s, n_c)), "s", "c") == 1.0


def test_relevance_decreases_with_cooccurrence():
    values = normal_tail_probability(np.arange(101), 100, 0.3)
    assert (np.diff(values) < 0).all()


def test_tail_matches_erf_series():
    t = np.linspace(-6.0, 6.0, 10_000)
    # N(s) = 2, p = 0.5 gives sigma * sqrt(2) = 1 and mu = 1, so z = n_sc - 0.5
    tail = normal_tail_probability(t + 0.5, 2, 0.5)
    assert np.max(np.abs((1.0 - 2.0 * tail) - series_erf(t))) <= 1e-7


def test_exact_tail_hand_values():
    assert exact_binomial_tail(single_cell(6, 3, 3, 1), "s", "c") == pytest.approx(0.5, abs=1e-12)
    assert exact_binomial_tail(single_cell(6, 3, 3, 3), "s", "c") == 0.0
    assert exact_binomial_tail(single_cell(4, 2, 2, 0), "s", "c") == pytest.approx(0.75, abs=1e-12)


def test_exact_tail_guard():
    with pytest.raises(SearchLimitError):
        exact_tail_probability(0, 100_001, 0.5)


def test_normal_approximation_is_calibrated():
    rng = np.random.default_rng(1)
    for n_s in (100, 500, 1000):
        for p in (0.1, 0.3, 0.5, 0.7):
            for n_sc in rng.integers(0, n_s + 1, size=25):
                approx = float(normal_tail_probability(n_sc, n_s, p))
                exact = exact_tail_probability(int(n_sc), n_s, p)
                assert abs(approx - exact) <= 0.03


def test_null_values_are_roughly_uniform():
    rng = np.random.default_rng(2)
    D, resamples, batch = 5000, 10_000, 500
    values = []
    for _ in range(resamples // batch):
        words = rng.random((batch, D)) < 0.08
        concepts = rng.random((batch, D)) < 0.5
        n_s = words.sum(axis=1)
        n_c = concepts.sum(axis=1)
        n_sc = (words & concepts).sum(axis=1)
        values.append(normal_tail_probability(n_sc, n_s, n_c / D))
    assert kstest(np.concatenate(values), "uniform").statistic < 0.1


def test_mutual_information_examples():
    assert mutual_information(single_cell(100, 50, 50, 25), "s", "c") == pytest.approx(0.0, abs=1e-12)
    assert mutual_information(single_cell(100, 50, 50, 50), "s", "c") == pytest.approx(math.log(2))


def test_mutual_information_matches_four_cell_formula():
    rng = np.random.default_rng(3)
    for _ in range(200):
        D = int(rng.integers(1, 200))
        n_s, n_c = int(rng.integers(0, D + 1)), int(rng.integers(0, D + 1))
        n_sc = int(rng.integers(max(0, n_s + n_c - D), min(n_s, n_c) + 1))
        expected = 0.0
        for joint, row, col in ((n_sc, n_s, n_c), (n_s - n_sc, n_s, D - n_c),
                                (n_c - n_sc, D - n_s, n_c), (D - n_s - n_c + n_sc, D - n_s, D - n_c)):
            if joint:
                expected += joint / D * math.log(joint * D / (row * col))
        value = float(mutual_information_table(D, n_s, n_c, n_sc))
        assert value >= 0.0
        assert value == pytest.approx(max(expected, 0.0), abs=1e-12)


def test_matrix_entries_equal_relevance():
    stats = single_cell(4, 2, 2, 2)
    matrix = build_relevance_matrix(stats)
    assert matrix.values[0, 0] == relevance(stats, "s", "c")


def test_unseen_word_row_is_all_ones():
    stats = CooccurrenceStats(["seen", "unseen"], ["x", "y"], 4, [2, 0], [2, 1], [[2, 1], [0, 0]])
    assert build_relevance_matrix(stats).row("unseen").tolist() == [1.0, 1.0]


def test_exact_and_mutual_information_matrices():
    stats = CooccurrenceStats(["a", "b"], ["x", "y"], 10, [5, 4], [5, 3], [[5, 1], [0, 3]])
    exact = build_relevance_matrix(stats, "exact")
    assert exact.value("a", "x") == exact_binomial_tail(stats, "a", "x")
    mi = build_relevance_matrix(stats, "mutual-information")
    assert mi.value("b", "y") == pytest.approx(-mutual_information(stats, "b", "y"))
    assert top_relevant_concepts(mi, "a", 1) == ["x"]
    with pytest.raises(InvalidInputError):
        build_relevance_matrix(stats, "chi-square")


def test_matrix_values_must_be_probabilities():
    with pytest.raises(InvalidInputError):
        RelevanceMatrix(["s"], ["c"], [[1.5]])
    RelevanceMatrix(["s"], ["c"], [[-0.2]], statistic="mutual-information")


def test_matrix_survives_json_exactly():
    rng = np.random.default_rng(4)
    matrix = RelevanceMatrix(["a", "b", "c"], ["x", "y"], rng.random((3, 2)))
    restored = RelevanceMatrix.from_dict(json.loads(json.dumps(matrix.to_dict())))
    assert restored.tokens == matrix.tokens and restored.concepts == matrix.concepts
    assert np.array_equal(restored.values, matrix.values)


def test_embedding_distance_properties():
    rng = np.random.default_rng(5)
    tokens = ["a", "b", "c", "d"]
    matrix = RelevanceMatrix(tokens, ["x", "y", "z"], rng.random((4, 3)))
    assert word_embedding_distance(matrix, "a", "a") == 0.0
    assert word_embedding_distance(matrix, "a", "b") == word_embedding_distance(matrix, "b", "a")
    for s in tokens:
        for t in tokens:
            for u in tokens:
                assert (word_embedding_distance(matrix, s, u)
                        <= word_embedding_distance(matrix, s, t) + word_embedding_distance(matrix, t, u) + 1e-12)
    with pytest.raises(InvalidInputError):
        word_embedding_distance(matrix, "a", "nope")


def test_top_relevant_concepts():
    matrix = RelevanceMatrix(["s"], ["c1", "c2", "c3", "c4"], [[0.3, 0.1, 0.3, 0.9]])
    assert top_relevant_concepts(matrix, "s", 1) == ["c2"]
    assert top_relevant_concepts(matrix, "s", 10) == ["c2", "c1", "c3", "c4"]
    with pytest.raises(InvalidInputError):
        top_relevant_concepts(matrix, "t", 1)
    with pytest.raises(InvalidInputError):
        top_relevant_concepts(matrix, "s", 0)


def test_nearest_tokens_excludes_the_word_itself():
    matrix = RelevanceMatrix(["a", "b", "c"], ["x", "y"], [[0.1, 0.9], [0.2, 0.8], [0.9, 0.1]])
    neighbours = nearest_tokens(matrix, "a", 2)
    assert [t for t, _ in neighbours] == ["b", "c"]
    assert neighbours[0][1] == pytest.approx(math.sqrt(0.02))
