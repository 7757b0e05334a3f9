import pytest

from prisam import Metric, SamplerConfig, TableModel, Vocabulary, compile_guide
from prisam.oracle import TooLarge, enumerate_all_sequences, reference_priority_sample
from helpers import assert_matches_reference, peaked_table_model, random_table_model


def test_enumeration_exact(m1):
    got = enumerate_all_sequences(m1)
    assert got == {
        (2,): 0.1,
        (0, 2): 0.6 * 0.7,
        (0, 0, 2): 0.6 * 0.1 * 1.0,
        (0, 1, 2): 0.6 * 0.2 * 1.0,
        (1, 2): 0.3 * 0.4,
        (1, 0, 2): 0.3 * 0.5 * 1.0,
        (1, 1, 2): 0.3 * 0.1 * 1.0,
    }


def test_enumeration_sums_to_one():
    for seed in (0, 5, 9):
        model = random_table_model(seed, size=4, max_length=5)
        total = sum(enumerate_all_sequences(model).values())
        assert abs(total - 1.0) < 1e-9


def test_enumeration_skips_zero_probability_paths():
    vocab = Vocabulary(["A", "B", "<eos>"])
    model = TableModel(vocab, 3, {(): [1.0, 0.0, 0.0], (0,): [0.0, 0.0, 1.0]})
    assert enumerate_all_sequences(model) == {(0, 2): 1.0}


def test_enumeration_size_guard():
    model = random_table_model(1, size=5, max_length=6)
    with pytest.raises(TooLarge):
        enumerate_all_sequences(model, limit=10)


def test_reference_on_fixture(m1):
    out = reference_priority_sample(m1, SamplerConfig(num_samples=3))
    assert [r.tokens for r in out] == [(0, 2), (1, 0, 2), (1, 2)]
    assert [r.branch_score for r in out] == [1.0, 0.3, 0.4]
    assert [r.new_inferences for r in out] == [2, 2, 0]


def test_reference_matches_fast_path_on_fixture(m1):
    for metric in Metric:
        for n in (1, 2, 3, 5, 10):
            assert_matches_reference(m1, SamplerConfig(num_samples=n, metric=metric))


def test_differential_over_random_models():
    metrics = list(Metric)
    branches = [None, 2, 3]
    for seed in range(120):
        model = (peaked_table_model if seed % 4 == 0 else random_table_model)(
            seed, size=4, max_length=5
        )
        config = SamplerConfig(
            num_samples=2 + seed % 6,
            metric=metrics[seed % 2],
            max_branch=branches[seed % 3],
            top_k=None if seed % 5 else 2,
        )
        assert_matches_reference(model, config)


def test_differential_guided():
    vocab = Vocabulary(["A", "B", "C", "<eos>"])
    guide = compile_guide("(A|B)( (A|B|C))*", vocab)
    for seed in range(40):
        model = random_table_model(seed, size=4, max_length=5)
        config = SamplerConfig(num_samples=2 + seed % 5, guide=guide,
                               metric=list(Metric)[seed % 2])
        assert_matches_reference(model, config)


def test_differential_small_capacity():
    for seed in range(30):
        model = random_table_model(seed + 600, size=4, max_length=5)
        config = SamplerConfig(num_samples=6, queue_capacity=seed % 3, top_k=4)
        assert_matches_reference(model, config)
