import pytest

from prisam import (
    NucleusConfig,
    SamplerConfig,
    Vocabulary,
    compile_guide,
    greedy_decode,
    nucleus_sample,
    priority_sample,
    random_flag_sample,
    topk_sample,
)
from prisam.rng import RngStream
from prisam.sampler import SamplerError
from helpers import random_table_model


def test_greedy_on_fixture(m1):
    rec = greedy_decode(m1)
    assert rec.tokens == (0, 2)
    assert rec.branch_score == 1.0
    assert rec.new_inferences == 2


def test_greedy_matches_priority_head(m1):
    for seed in range(25):
        model = random_table_model(seed, size=5, max_length=5)
        assert greedy_decode(model).tokens == priority_sample(
            model, SamplerConfig(num_samples=1)
        ).records[0].tokens


def test_greedy_guided(m1, abc_vocab):
    guide = compile_guide("B( A| B)*", abc_vocab)
    rec = greedy_decode(m1, guide)
    assert rec.tokens == (1, 0, 2)
    assert guide.matches_tokens(rec.tokens)


def test_nucleus_config_validation():
    with pytest.raises(SamplerError):
        NucleusConfig(top_p=0.0)
    with pytest.raises(SamplerError):
        NucleusConfig(top_p=1.5)
    with pytest.raises(SamplerError):
        NucleusConfig(temperature=-1.0)
    with pytest.raises(SamplerError):
        NucleusConfig(num_samples=0)


def test_nucleus_known_draw(m1):
    """First step draws from {A: 2/3, B: 1/3} at top_p 0.8; the seed's first
    uniform decides which. Verified against the raw stream."""
    u = RngStream(7).uniform()
    out = nucleus_sample(m1, NucleusConfig(top_p=0.8, temperature=1.0, seed=7, num_samples=1))
    expected_first = 0 if u < 0.6 / 0.9 else 1
    assert out.records[0].tokens[0] == expected_first


def test_nucleus_same_seed_same_samples(m1):
    cfg = NucleusConfig(top_p=0.9, temperature=1.3, seed=11, num_samples=6)
    a = nucleus_sample(m1, cfg)
    b = nucleus_sample(m1, cfg)
    assert [r.tokens for r in a] == [r.tokens for r in b]


def test_nucleus_zero_temperature_routes_to_greedy(m1):
    out = nucleus_sample(m1, NucleusConfig(top_p=0.5, temperature=0.0, seed=3, num_samples=4))
    assert [r.tokens for r in out] == [(0, 2)] * 4
    assert [r.order for r in out] == [0, 1, 2, 3]


def test_nucleus_respects_guide(m1, abc_vocab):
    guide = compile_guide("B( A| B)*", abc_vocab)
    out = nucleus_sample(m1, NucleusConfig(top_p=1.0, temperature=1.5, seed=2, num_samples=20), guide)
    for r in out:
        assert guide.matches_tokens(r.tokens)


def test_nucleus_tiny_top_p_is_greedy_path(m1):
    out = nucleus_sample(m1, NucleusConfig(top_p=1e-9, temperature=1.0, seed=9, num_samples=3))
    assert [r.tokens for r in out] == [(0, 2)] * 3


def test_topk_validation(m1):
    with pytest.raises(SamplerError):
        topk_sample(m1, 0)
    with pytest.raises(SamplerError):
        topk_sample(m1, 2, temperature=-0.5)
    with pytest.raises(SamplerError):
        topk_sample(m1, 2, num_samples=0)


def test_topk_one_is_greedy(m1):
    out = topk_sample(m1, 1, temperature=2.0, seed=5, num_samples=3)
    assert [r.tokens for r in out] == [(0, 2)] * 3


def test_topk_cut_excludes_tail(m1):
    # k=2 at the root keeps {A, B}; EOS can only appear via deeper steps
    out = topk_sample(m1, 2, temperature=1.0, seed=1, num_samples=30)
    assert all(r.tokens != (2,) for r in out)


def test_topk_zero_temperature_routes_to_greedy(m1):
    out = topk_sample(m1, 3, temperature=0.0, seed=8, num_samples=2)
    assert [r.tokens for r in out] == [(0, 2)] * 2


def test_topk_deterministic_per_seed(m1):
    a = topk_sample(m1, 3, temperature=1.1, seed=21, num_samples=5)
    b = topk_sample(m1, 3, temperature=1.1, seed=21, num_samples=5)
    assert [r.tokens for r in a] == [r.tokens for r in b]


def test_random_flags_shape_and_bounds():
    vocab = Vocabulary(["-a", "-b", "-c", "<eos>"])
    out = random_flag_sample(vocab, max_flags=4, seed=0, num_samples=50)
    for r in out:
        assert r.tokens[-1] == vocab.eos_id
        body = r.tokens[:-1]
        assert 1 <= len(body) <= 4
        assert all(t != vocab.eos_id for t in body)
        assert r.new_inferences == 0
        assert r.branch_score == 1.0
    # both reproducible and seed-sensitive
    again = random_flag_sample(vocab, max_flags=4, seed=0, num_samples=50)
    assert [r.tokens for r in again] == [r.tokens for r in out]
    other = random_flag_sample(vocab, max_flags=4, seed=1, num_samples=50)
    assert [r.tokens for r in other] != [r.tokens for r in out]


def test_random_flags_validation():
    vocab = Vocabulary(["-a", "<eos>"])
    with pytest.raises(SamplerError):
        random_flag_sample(vocab, max_flags=0)
    with pytest.raises(SamplerError):
        random_flag_sample(Vocabulary(["<eos>"]), max_flags=2)


def test_stochastic_baselines_count_model_calls(m1):
    out = nucleus_sample(m1, NucleusConfig(top_p=1.0, temperature=1.0, seed=4, num_samples=5))
    for r in out:
        assert r.new_inferences == len(r.tokens)
