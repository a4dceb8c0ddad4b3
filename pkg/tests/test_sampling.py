from collections import Counter

import pytest
from hypothesis import given, strategies as st

from caption_transfer.sampling import SplitMix64, sample_indices, sample_negatives


def test_splitmix_reference_vector():
    # reference outputs of the canonical SplitMix64 for seed 1234567
    rng = SplitMix64(1234567)
    assert [rng.next() for _ in range(3)] == [6457827717110365317, 3203168211198807973, 9817491932198370423]


def test_below_range_and_errors():
    rng = SplitMix64(0)
    assert all(0 <= rng.below(7) < 7 for _ in range(1000))
    assert rng.below(1) == 0
    with pytest.raises(ValueError):
        rng.below(0)


def test_sample_whole_corpus():
    corpus = list("abcdefgh")
    assert sample_negatives(corpus, len(corpus), seed=9) == corpus


def test_sample_is_seeded_and_ordered():
    corpus = [f"c{i:04d}" for i in range(1000)]
    a = sample_negatives(corpus, 200, seed=1)
    assert a == sample_negatives(corpus, 200, seed=1)
    assert a == sorted(a) and len(set(a)) == 200
    b = sample_negatives(corpus, 200, seed=2)
    # two independent 20% samples overlap by about 40 on average
    assert len(set(a) & set(b)) < 100


def test_oversampling_is_fatal():
    with pytest.raises(ValueError):
        sample_indices(3, 4, seed=0)
    with pytest.raises(ValueError):
        sample_indices(3, -1, seed=0)


def test_roughly_uniform():
    counts = Counter()
    for seed in range(3000):
        counts.update(sample_indices(10, 3, seed))
    # expected 900 per index; binomial sd is about 25
    assert all(800 < counts[i] < 1000 for i in range(10))


@given(st.integers(0, 60), st.data(), st.integers(0, 2**64 - 1))
def test_sample_indices_valid(population, data, seed):
    n = data.draw(st.integers(0, population))
    idx = sample_indices(population, n, seed)
    assert len(idx) == n == len(set(idx))
    assert all(0 <= i < population for i in idx)
