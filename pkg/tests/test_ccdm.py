import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pscm.ccdm import (Composition, composition_for, dematch, match, multinomial, rank_of,
                       unrank)
from pscm.errors import CompositionError, ParameterError, RankOutOfRange


def lex_sequences(counts):
    base = [a for a, c in enumerate(counts) for _ in range(c)]
    return sorted(set(itertools.permutations(base)))


def bits_of(value, width):
    return np.array([(value >> (width - 1 - i)) & 1 for i in range(width)], np.uint8)


class TestComposition:
    def test_toy_example(self):
        comp = composition_for([0.5, 0.25, 0.25], 4)
        assert comp.counts == (2, 1, 1)
        assert comp.num_sequences == 12
        assert comp.k_a == 3

    def test_point_mass(self):
        comp = composition_for([0, 1.0, 0], 50)
        assert comp.counts == (0, 50, 0)
        assert comp.k_a == 0

    def test_ties_go_to_larger_index(self):
        assert composition_for([0.5, 0.5], 3).counts == (1, 2)

    @given(st.lists(st.floats(0.01, 1), min_size=2, max_size=16), st.integers(1, 6000))
    def test_quantization(self, w, n):
        p = np.array(w) / sum(w)
        comp = composition_for(p, n)
        assert sum(comp.counts) == n
        tv = 0.5 * np.abs(comp.distribution - p).sum()
        assert tv <= len(p) / (2 * n) + 1e-12
        assert 2**comp.k_a <= comp.num_sequences < 2 ** (comp.k_a + 1)

    def test_rate_below_entropy(self):
        p = np.exp(-0.04 * np.arange(16))
        p /= p.sum()
        comp = composition_for(p, 5400)
        h = -(comp.distribution * np.log2(comp.distribution)).sum()
        assert comp.rate <= h
        # finite-length loss of a constant composition: about (K - 1)/2 * log2(n) / n
        assert h - comp.rate < 7.5 * math.log2(5400) / 5400 + 1e-3

    def test_bad_inputs(self):
        with pytest.raises(ParameterError):
            composition_for([0.5, 0.4], 10)
        with pytest.raises(ParameterError):
            composition_for([1.0], 0)
        with pytest.raises(ParameterError):
            Composition(3, (1, 1))

    def test_multinomial(self):
        assert multinomial((2, 1, 1)) == 12
        assert multinomial((3, 0, 2, 4)) == math.factorial(9) // (6 * 2 * 24)


class TestRanking:
    @pytest.mark.parametrize("counts", [(2, 1, 1), (3, 0, 2, 4), (1, 1, 1, 1, 1), (6,), (4, 4)])
    def test_exhaustive_lexicographic(self, counts):
        comp = Composition(sum(counts), counts)
        seqs = lex_sequences(counts)
        assert len(seqs) == comp.num_sequences
        for r, s in enumerate(seqs):
            assert tuple(unrank(comp, r)) == s
            assert rank_of(comp, s) == r

    def test_toy_matcher(self):
        comp = Composition(4, (2, 1, 1))
        seqs = lex_sequences(comp.counts)
        outs = [tuple(match(comp, bits_of(v, 3))) for v in range(8)]
        assert outs == seqs[:8]
        assert outs[0] == (0, 0, 1, 2)
        for v, s in enumerate(outs):
            assert np.array_equal(dematch(comp, s), bits_of(v, 3))

    def test_large_random_ranks(self, rng):
        p = np.exp(-0.05 * np.arange(16))
        comp = composition_for(p / p.sum(), 900)
        for _ in range(20):
            r = int.from_bytes(rng.bytes(400), "big") % comp.num_sequences
            s = unrank(comp, r)
            assert tuple(np.bincount(s, minlength=16)) == comp.counts
            assert rank_of(comp, s) == r

    def test_neighbouring_ranks_are_ordered(self):
        comp = composition_for(np.full(16, 1 / 16), 300)
        a = unrank(comp, comp.num_sequences // 3)
        b = unrank(comp, comp.num_sequences // 3 + 1)
        diff = np.flatnonzero(a != b)[0]
        assert a[diff] < b[diff]

    def test_errors(self):
        comp = Composition(4, (2, 1, 1))
        with pytest.raises(RankOutOfRange):
            unrank(comp, 12)
        with pytest.raises(CompositionError):
            rank_of(comp, [0, 1, 1, 2])
        with pytest.raises(CompositionError):
            rank_of(comp, [0, 0, 1])
        with pytest.raises(RankOutOfRange):
            dematch(comp, lex_sequences(comp.counts)[8])
        with pytest.raises(ParameterError):
            match(comp, [0, 1])


@pytest.fixture(scope="module")
def comp5400():
    p = np.exp(-0.03 * np.arange(16))
    return composition_for(p / p.sum(), 5400)


class TestMatcher:
    def test_zeros(self, comp5400):
        z = np.zeros(comp5400.k_a, np.uint8)
        assert np.array_equal(dematch(comp5400, match(comp5400, z)), z)

    def test_ones(self, comp5400):
        o = np.ones(comp5400.k_a, np.uint8)
        assert np.array_equal(dematch(comp5400, match(comp5400, o)), o)

    @given(seed=st.integers(0, 2**32 - 1))
    def test_round_trip_n5400(self, comp5400, seed):
        bits = np.random.default_rng(seed).integers(0, 2, comp5400.k_a, dtype=np.uint8)
        seq = match(comp5400, bits)
        assert tuple(np.bincount(seq, minlength=16)) == comp5400.counts
        assert np.array_equal(dematch(comp5400, seq), bits)

    def test_deterministic(self, comp5400, rng):
        bits = rng.integers(0, 2, comp5400.k_a, dtype=np.uint8)
        assert np.array_equal(match(comp5400, bits), match(comp5400, bits))
