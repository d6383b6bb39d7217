import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cryptosieve.errors import DegenerateAlphabet, EmptyBlock
from cryptosieve.indicator import (FIXED_BYTES, OBSERVED, AlphabetMode, barkman_u,
                                   barkman_u_rows, block_histograms, count_block,
                                   stream_indicators)

from oracles import SAMPLE_BLOCK, pearson_uniform, pearson_uniform_exact


def test_sample_block_counts():
    h = count_block(SAMPLE_BLOCK, OBSERVED)
    assert h.n_total == 60
    assert h.k_kinds == 4
    assert h.as_dict() == {0: 16, 1: 19, 2: 11, 3: 14}


def test_sample_block_indicator():
    h = count_block(SAMPLE_BLOCK, OBSERVED)
    assert float(pearson_uniform_exact([16, 19, 11, 14])) == pytest.approx(34 / 15, abs=1e-15)
    assert barkman_u(h) == pytest.approx(34 / 15, rel=1e-15)


def test_zero_bytes_fixed_mode():
    h = count_block(bytes(512), FIXED_BYTES)
    assert h.n_total == 512
    assert h.k_kinds == 256
    assert h.counts[0] == 512
    assert h.counts[1:].sum() == 0
    assert barkman_u(h) == 512 * 255 == 130560


def test_uniform_block_is_zero():
    block = bytes(range(256)) * 4
    assert barkman_u(count_block(block, FIXED_BYTES)) == 0.0


def test_empty_block():
    with pytest.raises(EmptyBlock):
        count_block(b"", FIXED_BYTES)


def test_single_kind_observed_is_degenerate():
    h = count_block(b"aaaa", OBSERVED)
    assert h.k_kinds == 1
    with pytest.raises(DegenerateAlphabet):
        barkman_u(h)


def test_fixed_mode_rejects_out_of_range_symbol():
    with pytest.raises(ValueError):
        count_block([0, 1, 5], AlphabetMode(4))


def test_fixed_alphabet_needs_two_cells():
    with pytest.raises(ValueError):
        AlphabetMode(1)


@pytest.mark.parametrize("text,expected", [
    ("observed", OBSERVED), ("fixed", FIXED_BYTES), ("fixed:16", AlphabetMode(16)),
])
def test_parse_alphabet(text, expected):
    assert AlphabetMode.parse(text) == expected


def test_stream_indicators():
    uniform = bytes(range(256))
    samples = list(stream_indicators([uniform] * 3, FIXED_BYTES))
    assert [(s.t, s.u, s.df) for s in samples] == [(1, 0.0, 255), (2, 0.0, 255), (3, 0.0, 255)]
    assert list(stream_indicators([], FIXED_BYTES)) == []
    twice = list(stream_indicators([SAMPLE_BLOCK, SAMPLE_BLOCK], OBSERVED))
    assert [s.u for s in twice] == pytest.approx([34 / 15, 34 / 15])


def test_stream_indicators_is_lazy_and_tags_errors():
    def source():
        yield b"ab"
        yield b""
        raise AssertionError("read past the failing block")

    it = stream_indicators(source(), OBSERVED)
    assert next(it).t == 1
    with pytest.raises(EmptyBlock) as info:
        next(it)
    assert info.value.block_index == 2


def test_oracle_equivalence_random_histograms(rng):
    worst = 0.0
    for _ in range(1000):
        k = int(rng.integers(2, 300))
        counts = rng.integers(0, 200, size=k)
        counts[0] += 1
        block = np.repeat(np.arange(k), counts)
        u = barkman_u(count_block(block, AlphabetMode(k)))
        ref = pearson_uniform(counts)
        worst = max(worst, abs(u - ref) / (1.0 + ref))
    assert worst <= 1e-9


def test_rows_match_single_block(backend, rng):
    data = rng.integers(0, 256, size=(50, 1024), dtype=np.uint8)
    data[3] = 7
    data[4, :512] = 1
    counts = block_histograms(data)
    for r in range(50):
        assert np.array_equal(counts[r], np.bincount(data[r], minlength=256))
    u, k = barkman_u_rows(counts)
    assert np.all(k == 256)
    for r in range(50):
        assert u[r] == barkman_u(count_block(data[r].tobytes(), FIXED_BYTES))
    uo, ko = barkman_u_rows(counts, fixed=False)
    assert np.isnan(uo[3]) and ko[3] == 1
    assert uo[4] == barkman_u(count_block(data[4].tobytes(), OBSERVED))


counts_strategy = st.lists(st.integers(0, 50), min_size=2, max_size=40).filter(lambda c: sum(c) > 0)


@settings(max_examples=200, deadline=None)
@given(counts_strategy, st.randoms(use_true_random=False))
def test_permutation_invariance(counts, rnd):
    k = len(counts)
    block = np.repeat(np.arange(k), counts)
    perm = list(range(k))
    rnd.shuffle(perm)
    relabelled = np.asarray(perm)[block]
    mode = AlphabetMode(k)
    assert barkman_u(count_block(block, mode)) == pytest.approx(
        barkman_u(count_block(relabelled, mode)), rel=1e-12, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(counts_strategy, st.integers(1, 9))
def test_scaling_counts_scales_u(counts, m):
    k = len(counts)
    mode = AlphabetMode(k)
    u1 = barkman_u(count_block(np.repeat(np.arange(k), counts), mode))
    um = barkman_u(count_block(np.repeat(np.arange(k), [m * c for c in counts]), mode))
    assert um == pytest.approx(m * u1, rel=1e-12, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 30), st.integers(1, 20), st.data())
def test_zero_iff_equal_counts(k, per_cell, data):
    counts = [per_cell] * k
    if data.draw(st.booleans()):
        i = data.draw(st.integers(0, k - 1))
        j = data.draw(st.integers(0, k - 1).filter(lambda x: x != i))
        counts[i] += 1
        counts[j] -= 1
    block = np.repeat(np.arange(k), counts)
    u = barkman_u(count_block(block, AlphabetMode(k)))
    assert (u == 0.0) == (len(set(counts)) == 1)
