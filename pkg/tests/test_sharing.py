import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from rankjoin import sharing as S

words = st.integers(0, S.MASK)


def test_share_layout_example():
    shares = S.share(0x5, (0x3, 0x6))
    assert [(s.first, s.second) for s in shares] == [(3, 6), (6, 0), (0, 3)]
    assert [s.party for s in shares] == [1, 2, 3]


def test_share_of_zero_with_zero_randomness():
    assert all(s.first == 0 and s.second == 0 for s in S.share(0, (0, 0)))


@pytest.mark.parametrize("pair", [(0, 1), (1, 2), (0, 2)])
def test_reconstruct_any_two(pair):
    shares = S.share(0x5, (0x3, 0x6))
    assert S.reconstruct(shares[pair[0]], shares[pair[1]]) == 0x5


def test_reconstruct_same_party_rejected():
    a = S.share(0x5, (0x3, 0x6))[0]
    with pytest.raises(S.InsufficientShares):
        S.reconstruct(a, a)


@given(words, words, words)
@settings(max_examples=200)
def test_round_trip(v, r0, r1):
    shares = S.share(v, (r0, r1))
    assert S.reconstruct(shares[0], shares[2]) == v
    # Adjacent parties overlap in exactly one word.
    for p in range(3):
        assert shares[p].second == shares[(p + 1) % 3].first


def test_round_trip_bulk():
    rng = np.random.default_rng(1)
    v = rng.integers(0, 1 << 64, 10_000, dtype=np.uint64, endpoint=False)
    views = S.share_array(v, rng)
    for a, b in ((0, 1), (1, 2), (2, 0)):
        assert np.array_equal(S.reconstruct_array(views[a], a, views[b], b), v)
    f0, s0 = views[0]
    f1, _ = views[1]
    assert np.array_equal(s0, f1)


def test_single_view_is_uniform_and_secret_independent():
    # Each party's words, bucketed by their top 4 bits, look uniform no
    # matter which of two secrets was shared.
    rng = np.random.default_rng(7)
    for secret in (0, 0xFFFF_FFFF_FFFF_FFFF):
        views = S.share_array(np.full(100_000, secret, np.uint64), rng)
        for first, second in views:
            for w in (first, second):
                counts = np.bincount((w >> np.uint64(60)).astype(np.int64), minlength=16)
                assert stats.chisquare(counts).pvalue > 0.01


def test_pack_unpack():
    f = np.array([1, 2, 3], np.uint64)
    s = np.array([4, 5, 6], np.uint64)
    blob = S.pack_shares(f, s)
    assert blob[:16] == (1).to_bytes(8, "little") + (4).to_bytes(8, "little")
    f2, s2 = S.unpack_shares(blob)
    assert np.array_equal(f, f2) and np.array_equal(s, s2)
    with pytest.raises(ValueError):
        S.unpack_shares(blob[:-1])


def test_zero_sharing_stream():
    pairs = S.derive_seed_pairs(11)
    gen = S.setup_correlated(pairs)
    a, b, c = gen.next(10_000)
    assert not np.any(a ^ b ^ c)
    first = S.setup_correlated(S.derive_seed_pairs(11)).next(5)
    again = S.setup_correlated(S.derive_seed_pairs(11)).next(5)
    assert all(np.array_equal(x, y) for x, y in zip(first, again))


def test_zero_sharing_detects_mismatched_seeds():
    pairs = S.derive_seed_pairs(3)
    bad = [pairs[0], S.SeedPair(pairs[1].with_next, pairs[1].with_prev ^ 1), pairs[2]]
    with pytest.raises(S.SeedMismatch):
        S.setup_correlated(bad)
