import numpy as np

from genhai import rng as r


def test_make_rng_deterministic():
    a = r.make_rng(7).standard_normal(5)
    b = r.make_rng(7).standard_normal(5)
    np.testing.assert_array_equal(a, b)


def test_make_rng_accepts_seedsequence():
    ss = np.random.SeedSequence([1, 2])
    a = r.make_rng(ss).standard_normal(3)
    b = r.make_rng(np.random.SeedSequence([1, 2])).standard_normal(3)
    np.testing.assert_array_equal(a, b)


def test_stable_key_frozen():
    # sha256-derived keys must never change across runs or platforms
    assert r.stable_key("test_result") == r.stable_key("test_result")
    assert r.stable_key("test_result") != r.stable_key("continuation")
    assert 0 <= r.stable_key("anything") < 2**63


def test_stable_key_known_value():
    import hashlib

    digest = hashlib.sha256(b"test_result").digest()
    expected = int.from_bytes(digest[:8], "big") >> 1
    assert r.stable_key("test_result") == expected


def test_split_streams_differ():
    streams = r.split(np.random.SeedSequence(0), 4)
    draws = [r.make_rng(s).standard_normal(4) for s in streams]
    for i in range(4):
        for j in range(i + 1, 4):
            assert not np.array_equal(draws[i], draws[j])


def test_named_stream_independent_of_order():
    root = 123
    a1 = r.named_stream(root, "alpha").standard_normal(3)
    b1 = r.named_stream(root, "beta").standard_normal(3)
    b2 = r.named_stream(root, "beta").standard_normal(3)
    a2 = r.named_stream(root, "alpha").standard_normal(3)
    np.testing.assert_array_equal(a1, a2)
    np.testing.assert_array_equal(b1, b2)
    assert not np.array_equal(a1, b1)
