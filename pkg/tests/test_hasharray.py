"""Static hash array: construction, lookup, serialization, mention spotting."""

from __future__ import annotations

import io
import random
import tracemalloc

import pytest

from conftest import random_keys
from factqa.hasharray import (
    DEFAULT_SEEDS,
    MAGIC,
    IndexFormatError,
    StaticHashArray,
    find_mentions,
    hash64,
)


def test_inserted_keys_are_found():
    idx = StaticHashArray.build([("honolulu", 4), ("barack obama", 1)])
    assert idx.lookup("honolulu") == [4]
    assert idx.lookup("barack obama") == [1]


def test_empty_build():
    idx = StaticHashArray.build([])
    assert len(idx) == 0
    assert list(idx.offsets) == [0, 0]
    assert idx.lookup("anything") == []


def test_absent_key_returns_empty():
    idx = StaticHashArray.build([("alpha", 1), ("beta", 2)])
    assert idx.lookup("gamma") == []


def test_duplicate_pairs_collapse_but_multi_payload_keys_survive():
    idx = StaticHashArray.build([("x", 1), ("x", 1), ("x", 2)])
    assert len(idx) == 2
    assert idx.lookup("x") == [1, 2]


def test_empty_key_rejected():
    with pytest.raises(ValueError):
        StaticHashArray.build([("", 1)])


def test_bucket_count_is_power_of_two():
    for n in (1, 2, 3, 5, 17, 100):
        idx = StaticHashArray.build([(f"k{i}", i) for i in range(n)])
        assert idx.bucket_count >= n
        assert idx.bucket_count & (idx.bucket_count - 1) == 0


def test_no_false_negatives_100k():
    rng = random.Random(99)
    keys = random_keys(rng, 100_000)
    idx = StaticHashArray.build((k, i) for i, k in enumerate(keys))
    misses = sum(1 for i, k in enumerate(keys) if i not in idx.lookup(k))
    assert misses == 0


def test_shared_bucket_distinct_fingerprints_stay_apart():
    # brute-force a pair of short keys landing in the same bucket of a
    # two-entry index (bucket_count == 2) with different second hashes
    seed1, seed2 = DEFAULT_SEEDS
    base = "aa"
    partner = None
    for i in range(1000):
        cand = f"bb{i}"
        same_bucket = hash64(cand.encode(), seed1) & 1 == hash64(base.encode(), seed1) & 1
        if same_bucket and hash64(cand.encode(), seed2) != hash64(base.encode(), seed2):
            partner = cand
            break
    assert partner is not None
    idx = StaticHashArray.build([(base, 10), (partner, 20)])
    assert idx.lookup(base) == [10]
    assert idx.lookup(partner) == [20]


def test_flattening_preserves_item_multiset():
    rng = random.Random(5)
    keys = random_keys(rng, 500)
    entries = [(k, i % 37) for i, k in enumerate(keys)]
    idx = StaticHashArray.build(entries)
    expected = sorted(
        (hash64(k.encode(), DEFAULT_SEEDS[1]), payload) for k, payload in set(entries)
    )
    assert sorted(idx.iter_items()) == expected


def test_offsets_invariants_on_random_builds():
    rng = random.Random(6)
    for n in (0, 1, 7, 64, 300):
        idx = StaticHashArray.build((k, 0) for k in random_keys(rng, n))
        offsets = list(idx.offsets)
        assert offsets[0] == 0
        assert offsets[-1] == len(idx)
        assert all(a <= b for a, b in zip(offsets, offsets[1:]))


def test_items_within_bucket_keep_insertion_order():
    # reconstruct expected bucket contents from the hashes and check the
    # flattened array lists each bucket's payloads in insertion order
    rng = random.Random(8)
    keys = random_keys(rng, 200)
    idx = StaticHashArray.build((k, i) for i, k in enumerate(keys))
    mask = idx.bucket_count - 1
    by_bucket: dict[int, list[int]] = {}
    for i, k in enumerate(keys):
        by_bucket.setdefault(hash64(k.encode(), idx.seeds[0]) & mask, []).append(i)
    flat = [payload for _, payload in idx.iter_items()]
    expected = [i for b in range(idx.bucket_count) for i in by_bucket.get(b, [])]
    assert flat == expected


# ---------------------------------------------------------------------------
# serialization


def test_roundtrip_bytes_identical():
    rng = random.Random(12)
    idx = StaticHashArray.build((k, i) for i, k in enumerate(random_keys(rng, 1000)))
    blob = idx.to_bytes()
    reloaded = StaticHashArray.load(io.BytesIO(blob))
    assert reloaded.to_bytes() == blob
    for k in random_keys(rng, 50):
        assert reloaded.lookup(k) == idx.lookup(k)


def test_save_load_file(tmp_path):
    idx = StaticHashArray.build([("alpha", 7)])
    target = tmp_path / "idx.bin"
    idx.save(target)
    assert StaticHashArray.load(target).lookup("alpha") == [7]


def test_truncated_items_section():
    idx = StaticHashArray.build([("alpha", 7), ("beta", 8)])
    blob = idx.to_bytes()
    with pytest.raises(IndexFormatError, match="truncated items section"):
        StaticHashArray.load(io.BytesIO(blob[:-8]))


def test_truncated_offsets_section():
    idx = StaticHashArray.build([("alpha", 7)])
    header_size = 7 + 4 + 8 * 4
    blob = idx.to_bytes()[: header_size + 4]
    with pytest.raises(IndexFormatError, match="truncated offsets section"):
        StaticHashArray.load(io.BytesIO(blob))


def test_bad_magic():
    idx = StaticHashArray.build([("alpha", 7)])
    blob = b"XXXXXXX" + idx.to_bytes()[len(MAGIC):]
    with pytest.raises(IndexFormatError, match="bad magic"):
        StaticHashArray.load(io.BytesIO(blob))


def test_bad_version():
    idx = StaticHashArray.build([("alpha", 7)])
    blob = bytearray(idx.to_bytes())
    blob[7] = 99
    with pytest.raises(IndexFormatError, match="unsupported version"):
        StaticHashArray.load(io.BytesIO(bytes(blob)))


def test_truncated_header():
    with pytest.raises(IndexFormatError, match="truncated header"):
        StaticHashArray.load(io.BytesIO(b"SHA"))


def test_serialized_form_smaller_than_construction_peak():
    rng = random.Random(77)
    keys = random_keys(rng, 10_000)
    tracemalloc.start()
    idx = StaticHashArray.build((k, i) for i, k in enumerate(keys))
    _, peak = tracemalloc.get_traced_memory()
    tracemalloc.stop()
    assert len(idx.to_bytes()) < peak


# ---------------------------------------------------------------------------
# find_mentions


def _mention_index():
    return StaticHashArray.build(
        [("barack obama", 1), ("obama", 2), ("honolulu", 3), ("michelle obama", 4)]
    )


def test_find_mentions_basic():
    idx = _mention_index()
    tokens = ["when", "was", "barack", "obama", "born"]
    assert find_mentions(idx, tokens) == [((2, 4), [1])]


def test_find_mentions_nothing():
    idx = _mention_index()
    assert find_mentions(idx, ["completely", "unrelated", "words"]) == []


def test_find_mentions_prefers_longest_span():
    idx = _mention_index()
    # "barack obama" and "obama" are both indexed; only the longer match
    # is reported. Frozen from exhaustive span enumeration: spans hitting
    # the index are (2,4) and (3,4); greedy longest-match keeps (2,4).
    tokens = ["when", "was", "barack", "obama", "born"]
    spans = {
        (i, j)
        for i in range(len(tokens))
        for j in range(i + 1, len(tokens) + 1)
        if idx.lookup(" ".join(tokens[i:j]))
    }
    assert spans == {(2, 4), (3, 4)}
    assert [span for span, _ in find_mentions(idx, tokens)] == [(2, 4)]


def test_find_mentions_no_overlap():
    idx = _mention_index()
    tokens = ["obama", "obama", "honolulu"]
    assert [span for span, _ in find_mentions(idx, tokens)] == [(0, 1), (1, 2), (2, 3)]


def test_find_mentions_respects_max_span():
    idx = StaticHashArray.build([("a b c", 1)])
    tokens = ["a", "b", "c"]
    assert find_mentions(idx, tokens, max_span=2) == []
    assert find_mentions(idx, tokens, max_span=3) == [((0, 3), [1])]
