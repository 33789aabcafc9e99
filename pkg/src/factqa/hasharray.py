"""Compact immutable string index: a flattened two-hash bucket array.

Keys are hashed twice with the same 64-bit hash family under two distinct
seeds. hash1 selects a bucket, hash2 is stored as a full-width fingerprint
next to the payload. Construction goes through an ordinary chained table
which is then flattened into one contiguous item array plus a prefix-sum
offset array, so lookups touch two cache-friendly slabs and the structure
serializes as a flat file.

Lookups never miss an inserted key; distinct keys can collide on both
hashes, so a lookup may return extra payloads, which callers filter by
membership checks downstream.
"""

from __future__ import annotations

import struct
import sys
from array import array
from pathlib import Path
from typing import IO, Iterable, Iterator

MAGIC = b"SHA1DX\x00"
VERSION = 1
_HEADER = struct.Struct("<7sIQQQQ")

# Fixed seeds; recorded in the file header so readers stay compatible.
DEFAULT_SEEDS = (0x5851F42D4C957F2D, 0x14057B7EF767814F)

_M64 = (1 << 64) - 1
_STEP = 0x9E3779B97F4A7C15


def hash64(data: bytes, seed: int) -> int:
    """64-bit non-cryptographic hash: multiply-xor over 8-byte limbs
    with a splitmix-style finalizer."""
    h = (seed ^ (len(data) * _STEP)) & _M64
    n = len(data)
    cut = n - (n & 7)
    for i in range(0, cut, 8):
        h = ((h ^ int.from_bytes(data[i : i + 8], "little")) * _STEP) & _M64
    if cut != n:
        h = ((h ^ int.from_bytes(data[cut:], "little")) * _STEP) & _M64
    h ^= h >> 30
    h = (h * 0xBF58476D1CE4E5B9) & _M64
    h ^= h >> 27
    h = (h * 0x94D049BB133111EB) & _M64
    return h ^ (h >> 31)


class IndexFormatError(ValueError):
    """Raised when a serialized index cannot be decoded."""


def _as_le(arr: array) -> array:
    if sys.byteorder == "little":
        return arr
    swapped = array("Q", arr)
    swapped.byteswap()
    return swapped


class StaticHashArray:
    """Read-only mapping from string keys to u64 payloads.

    ``offsets`` has bucket_count + 1 entries in prefix-sum form;
    ``items`` interleaves (fingerprint, payload) pairs. Items of one
    bucket are adjacent, in insertion order.
    """

    __slots__ = ("seeds", "bucket_count", "_mask", "offsets", "items")

    def __init__(self, seeds: tuple[int, int], bucket_count: int, offsets: array, items: array):
        if bucket_count <= 0 or bucket_count & (bucket_count - 1):
            raise IndexFormatError("bucket count must be a positive power of two")
        if len(offsets) != bucket_count + 1:
            raise IndexFormatError("corrupt offsets section: wrong length")
        if offsets[0] != 0 or any(offsets[i] > offsets[i + 1] for i in range(bucket_count)):
            raise IndexFormatError("corrupt offsets section: not a prefix sum")
        if offsets[bucket_count] * 2 != len(items):
            raise IndexFormatError("corrupt offsets section: item count mismatch")
        self.seeds = seeds
        self.bucket_count = bucket_count
        self._mask = bucket_count - 1
        self.offsets = offsets
        self.items = items

    def __len__(self) -> int:
        return len(self.items) // 2

    @classmethod
    def build(
        cls, entries: Iterable[tuple[str, int]], seeds: tuple[int, int] = DEFAULT_SEEDS
    ) -> "StaticHashArray":
        """Build from (key, payload) pairs.

        Duplicate (key, payload) pairs collapse to one; the same key may
        keep several distinct payloads. Keys must be non-empty.
        """
        seen: set[tuple[str, int]] = set()
        uniq: list[tuple[str, int]] = []
        for key, payload in entries:
            if not key:
                raise ValueError("empty key")
            if not 0 <= payload < 1 << 64:
                raise ValueError(f"payload out of u64 range: {payload}")
            pair = (key, payload)
            if pair not in seen:
                seen.add(pair)
                uniq.append(pair)
        bucket_count = 1
        while bucket_count < len(uniq):
            bucket_count <<= 1
        mask = bucket_count - 1
        seed1, seed2 = seeds
        # Intermediate dynamic chained table, then flatten.
        buckets: list[list[tuple[int, int]]] = [[] for _ in range(bucket_count)]
        for key, payload in uniq:
            data = key.encode("utf-8")
            buckets[hash64(data, seed1) & mask].append((hash64(data, seed2), payload))
        offsets = array("Q", [0] * (bucket_count + 1))
        items = array("Q")
        pos = 0
        for b, bucket in enumerate(buckets):
            offsets[b] = pos
            for fingerprint, payload in bucket:
                items.append(fingerprint)
                items.append(payload)
            pos += len(bucket)
        offsets[bucket_count] = pos
        return cls(seeds, bucket_count, offsets, items)

    def lookup(self, key: str) -> list[int]:
        """Payloads stored under fingerprints matching this key.

        Never misses an inserted key; may include false positives when a
        different key shares both hashes.
        """
        data = key.encode("utf-8")
        bucket = hash64(data, self.seeds[0]) & self._mask
        fingerprint = hash64(data, self.seeds[1])
        items = self.items
        out = []
        for i in range(self.offsets[bucket] * 2, self.offsets[bucket + 1] * 2, 2):
            if items[i] == fingerprint:
                out.append(items[i + 1])
        return out

    def iter_items(self) -> Iterator[tuple[int, int]]:
        """(fingerprint, payload) pairs in storage order."""
        items = self.items
        for i in range(0, len(items), 2):
            yield items[i], items[i + 1]

    def to_bytes(self) -> bytes:
        header = _HEADER.pack(
            MAGIC, VERSION, self.seeds[0], self.seeds[1], self.bucket_count, len(self)
        )
        return header + _as_le(self.offsets).tobytes() + _as_le(self.items).tobytes()

    def save(self, target: str | Path | IO[bytes]) -> None:
        if isinstance(target, (str, Path)):
            with open(target, "wb") as fp:
                fp.write(self.to_bytes())
        else:
            target.write(self.to_bytes())

    @classmethod
    def load(cls, source: str | Path | IO[bytes]) -> "StaticHashArray":
        if isinstance(source, (str, Path)):
            with open(source, "rb") as fp:
                return cls.load(fp)
        raw = source.read(_HEADER.size)
        if len(raw) < _HEADER.size:
            raise IndexFormatError("truncated header")
        magic, version, seed1, seed2, bucket_count, item_count = _HEADER.unpack(raw)
        if magic != MAGIC:
            raise IndexFormatError("bad magic")
        if version != VERSION:
            raise IndexFormatError(f"unsupported version {version}")
        if bucket_count <= 0 or bucket_count & (bucket_count - 1):
            raise IndexFormatError("corrupt header: bad bucket count")
        offsets_raw = source.read((bucket_count + 1) * 8)
        if len(offsets_raw) < (bucket_count + 1) * 8:
            raise IndexFormatError("truncated offsets section")
        items_raw = source.read(item_count * 16)
        if len(items_raw) < item_count * 16:
            raise IndexFormatError("truncated items section")
        offsets = array("Q")
        offsets.frombytes(offsets_raw)
        items = array("Q")
        items.frombytes(items_raw)
        if sys.byteorder != "little":
            offsets.byteswap()
            items.byteswap()
        return cls((seed1, seed2), bucket_count, offsets, items)


def find_mentions(
    index: StaticHashArray, tokens: Iterable[str], max_span: int = 5
) -> list[tuple[tuple[int, int], list[int]]]:
    """Greedy left-to-right longest-match span spotting.

    Returns (span, payload candidates) per mention; spans are half-open
    token ranges and never overlap. Tokens must already carry whatever
    normalization was applied to the indexed keys.
    """
    toks = list(tokens)
    n = len(toks)
    out: list[tuple[tuple[int, int], list[int]]] = []
    i = 0
    while i < n:
        matched = None
        for j in range(min(n, i + max_span), i, -1):
            candidates = index.lookup(" ".join(toks[i:j]))
            if candidates:
                matched = ((i, j), sorted(set(candidates)))
                break
        if matched is None:
            i += 1
        else:
            out.append(matched)
            i = matched[0][1]
    return out
