"""Standalone reference for the signed hashing encoder.

Prints the embedding of a text as Rust float literals so the values can be
frozen into tests. Usage: python3 signed_hashing.py "iran hospital" 8 7
"""
import math
import re
import struct
import sys

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
MASK = (1 << 64) - 1


def fnv1a(seed, data):
    h = FNV_OFFSET
    for b in struct.pack("<Q", seed) + data:
        h ^= b
        h = (h * FNV_PRIME) & MASK
    # murmur3 fmix64 finalizer
    h ^= h >> 33
    h = (h * 0xFF51AFD7ED558CCD) & MASK
    h ^= h >> 33
    h = (h * 0xC4CEB9FE1A85EC53) & MASK
    h ^= h >> 33
    return h


def embed(text, dim, seed):
    toks = [t for t in re.split(r"[^0-9a-zA-Z]+", text.lower()) if t]
    v = [0.0] * dim
    for tok in toks:
        h = fnv1a(seed, tok.encode("utf-8"))
        v[h % dim] += -1.0 if h >> 63 else 1.0
    if toks and all(x == 0.0 for x in v):
        # every signed contribution cancelled: fall back to unsigned counts
        for tok in toks:
            v[fnv1a(seed, tok.encode("utf-8")) % dim] += 1.0
    n = math.sqrt(sum(x * x for x in v))
    return [x / n for x in v] if n > 0 else v


if __name__ == "__main__":
    text, dim, seed = sys.argv[1], int(sys.argv[2]), int(sys.argv[3])
    print(", ".join(repr(x) for x in embed(text, dim, seed)))
