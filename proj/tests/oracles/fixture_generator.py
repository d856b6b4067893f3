#!/usr/bin/env python3
"""Independent reimplementation of the fixture embedding generator.

Used once to produce the frozen values in test_providers.cpp:

    python3 tests/oracles/fixture_generator.py

Seed: first 8 bytes of SHA-256(tagged input), big-endian (0 -> 0x9e3779b97f4a7c15).
Step: xorshift64*; value = 2 * ((r >> 11) * 2^-53) - 1; vector L2-normalized.
"""
import hashlib
import math
import struct

MASK = (1 << 64) - 1


def generator(digest: bytes):
    state = struct.unpack(">Q", digest[:8])[0] or 0x9E3779B97F4A7C15
    while True:
        state ^= state >> 12
        state ^= (state << 25) & MASK
        state ^= state >> 27
        yield (state * 0x2545F4914F6CDD1D) & MASK


def fixture_vector(tagged: bytes, dim: int):
    gen = generator(hashlib.sha256(tagged).digest())
    raw = [2.0 * ((next(gen) >> 11) * 2.0 ** -53) - 1.0 for _ in range(dim)]
    norm = math.sqrt(sum(x * x for x in raw))
    return [x / norm for x in raw]


def text_vector(text: str, dim: int):
    return fixture_vector(b"text:" + text.encode(), dim)


def image_token(image: bytes, index: int, dim: int):
    return fixture_vector(b"image:" + image + str(index).encode(), dim)


if __name__ == "__main__":
    print("text 'opacity' d=8:")
    print(",\n".join(repr(v) for v in text_vector("opacity", 8)))
    print("text 'patient reports dry cough' d=4:")
    print(",\n".join(repr(v) for v in text_vector("patient reports dry cough", 4)))
    img = bytes([0x89, 0x50, 0x4E, 0x47, 1, 2, 3])
    for idx in (0, 1, 195):
        print(f"image token {idx} d=8:")
        print(",\n".join(repr(v) for v in image_token(img, idx, 8)))
