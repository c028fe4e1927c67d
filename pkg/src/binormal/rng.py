"""Counter-based random numbers for reproducible, schedule-independent Monte Carlo.

Every random quantity in this package is a pure function of a 64-bit seed and
an integer counter, so sample i never depends on how many samples were drawn
before it, on batching, or on thread count.  The generator is the splitmix64
output function applied to ``seed``-derived state plus ``counter * GOLDEN``;
random access into the stream is free.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)

_INV53 = 1.0 / float(1 << 53)

# Purpose tags keep independent random streams (sphere sampling, walk
# directions, source sampling, nested walks) from ever sharing a counter.
TAG_SPHERE = 0
TAG_WALK = 1
TAG_SOURCE = 2
TAG_NESTED = 3

_TAG_SHIFT = np.uint64(62)


def _mix64(z: np.ndarray) -> np.ndarray:
    # uint64 wraparound is the point; numpy's overflow warning is noise here
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        return z ^ (z >> np.uint64(31))


def bits(seed: int, counter) -> np.ndarray:
    """64 pseudo-random bits per counter value (vectorized)."""
    c = np.asarray(counter, dtype=np.uint64)
    with np.errstate(over="ignore"):
        state = _mix64(np.uint64(seed) ^ _GOLDEN) + c * _GOLDEN
    return _mix64(state)


def uniforms(seed: int, counter) -> np.ndarray:
    """Uniform float64 in [0, 1), one per counter value."""
    return (bits(seed, counter) >> np.uint64(11)).astype(np.float64) * _INV53


def uniforms_open(seed: int, counter) -> np.ndarray:
    """Uniform float64 in (0, 1], safe under log()."""
    return ((bits(seed, counter) >> np.uint64(11)).astype(np.float64) + 1.0) * _INV53


def pack(tag: int, *fields) -> np.ndarray:
    """Pack (field, width_bits) pairs plus a 2-bit stream tag into one counter.

    Fields are (value_array, width) pairs, most significant first; a field
    exceeding its width raises, so distinct indices can never collide.
    """
    total = 2
    acc = np.uint64(tag)
    for value, width in fields:
        v = np.asarray(value, dtype=np.uint64)
        if v.size and int(v.max()) >> width:
            raise ValueError(f"counter field {int(v.max())} exceeds {width} bits")
        total += width
        acc = (acc << np.uint64(width)) | v
    if total > 64:
        raise ValueError(f"counter layout needs {total} > 64 bits")
    return acc


def gaussians(seed: int, counter_even) -> tuple[np.ndarray, np.ndarray]:
    """Standard-normal pair per counter via Box-Muller.

    ``counter_even`` and ``counter_even + 1`` are both consumed, so callers
    must space counters two apart per pair.
    """
    c = np.asarray(counter_even, dtype=np.uint64)
    u1 = uniforms_open(seed, c)
    u2 = uniforms(seed, c + np.uint64(1))
    r = np.sqrt(-2.0 * np.log(u1))
    ang = 2.0 * np.pi * u2
    return r * np.cos(ang), r * np.sin(ang)


def unit_vectors(seed: int, counter_base, dim: int) -> np.ndarray:
    """Uniform directions on the unit sphere S^{dim-1}, one per counter base.

    Consumes ``2 * ceil(dim / 2)`` consecutive counters starting at
    ``counter_base``; the direction for a given base depends only on the
    seed and that base.
    """
    base = np.asarray(counter_base, dtype=np.uint64)
    npairs = (dim + 1) // 2
    cols = []
    for k in range(npairs):
        g1, g2 = gaussians(seed, base + np.uint64(2 * k))
        cols.append(g1)
        cols.append(g2)
    g = np.stack(cols[:dim], axis=-1)
    norm = np.linalg.norm(g, axis=-1, keepdims=True)
    # A zero norm has probability ~2^-1000; substitute e_1 deterministically.
    bad = norm[..., 0] < 1e-290
    if np.any(bad):
        g[bad] = 0.0
        g[bad, 0] = 1.0
        norm = np.linalg.norm(g, axis=-1, keepdims=True)
    return g / norm


SLOTS_PER_POINT = 8  # counter stride per sampled point; supports dim <= 8
