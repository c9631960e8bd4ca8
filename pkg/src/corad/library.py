"""Baseline transmit-waveform families.

All generators return unit-modulus complex sequences usable as optimizer
seeds or as fixed transmit codes.  Shift-register families (m-sequence,
Gold, Kasami) are emitted as +/-1 chips; if the requested length exceeds a
family's natural period the periodic sequence is tiled and truncated.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class UnsupportedParameterError(ValueError):
    pass


BARKER_CODES = {
    2: [1, -1],
    3: [1, 1, -1],
    4: [1, 1, -1, 1],
    5: [1, 1, 1, -1, 1],
    7: [1, 1, 1, -1, -1, 1, -1],
    11: [1, 1, 1, -1, -1, -1, 1, -1, -1, 1, -1],
    13: [1, 1, 1, 1, 1, -1, -1, 1, 1, -1, 1, -1, 1],
}

# primitive polynomials over GF(2), exponent lists (x^r + ... + 1)
PRIMITIVE_POLYS = {
    3: (3, 1),
    4: (4, 1),
    5: (5, 2),
    6: (6, 1),
    7: (7, 3),
    8: (8, 4, 3, 2),
    9: (9, 4),
    10: (10, 3),
}

# preferred m-sequence pairs for Gold sets (degree: (poly_a, poly_b))
GOLD_PREFERRED_PAIRS = {
    5: ((5, 2), (5, 4, 3, 2)),
    6: ((6, 1), (6, 5, 2, 1)),
    7: ((7, 3), (7, 3, 2, 1)),
}


class Family(Enum):
    RANDOM_POLYPHASE = "random-polyphase"
    RANDOM_BINARY = "random-binary"
    BARKER = "barker"
    FRANK = "frank"
    GOLOMB = "golomb"
    M_SEQUENCE = "m-sequence"
    GOLD = "gold"
    KASAMI = "kasami"
    UP_LFM = "up-lfm"
    DOWN_LFM = "down-lfm"


@dataclass(frozen=True)
class WaveformKind:
    """A named family plus the parameters its generator needs."""

    family: Family
    length: int
    seed: int = 0
    degree: int = 0      # shift-register families
    index: int = 0       # member selector within Gold/Kasami sets

    def __post_init__(self):
        if self.length < 2:
            raise UnsupportedParameterError("sequence length must be >= 2")


def lfsr_sequence(poly: tuple, n_out: int, state: int | None = None) -> np.ndarray:
    """Fibonacci LFSR bit stream (0/1) for the given exponent-list polynomial."""
    degree = poly[0]
    taps = [degree - e for e in poly]  # positions within the register, 0-based
    if state is None:
        state = (1 << degree) - 1  # all-ones fill
    bits = np.empty(n_out, dtype=np.int8)
    for i in range(n_out):
        out = state & 1
        bits[i] = out
        fb = 0
        for t in taps:
            fb ^= (state >> t) & 1
        state = (state >> 1) | (fb << (degree - 1))
    return bits


def _m_sequence_bits(degree: int) -> np.ndarray:
    if degree not in PRIMITIVE_POLYS:
        raise UnsupportedParameterError(
            f"no primitive polynomial tabulated for degree {degree}")
    period = (1 << degree) - 1
    return lfsr_sequence(PRIMITIVE_POLYS[degree], period)


def _bits_from_poly(poly: tuple) -> np.ndarray:
    period = (1 << poly[0]) - 1
    return lfsr_sequence(poly, period)


def _tile(bits: np.ndarray, n: int) -> np.ndarray:
    reps = -(-n // bits.size)
    return np.tile(bits, reps)[:n]


def _bipolar(bits: np.ndarray) -> np.ndarray:
    return (1.0 - 2.0 * bits.astype(np.float64)).astype(np.complex128)


def gold_set(degree: int) -> np.ndarray:
    """All 2^degree + 1 Gold sequences (rows, +/-1 chips, one period)."""
    if degree not in GOLD_PREFERRED_PAIRS:
        raise UnsupportedParameterError(
            f"Gold preferred pair not tabulated for degree {degree}")
    pa, pb = GOLD_PREFERRED_PAIRS[degree]
    u = _bits_from_poly(pa)
    v = _bits_from_poly(pb)
    period = u.size
    rows = [u, v]
    for shift in range(period):
        rows.append(np.bitwise_xor(u, np.roll(v, -shift)))
    return _bipolar(np.stack(rows))


def kasami_small_set(degree: int) -> np.ndarray:
    """Small-set Kasami sequences for even degree (2^(degree/2) rows)."""
    if degree % 2 != 0:
        raise UnsupportedParameterError("Kasami needs an even degree")
    u = _m_sequence_bits(degree)
    period = u.size
    dec = (1 << (degree // 2)) + 1
    w = u[(np.arange(period) * dec) % period]
    rows = [u]
    small_period = (1 << (degree // 2)) - 1
    for shift in range(small_period):
        rows.append(np.bitwise_xor(u, np.roll(w, -shift)))
    return _bipolar(np.stack(rows))


def generate(kind: WaveformKind) -> np.ndarray:
    """Produce one unit-modulus sequence of the requested kind."""
    n = kind.length
    fam = kind.family

    if fam is Family.RANDOM_POLYPHASE:
        rng = np.random.default_rng(kind.seed)
        return np.exp(2j * np.pi * rng.random(n))

    if fam is Family.RANDOM_BINARY:
        rng = np.random.default_rng(kind.seed)
        return _bipolar(rng.integers(0, 2, n).astype(np.int8))

    if fam is Family.BARKER:
        if n not in BARKER_CODES:
            raise UnsupportedParameterError(f"no Barker code of length {n}")
        return np.asarray(BARKER_CODES[n], dtype=np.complex128)

    if fam is Family.FRANK:
        k = int(round(np.sqrt(n)))
        if k * k != n:
            raise UnsupportedParameterError(
                f"Frank codes need a perfect-square length, got {n}")
        p, q = np.meshgrid(np.arange(k), np.arange(k), indexing="ij")
        phases = 2.0 * np.pi * p * q / k
        return np.exp(1j * phases).ravel()

    if fam is Family.GOLOMB:
        idx = np.arange(n)
        return np.exp(1j * np.pi * idx * (idx + 1) / n)

    if fam is Family.M_SEQUENCE:
        degree = kind.degree or _default_degree(n)
        return _tile(_bipolar(_m_sequence_bits(degree)), n)

    if fam is Family.GOLD:
        degree = kind.degree or _default_degree(n)
        rows = gold_set(degree)
        return _tile(rows[kind.index % rows.shape[0]], n)

    if fam is Family.KASAMI:
        degree = kind.degree or _default_even_degree(n)
        rows = kasami_small_set(degree)
        return _tile(rows[kind.index % rows.shape[0]], n)

    if fam is Family.UP_LFM:
        idx = np.arange(n)
        return np.exp(1j * np.pi * idx ** 2 / n)

    if fam is Family.DOWN_LFM:
        idx = np.arange(n)
        return np.exp(-1j * np.pi * idx ** 2 / n)

    raise UnsupportedParameterError(f"unknown family {fam}")


def _default_degree(n: int) -> int:
    for degree in sorted(PRIMITIVE_POLYS):
        if (1 << degree) - 1 >= n:
            return degree
    return max(PRIMITIVE_POLYS)


def _default_even_degree(n: int) -> int:
    for degree in sorted(PRIMITIVE_POLYS):
        if degree % 2 == 0 and (1 << degree) - 1 >= n:
            return degree
    return 10


def random_polyphase_set(m: int, n: int, seed: int) -> np.ndarray:
    """M independent random-polyphase rows from one seed (optimizer default)."""
    rng = np.random.default_rng(seed)
    return np.exp(2j * np.pi * rng.random((m, n)))


def list_families() -> list[str]:
    return [f.value for f in Family]
