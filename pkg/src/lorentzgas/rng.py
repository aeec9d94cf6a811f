"""Counter-based random streams (Philox4x64-10) usable inside numba kernels.

A stream is addressed by ``(seed, tag, trial)``: the 128-bit Philox key is
``(seed, tag)`` and the trial index occupies the first counter word, the block
index within the trial the second.  Draws for one trial therefore never depend
on how trials are distributed over workers.
"""
from __future__ import annotations

import zlib

import numba as nb
import numpy as np

_M0 = np.uint64(0xD2E7470EE14C6C93)
_M1 = np.uint64(0xCA5A826395121157)
_W0 = np.uint64(0x9E3779B97F4A7C15)
_W1 = np.uint64(0xBB67AE8584CAA73B)
_LO32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
_S11 = np.uint64(11)
_TWO_M53 = 1.0 / 9007199254740992.0

MASK64 = (1 << 64) - 1


def operation_tag(name: str) -> int:
    """Stable 64-bit tag for an operation name (distinct names, distinct streams)."""
    raw = name.encode()
    return (zlib.crc32(raw) << 32) | zlib.crc32(raw[::-1] + b"lorentzgas")


@nb.njit(cache=True, inline="always")
def _mulhilo(a, b):
    a_lo = a & _LO32
    a_hi = a >> _S32
    b_lo = b & _LO32
    b_hi = b >> _S32
    lolo = a_lo * b_lo
    lohi = a_lo * b_hi
    hilo = a_hi * b_lo
    hihi = a_hi * b_hi
    cross = (lolo >> _S32) + (lohi & _LO32) + hilo
    hi = hihi + (lohi >> _S32) + (cross >> _S32)
    lo = a * b
    return hi, lo


@nb.njit(cache=True)
def philox_block(c0, c1, c2, c3, k0, k1):
    """One Philox4x64-10 block; all arguments are ``np.uint64``."""
    for r in range(10):
        if r > 0:
            k0 = k0 + _W0
            k1 = k1 + _W1
        hi0, lo0 = _mulhilo(_M0, c0)
        hi1, lo1 = _mulhilo(_M1, c2)
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    return c0, c1, c2, c3


@nb.njit(cache=True, inline="always")
def to_open_unit(x):
    # 53-bit mantissa centred in its bin: never exactly 0 or 1
    return (float(x >> _S11) + 0.5) * _TWO_M53


@nb.njit(cache=True)
def trial_uniforms(seed, tag, trial, block):
    """Four open-interval uniforms for block ``block`` of trial ``trial``."""
    c0, c1, c2, c3 = philox_block(
        np.uint64(trial), np.uint64(block), np.uint64(0), np.uint64(0),
        np.uint64(seed), np.uint64(tag),
    )
    return to_open_unit(c0), to_open_unit(c1), to_open_unit(c2), to_open_unit(c3)


class StreamFactory:
    """Hands out per-trial uniform streams for one (seed, operation) pair."""

    def __init__(self, seed: int, operation: str):
        if not 0 <= seed <= MASK64:
            raise ValueError("seed must fit in 64 unsigned bits")
        self.seed = int(seed)
        self.operation = operation
        self.tag = operation_tag(operation)

    @property
    def key(self) -> tuple[np.uint64, np.uint64]:
        return np.uint64(self.seed), np.uint64(self.tag)

    def uniforms(self, trial: int, size: int) -> np.ndarray:
        out = np.empty(size)
        nblocks = -(-size // 4)
        for b in range(nblocks):
            vals = trial_uniforms(*self.key, trial, b)
            for i, v in enumerate(vals):
                if 4 * b + i < size:
                    out[4 * b + i] = v
        return out

    def raw_block(self, trial: int, block: int) -> tuple[int, int, int, int]:
        words = philox_block(
            np.uint64(trial), np.uint64(block), np.uint64(0), np.uint64(0),
            np.uint64(self.seed), np.uint64(self.tag),
        )
        return tuple(int(w) for w in words)
