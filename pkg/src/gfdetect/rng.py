"""Counter-based random streams (Philox4x32-10) keyed by (seed, trial).

Every Monte Carlo trial owns an independent stream addressed by its trial
index, so results never depend on how trials are split across workers.
Within a trial, uniforms are consumed sequentially: uniform ``i`` comes from
Philox block ``i // 2`` (words 0-1 for even ``i``, words 2-3 for odd ``i``).

Counter layout: ``(block, tag, trial_lo, trial_hi)``; key: ``(seed_lo, seed_hi)``.
The compiled kernels implement the identical mapping, bit for bit.
"""
from __future__ import annotations

import numpy as np

RNG_ALGORITHM = "philox4x32-10/v1"

_MASK32 = np.uint64(0xFFFFFFFF)
_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = 0x9E3779B9
_W1 = 0xBB67AE85
_SHIFT32 = np.uint64(32)
_SHIFT11 = np.uint64(11)
_TWO_M53 = 2.0**-53

TAG_MODEL = 0
TAG_WAVEFORM = 1


def philox4x32(c0, c1, c2, c3, key0: int, key1: int):
    """Ten-round Philox4x32 on broadcastable uint64 arrays of 32-bit words."""
    c0, c1, c2, c3 = (np.asarray(c, dtype=np.uint64) for c in (c0, c1, c2, c3))
    k0, k1 = key0 & 0xFFFFFFFF, key1 & 0xFFFFFFFF
    for r in range(10):
        if r:
            k0 = (k0 + _W0) & 0xFFFFFFFF
            k1 = (k1 + _W1) & 0xFFFFFFFF
        p0 = c0 * _M0
        p1 = c2 * _M1
        c0, c1, c2, c3 = (
            (p1 >> _SHIFT32) ^ c1 ^ np.uint64(k0),
            p1 & _MASK32,
            (p0 >> _SHIFT32) ^ c3 ^ np.uint64(k1),
            p0 & _MASK32,
        )
    return c0, c1, c2, c3


def _to_unit(hi, lo):
    bits = ((hi << _SHIFT32) | lo) >> _SHIFT11
    return (bits.astype(np.float64) + 0.5) * _TWO_M53


def uniform_block(seed: int, tag: int, trials, start: int, n: int) -> np.ndarray:
    """Uniforms ``start .. start+n-1`` of each trial's stream, shape (T, n).

    Values lie strictly inside (0, 1).
    """
    trials = np.atleast_1d(np.asarray(trials, dtype=np.uint64))[:, None]
    b_first = start // 2
    b_last = (start + n - 1) // 2 if n else b_first
    blocks = np.arange(b_first, b_last + 1, dtype=np.uint64)[None, :]
    x0, x1, x2, x3 = philox4x32(
        blocks,
        np.uint64(tag),
        trials & _MASK32,
        trials >> _SHIFT32,
        seed & 0xFFFFFFFF,
        (seed >> 32) & 0xFFFFFFFF,
    )
    pairs = np.empty((trials.shape[0], blocks.shape[1] * 2))
    pairs[:, 0::2] = _to_unit(x0, x1)
    pairs[:, 1::2] = _to_unit(x2, x3)
    offset = start - 2 * b_first
    return pairs[:, offset: offset + n] if n else pairs[:, :0]


def complex_normal_from_uniforms(u: np.ndarray) -> np.ndarray:
    """Box-Muller on consecutive uniform pairs -> CN(0, 1) samples."""
    u1, u2 = u[..., 0::2], u[..., 1::2]
    r = np.sqrt(-np.log(u1))
    theta = 2.0 * np.pi * u2
    return r * np.cos(theta) + 1j * (r * np.sin(theta))


class TrialStream:
    """Sequential view of one trial's counter-based stream.

    >>> s = TrialStream(seed=7, trial=0)
    >>> u = s.uniforms(3); s.position
    3
    """

    def __init__(self, seed: int, trial: int, tag: int = TAG_MODEL):
        if not 0 <= seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        self.seed = int(seed)
        self.trial = int(trial)
        self.tag = int(tag)
        self.position = 0

    def uniforms(self, n: int) -> np.ndarray:
        out = uniform_block(self.seed, self.tag, [self.trial], self.position, n)[0]
        self.position += n
        return out

    def complex_normals(self, n: int) -> np.ndarray:
        """``n`` standard circular complex Gaussians (E|z|^2 = 1)."""
        return complex_normal_from_uniforms(self.uniforms(2 * n))
