"""Portable 64-bit generator used by the network emulator.

Algorithm (reproduce this exactly to match traces from other tools):

* state: four 64-bit words filled by four successive outputs of splitmix64
  started at ``seed``;
* step: xoshiro256** (Blackman & Vigna), output
  ``rotl(s1 * 5, 7) * 9``;
* ``uniform()`` is ``(next_u64() >> 11) * 2**-53``, a double in [0, 1).

Reference vectors live in ``tests/test_rng.py``.
"""
from __future__ import annotations

MASK64 = (1 << 64) - 1


def splitmix64(state: int) -> tuple[int, int]:
    """Advance a splitmix64 state; return ``(new_state, output)``."""
    state = (state + 0x9E3779B97F4A7C15) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return state, z ^ (z >> 31)


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK64


class Xoshiro256:
    def __init__(self, seed: int):
        if not 0 <= seed <= MASK64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
        self.seed = seed
        s = seed
        words = []
        for _ in range(4):
            s, out = splitmix64(s)
            words.append(out)
        self._s = words

    def next_u64(self) -> int:
        s = self._s
        result = (_rotl((s[1] * 5) & MASK64, 7) * 9) & MASK64
        t = (s[1] << 17) & MASK64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def uniform(self) -> float:
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))
