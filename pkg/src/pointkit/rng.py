"""Deterministic random stream used everywhere randomness is needed.

The stream is fully specified so that an independent implementation (in any
language) can reproduce it bit for bit:

* State advance: SplitMix64. ``state += 0x9E3779B97F4A7C15`` (mod 2^64), then
  the output is ``mix(state)`` with

      z = state
      z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9   (mod 2^64)
      z = (z ^ (z >> 27)) * 0x94D049BB133111EB   (mod 2^64)
      z =  z ^ (z >> 31)

* Uniforms: ``u = (z >> 11) * 2**-53``, i.e. the top 53 bits as an IEEE-754
  double in [0, 1). One 64-bit draw per uniform.
* Normals: Box-Muller on consecutive uniform pairs (u1, u2):

      r  = sqrt(-2 * ln(1 - u1))        # 1 - u1 is in (0, 1], ln is finite
      z0 = r * cos(2 * pi * u2)
      z1 = r * sin(2 * pi * u2)

  z0 is emitted before z1; an unconsumed z1 is cached and emitted by the next
  call before any new pair is drawn.

Vectorized draws produce exactly the sequence the scalar calls would.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


class SeededStream:
    """SplitMix64 stream with uniform and normal draws (see module docstring)."""

    def __init__(self, seed: int) -> None:
        self._state = int(seed) & _MASK
        self._spare: float | None = None  # pending Box-Muller sine term

    def u64(self, n: int) -> np.ndarray:
        """Next ``n`` raw 64-bit outputs as a uint64 array."""
        if n < 0:
            raise ValueError("n must be >= 0")
        # i-th output is mix(state + (i+1)*gamma); wraparound is intended.
        with np.errstate(over="ignore"):
            steps = (np.arange(1, n + 1, dtype=np.uint64)) * np.uint64(_GAMMA)
            out = _mix(np.uint64(self._state) + steps)
        self._state = (self._state + n * _GAMMA) & _MASK
        return out

    def uniform(self, n: int) -> np.ndarray:
        """Next ``n`` uniforms in [0, 1) as float64."""
        return (self.u64(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def normal(self, n: int) -> np.ndarray:
        """Next ``n`` standard normals (Box-Muller, pairs consumed in order)."""
        if n < 0:
            raise ValueError("n must be >= 0")
        out = np.empty(n, dtype=np.float64)
        start = 0
        if self._spare is not None and n > 0:
            out[0] = self._spare
            self._spare = None
            start = 1
        need = n - start
        if need <= 0:
            return out
        pairs = (need + 1) // 2
        u = self.uniform(2 * pairs)
        r = np.sqrt(-2.0 * np.log1p(-u[0::2]))
        phi = 2.0 * np.pi * u[1::2]
        z0 = r * np.cos(phi)
        z1 = r * np.sin(phi)
        inter = np.empty(2 * pairs, dtype=np.float64)
        inter[0::2] = z0
        inter[1::2] = z1
        out[start:] = inter[:need]
        if need % 2 == 1:
            self._spare = float(inter[need])
        return out

    def uniform_in(self, lo: float, hi: float, n: int) -> np.ndarray:
        """Next ``n`` uniforms mapped affinely onto [lo, hi)."""
        return lo + (hi - lo) * self.uniform(n)
