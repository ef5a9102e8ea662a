"""Deterministic 64-bit random stream used by every stochastic component.

The generator is a counter-based SplitMix64: output i of a stream with seed s
is ``finalize(s + (i + 1) * GOLDEN) mod 2**64``.  Because outputs are a pure
function of (seed, index), blocks of any size can be produced with numpy
without changing the stream, and an independent implementation of the same
scheme reproduces every draw bit for bit.

Conventions fixed here (and relied on across the package):

* uniforms: ``(raw >> 11) * 2**-53`` in [0, 1).
* Gaussians: Marsaglia polar method.  Consecutive uniform pairs
  (u_{2i}, u_{2i+1}) are mapped to v = 2u - 1; a pair is accepted when
  0 < v1^2 + v2^2 < 1 and yields two normals in order (v1*f, v2*f) with
  f = sqrt(-2 ln s / s).  Accepted normals are delivered in acceptance
  order; an odd leftover is buffered, never discarded.
* bounded ints: rejection sampling from the top of the 64-bit range
  (draw until raw < 2**64 - 2**64 % n, return raw % n), so there is no
  modulo bias and the consumed-draw count is part of the stream contract.
* shuffling / sampling without replacement: Fisher-Yates from the front,
  i.e. for i = 0..m-1 swap position i with position i + randbelow(len - i);
  the first k positions after k steps are a uniform draw without
  replacement, in draw order.

Streams for distinct purposes are derived, never shared: ``derive_seed``
chains the SplitMix64 finalizer over integer path components, and each
consumer opens its own ``Stream`` at counter zero.  Interleaving two
consumers on one stream would make draw order depend on call order, which
is exactly what this module exists to rule out.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

_U64_GOLDEN = np.uint64(_GOLDEN)
_U64_MIX1 = np.uint64(_MIX1)
_U64_MIX2 = np.uint64(_MIX2)


def mix64(z: int) -> int:
    """SplitMix64 finalizer on a Python int, mod 2**64."""
    z &= _MASK
    z = (z ^ (z >> 30)) * _MIX1 & _MASK
    z = (z ^ (z >> 27)) * _MIX2 & _MASK
    return z ^ (z >> 31)


def derive_seed(master: int, *path: int) -> int:
    """Derive a child seed from a master seed and an integer path.

    The chain is ``s = mix64(master + GOLDEN)`` then, per component c,
    ``s = mix64(s ^ mix64(c + GOLDEN))``.  Order-sensitive, so
    derive(m, a, b) != derive(m, b, a); the GOLDEN offsets keep zero
    inputs away from the finalizer's 0 -> 0 fixed point.
    """
    s = mix64((master + _GOLDEN) & _MASK)
    for c in path:
        s = mix64(s ^ mix64((c + _GOLDEN) & _MASK))
    return s


def _finalize_block(z: np.ndarray) -> np.ndarray:
    z = z ^ (z >> np.uint64(30))
    z = z * _U64_MIX1
    z = z ^ (z >> np.uint64(27))
    z = z * _U64_MIX2
    return z ^ (z >> np.uint64(31))


class Stream:
    """One consumer's view of the counter-based SplitMix64 sequence."""

    def __init__(self, seed: int):
        self._seed = seed & _MASK
        self._count = 0
        self._spare = np.empty(0)  # accepted-but-undelivered normals

    @property
    def seed(self) -> int:
        return self._seed

    def spawn(self, *path: int) -> "Stream":
        """Independent child stream; does not consume from this one."""
        return Stream(derive_seed(self._seed, *path))

    # -- raw draws ---------------------------------------------------------

    def _raw_block(self, n: int) -> np.ndarray:
        idx = np.arange(self._count + 1, self._count + n + 1, dtype=np.uint64)
        self._count += n
        with np.errstate(over="ignore"):
            z = idx * _U64_GOLDEN + np.uint64(self._seed)
            return _finalize_block(z)

    def _raw_one(self) -> int:
        self._count += 1
        return mix64((self._seed + self._count * _GOLDEN) & _MASK)

    # -- typed draws -------------------------------------------------------

    def uniforms(self, n: int) -> np.ndarray:
        """n doubles in [0, 1) with 53-bit resolution."""
        raw = self._raw_block(n)
        return (raw >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def normals(self, n: int) -> np.ndarray:
        """n standard normals via the polar method (see module docstring)."""
        out = np.empty(n)
        have = min(n, self._spare.size)
        out[:have] = self._spare[:have]
        self._spare = self._spare[have:]
        while have < n:
            missing = n - have
            # ~pi/4 of pairs accept; oversample a little to cut iterations.
            npairs = max(int(missing * 0.7) + 16, 16)
            u = self.uniforms(2 * npairs)
            v = 2.0 * u - 1.0
            v1, v2 = v[0::2], v[1::2]
            s = v1 * v1 + v2 * v2
            ok = (s > 0.0) & (s < 1.0)
            f = np.sqrt(-2.0 * np.log(s[ok]) / s[ok])
            pair = np.empty(2 * int(ok.sum()))
            pair[0::2] = v1[ok] * f
            pair[1::2] = v2[ok] * f
            take = min(missing, pair.size)
            out[have : have + take] = pair[:take]
            have += take
            if take < pair.size:
                self._spare = pair[take:]
        return out

    def randbelow(self, n: int) -> int:
        """Uniform int in [0, n) by rejection from the top of the range."""
        if n <= 0:
            raise ValueError("randbelow needs n >= 1")
        limit = _MASK + 1 - (_MASK + 1) % n
        while True:
            raw = self._raw_one()
            if raw < limit:
                return raw % n

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle (front-to-back, see docstring)."""
        m = len(items)
        for i in range(m - 1):
            j = i + self.randbelow(m - i)
            items[i], items[j] = items[j], items[i]

    def permutation(self, m: int) -> list[int]:
        idx = list(range(m))
        self.shuffle(idx)
        return idx

    def sample_indices(self, pool_size: int, k: int) -> list[int]:
        """k distinct indices from [0, pool_size), in draw order."""
        if k > pool_size:
            raise ValueError("cannot sample more indices than the pool holds")
        idx = list(range(pool_size))
        for i in range(k):
            j = i + self.randbelow(pool_size - i)
            idx[i], idx[j] = idx[j], idx[i]
        return idx[:k]
