"""Deterministic seeded randomness and k-wise independent polynomial hashing.

The generator is counter-based SplitMix64: output ``i`` of a stream with seed
``z`` is ``mix64(z + (i+1) * GOLDEN)`` where ``GOLDEN = 0x9E3779B97F4A7C15``
and ``mix64`` is the standard SplitMix64 finalizer
(xor-shift 30, * 0xBF58476D1CE4E5B9, xor-shift 27, * 0x94D049BB133111EB,
xor-shift 31).  Because the state is a pure function of the counter, blocks of
outputs vectorize over numpy uint64 arrays and the sequence is identical on
every platform.

Streams split by stream id, never by position:
``child_seed = mix64(seed ^ mix64((stream_id + GOLDEN) mod 2^64))``.
Both inner maps are bijections on 64-bit integers, so distinct ids give
distinct child seeds, and a child depends only on (parent seed, id), not on
how much the parent has drawn.

Normal variates come from Box-Muller on consecutive uniform pairs (u1 shifted
into (0,1] so the log is always finite); the pair (z0, z1) is emitted in
order.  Bounded integers use bitmask rejection sampling, which is exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

#: Default field modulus for hash families: the Mersenne prime 2^61 - 1.
MERSENNE61 = (1 << 61) - 1


def mix64(z: int) -> int:
    """SplitMix64 finalizer on a 64-bit integer (pure Python, exact)."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def _mix64_array(z: np.ndarray) -> np.ndarray:
    out = z.astype(np.uint64, copy=True)
    with np.errstate(over="ignore"):
        out ^= out >> np.uint64(30)
        out *= np.uint64(0xBF58476D1CE4E5B9)
        out ^= out >> np.uint64(27)
        out *= np.uint64(0x94D049BB133111EB)
        out ^= out >> np.uint64(31)
    return out


class Prng:
    """Counter-based SplitMix64 stream, reproducible from (seed, stream_id)."""

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = seed & _MASK64
        self.stream_id = stream_id & _MASK64
        self.counter = 0

    def __repr__(self):
        return f"Prng(seed={self.seed:#018x}, stream_id={self.stream_id}, counter={self.counter})"

    def split(self, stream_id: int) -> "Prng":
        """Child stream determined by (self.seed, stream_id) only.

        Splitting is independent of the parent's position, and splitting the
        same id twice gives the same stream.
        """
        child_seed = mix64(self.seed ^ mix64((stream_id + _GOLDEN) & _MASK64))
        child = Prng(child_seed, stream_id=stream_id & _MASK64)
        return child

    def raw(self, n: int) -> np.ndarray:
        """Next ``n`` raw 64-bit outputs as a uint64 array."""
        start = self.counter + 1
        self.counter += n
        idx = np.arange(start, start + n, dtype=np.uint64)
        with np.errstate(over="ignore"):
            state = idx * np.uint64(_GOLDEN) + np.uint64(self.seed)
        return _mix64_array(state)

    def next_u64(self) -> int:
        self.counter += 1
        return mix64((self.seed + self.counter * _GOLDEN) & _MASK64)

    def uniform(self, n: int) -> np.ndarray:
        """``n`` doubles uniform on [0, 1), 53-bit resolution."""
        return (self.raw(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def normal(self, n: int) -> np.ndarray:
        """``n`` standard normal variates via Box-Muller."""
        pairs = (n + 1) // 2
        u = self.raw(2 * pairs)
        u1 = ((u[:pairs] >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53
        u2 = (u[pairs:] >> np.uint64(11)).astype(np.float64) * 2.0**-53
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        out = np.empty(2 * pairs)
        out[0::2] = r * np.cos(theta)
        out[1::2] = r * np.sin(theta)
        return out[:n]

    def integers_below(self, bound: int, n: int) -> np.ndarray:
        """``n`` exact uniform integers in [0, bound) via bitmask rejection."""
        if bound < 1:
            raise ValueError(f"bound must be >= 1, got {bound}")
        if bound == 1:
            return np.zeros(n, dtype=np.int64)
        mask = np.uint64((1 << (bound - 1).bit_length()) - 1)
        out = np.empty(n, dtype=np.int64)
        filled = 0
        while filled < n:
            need = n - filled
            cand = (self.raw(need) & mask).astype(np.int64)
            good = cand[cand < bound]
            out[filled:filled + len(good)] = good
            filled += len(good)
        return out

    def int_below(self, bound: int) -> int:
        return int(self.integers_below(bound, 1)[0])

    def signs(self, n: int) -> np.ndarray:
        """``n`` values in {-1.0, +1.0}, one raw draw per value (bit 0)."""
        return np.where(self.raw(n) & np.uint64(1), 1.0, -1.0)

    def subset(self, n: int, k: int) -> np.ndarray:
        """Uniform k-subset of range(n) without replacement (partial Fisher-Yates)."""
        if not 0 <= k <= n:
            raise ValueError(f"need 0 <= k <= n, got k={k}, n={n}")
        pool = np.arange(n, dtype=np.int64)
        for i in range(k):
            j = i + self.int_below(n - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]


@dataclass(frozen=True)
class KwiseHash:
    """Polynomial hash over a prime field: h(x) = (sum_i c_i x^i mod p) mod range.

    Coefficients drawn uniformly from [0, p) give a gamma-wise independent
    family over the field (before the final reduction mod ``out_range``).
    With the default prime 2^61 - 1 the reduction bias is below range/p and
    is ignored; tiny primes exist for exhaustive enumeration tests.
    """

    gamma: int
    prime: int
    coefficients: tuple[int, ...]
    out_range: int

    @classmethod
    def sample(cls, gamma: int, out_range: int, rng: Prng, prime: int = MERSENNE61) -> "KwiseHash":
        if gamma < 1:
            raise ValueError(f"gamma must be >= 1, got {gamma}")
        if out_range < 1:
            raise ValueError(f"out_range must be >= 1, got {out_range}")
        if prime < 2:
            raise ValueError(f"prime must be >= 2, got {prime}")
        coeffs = tuple(int(c) for c in rng.integers_below(prime, gamma))
        return cls(gamma=gamma, prime=prime, coefficients=coeffs, out_range=out_range)

    def __call__(self, x: int) -> int:
        if not 0 <= x < self.prime:
            raise ValueError(f"hash input {x} outside field [0, {self.prime})")
        acc = 0
        for c in reversed(self.coefficients):
            acc = (acc * x + c) % self.prime
        return acc % self.out_range

    def eval_many(self, xs) -> np.ndarray:
        """Vectorized evaluation; inputs must all lie in [0, prime)."""
        p, rng_out = self.prime, self.out_range
        out = np.empty(len(xs), dtype=np.int64)
        for idx, x in enumerate(xs):
            x = int(x)
            if not 0 <= x < p:
                raise ValueError(f"hash input {x} outside field [0, {p})")
            acc = 0
            for c in reversed(self.coefficients):
                acc = (acc * x + c) % p
            out[idx] = acc % rng_out
        return out
