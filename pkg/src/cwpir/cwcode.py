"""Constant-weight codes CW(m, k): sizing, perfect mapping and lossy mapping.

Codewords are stored as Python ints used as bit vectors; bit ``i`` of the
integer is position ``y[i]`` of the codeword.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from functools import lru_cache
from math import comb


@lru_cache(maxsize=65536)
def binom(m: int, k: int) -> int:
    """Exact binomial coefficient, 0 when k > m or k < 0."""
    if k < 0 or m < 0 or k > m:
        return 0
    return comb(m, k)


@dataclass(frozen=True)
class CodeSpec:
    length: int
    weight: int

    def __post_init__(self):
        if not 1 <= self.weight <= self.length:
            raise ValueError(f"need 1 <= k <= m, got m={self.length}, k={self.weight}")

    @property
    def capacity(self) -> int:
        return binom(self.length, self.weight)

    @classmethod
    def for_domain(cls, n: int, k: int) -> "CodeSpec":
        return cls(min_code_length(n, k), k)


@dataclass(frozen=True)
class Codeword:
    """A weight-k bit string of length m."""

    length: int
    bits: int
    weight: int = field(init=False)

    def __post_init__(self):
        if self.bits < 0 or self.bits >> self.length:
            raise ValueError(f"bits do not fit in length {self.length}")
        object.__setattr__(self, "weight", self.bits.bit_count())

    @classmethod
    def from_positions(cls, length: int, positions) -> "Codeword":
        bits = 0
        for p in positions:
            if not 0 <= p < length:
                raise ValueError(f"position {p} outside [0, {length})")
            bits |= 1 << p
        return cls(length, bits)

    @classmethod
    def from_list(cls, bits) -> "Codeword":
        return cls.from_positions(len(bits), [i for i, b in enumerate(bits) if b])

    def bit(self, i: int) -> int:
        return (self.bits >> i) & 1

    def positions(self) -> list[int]:
        out, b = [], self.bits
        while b:
            low = b & -b
            out.append(low.bit_length() - 1)
            b ^= low
        return out

    def to_list(self) -> list[int]:
        return [self.bit(i) for i in range(self.length)]

    def __int__(self) -> int:
        return self.bits

    def __str__(self) -> str:
        return format(self.bits, f"0{self.length}b")


def min_code_length(n: int, k: int) -> int:
    """Smallest m with C(m, k) >= n."""
    if n < 1 or k < 1:
        raise ValueError(f"need n >= 1 and k >= 1, got n={n}, k={k}")
    if k == 1:
        return n
    lo, hi = k, k
    while binom(hi, k) < n:
        lo, hi = hi, hi * 2
    while lo < hi:
        mid = (lo + hi) // 2
        if binom(mid, k) >= n:
            hi = mid
        else:
            lo = mid + 1
    return lo


@dataclass
class MapTrace:
    """Loop instrumentation for the perfect mapping."""

    iterations: int = 0
    bits_set: int = 0


def perfect_map(x: int, spec: CodeSpec, trace: MapTrace | None = None) -> Codeword:
    """Order-preserving bijection [C(m,k)] -> CW(m,k) (greedy colex descent).

    For each remaining weight h the highest free position p with
    C(p, h) <= r is found by binary search, so a map costs O(k log m)
    binomials instead of a scan over all m positions.  Complementing a
    bitmask reverses integer order and maps CW(m, k) onto CW(m, m-k), so
    weights above m/2 are handled through the complement.
    """
    m, k = spec.length, spec.weight
    if not 0 <= x < spec.capacity:
        raise ValueError(f"x={x} outside [0, C({m},{k})={spec.capacity})")
    if 2 * k > m:
        low = perfect_map(spec.capacity - 1 - x, CodeSpec(m, m - k), trace) if k < m else Codeword(m, 0)
        return Codeword(m, low.bits ^ ((1 << m) - 1))
    r, bits, top = x, 0, m
    for h in range(k, 0, -1):
        # C(h-1, h) = 0 <= r, so the search interval is never empty
        lo, hi = h - 1, top - 1
        while lo < hi:
            if trace is not None:
                trace.iterations += 1
            mid = (lo + hi + 1) // 2
            if comb(mid, h) <= r:
                lo = mid
            else:
                hi = mid - 1
        bits |= 1 << lo
        r -= comb(lo, h)
        top = lo
        if trace is not None:
            trace.bits_set += 1
    return Codeword(m, bits)


def perfect_unmap(y: Codeword, weight: int | None = None) -> int:
    """Inverse of :func:`perfect_map`."""
    if weight is not None and y.weight != weight:
        raise ValueError(f"codeword weight {y.weight} != {weight}")
    m, k = y.length, y.weight
    if 2 * k > m:
        return comb(m, k) - 1 - perfect_unmap(Codeword(m, y.bits ^ ((1 << m) - 1)))
    x = 0
    for h, pos in enumerate(y.positions(), start=1):
        x += comb(pos, h)
    return x


def _prf(seed: bytes, i: int, x: bytes) -> int:
    h = hashlib.blake2b(i.to_bytes(8, "little") + x, key=seed[:64], digest_size=8)
    return int.from_bytes(h.digest(), "little")


def lossy_map(x: bytes, spec: CodeSpec, seed: bytes) -> Codeword:
    """Hash an arbitrary byte string onto CW(m, k).

    Positions H_i(x) = PRF(seed, i || x) mod m are drawn until k distinct
    ones are set; draws are capped at 64 m.
    """
    m, k = spec.length, spec.weight
    bits, have = 0, 0
    for i in range(64 * m):
        pos = _prf(seed, i, x) % m
        if not bits >> pos & 1:
            bits |= 1 << pos
            have += 1
            if have == k:
                return Codeword(m, bits)
    raise RuntimeError(f"lossy map did not reach weight {k} within {64 * m} draws")

