"""Homomorphic equality operators over bit-sliced, slot-batched operands.

A :class:`BitSlicedBatch` of width w holds w ciphertexts; ciphertext j
carries bit j of every slot's element, so one circuit evaluation compares
up to N elements at once.  All products are balanced binary trees, which
gives depth ceil(log2 of the factor count).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .backend import CipherValue, HeBackend
from .cwcode import Codeword
from .encoding import batch_encode
from .errors import ParameterMismatch


@dataclass(frozen=True)
class BitSlicedBatch:
    cts: tuple

    @property
    def width(self) -> int:
        return len(self.cts)

    @classmethod
    def encrypt(cls, backend: HeBackend, elements: Sequence[int], width: int) -> "BitSlicedBatch":
        """Bit-slice up to N integers (or codeword bit patterns) of ``width`` bits."""
        ring = backend.plain_ring
        vals = [int(e) for e in elements]
        if any(v >> width for v in vals):
            raise ValueError(f"element wider than {width} bits")
        cts = tuple(
            backend.encrypt(batch_encode([(v >> j) & 1 for v in vals], ring)) for j in range(width)
        )
        return cls(cts)


def ceil_log2(x: int) -> int:
    return 0 if x <= 1 else math.ceil(math.log2(x)) if x & (x - 1) else x.bit_length() - 1


def product_tree(backend: HeBackend, factors: Sequence[CipherValue]) -> CipherValue:
    """Balanced pairwise product: len-1 multiplications, depth ceil(log2 len)."""
    layer = list(factors)
    if not layer:
        raise ValueError("empty product")
    while len(layer) > 1:
        nxt = [backend.mul(layer[i], layer[i + 1]) for i in range(0, len(layer) - 1, 2)]
        if len(layer) % 2:
            nxt.append(layer[-1])
        layer = nxt
    return layer[0]


def _one_minus(backend: HeBackend, c: CipherValue) -> CipherValue:
    # 1 - c == -(c - 1)
    return backend.negate(backend.add_plain(c, backend.constant(-1)))


def plain_folklore_eq(backend: HeBackend, x: BitSlicedBatch, y: int) -> CipherValue:
    """prod_{y_i=0} (1 - x_i) * prod_{y_i=1} x_i against a clear ell-bit value."""
    ell = x.width
    if y < 0 or y >> ell:
        raise ParameterMismatch(f"y does not fit in {ell} bits")
    factors = [x.cts[i] if y >> i & 1 else _one_minus(backend, x.cts[i]) for i in range(ell)]
    return product_tree(backend, factors)


def arith_folklore_eq(backend: HeBackend, x: BitSlicedBatch, y: BitSlicedBatch) -> CipherValue:
    """prod_i (1 - (x_i - y_i)^2) for two encrypted ell-bit operands."""
    if x.width != y.width:
        raise ParameterMismatch(f"widths differ: {x.width} vs {y.width}")
    factors = []
    for a, b in zip(x.cts, y.cts):
        d = backend.sub(a, b)
        factors.append(_one_minus(backend, backend.mul(d, d)))
    return product_tree(backend, factors)


def plain_cw_eq(backend: HeBackend, x: BitSlicedBatch, y: Codeword, weight: int | None = None) -> CipherValue:
    """Product of the k ciphertexts selected by the clear codeword y."""
    if y.length != x.width:
        raise ParameterMismatch(f"codeword length {y.length} != width {x.width}")
    if weight is not None and y.weight != weight:
        raise ValueError(f"codeword weight {y.weight} != {weight}")
    return product_tree(backend, [x.cts[j] for j in y.positions()])


def arith_cw_eq(backend: HeBackend, x: BitSlicedBatch, y: BitSlicedBatch, k: int) -> CipherValue:
    """(1/k!) prod_{i<k} (k' - i) with k' = <x, y>; needs t > k."""
    if x.width != y.width:
        raise ParameterMismatch(f"widths differ: {x.width} vs {y.width}")
    t = backend.params.plain_modulus
    if k >= t:
        raise ValueError(f"k!={k}! is not invertible mod t={t}")
    kp = backend.add_many([backend.mul(a, b) for a, b in zip(x.cts, y.cts)])
    factors = [kp] + [backend.add_plain(kp, backend.constant(-i)) for i in range(1, k)]
    e = product_tree(backend, factors)
    return backend.plain_mul(backend.constant(pow(math.factorial(k), -1, t)), e)
