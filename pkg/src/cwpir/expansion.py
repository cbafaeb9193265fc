"""Oblivious expansion of coefficient-packed query ciphertexts.

:func:`expand` is the production path: one substitution and two monomial
multiplications per tree node, with the 2^-c scaling already applied by the
client.  :func:`expand_sealpir_reference` is the classical two-substitution
variant with a final multiplication by 2^-c, kept as a test oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .backend import CipherValue, HeBackend, expansion_galois_elements
from .errors import MissingGaloisKey
from .parallel import pmap
from .ring import RingElement


@dataclass(frozen=True)
class PackedQuery:
    """h = ceil(m / 2^c) ciphertexts, each carrying 2^c scaled query bits."""

    cts: tuple
    compression: int
    code_length: int

    def __post_init__(self):
        if self.compression < 0:
            raise ValueError("compression factor must be non-negative")
        if len(self.cts) != packed_count(self.code_length, self.compression):
            raise ValueError(
                f"expected {packed_count(self.code_length, self.compression)} ciphertexts, got {len(self.cts)}"
            )


@dataclass(frozen=True)
class ExpandedQuery:
    """m ciphertexts, entry j encrypting the constant bit j of the query."""

    cts: tuple

    def __len__(self) -> int:
        return len(self.cts)

    def __getitem__(self, j: int) -> CipherValue:
        return self.cts[j]


def packed_count(m: int, c: int) -> int:
    return -(-m // (1 << c))


def _check_c(backend: HeBackend, c: int) -> None:
    n = backend.params.degree
    if not 0 <= c <= int(math.log2(n)):
        raise ValueError(f"compression c={c} outside [0, log2 N={int(math.log2(n))}]")


def _check_keys(backend: HeBackend, c: int) -> None:
    keys = getattr(backend, "keys", None)
    if keys is None:
        return
    for g in expansion_galois_elements(backend.params.degree, c):
        if not keys.has_galois(g):
            raise MissingGaloisKey(g)


def _expand_one(backend: HeBackend, ct: CipherValue, c: int) -> list:
    n = backend.params.degree
    ring = backend.plain_ring
    cts = [ct]
    for a in range(c):
        g = n // (1 << a) + 1
        shift = RingElement.monomial(ring, -(1 << a))

        def node(b, g=g, shift=shift):
            c0 = backend.substitute(cts[b], g)
            c1 = backend.plain_mul(shift, c0)
            hi = backend.plain_mul(shift, cts[b])
            return backend.add(cts[b], c0), backend.sub(hi, c1)

        pairs = pmap(node, range(1 << a))
        cts = [p[0] for p in pairs] + [p[1] for p in pairs]
    return cts


def expand(pq: PackedQuery, backend: HeBackend) -> ExpandedQuery:
    """Expand every packed ciphertext and keep the first m outputs."""
    c = pq.compression
    _check_c(backend, c)
    _check_keys(backend, c)
    out = []
    for ct in pq.cts:
        out.extend(_expand_one(backend, ct, c))
    return ExpandedQuery(tuple(out[: pq.code_length]))


def expand_sealpir_reference(ct: CipherValue, c: int, backend: HeBackend) -> list:
    """Reference expansion of a single unscaled ciphertext into 2^c outputs."""
    _check_c(backend, c)
    _check_keys(backend, c)
    n = backend.params.degree
    ring = backend.plain_ring
    t = backend.params.plain_modulus
    cts = [ct]
    for a in range(c):
        g = n // (1 << a) + 1
        shift = RingElement.monomial(ring, -(1 << a))
        lo, hi = [], []
        for b in range(1 << a):
            c0 = cts[b]
            c1 = backend.plain_mul(shift, c0)
            lo.append(backend.add(c0, backend.substitute(c0, g)))
            hi.append(backend.add(c1, backend.substitute(c1, g)))
        cts = lo + hi
    inv = RingElement.constant(ring, pow(1 << c, -1, t))
    return [backend.plain_mul(inv, x) for x in cts]
