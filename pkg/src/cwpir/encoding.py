"""Plaintext encodings over R_t: SIMD slots (batching) and coefficient packing."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .ring import RingElement, RingParams, intt_array, ntt_array


def batch_encode(values: Sequence[int], ring: RingParams) -> RingElement:
    """Encode up to N slot values so that ring products act slot-wise.

    Slot ``i`` is the evaluation of the polynomial at the i-th negacyclic
    root in the NTT's (bit-reversed) output order.
    """
    if not ring.ntt_enabled:
        raise ValueError(f"t={ring.modulus} is not 1 mod 2N; batching unavailable")
    vals = np.zeros(ring.degree, dtype=object)
    if len(values) > ring.degree:
        raise ValueError(f"{len(values)} values exceed {ring.degree} slots")
    vals[: len(values)] = [int(v) % ring.modulus for v in values]
    return RingElement(ring, intt_array(vals.astype(ring.dtype), ring))


def batch_decode(p: RingElement) -> list[int]:
    if not p.params.ntt_enabled:
        raise ValueError("batching unavailable for this plaintext modulus")
    return [int(v) for v in ntt_array(p.coeffs, p.params)]


def coeff_encode(chunks: Sequence[int], ring: RingParams) -> RingElement:
    """Place chunk j in coefficient j."""
    if len(chunks) > ring.degree:
        raise ValueError(f"{len(chunks)} chunks exceed degree {ring.degree}")
    out = np.zeros(ring.degree, dtype=np.uint64 if ring.fast else object)
    for j, c in enumerate(chunks):
        c = int(c)
        if not 0 <= c < ring.modulus:
            raise ValueError(f"chunk {j} = {c} does not fit below t={ring.modulus}")
        out[j] = c
    return RingElement(ring, out)


def coeff_decode(p: RingElement, count: int | None = None) -> list[int]:
    vals = p.to_list()
    return vals if count is None else vals[:count]


def bytes_to_chunks(data: bytes, bits: int) -> list[int]:
    """Split a byte string into little-endian ``bits``-wide integers."""
    total = int.from_bytes(data, "little")
    count = -(-len(data) * 8 // bits)
    mask = (1 << bits) - 1
    return [(total >> (bits * i)) & mask for i in range(count)]


def chunks_to_bytes(chunks: Sequence[int], bits: int, length: int) -> bytes:
    total = 0
    for i, c in enumerate(chunks):
        total |= int(c) << (bits * i)
    return (total & ((1 << (8 * length)) - 1)).to_bytes(length, "little")
