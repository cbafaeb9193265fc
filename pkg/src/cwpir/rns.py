"""Residue number system helpers for the BFV backend.

A big modulus Q = q_0 * ... * q_{L-1} is represented limb-wise; each limb is
an NTT-friendly prime between 2^29 and 2^30.  Polynomials are stored as
uint64 arrays of shape ``(components, L, N)``.
"""

from __future__ import annotations

from functools import cached_property
from math import prod

import numpy as np
import sympy

from . import _kernels
from .ring import ntt_tables

LIMB_BITS = 30


def ntt_primes(degree: int, count: int, skip: int = 0, bits: int = LIMB_BITS) -> list[int]:
    """Largest primes below 2^bits that are 1 mod 2N, in descending order."""
    step = 2 * degree
    out: list[int] = []
    cand = ((1 << bits) - 1) // step * step + 1
    floor = 1 << (bits - 1)
    while len(out) < count + skip:
        if cand <= floor:
            raise ValueError(f"ran out of {bits}-bit NTT primes for N={degree}")
        if sympy.isprime(cand):
            out.append(cand)
        cand -= step
    return out[skip:]


class RnsBase:
    """An ordered tuple of primes with NTT tables and CRT constants."""

    def __init__(self, degree: int, primes):
        self.degree = degree
        self.primes = tuple(int(p) for p in primes)
        for p in self.primes:
            if not (1 << 29) < p < (1 << 30):
                raise ValueError(f"limb {p} outside (2^29, 2^30)")
        self.size = len(self.primes)
        self.p = np.array(self.primes, dtype=np.uint64)
        self.col = self.p[:, None]
        self.modulus = prod(self.primes)
        self.mu = np.array([(1 << 60) // p for p in self.primes], dtype=np.uint64)
        tabs = [ntt_tables(degree, p) for p in self.primes]
        self.psi = np.stack([t.psi_rev for t in tabs])
        self.psi_sh = np.stack([t.psi_rev_shoup for t in tabs])
        self.ipsi = np.stack([t.ipsi_rev for t in tabs])
        self.ipsi_sh = np.stack([t.ipsi_rev_shoup for t in tabs])
        self.ninv = np.array([t.n_inv for t in tabs], dtype=np.uint64)
        self.ninv_sh = np.array([t.n_inv_shoup for t in tabs], dtype=np.uint64)
        self.qhat = [self.modulus // p for p in self.primes]
        self.qhat_inv = np.array(
            [pow(h % p, -1, p) for h, p in zip(self.qhat, self.primes)], dtype=np.uint64
        )
        self.inv_f = np.array([1.0 / p for p in self.primes], dtype=np.float64)

    def __repr__(self) -> str:
        return f"RnsBase(N={self.degree}, limbs={self.size}, bits={self.modulus.bit_length()})"

    # transforms (in place on a fresh copy)
    def ntt(self, x: np.ndarray) -> np.ndarray:
        out = np.ascontiguousarray(x, dtype=np.uint64).copy()
        _kernels.ntt_forward(out, self.p, self.psi, self.psi_sh)
        return out

    def intt(self, x: np.ndarray) -> np.ndarray:
        out = np.ascontiguousarray(x, dtype=np.uint64).copy()
        _kernels.ntt_inverse(out, self.p, self.ipsi, self.ipsi_sh, self.ninv, self.ninv_sh)
        return out

    # elementwise arithmetic on (C, L, N) arrays
    def add(self, a, b):
        s = a + b
        return np.where(s >= self.col, s - self.col, s)

    def sub(self, a, b):
        return np.where(a >= b, a - b, a + self.col - b)

    def neg(self, a):
        return np.where(a == 0, a, self.col - a)

    def mul(self, a, b):
        """Pointwise product of ``a`` (C, L, N) with ``b`` (L, N)."""
        a = np.ascontiguousarray(a)
        if a.ndim == 2:
            return _kernels.mulmod(a[None], np.ascontiguousarray(b), self.p, self.mu)[0]
        return _kernels.mulmod(a, np.ascontiguousarray(b), self.p, self.mu)

    def mul_scalar(self, a, scalars):
        """Multiply limb ``i`` by ``scalars[i]`` (already reduced)."""
        s = np.asarray(scalars, dtype=np.uint64).reshape(-1, 1)
        return (a * s) % self.col

    # conversions
    def from_signed(self, values) -> np.ndarray:
        """Residues (L, N) of an int64 (or Python-int) coefficient vector."""
        v = np.asarray(values)
        if v.dtype == object:
            return np.array([[int(c) % p for c in v] for p in self.primes], dtype=np.uint64)
        v = v.astype(np.int64)
        return np.stack([(v % p).astype(np.uint64) for p in self.primes])

    def from_int(self, value: int) -> np.ndarray:
        """Per-limb residues of one integer, shape (L, 1)."""
        return np.array([value % p for p in self.primes], dtype=np.uint64).reshape(-1, 1)

    def reconstruct(self, x: np.ndarray, centered: bool = False) -> list[int]:
        """CRT-reconstruct an (L, N) residue array into Python integers."""
        y = (x * self.qhat_inv[:, None]) % self.col
        acc = np.zeros(x.shape[1], dtype=object)
        for h, row in zip(self.qhat, y):
            acc = acc + row.astype(object) * h
        vals = [int(v) % self.modulus for v in acc]
        if centered:
            half = self.modulus // 2
            vals = [v - self.modulus if v > half else v for v in vals]
        return vals


class BaseConverter:
    """Centered conversion between two coprime RNS bases.

    The rounding of sum(y_i / q_i) is done in double precision, so values
    within about A * 2^-45 of +-A/2 may come out shifted by A.  For the
    uniform inputs of BFV this happens with probability near 2^-45 per
    coefficient, and a shift by A only adds noise of the same order as the
    multiplication that triggered the conversion.
    """

    def __init__(self, src: RnsBase, dst: RnsBase):
        self.src, self.dst = src, dst
        self.conv = np.array(
            [[h % p for p in dst.primes] for h in src.qhat], dtype=np.uint64
        )
        self.src_mod = np.array([src.modulus % p for p in dst.primes], dtype=np.uint64)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        """Map residues of integers in (-A/2, A/2] from base A to base B (see class note)."""
        x = np.ascontiguousarray(x, dtype=np.uint64)
        squeeze = x.ndim == 2
        if squeeze:
            x = x[None]
        out = _kernels.basis_extend(
            x, self.src.p, self.src.qhat_inv, self.src.inv_f, self.conv, self.src_mod, self.dst.p
        )
        return out[0] if squeeze else out


class RnsChain:
    """Data base Q, key-switching prime, and the multiplication extension base P."""

    def __init__(self, degree: int, data_limbs: int, ext_limbs: int):
        primes = ntt_primes(degree, data_limbs + 1 + ext_limbs)
        self.degree = degree
        self.q = RnsBase(degree, primes[:data_limbs])
        self.special = primes[data_limbs]
        self.qs = RnsBase(degree, primes[: data_limbs + 1])
        self.p = RnsBase(degree, primes[data_limbs + 1 :])
        self.qp = RnsBase(degree, primes[:data_limbs] + primes[data_limbs + 1 :])

    @cached_property
    def q_to_p(self) -> BaseConverter:
        return BaseConverter(self.q, self.p)

    @cached_property
    def p_to_q(self) -> BaseConverter:
        return BaseConverter(self.p, self.q)
