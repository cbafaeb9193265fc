"""Arithmetic in R_q = Z_q[x]/(x^N + 1).

Coefficients are stored as canonical residues in ``[0, q)``.  Moduli below
2^31 use uint64 arrays and the compiled NTT; wider moduli (up to 62 bits)
fall back to Python-integer arrays with a vectorised NTT.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
import sympy

from . import _kernels
from .errors import ParameterMismatch

FAST_MODULUS_LIMIT = 1 << 31
MAX_MODULUS_BITS = 62


def is_power_of_two(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


def bit_reverse(i: int, bits: int) -> int:
    return int(format(i, f"0{bits}b")[::-1], 2) if bits else 0


@dataclass(frozen=True)
class RingParams:
    """Degree ``N`` (a power of two) and odd prime modulus ``q``."""

    degree: int
    modulus: int

    def __post_init__(self):
        if not is_power_of_two(self.degree) or self.degree < 2:
            raise ValueError(f"degree must be a power of two >= 2, got {self.degree}")
        q = self.modulus
        if q < 3 or q % 2 == 0 or not sympy.isprime(q):
            raise ValueError(f"modulus must be an odd prime, got {q}")
        if q.bit_length() > MAX_MODULUS_BITS:
            raise ValueError(f"modulus wider than {MAX_MODULUS_BITS} bits")

    @property
    def ntt_enabled(self) -> bool:
        return (self.modulus - 1) % (2 * self.degree) == 0

    @property
    def fast(self) -> bool:
        return self.modulus < FAST_MODULUS_LIMIT

    @property
    def dtype(self):
        return np.uint64 if self.fast else object

    @cached_property
    def tables(self) -> "NttTables":
        if not self.ntt_enabled:
            raise ValueError(f"q={self.modulus} is not 1 mod 2N for N={self.degree}")
        return ntt_tables(self.degree, self.modulus)


@dataclass(frozen=True, eq=False)
class NttTables:
    """Twiddles for the negacyclic NTT of one prime, in bit-reversed order."""

    degree: int
    modulus: int
    psi: int
    psi_rev: np.ndarray
    psi_rev_shoup: np.ndarray
    ipsi_rev: np.ndarray
    ipsi_rev_shoup: np.ndarray
    n_inv: int
    n_inv_shoup: int


def find_psi(n: int, q: int) -> int:
    """Smallest primitive 2n-th root of unity mod q (deterministic)."""
    if (q - 1) % (2 * n):
        raise ValueError("no 2N-th root of unity")
    exp = (q - 1) // (2 * n)
    for g in range(2, q):
        psi = pow(g, exp, q)
        if pow(psi, n, q) == q - 1:
            return psi
    raise ValueError("no primitive root found")


@lru_cache(maxsize=None)
def ntt_tables(n: int, q: int) -> NttTables:
    psi = find_psi(n, q)
    ipsi = pow(psi, -1, q)
    bits = n.bit_length() - 1
    rev = [bit_reverse(i, bits) for i in range(n)]
    fw = [pow(psi, r, q) for r in rev]
    iv = [pow(ipsi, r, q) for r in rev]
    n_inv = pow(n, -1, q)
    if q < FAST_MODULUS_LIMIT:
        fw_a = np.array(fw, dtype=np.uint64)
        iv_a = np.array(iv, dtype=np.uint64)
        fw_s = np.array([(w << 32) // q for w in fw], dtype=np.uint64)
        iv_s = np.array([(w << 32) // q for w in iv], dtype=np.uint64)
    else:
        fw_a, iv_a = np.array(fw, dtype=object), np.array(iv, dtype=object)
        fw_s = iv_s = np.zeros(0, dtype=np.uint64)
    for arr in (fw_a, iv_a, fw_s, iv_s):
        arr.setflags(write=False)
    return NttTables(n, q, psi, fw_a, fw_s, iv_a, iv_s, n_inv, (n_inv << 32) // q)


def _ntt_object(a: np.ndarray, tab: NttTables) -> np.ndarray:
    q, n = tab.modulus, tab.degree
    a = a.copy()
    t, m = n, 1
    while m < n:
        t //= 2
        blocks = a.reshape(m, 2, t)
        s = tab.psi_rev[m : 2 * m][:, None]
        u = blocks[:, 0, :]
        v = (blocks[:, 1, :] * s) % q
        a = np.stack([(u + v) % q, (u - v) % q], axis=1).reshape(n)
        m *= 2
    return a


def _intt_object(a: np.ndarray, tab: NttTables) -> np.ndarray:
    q, n = tab.modulus, tab.degree
    a = a.copy()
    t, m = 1, n
    while m > 1:
        h = m // 2
        blocks = a.reshape(h, 2, t)
        s = tab.ipsi_rev[h:m][:, None]
        u, v = blocks[:, 0, :], blocks[:, 1, :]
        a = np.stack([(u + v) % q, ((u - v) * s) % q], axis=1).reshape(n)
        t *= 2
        m = h
    return (a * tab.n_inv) % q


def ntt_array(coeffs: np.ndarray, params: RingParams) -> np.ndarray:
    """Forward negacyclic NTT of a coefficient vector (evaluations in bit-reversed order)."""
    tab = params.tables
    if not params.fast:
        return _ntt_object(np.asarray(coeffs, dtype=object), tab)
    a = np.array(coeffs, dtype=np.uint64).reshape(1, 1, -1)
    p = np.array([params.modulus], dtype=np.uint64)
    _kernels.ntt_forward(a, p, tab.psi_rev[None, :], tab.psi_rev_shoup[None, :])
    return a.reshape(-1)


def intt_array(values: np.ndarray, params: RingParams) -> np.ndarray:
    tab = params.tables
    if not params.fast:
        return _intt_object(np.asarray(values, dtype=object), tab)
    a = np.array(values, dtype=np.uint64).reshape(1, 1, -1)
    p = np.array([params.modulus], dtype=np.uint64)
    _kernels.ntt_inverse(
        a, p, tab.ipsi_rev[None, :], tab.ipsi_rev_shoup[None, :],
        np.array([tab.n_inv], dtype=np.uint64), np.array([tab.n_inv_shoup], dtype=np.uint64),
    )
    return a.reshape(-1)


def schoolbook_negacyclic(a: np.ndarray, b: np.ndarray, q: int) -> np.ndarray:
    """O(N^2) negacyclic product, used when q is not NTT-friendly."""
    n = len(a)
    obj = q >= FAST_MODULUS_LIMIT
    a = np.asarray(a, dtype=object if obj else np.uint64)
    b = np.asarray(b, dtype=object if obj else np.uint64)
    acc = np.zeros(n, dtype=a.dtype)
    rot = b.copy()
    for i in range(n):
        if a[i]:
            acc = (acc + a[i] * rot) % q
        # rot <- x * rot
        top = rot[-1]
        rot = np.concatenate(([(q - top) % q], rot[:-1]))
    return acc


@lru_cache(maxsize=256)
def _automorphism_map(n: int, g: int) -> tuple[np.ndarray, np.ndarray]:
    idx = (np.arange(n, dtype=np.int64) * g) % (2 * n)
    neg = idx >= n
    dest = np.where(neg, idx - n, idx)
    dest.setflags(write=False)
    neg.setflags(write=False)
    return dest, neg


class RingElement:
    """Immutable polynomial in R_q with canonical coefficients."""

    __slots__ = ("params", "coeffs")

    def __init__(self, params: RingParams, coeffs):
        arr = np.asarray(coeffs)
        if arr.shape != (params.degree,):
            raise ValueError(f"expected {params.degree} coefficients, got shape {arr.shape}")
        q = params.modulus
        if params.fast:
            if arr.dtype == object or arr.dtype.kind == "i":
                arr = np.array([int(c) % q for c in arr], dtype=np.uint64) if arr.dtype == object \
                    else (arr.astype(np.int64) % q).astype(np.uint64)
            else:
                arr = arr.astype(np.uint64, copy=True)
                if arr.size and int(arr.max()) >= q:
                    arr %= np.uint64(q)
        else:
            arr = np.array([int(c) % q for c in arr], dtype=object)
        arr.setflags(write=False)
        self.params = params
        self.coeffs = arr

    # constructors
    @classmethod
    def zero(cls, params: RingParams) -> "RingElement":
        return cls(params, np.zeros(params.degree, dtype=np.uint64))

    @classmethod
    def constant(cls, params: RingParams, value: int) -> "RingElement":
        c = [0] * params.degree
        c[0] = value
        return cls(params, np.array(c, dtype=object))

    @classmethod
    def monomial(cls, params: RingParams, e: int, value: int = 1) -> "RingElement":
        return cls.constant(params, value).monomial_mul(e)

    @classmethod
    def random(cls, params: RingParams, rng: np.random.Generator) -> "RingElement":
        q = params.modulus
        if params.fast:
            return cls(params, rng.integers(0, q, size=params.degree, dtype=np.uint64))
        return cls(params, np.array([int(rng.integers(0, 2**62)) % q for _ in range(params.degree)], dtype=object))

    # views
    def to_list(self) -> list[int]:
        return [int(c) for c in self.coeffs]

    def centered(self) -> list[int]:
        q = self.params.modulus
        return [c - q if c > q // 2 else c for c in self.to_list()]

    def is_zero(self) -> bool:
        return not np.any(self.coeffs != 0)

    def _check(self, other: "RingElement") -> None:
        if not isinstance(other, RingElement):
            raise TypeError(f"expected RingElement, got {type(other).__name__}")
        if other.params != self.params:
            raise ParameterMismatch(f"{self.params} vs {other.params}")

    def _new(self, coeffs) -> "RingElement":
        return RingElement(self.params, coeffs)

    # arithmetic
    def __add__(self, other: "RingElement") -> "RingElement":
        self._check(other)
        return self._new((self.coeffs + other.coeffs) % self.params.modulus)

    def __sub__(self, other: "RingElement") -> "RingElement":
        self._check(other)
        q = self.params.modulus
        return self._new((self.coeffs + (q - other.coeffs)) % q)

    def __neg__(self) -> "RingElement":
        q = self.params.modulus
        return self._new((q - self.coeffs) % q)

    def __mul__(self, other) -> "RingElement":
        if isinstance(other, (int, np.integer)):
            return self.scalar_mul(int(other))
        self._check(other)
        p = self.params
        if p.ntt_enabled:
            prod = ntt_array(self.coeffs, p) * ntt_array(other.coeffs, p) % p.modulus
            return self._new(intt_array(prod, p))
        return self._new(schoolbook_negacyclic(self.coeffs, other.coeffs, p.modulus))

    __rmul__ = __mul__

    def scalar_mul(self, s: int) -> "RingElement":
        q = self.params.modulus
        s %= q
        if self.params.fast:
            return self._new(self.coeffs * np.uint64(s) % np.uint64(q))
        return self._new(self.coeffs * s % q)

    def monomial_mul(self, e: int) -> "RingElement":
        """Multiply by x^e, with x^-e = -x^(N-e)."""
        n, q = self.params.degree, self.params.modulus
        e %= 2 * n
        flip = e >= n
        e %= n
        a = self.coeffs
        if e:
            a = np.concatenate(((q - a[n - e :]) % q, a[: n - e]))
        if flip:
            a = (q - a) % q
        return self._new(a)

    def automorphism(self, g: int) -> "RingElement":
        """Return a(x^g) mod x^N + 1 for odd g."""
        n, q = self.params.degree, self.params.modulus
        if g % 2 == 0:
            raise ValueError(f"automorphism exponent must be odd, got {g}")
        dest, neg = _automorphism_map(n, g % (2 * n))
        vals = np.where(neg, (q - self.coeffs) % q, self.coeffs)
        out = np.empty_like(self.coeffs)
        out[dest] = vals
        return self._new(out)

    def __eq__(self, other) -> bool:
        if not isinstance(other, RingElement):
            return NotImplemented
        return self.params == other.params and bool(np.all(self.coeffs == other.coeffs))

    def __hash__(self) -> int:
        return hash((self.params, tuple(self.to_list())))

    def __repr__(self) -> str:
        head = ", ".join(str(c) for c in self.to_list()[:6])
        more = ", ..." if self.params.degree > 6 else ""
        return f"RingElement(N={self.params.degree}, q={self.params.modulus}, [{head}{more}])"


def poly_add(a: RingElement, b: RingElement) -> RingElement:
    return a + b


def poly_sub(a: RingElement, b: RingElement) -> RingElement:
    return a - b


def poly_mul(a: RingElement, b: RingElement) -> RingElement:
    return a * b


def monomial_mul(a: RingElement, e: int) -> RingElement:
    return a.monomial_mul(e)


def automorphism(a: RingElement, g: int) -> RingElement:
    return a.automorphism(g)


def forward_ntt(a: RingElement) -> np.ndarray:
    return ntt_array(a.coeffs, a.params)


def inverse_ntt(values: np.ndarray, params: RingParams) -> RingElement:
    return RingElement(params, intt_array(values, params))
