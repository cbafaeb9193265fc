"""A small leveled BFV (Fan–Vercauteren) scheme over an RNS ciphertext modulus.

Design notes:

* The data modulus Q is a product of 30-bit NTT primes.  Key switching
  (relinearization and Galois substitution) decomposes a polynomial into
  its RNS limbs and uses one extra "special" prime that is divided out
  afterwards.
* Ciphertext multiplication computes the tensor product exactly in an
  extended base Q*P and then scales by t/Q.  The scaling is deferred:
  ``mul`` returns a lazy product that can be plain-multiplied and summed
  while still unscaled, which is what a PIR inner product needs.  Any other
  use (multiplying again, substituting, decrypting) finalizes it first.
  P is sized from a worst-case bound so that at least 2^16 deferred
  products fit without any wrap-around; the running bound is tracked per
  value and forces finalization before it could overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .backend import BackendBase, CipherValue, EvalKeySet, HeParams
from .errors import MissingGaloisKey
from .ring import RingElement, RingParams, _automorphism_map
from .rns import LIMB_BITS, RnsChain, ntt_primes

STD, PRODUCT, TENSOR = "std", "product", "tensor"


@dataclass(frozen=True)
class ParamPreset:
    """Named parameter set.

    ``data_limbs`` 30-bit primes form Q.  ``pir_depth`` is the ciphertext
    multiplication depth the preset is calibrated to carry through a full
    PIR evaluation (expansion, selection tree, payload product).
    """

    name: str
    preset_id: int
    degree: int
    plain_modulus: int
    data_limbs: int
    pir_depth: int
    sigma: float = 3.2
    limb_bits: int = LIMB_BITS
    headroom_bits: int = 16

    def __post_init__(self):
        if (self.plain_modulus - 1) % (2 * self.degree):
            raise ValueError("t must be 1 mod 2N for batching")

    @property
    def decomposition_bits(self) -> int:
        """Gadget digit width: one RNS limb."""
        return self.limb_bits

    @property
    def coeff_bits(self) -> int:
        return self.context.params.coeff_modulus.bit_length()

    @property
    def context(self) -> "BfvContext":
        return get_context(self.name)


PRESETS: dict[str, ParamPreset] = {
    p.name: p
    for p in (
        ParamPreset("toy-1024", 1, 1024, 12289, data_limbs=5, pir_depth=2),
        ParamPreset("paper-4096", 2, 4096, 40961, data_limbs=3, pir_depth=1),
        ParamPreset("paper-8192", 3, 8192, 65537, data_limbs=7, pir_depth=2),
        ParamPreset("paper-16384", 4, 16384, 65537, data_limbs=14, pir_depth=4),
    )
}
PRESETS_BY_ID = {p.preset_id: p for p in PRESETS.values()}


def get_preset(name_or_id) -> ParamPreset:
    if isinstance(name_or_id, ParamPreset):
        return name_or_id
    if isinstance(name_or_id, int):
        return PRESETS_BY_ID[name_or_id]
    try:
        return PRESETS[name_or_id]
    except KeyError:
        raise ValueError(f"unknown preset {name_or_id!r}; choose from {sorted(PRESETS)}") from None


def _ext_limbs(degree: int, t: int, data_limbs: int, headroom_bits: int) -> int:
    primes = ntt_primes(degree, data_limbs + 1 + 40)
    q = math.prod(primes[:data_limbs])
    need = product_bound(degree, q) * degree * (t // 2) << headroom_bits
    p = 1
    for count, prime in enumerate(primes[data_limbs + 1 :], start=1):
        p *= prime
        if q * (p // 4) // t >= need:
            return count
    raise ValueError("extension base too large")


def product_bound(degree: int, q: int) -> int:
    """Coefficient bound of an unscaled tensor of two centered ciphertexts."""
    return degree * q * q // 2 + (degree * q * q >> 30)


class BfvContext:
    """Precomputed constants for one preset."""

    def __init__(self, preset: ParamPreset):
        self.preset = preset
        n, t = preset.degree, preset.plain_modulus
        self.degree, self.t = n, t
        ext = _ext_limbs(n, t, preset.data_limbs, preset.headroom_bits)
        self.chain = ch = RnsChain(n, preset.data_limbs, ext)
        self.q, self.qs, self.p, self.qp = ch.q, ch.qs, ch.p, ch.qp
        self.L = ch.q.size
        Q = ch.q.modulus
        self.params = HeParams(n, t, Q, name=preset.name)
        self.delta = self.q.from_int(Q // t)
        self.t_q = np.uint64(t)
        self.q_inv_p = self.p.from_int(pow(Q, -1, self.p.modulus))
        sp = ch.special
        self.special = sp
        self.sp_inv_q = self.q.from_int(pow(sp, -1, Q))
        # key-switching key factor for digit i: sp * Q/q_i, nonzero only on limb i
        self.ks_factor = np.zeros((self.L, self.L + 1, 1), dtype=np.uint64)
        for i, (h, qi) in enumerate(zip(self.q.qhat, self.q.primes)):
            self.ks_factor[i, i, 0] = sp * h % qi
        self.capacity = Q * (self.p.modulus // 4) // t
        self.ones_qp = np.ones((self.qp.size, n), dtype=np.uint64)

    @property
    def ciphertext_bytes(self) -> int:
        return (self.params.coeff_modulus.bit_length() + 7) // 8


@lru_cache(maxsize=None)
def _context(name: str) -> BfvContext:
    return BfvContext(PRESETS[name])


def get_context(preset) -> BfvContext:
    p = get_preset(preset)
    if PRESETS.get(p.name) is p:
        return _context(p.name)
    return BfvContext(p)


# ---------------------------------------------------------------------------
# randomness


def expand_seed(seed: bytes, moduli: np.ndarray, degree: int, count: int = 1) -> np.ndarray:
    """Deterministic uniform residues of shape (count, L, N) from a 32-byte seed."""
    rng = np.random.Generator(np.random.PCG64(int.from_bytes(seed, "little")))
    hi = np.asarray(moduli, dtype=np.uint64)[None, :, None]
    return rng.integers(0, hi, size=(count, len(moduli), degree), dtype=np.uint64)


def sample_error(rng: np.random.Generator, degree: int, sigma: float) -> np.ndarray:
    """Rounded Gaussian, clipped at 6 sigma."""
    e = np.rint(rng.normal(0.0, sigma, degree)).astype(np.int64)
    bound = int(math.ceil(6 * sigma))
    return np.clip(e, -bound, bound)


# ---------------------------------------------------------------------------
# keys


class SecretKey:
    """Ternary secret polynomial with cached NTT images."""

    def __init__(self, ctx: BfvContext, coeffs: np.ndarray):
        coeffs = np.asarray(coeffs, dtype=np.int64)
        if coeffs.shape != (ctx.degree,) or np.any(np.abs(coeffs) > 1):
            raise ValueError("secret key must be a ternary vector of length N")
        self.ctx = ctx
        self.coeffs = coeffs
        self.coeffs.setflags(write=False)

    @cached_property
    def ntt_q(self) -> np.ndarray:
        return self.ctx.q.ntt(self.ctx.q.from_signed(self.coeffs)[None])[0]

    @cached_property
    def ntt_qs(self) -> np.ndarray:
        return self.ctx.qs.ntt(self.ctx.qs.from_signed(self.coeffs)[None])[0]

    @cached_property
    def square_ntt_q(self) -> np.ndarray:
        return self.ctx.q.mul(self.ntt_q, self.ntt_q)

    def automorphism_coeffs(self, g: int) -> np.ndarray:
        n = self.ctx.degree
        dest, neg = _automorphism_map(n, g % (2 * n))
        out = np.empty_like(self.coeffs)
        out[dest] = np.where(neg, -self.coeffs, self.coeffs)
        return out


class KeySwitchKey:
    """Gadget key encrypting ``special * (Q/q_i) * s'`` under s for every limb i.

    Stored in NTT form over Q plus the special prime.  The uniform parts are
    regenerated from ``seed``, so only ``b`` needs to travel.
    """

    def __init__(self, ctx: BfvContext, b: np.ndarray, seed: bytes):
        self.ctx = ctx
        self.b = np.ascontiguousarray(b, dtype=np.uint64)
        self.seed = seed

    @cached_property
    def a(self) -> np.ndarray:
        return expand_seed(self.seed, self.ctx.qs.p, self.ctx.degree, self.ctx.L)

    @classmethod
    def generate(cls, sk: SecretKey, target: np.ndarray, rng: np.random.Generator) -> "KeySwitchKey":
        ctx = sk.ctx
        qs = ctx.qs
        seed = rng.bytes(32)
        a = expand_seed(seed, qs.p, ctx.degree, ctx.L)
        err = np.stack([qs.from_signed(sample_error(rng, ctx.degree, ctx.preset.sigma)) for _ in range(ctx.L)])
        err = qs.ntt(err)
        tgt = qs.ntt(qs.from_signed(target)[None])[0]
        b = qs.sub(err, qs.mul(a, sk.ntt_qs))
        b = qs.add(b, (ctx.ks_factor * tgt[None]) % qs.col)
        return cls(ctx, b, seed)


@dataclass(frozen=True)
class PreparedPlaintext:
    """A plaintext lifted (centered) to the extended base and transformed."""

    ntt: np.ndarray  # (L_qp, N) uint32
    norm: int  # max |centered coefficient|
    constant: bool
    source: RingElement


# ---------------------------------------------------------------------------
# ciphertexts


class BfvCiphertext(CipherValue):
    """BFV ciphertext.

    ``kind`` is ``std`` (coefficient form mod Q, 2 or 3 components),
    ``product`` (lazy unscaled tensor of two std factors, optionally times a
    plaintext) or ``tensor`` (unscaled 3-component sum in NTT form over Q*P).
    """

    backend_tag = "bfv"
    __slots__ = ("kind", "data", "bound", "factors", "scale", "seed", "_lift")

    def __init__(self, params, kind, data=None, *, depth=0, bound=0, factors=None, scale=None, seed=None):
        super().__init__(params, depth)
        self.kind = kind
        self.data = data
        self.bound = bound
        self.factors = factors
        self.scale = scale
        self.seed = seed
        self._lift = None

    @property
    def size(self) -> int:
        return 3 if self.kind != STD else self.data.shape[0]

    def __repr__(self) -> str:
        return f"BfvCiphertext({self.params.name}, {self.kind}, depth={self.depth})"


# ---------------------------------------------------------------------------
# backend


class BfvBackend(BackendBase):
    """BFV evaluator implementing the homomorphic contract.

    A client instance holds the secret key (``encrypt``/``decrypt``); a
    server instance is built from an :class:`EvalKeySet` only.
    """

    tag = "bfv"

    def __init__(self, preset="toy-1024", *, secret_key: SecretKey | None = None,
                 keys: EvalKeySet | None = None, seed: int | None = None):
        self.ctx = get_context(preset)
        super().__init__(self.ctx.params)
        self.preset = self.ctx.preset
        self.sk = secret_key
        self.keys = keys if keys is not None else EvalKeySet()
        self.rng = np.random.default_rng(seed)

    # key management -------------------------------------------------------
    @classmethod
    def keygen(cls, preset="toy-1024", galois_elements: Iterable[int] = (), seed: int | None = None,
               relin: bool = True) -> tuple[SecretKey, EvalKeySet]:
        ctx = get_context(preset)
        rng = np.random.default_rng(seed)
        sk = SecretKey(ctx, rng.integers(-1, 2, ctx.degree))
        galois = {}
        for g in sorted(set(int(x) for x in galois_elements)):
            if g % 2 == 0:
                raise ValueError(f"Galois exponent must be odd, got {g}")
            galois[g] = KeySwitchKey.generate(sk, sk.automorphism_coeffs(g), rng)
        rk = None
        if relin:
            rk = KeySwitchKey.generate(sk, _ternary_square(ctx, sk.coeffs), rng)
        return sk, EvalKeySet(galois=galois, relin=rk)

    @classmethod
    def client(cls, preset="toy-1024", galois_elements: Iterable[int] = (), seed: int | None = None):
        sk, keys = cls.keygen(preset, galois_elements, seed)
        return cls(preset, secret_key=sk, keys=keys, seed=None if seed is None else seed + 1)

    def server_view(self) -> "BfvBackend":
        """Evaluator holding only the evaluation keys."""
        return BfvBackend(self.preset, keys=self.keys)

    def _need_sk(self) -> SecretKey:
        if self.sk is None:
            raise PermissionError("this backend holds no secret key")
        return self.sk

    def _std(self, data, depth=0, seed=None) -> BfvCiphertext:
        return BfvCiphertext(self.params, STD, data, depth=depth, seed=seed)

    # encryption -----------------------------------------------------------
    def encrypt(self, m: RingElement, seed: bytes | None = None) -> BfvCiphertext:
        """Symmetric-key encryption; the uniform part comes from a 32-byte seed."""
        self._check_plain(m)
        sk = self._need_sk()
        ctx, q = self.ctx, self.ctx.q
        seed = seed if seed is not None else self.rng.bytes(32)
        a = expand_seed(seed, q.p, ctx.degree)[0]
        e = q.from_signed(sample_error(self.rng, ctx.degree, ctx.preset.sigma))
        as_ = q.intt(q.mul(q.ntt(a[None]), sk.ntt_q))[0]
        dm = (ctx.delta * m.coeffs.astype(np.uint64)) % q.col
        c0 = q.add(q.sub(e, as_), dm)
        return self._std(np.stack([c0, a]), seed=seed)

    def _phase(self, c: BfvCiphertext) -> np.ndarray:
        sk = self._need_sk()
        c = self.finalize(c)
        q = self.ctx.q
        v = c.data[0]
        if c.size >= 2:
            v = q.add(v, q.intt(q.mul(q.ntt(c.data[1][None]), sk.ntt_q))[0])
        if c.size == 3:
            v = q.add(v, q.intt(q.mul(q.ntt(c.data[2][None]), sk.square_ntt_q))[0])
        return v

    def decrypt(self, c: BfvCiphertext) -> RingElement:
        self._check(c)
        ctx = self.ctx
        Q, t = ctx.params.coeff_modulus, ctx.t
        vals = ctx.q.reconstruct(self._phase(c))
        half = Q // 2
        m = [((t * v + half) // Q) % t for v in vals]
        return RingElement(self.plain_ring, np.array(m, dtype=np.int64))

    def noise_budget(self, c: BfvCiphertext) -> int:
        """Bits of headroom left before decryption fails (0 means untrusted)."""
        self._check(c)
        Q, t = self.ctx.params.coeff_modulus, self.ctx.t
        vals = self.ctx.q.reconstruct(self._phase(c))
        half = Q // 2
        worst = 0
        for v in vals:
            r = (t * v) % Q
            r = Q - r if r > half else r
            if r > worst:
                worst = r
        if worst == 0:
            return Q.bit_length() - 1
        return max(0, math.floor(math.log2(Q) - math.log2(worst) - 1))

    # plaintext handling ---------------------------------------------------
    def prepare(self, p) -> PreparedPlaintext:
        if isinstance(p, PreparedPlaintext):
            return p
        self._check_plain(p)
        t = self.ctx.t
        c = p.coeffs.astype(np.int64)
        c = np.where(c > t // 2, c - t, c)
        norm = int(np.abs(c).max()) if c.size else 0
        constant = not np.any(c[1:])
        ntt = self.ctx.qp.ntt(self.ctx.qp.from_signed(c)[None])[0].astype(np.uint32)
        return PreparedPlaintext(ntt, norm, constant, p)

    def _centered_plain(self, p: RingElement) -> np.ndarray:
        t = self.ctx.t
        c = p.coeffs.astype(np.int64)
        return np.where(c > t // 2, c - t, c)

    # helpers on std data --------------------------------------------------
    def _monomial(self, data: np.ndarray, e: int) -> np.ndarray:
        n = self.ctx.degree
        q = self.ctx.q
        e %= 2 * n
        flip = e >= n
        e %= n
        if e:
            data = np.concatenate((q.neg(data[..., n - e :]), data[..., : n - e]), axis=-1)
        if flip:
            data = q.neg(data)
        return data

    def _automorphism(self, data: np.ndarray, g: int) -> np.ndarray:
        n = self.ctx.degree
        dest, neg = _automorphism_map(n, g % (2 * n))
        vals = np.where(neg, self.ctx.q.neg(data), data)
        out = np.empty_like(data)
        out[..., dest] = vals
        return out

    def _keyswitch(self, c: np.ndarray, key: KeySwitchKey) -> np.ndarray:
        """Switch polynomial ``c`` (L, N), coefficient form, to s; returns (2, L, N)."""
        ctx = self.ctx
        q, qs = ctx.q, ctx.qs
        L = ctx.L
        y = (c * q.qhat_inv[:, None]) % q.col
        digits = y[:, None, :] % qs.p[None, :, None]
        digits = qs.ntt(digits)
        acc = _kernels.keyswitch_accumulate(digits, key.b, key.a, qs.p, qs.mu)
        acc = qs.intt(acc)
        sp = ctx.special
        r = acc[:, L].astype(np.int64)
        r = np.where(r > sp // 2, r - sp, r)
        r_mod = (r[:, None, :] % q.p.astype(np.int64)[None, :, None]).astype(np.uint64)
        diff = q.sub(acc[:, :L], r_mod)
        return (diff * ctx.sp_inv_q) % q.col

    def _lift(self, c: BfvCiphertext) -> np.ndarray:
        """Centered lift of a std ciphertext to Q*P, in NTT form (cached)."""
        if c._lift is None:
            ext = self.ctx.chain.q_to_p(c.data)
            c._lift = self.ctx.qp.ntt(np.concatenate((c.data, ext), axis=1))
        return c._lift

    def _tensor(self, c: BfvCiphertext, out: np.ndarray | None = None) -> np.ndarray:
        """Accumulate a product-kind value into ``out`` (NTT over Q*P)."""
        ctx = self.ctx
        if out is None:
            out = np.zeros((3, ctx.qp.size, ctx.degree), dtype=np.uint64)
        a, b = (self._lift(f) for f in c.factors)
        d = c.scale.ntt if c.scale is not None else ctx.ones_qp
        _kernels.tensor_accumulate(out, a[0], a[1], b[0], b[1], d, ctx.qp.p, ctx.qp.mu)
        return out

    def _as_tensor(self, c: BfvCiphertext) -> np.ndarray:
        return self._tensor(c) if c.kind == PRODUCT else c.data

    def finalize(self, c: BfvCiphertext) -> BfvCiphertext:
        """Scale a deferred product by t/Q and relinearize; std values pass through."""
        if c.kind == STD:
            return c
        ctx = self.ctx
        q, p = ctx.q, ctx.p
        x = ctx.qp.intt(self._as_tensor(c))
        L, t = ctx.L, ctx.t_q
        xq, xp = x[:, :L], x[:, L:]
        r_p = ctx.chain.q_to_p((xq * t) % q.col)
        y_p = p.sub((xp * t) % p.col, r_p)
        y_p = (y_p * ctx.q_inv_p) % p.col
        y_q = ctx.chain.p_to_q(y_p)
        if self.keys.relin is None:
            return self._std(y_q, c.depth)
        ks = self._keyswitch(y_q[2], self.keys.relin)
        return self._std(q.add(y_q[:2], ks), c.depth)

    # contract operations --------------------------------------------------
    def add(self, a, b):
        self._check(a, b)
        self.meter.record("add")
        return self._add(a, b)

    def _add(self, a, b):
        depth = max(a.depth, b.depth)
        if a.kind != STD and b.kind != STD and a.bound + b.bound <= self.ctx.capacity:
            acc = self._as_tensor(a).copy() if a.kind == TENSOR else self._tensor(a)
            if b.kind == PRODUCT:
                self._tensor(b, acc)
            else:
                acc = self.ctx.qp.add(acc, b.data)
            return BfvCiphertext(self.params, TENSOR, acc, depth=depth, bound=a.bound + b.bound)
        a, b = self.finalize(a), self.finalize(b)
        q = self.ctx.q
        x, y = a.data, b.data
        if x.shape[0] < y.shape[0]:
            x, y = y, x
        out = x.copy()
        out[: y.shape[0]] = q.add(x[: y.shape[0]], y)
        return self._std(out, depth)

    def add_many(self, values: Sequence[BfvCiphertext]) -> BfvCiphertext:
        """Sum of many values; deferred products are accumulated in place."""
        values = list(values)
        if not values:
            raise ValueError("add_many needs at least one value")
        self._check(*values)
        self.meter.record("add", len(values) - 1)
        ctx = self.ctx
        depth = max(v.depth for v in values)
        std_total = None
        acc, bound = None, 0
        for v in values:
            if v.kind == STD:
                std_total = v if std_total is None else self._add(std_total, v)
                continue
            if acc is not None and bound + v.bound > ctx.capacity:
                flushed = self.finalize(BfvCiphertext(self.params, TENSOR, acc, depth=depth, bound=bound))
                std_total = flushed if std_total is None else self._add(std_total, flushed)
                acc, bound = None, 0
            if acc is None:
                acc = np.zeros((3, ctx.qp.size, ctx.degree), dtype=np.uint64)
            if v.kind == PRODUCT:
                self._tensor(v, acc)
            else:
                acc = ctx.qp.add(acc, v.data)
            bound += v.bound
        if acc is None:
            return self._std(std_total.data, depth)
        tensor = BfvCiphertext(self.params, TENSOR, acc, depth=depth, bound=bound)
        if std_total is None:
            return tensor
        return self._std(self._add(std_total, tensor).data, depth)

    def negate(self, a):
        self._check(a)
        a = self.finalize(a)
        return self._std(self.ctx.q.neg(a.data), a.depth)

    def sub(self, a, b):
        self._check(a, b)
        self.meter.record("add")
        a, b = self.finalize(a), self.finalize(b)
        return self._add(a, self._std(self.ctx.q.neg(b.data), b.depth))

    def add_plain(self, a, p: RingElement):
        self._check(a)
        self._check_plain(p)
        self.meter.record("add")
        a = self.finalize(a)
        q = self.ctx.q
        dm = (self.ctx.delta * p.coeffs.astype(np.uint64)) % q.col
        out = a.data.copy()
        out[0] = q.add(out[0], dm)
        return self._std(out, a.depth)

    def plain_mul(self, p, a):
        self._check(a)
        prepared = p if isinstance(p, PreparedPlaintext) else None
        plain = prepared.source if prepared is not None else p
        self._check_plain(plain)
        self.meter.record("plain_mul")
        ctx = self.ctx
        if a.kind != STD:
            prepared = prepared or self.prepare(plain)
            growth = prepared.norm if prepared.constant else ctx.degree * prepared.norm
            bound = a.bound * max(growth, 1)
            if bound <= ctx.capacity:
                if a.kind == PRODUCT and a.scale is None:
                    return BfvCiphertext(self.params, PRODUCT, depth=a.depth, bound=bound,
                                         factors=a.factors, scale=prepared)
                x = ctx.qp.mul(self._as_tensor(a), prepared.ntt)
                return BfvCiphertext(self.params, TENSOR, x, depth=a.depth, bound=bound)
            a = self.finalize(a)
        return self._std(self._plain_mul_std(plain, prepared, a.data), a.depth)

    def _plain_mul_std(self, plain: RingElement, prepared, data: np.ndarray) -> np.ndarray:
        q = self.ctx.q
        c = self._centered_plain(plain)
        nz = np.flatnonzero(c)
        if len(nz) == 0:
            return np.zeros_like(data)
        if len(nz) == 1:
            e, v = int(nz[0]), int(c[nz[0]])
            out = self._monomial(data, e) if e else data
            if v == 1:
                return out.copy()
            if v == -1:
                return q.neg(out)
            return (out * q.from_int(v)) % q.col
        if prepared is None:
            prepared = self.prepare(plain)
        pn = prepared.ntt[: self.ctx.L]
        return q.intt(q.mul(q.ntt(data), pn))

    def mul(self, a, b):
        self._check(a, b)
        self.meter.record("mul")
        a, b = self.finalize(a), self.finalize(b)
        if a.size != 2 or b.size != 2:
            raise ValueError("multiplication needs two-component operands")
        bound = product_bound(self.ctx.degree, self.params.coeff_modulus)
        return BfvCiphertext(self.params, PRODUCT, depth=1 + max(a.depth, b.depth),
                             bound=bound, factors=(a, b))

    def mul_relin(self, a, b):
        return self.finalize(self.mul(a, b))

    def substitute(self, a, g: int):
        self._check(a)
        if g % 2 == 0:
            raise ValueError(f"Galois exponent must be odd, got {g}")
        g %= 2 * self.ctx.degree
        if g == 1:
            self.meter.record("substitute")
            return self.finalize(a)
        key = self.keys.galois.get(g)
        if key is None:
            raise MissingGaloisKey(g)
        self.meter.record("substitute")
        a = self.finalize(a)
        rot = self._automorphism(a.data, g)
        ks = self._keyswitch(rot[1], key)
        ks[0] = self.ctx.q.add(ks[0], rot[0])
        return self._std(ks, a.depth)


def _ternary_square(ctx: BfvContext, s: np.ndarray) -> np.ndarray:
    """Exact negacyclic square of a ternary polynomial (coefficients fit in one limb)."""
    ring = RingParams(ctx.degree, ctx.q.primes[0])
    x = RingElement(ring, s)
    return np.array((x * x).centered(), dtype=np.int64)
