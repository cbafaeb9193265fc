"""The homomorphic evaluation contract and the transparent reference backend.

Every backend exposes the same handful of operations (add, plain multiply,
multiply, substitute, plus encrypt/decrypt).  Circuits are written against
:class:`HeBackend` only, so they can run on real BFV ciphertexts or on the
transparent backend, which keeps plaintexts in the clear and meters depth
and operation counts.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import Iterable, Protocol, Sequence, runtime_checkable

from .errors import BackendMismatch, DepthExceeded, MissingGaloisKey, ParameterMismatch
from .ring import RingElement, RingParams


@dataclass(frozen=True)
class HeParams:
    """Ring degree, ciphertext modulus and plaintext modulus of a scheme instance."""

    degree: int
    plain_modulus: int
    coeff_modulus: int
    name: str = "custom"

    def __post_init__(self):
        if self.plain_modulus >= self.coeff_modulus:
            raise ValueError("plaintext modulus must be smaller than the ciphertext modulus")

    @property
    def plaintext_ring(self) -> RingParams:
        return RingParams(self.degree, self.plain_modulus)

    @property
    def expansion_factor(self) -> float:
        return 2 * math.log2(self.coeff_modulus) / math.log2(self.plain_modulus)

    @property
    def plain_bits(self) -> int:
        return self.plain_modulus.bit_length() - 1


@dataclass(frozen=True)
class OpCounts:
    """Snapshot of operation counters."""

    add: int = 0
    plain_mul: int = 0
    mul: int = 0
    substitute: int = 0

    def __sub__(self, other: "OpCounts") -> "OpCounts":
        return OpCounts(
            self.add - other.add,
            self.plain_mul - other.plain_mul,
            self.mul - other.mul,
            self.substitute - other.substitute,
        )

    def __add__(self, other: "OpCounts") -> "OpCounts":
        return OpCounts(
            self.add + other.add,
            self.plain_mul + other.plain_mul,
            self.mul + other.mul,
            self.substitute + other.substitute,
        )


class OpMeter:
    """Thread-safe operation counters shared by one backend instance.

    Depth is tracked on each ciphertext instead (see ``CipherValue.depth``),
    so only counts live here.
    """

    KINDS = ("add", "plain_mul", "mul", "substitute")

    def __init__(self):
        self._lock = threading.Lock()
        self._counts = dict.fromkeys(self.KINDS, 0)

    def record(self, kind: str, n: int = 1) -> None:
        with self._lock:
            self._counts[kind] += n

    def snapshot(self) -> OpCounts:
        with self._lock:
            return OpCounts(**self._counts)

    def reset(self) -> None:
        with self._lock:
            self._counts = dict.fromkeys(self.KINDS, 0)

    def measure(self) -> "_Measurement":
        """Context manager capturing the counts recorded inside the block."""
        return _Measurement(self)


class _Measurement:
    def __init__(self, meter: OpMeter):
        self.meter = meter
        self.counts = OpCounts()

    def __enter__(self) -> "_Measurement":
        self._start = self.meter.snapshot()
        return self

    def __exit__(self, *exc) -> None:
        self.counts = self.meter.snapshot() - self._start


class CipherValue:
    """Base class of backend ciphertexts; ``depth`` counts ciphertext products."""

    backend_tag: str = "abstract"
    __slots__ = ("params", "depth")

    def __init__(self, params: HeParams, depth: int = 0):
        self.params = params
        self.depth = depth


@dataclass(frozen=True)
class EvalKeySet:
    """Evaluation material held by the server.

    ``galois`` maps each automorphism exponent to backend key material
    (``None`` for the transparent backend, which only checks presence).
    """

    galois: dict = field(default_factory=dict)
    relin: object = None

    def has_galois(self, g: int) -> bool:
        return g in self.galois

    @property
    def galois_elements(self) -> frozenset[int]:
        return frozenset(self.galois)


def expansion_galois_elements(degree: int, c: int) -> list[int]:
    """Exponents N/2^a + 1 used by query expansion with compression ``c``."""
    return [degree // (1 << a) + 1 for a in range(c)]


@runtime_checkable
class HeBackend(Protocol):
    params: HeParams
    meter: OpMeter

    def encrypt(self, m: RingElement) -> CipherValue: ...
    def decrypt(self, c: CipherValue) -> RingElement: ...
    def add(self, a: CipherValue, b: CipherValue) -> CipherValue: ...
    def sub(self, a: CipherValue, b: CipherValue) -> CipherValue: ...
    def negate(self, a: CipherValue) -> CipherValue: ...
    def add_plain(self, a: CipherValue, p: RingElement) -> CipherValue: ...
    def plain_mul(self, p, a: CipherValue) -> CipherValue: ...
    def mul(self, a: CipherValue, b: CipherValue) -> CipherValue: ...
    def substitute(self, a: CipherValue, g: int) -> CipherValue: ...
    def add_many(self, values: Sequence[CipherValue]) -> CipherValue: ...
    def prepare(self, p: RingElement): ...


class BackendBase:
    """Shared plumbing: operand checks, metering and derived helpers."""

    tag = "abstract"

    def __init__(self, params: HeParams):
        self.params = params
        self.meter = OpMeter()
        self.plain_ring = params.plaintext_ring

    def _check(self, *values: CipherValue) -> None:
        for v in values:
            if getattr(v, "backend_tag", None) != self.tag:
                raise BackendMismatch(
                    f"{type(v).__name__} is not a {self.tag} ciphertext"
                )
            if v.params != self.params:
                raise ParameterMismatch(f"{v.params.name} vs {self.params.name}")

    def _check_plain(self, p: RingElement) -> None:
        if not isinstance(p, RingElement) or p.params != self.plain_ring:
            raise ParameterMismatch("plaintext must be a RingElement over R_t of this backend")

    def constant(self, value: int) -> RingElement:
        return RingElement.constant(self.plain_ring, value)

    def encrypt_constant(self, value: int) -> CipherValue:
        return self.encrypt(self.constant(value))

    def add_many(self, values: Sequence[CipherValue]) -> CipherValue:
        values = list(values)
        if not values:
            raise ValueError("add_many needs at least one value")
        acc = values[0]
        for v in values[1:]:
            acc = self.add(acc, v)
        return acc

    def prepare(self, p: RingElement):
        self._check_plain(p)
        return p

    def noise_budget(self, c: CipherValue) -> int | None:
        return None


class TransparentCiphertext(CipherValue):
    """A plaintext wearing a ciphertext's interface."""

    backend_tag = "transparent"
    __slots__ = ("value",)

    def __init__(self, params: HeParams, value: RingElement, depth: int = 0):
        super().__init__(params, depth)
        self.value = value

    def __repr__(self) -> str:
        return f"TransparentCiphertext(depth={self.depth}, {self.value!r})"


class TransparentBackend(BackendBase):
    """Plaintext oracle implementing the contract with exact metering.

    ``depth_cap`` emulates noise exhaustion: a product deeper than the cap
    raises :class:`DepthExceeded`.  ``galois`` restricts which automorphisms
    are available (``None`` allows all).
    """

    tag = "transparent"

    def __init__(
        self,
        params: HeParams | None = None,
        *,
        degree: int | None = None,
        plain_modulus: int | None = None,
        depth_cap: int | None = None,
        galois: Iterable[int] | None = None,
    ):
        if params is None:
            if degree is None or plain_modulus is None:
                raise ValueError("give either params or degree and plain_modulus")
            params = HeParams(degree, plain_modulus, 1 << 62, name=f"transparent-{degree}")
        super().__init__(params)
        self.depth_cap = depth_cap
        self.keys = EvalKeySet(galois={g: None for g in galois}) if galois is not None else None

    def _wrap(self, value: RingElement, depth: int) -> TransparentCiphertext:
        return TransparentCiphertext(self.params, value, depth)

    def encrypt(self, m: RingElement) -> TransparentCiphertext:
        self._check_plain(m)
        return self._wrap(m, 0)

    def decrypt(self, c: TransparentCiphertext) -> RingElement:
        self._check(c)
        return c.value

    def reveal(self, c: TransparentCiphertext) -> tuple[RingElement, OpCounts]:
        """Stored value together with the backend's current counters."""
        return self.decrypt(c), self.meter.snapshot()

    def add(self, a, b):
        self._check(a, b)
        self.meter.record("add")
        return self._wrap(a.value + b.value, max(a.depth, b.depth))

    def sub(self, a, b):
        self._check(a, b)
        self.meter.record("add")
        return self._wrap(a.value - b.value, max(a.depth, b.depth))

    def negate(self, a):
        self._check(a)
        return self._wrap(-a.value, a.depth)

    def add_plain(self, a, p):
        self._check(a)
        self._check_plain(p)
        self.meter.record("add")
        return self._wrap(a.value + p, a.depth)

    def plain_mul(self, p, a):
        self._check(a)
        self._check_plain(p)
        self.meter.record("plain_mul")
        return self._wrap(p * a.value, a.depth)

    def mul(self, a, b):
        self._check(a, b)
        depth = 1 + max(a.depth, b.depth)
        if self.depth_cap is not None and depth > self.depth_cap:
            raise DepthExceeded(f"depth {depth} exceeds cap {self.depth_cap}")
        self.meter.record("mul")
        return self._wrap(a.value * b.value, depth)

    def substitute(self, a, g: int):
        self._check(a)
        if self.keys is not None and not self.keys.has_galois(g):
            raise MissingGaloisKey(g)
        self.meter.record("substitute")
        return self._wrap(a.value.automorphism(g), a.depth)
