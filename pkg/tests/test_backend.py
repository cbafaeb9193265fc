import pytest

from cwpir.backend import (
    EvalKeySet,
    HeBackend,
    HeParams,
    OpCounts,
    TransparentBackend,
    expansion_galois_elements,
)
from cwpir.bfv import BfvBackend
from cwpir.errors import BackendMismatch, DepthExceeded, MissingGaloisKey, ParameterMismatch
from cwpir.ring import RingElement


@pytest.fixture
def be():
    return TransparentBackend(degree=16, plain_modulus=97)


def const(be, v):
    return be.encrypt(be.constant(v))


def test_transparent_satisfies_contract(be):
    assert isinstance(be, HeBackend)


def test_basic_arithmetic(be):
    a, b = const(be, 3), const(be, 5)
    assert be.decrypt(be.add(a, b)) == be.constant(8)
    assert be.decrypt(be.sub(a, b)) == be.constant(-2)
    assert be.decrypt(be.mul(a, b)) == be.constant(15)
    assert be.decrypt(be.plain_mul(be.constant(4), a)) == be.constant(12)
    assert be.decrypt(be.add_plain(a, be.constant(1))) == be.constant(4)
    assert be.decrypt(be.negate(a)) == be.constant(-3)


def test_depth_tracks_longest_product_chain(be):
    a = const(be, 2)
    b = be.mul(a, a)
    c = be.mul(b, a)
    assert (a.depth, b.depth, c.depth) == (0, 1, 2)
    assert be.add(c, a).depth == 2
    assert be.plain_mul(be.constant(3), c).depth == 2
    assert be.substitute(c, 3).depth == 2


def test_meter_counts_each_kind(be):
    a = const(be, 2)
    with be.meter.measure() as m:
        x = be.add(a, a)
        x = be.sub(x, a)
        x = be.add_plain(x, be.constant(1))
        x = be.plain_mul(be.constant(2), x)
        x = be.mul(x, x)
        x = be.substitute(x, 5)
        be.add_many([x, x, x, x])
    assert m.counts == OpCounts(add=6, plain_mul=1, mul=1, substitute=1)


def test_meter_reset_and_snapshot_arithmetic(be):
    be.mul(const(be, 1), const(be, 1))
    assert be.meter.snapshot().mul == 1
    be.meter.reset()
    assert be.meter.snapshot() == OpCounts()
    assert OpCounts(1, 2, 3, 4) + OpCounts(1, 1, 1, 1) - OpCounts(2, 3, 4, 5) == OpCounts()


def test_depth_cap_emulates_noise_exhaustion():
    be = TransparentBackend(degree=16, plain_modulus=97, depth_cap=1)
    a = const(be, 2)
    b = be.mul(a, a)
    with pytest.raises(DepthExceeded):
        be.mul(b, a)


def test_galois_restriction():
    be = TransparentBackend(degree=16, plain_modulus=97, galois=[17])
    a = const(be, 2)
    be.substitute(a, 17)
    with pytest.raises(MissingGaloisKey):
        be.substitute(a, 9)


def test_substitute_applies_automorphism(be):
    x = be.encrypt(RingElement.monomial(be.plain_ring, 1))
    assert be.decrypt(be.substitute(x, 3)) == RingElement.monomial(be.plain_ring, 3)


def test_mixing_backends_rejected(be):
    other = TransparentBackend(degree=16, plain_modulus=193)
    with pytest.raises(ParameterMismatch):
        be.add(const(be, 1), const(other, 1))
    bfv = BfvBackend.client("toy-1024", seed=1)
    with pytest.raises(BackendMismatch):
        be.add(const(be, 1), bfv.encrypt(bfv.constant(1)))


def test_plaintext_ring_must_match(be):
    with pytest.raises(ParameterMismatch):
        be.encrypt(RingElement.constant(TransparentBackend(degree=8, plain_modulus=17).plain_ring, 1))


def test_add_many_requires_values(be):
    with pytest.raises(ValueError):
        be.add_many([])


def test_expansion_galois_elements():
    assert expansion_galois_elements(16, 4) == [17, 9, 5, 3]
    assert expansion_galois_elements(4096, 0) == []


def test_key_set_queries():
    ks = EvalKeySet(galois={3: None, 5: None})
    assert ks.has_galois(3) and not ks.has_galois(7)
    assert ks.galois_elements == frozenset({3, 5})


def test_params_derived_quantities():
    p = HeParams(8192, 65537, 2**210, "x")
    assert p.plain_bits == 16
    assert p.expansion_factor == pytest.approx(2 * 210 / 16, rel=1e-3)
    with pytest.raises(ValueError):
        HeParams(16, 97, 97)
