import random

import pytest
from hypothesis import given, settings, strategies as st

from cwpir.backend import TransparentBackend, expansion_galois_elements
from cwpir.errors import MissingGaloisKey
from cwpir.expansion import ExpandedQuery, PackedQuery, expand, expand_sealpir_reference, packed_count
from cwpir.ring import RingElement


def packed(be, bits, c):
    """Encrypt ``bits`` scaled by 2^-c as one coefficient-packed ciphertext."""
    n, t = be.params.degree, be.params.plain_modulus
    inv = pow(1 << c, -1, t)
    coeffs = [b * inv % t for b in bits] + [0] * (n - len(bits))
    return be.encrypt(RingElement(be.plain_ring, coeffs))


def constants(be, cts):
    out = []
    for ct in cts:
        v = be.decrypt(ct).to_list()
        assert all(x == 0 for x in v[1:])
        out.append(v[0])
    return out


def test_packed_count():
    assert packed_count(182, 8) == 1
    assert packed_count(257, 8) == 2
    assert packed_count(5, 0) == 5


def test_packed_query_validates_length(transparent_64):
    ct = transparent_64.encrypt(RingElement.zero(transparent_64.plain_ring))
    with pytest.raises(ValueError):
        PackedQuery((ct,), 2, 9)
    with pytest.raises(ValueError):
        PackedQuery((ct,), -1, 1)


def test_identity_at_zero_compression(transparent_64):
    be = transparent_64
    cts = tuple(be.encrypt(RingElement.constant(be.plain_ring, b)) for b in (1, 0, 1))
    with be.meter.measure() as m:
        eq = expand(PackedQuery(cts, 0, 3), be)
    assert constants(be, eq.cts) == [1, 0, 1]
    assert m.counts.substitute == 0


@pytest.mark.parametrize("c", range(7))
def test_single_bit_patterns(transparent_64, c):
    be = transparent_64
    width = 1 << c
    for j in range(width):
        bits = [int(i == j) for i in range(width)]
        eq = expand(PackedQuery((packed(be, bits, c),), c, width), be)
        assert constants(be, eq.cts) == bits


def test_random_patterns_match_reference(transparent_64):
    be = transparent_64
    rng = random.Random(5)
    for _ in range(50):
        c = rng.randint(0, 6)
        bits = [rng.randint(0, 1) for _ in range(1 << c)]
        eq = expand(PackedQuery((packed(be, bits, c),), c, 1 << c), be)
        raw = be.encrypt(RingElement(be.plain_ring, bits + [0] * (64 - len(bits))))
        ref = expand_sealpir_reference(raw, c, be)
        assert constants(be, eq.cts) == bits == constants(be, ref)


@settings(max_examples=30)
@given(st.integers(0, 4), st.data())
def test_expansion_is_linear(c, data):
    be = TransparentBackend(degree=16, plain_modulus=65537)
    t = be.params.plain_modulus
    w = 1 << c
    xs = data.draw(st.lists(st.integers(0, t - 1), min_size=w, max_size=w))
    ys = data.draw(st.lists(st.integers(0, t - 1), min_size=w, max_size=w))
    ex = expand(PackedQuery((packed(be, xs, c),), c, w), be)
    ey = expand(PackedQuery((packed(be, ys, c),), c, w), be)
    both = [(a + b) % t for a, b in zip(xs, ys)]
    ez = expand(PackedQuery((packed(be, both, c),), c, w), be)
    assert constants(be, ez.cts) == [(a + b) % t for a, b in zip(constants(be, ex.cts), constants(be, ey.cts))]


@settings(max_examples=40)
@given(st.integers(0, 3), st.lists(st.integers(0, 17), min_size=16, max_size=16))
def test_substitution_identity(a, coeffs):
    # on inputs supported at multiples of 2^a, x + Sub(x, N/2^a + 1) keeps
    # the coefficients at multiples of 2^(a+1), doubled
    n, t = 16, 97
    be = TransparentBackend(degree=n, plain_modulus=t)
    coeffs = [v if i % (1 << a) == 0 else 0 for i, v in enumerate(coeffs)]
    x = RingElement(be.plain_ring, coeffs)
    y = be.decrypt(be.add(be.encrypt(x), be.substitute(be.encrypt(x), n // (1 << a) + 1))).to_list()
    step = 1 << (a + 1)
    assert y == [2 * v % t if i % step == 0 else 0 for i, v in enumerate(coeffs)]


@pytest.mark.parametrize("c", [1, 3, 5])
def test_operation_counts(transparent_64, c):
    be = transparent_64
    pq = PackedQuery((packed(be, [1] * (1 << c), c),), c, 1 << c)
    with be.meter.measure() as m:
        expand(pq, be)
    nodes = (1 << c) - 1
    assert m.counts.substitute == nodes
    assert m.counts.plain_mul == 2 * nodes
    assert m.counts.mul == 0


def test_missing_key_is_reported():
    be = TransparentBackend(degree=64, plain_modulus=65537, galois=expansion_galois_elements(64, 2))
    ct = packed(be, [1, 0, 0, 1, 0, 0, 0, 0], 3)
    with pytest.raises(MissingGaloisKey):
        expand(PackedQuery((ct,), 3, 8), be)
    assert len(expand(PackedQuery((packed(be, [1, 0, 1, 1], 2),), 2, 4), be)) == 4


def test_compression_bounds(transparent_64):
    be = transparent_64
    ct = packed(be, [0], 0)
    with pytest.raises(ValueError):
        expand(PackedQuery((ct,), 7, 100), be)
    with pytest.raises(ValueError):
        expand_sealpir_reference(ct, 7, be)


def test_surplus_outputs_are_discarded(transparent_64):
    be = transparent_64
    bits = [1, 0, 0, 1, 1, 0, 1, 0, 0, 1, 1]
    c = 2
    cts = []
    for lo in range(0, len(bits), 4):
        cts.append(packed(be, bits[lo : lo + 4], c))
    eq = expand(PackedQuery(tuple(cts), c, len(bits)), be)
    assert isinstance(eq, ExpandedQuery)
    assert constants(be, eq.cts) == bits


def test_bfv_expansion(toy_client):
    be = toy_client
    bits = [random.Random(9).randint(0, 1) for _ in range(256)]
    eq = expand(PackedQuery((packed(be, bits, 8),), 8, 256), be)
    assert constants(be, eq.cts) == bits
    assert min(be.noise_budget(x) for x in eq.cts) > 0
