import math
import random
from pathlib import Path

import pytest
from hypothesis import given, strategies as st

from cwpir.backend import TransparentBackend
from cwpir.cost import (
    DISPLAY_LIMIT,
    OperatorCost,
    ciphertext_bytes,
    comparison_rows,
    comparison_table_csv,
    cw_pir_cost,
    dimensionwise_bits,
    equality_operator_costs,
    expansion_factor,
    expansion_substitutions,
    folklore_pir_cost,
    iroot_ceil,
    records_csv,
    sealpir_mulpir_cost,
)
from cwpir.protocol import INDEX, PirConfig, PirServer, build_query, make_client, make_server_backend, setup

GOLDEN = Path(__file__).parent / "data" / "query_lengths.csv"


@given(st.integers(0, 10**40), st.integers(1, 6))
def test_iroot_ceil_matches_definition(x, d):
    r = iroot_ceil(x, d)
    assert r**d >= x
    assert r == 0 or (r - 1) ** d < x


def naive_dim_bits(domain, d):
    r = 1
    while r**d < domain:
        r += 1
    return d * r


@pytest.mark.parametrize("domain, d, expect", [(2**8, 2, 32), (2**8, 3, 21), (2**16, 2, 512), (2**16, 1, 65536)])
def test_dimensionwise_examples(domain, d, expect):
    assert dimensionwise_bits(domain, d) == expect == naive_dim_bits(domain, d)


def test_comparison_table_matches_golden():
    assert comparison_table_csv() == GOLDEN.read_text()


def test_display_limit_dashes():
    rows = {int(r[0]): r for r in comparison_rows()}
    assert rows[18][1] != "-" and rows[20][1] == "-"
    assert rows[38][2] != "-" and rows[40][2] == "-"
    assert all(v != "-" for v in rows[48][3:5] + rows[48][7:])
    assert DISPLAY_LIMIT == {0: 18, 1: 38}


def test_cw_pir_cost_example():
    r = cw_pir_cost(16384, 16384, 2, s=1, c=8)
    assert (r.query_bits, r.upload_cts, r.depth) == (182, 1, 1)
    assert (r.mul_actual, r.mul_bound, r.plain_muls) == (16384, 32768, 16384)
    assert r.substitutions == 255


def test_unary_and_folklore():
    r = cw_pir_cost(1000, 1000, 1, c=10)
    assert (r.scheme, r.query_bits, r.mul_actual, r.depth) == ("unary", 1000, 0, 0)
    f = folklore_pir_cost(1 << 14, c=4)
    assert (f.query_bits, f.depth, f.mul_actual, f.substitutions) == (14, 4, 13 << 14, 15)


def test_mulpir_and_sealpir():
    mp = sealpir_mulpir_cost("mulpir", 16384, 2)
    assert (mp.plain_muls, mp.mul_actual, mp.download_cts, mp.depth) == (16384, 128, 1, 1)
    sp1 = sealpir_mulpir_cost("sealpir", 16384, 1, expansion=7)
    sp2 = sealpir_mulpir_cost("sealpir", 16384, 2, expansion=7)
    assert (sp1.download_cts, sp2.download_cts) == (1, 7)
    assert sp2.plain_muls == 16384 + 7 * 128
    assert sealpir_mulpir_cost("mulpir", 16384, 2, s=3).download_cts == 3
    assert sealpir_mulpir_cost("mulpir", 1000, 2, s=3, domain=1 << 32).download_cts == 1
    with pytest.raises(ValueError):
        sealpir_mulpir_cost("other", 4, 1)


def test_expansion_factor_and_sizes():
    assert expansion_factor(218, 16) == 28
    assert ciphertext_bytes(8192, 218) == 8 + 2 * 8192 * 28
    assert ciphertext_bytes(8192, 218, seeded=True) == 8 + 32 + 8192 * 28


def test_operator_costs():
    ops = {o.operator: o for o in equality_operator_costs(1 << 16, 16)}
    assert ops["plain-cw"] == OperatorCost("plain-cw", 22, 16, 16, 15, 0, 4)
    assert ops["arith-cw"].muls_actual == 22 + 15
    assert ops["plain-fl"].depth == 4 and ops["arith-fl"].depth == 5
    text = records_csv(list(ops.values()))
    assert text.splitlines()[0].startswith("operator,width")


def test_expansion_substitutions():
    assert expansion_substitutions(182, 8) == 255
    assert expansion_substitutions(569, 8) == 3 * 255
    assert expansion_substitutions(5, 0) == 0


def test_metered_protocol_matches_formula():
    rng = random.Random(8)
    for _ in range(20):
        n = rng.randint(2, 40)
        k = rng.randint(1, 4)
        c = rng.randint(0, 6)
        s = rng.randint(1, 2)
        try:
            cfg = PirConfig.create(INDEX, n, weight=k, compression=c)
        except ValueError:
            continue
        rows = [(i, bytes([i % 250 + 1]) * (1 + (s - 1) * cfg.plaintext_bytes)) for i in range(n)]
        db = setup(rows, cfg)
        client = make_client(cfg, transparent=True)
        sbe = make_server_backend(cfg, client.keys, transparent=True)
        server = PirServer(db, sbe)
        pq = build_query(rng.randrange(n), cfg, client)
        with sbe.meter.measure() as m:
            server.process(pq)
        want = cw_pir_cost(n, n, k, s=db.s, c=c)
        assert m.counts.mul == want.mul_actual
        assert m.counts.substitute == want.substitutions
        assert m.counts.plain_mul == want.plain_muls + 2 * want.substitutions
        assert len(pq.cts) == want.upload_cts


def test_code_length_helper_agrees_with_comb():
    for b in (8, 16, 32):
        r = cw_pir_cost(1, 1 << b, 3)
        assert math.comb(r.query_bits, 3) >= 1 << b > math.comb(r.query_bits - 1, 3)
