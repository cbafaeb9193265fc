"""Closed-form cost analysis of constant-weight, folklore, SealPIR and MulPIR retrieval.

All counts are exact integers.  Where the usual accounting of an
operation count differs from what a balanced product tree actually
performs, both are reported (``mul_bound`` and ``mul_actual``).
"""

from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

from .cwcode import min_code_length
from .eq import ceil_log2

CT_HEADER_BYTES = 8
SEED_BYTES = 32


def iroot_ceil(x: int, d: int) -> int:
    """Smallest r with r**d >= x, exact for arbitrarily large x."""
    if x < 0 or d < 1:
        raise ValueError("need x >= 0 and d >= 1")
    if x < 2 or d == 1:
        return x
    lo, hi = 1, 1 << -(-x.bit_length() // d)
    while lo < hi:
        mid = (lo + hi) // 2
        if mid ** d >= x:
            hi = mid
        else:
            lo = mid + 1
    return lo


def dimensionwise_bits(domain: int, d: int) -> int:
    """Query length d * ceil(domain^(1/d)) of a d-dimensional encoding."""
    if d < 1:
        raise ValueError("d must be at least 1")
    return d * iroot_ceil(domain, d)


@dataclass(frozen=True)
class CostReport:
    scheme: str
    depth: int
    query_bits: int
    upload_cts: int
    download_cts: int
    plain_muls: int
    mul_bound: int
    mul_actual: int
    substitutions: int

    def as_dict(self) -> dict:
        return asdict(self)


def expansion_substitutions(query_bits: int, c: int) -> int:
    """Each packed ciphertext costs 2^c - 1 substitutions to expand."""
    return -(-query_bits // (1 << c)) * ((1 << c) - 1)


def cw_pir_cost(n: int, domain: int, k: int, s: int = 1, c: int = 0) -> CostReport:
    """Constant-weight PIR over n stored rows drawn from a domain of the given size."""
    if k < 1 or n < 1 or s < 1:
        raise ValueError("n, k and s must be positive")
    m = min_code_length(domain, k)
    return CostReport(
        scheme="unary" if k == 1 else "cw",
        depth=ceil_log2(k),
        query_bits=m,
        upload_cts=-(-m // (1 << c)),
        download_cts=s,
        plain_muls=n * s,
        mul_bound=n * k,
        mul_actual=n * (k - 1),
        substitutions=expansion_substitutions(m, c),
    )


def folklore_pir_cost(n: int, s: int = 1, c: int = 0) -> CostReport:
    """Selection by the plain folklore operator on ceil(log2 n)-bit indices."""
    ell = max(1, ceil_log2(n))
    return CostReport(
        scheme="folklore",
        depth=ceil_log2(ell),
        query_bits=ell,
        upload_cts=-(-ell // (1 << c)),
        download_cts=s,
        plain_muls=n * s,
        mul_bound=n * ell,
        mul_actual=n * (ell - 1),
        substitutions=expansion_substitutions(ell, c),
    )


def _dim_terms(n: int, domain: int, d: int) -> list[int]:
    """Sizes of the d successive dimension folds: n, then r^(d-1), ..., r."""
    r = iroot_ceil(domain, d)
    return [n] + [r ** (d - i) for i in range(1, d)]


def sealpir_mulpir_cost(scheme: str, n: int, d: int, s: int = 1, expansion: int = 2,
                        domain: int | None = None) -> CostReport:
    """Analytic cost of SealPIR or MulPIR with recursion dimension d.

    ``expansion`` is the ciphertext expansion factor F.  With ``domain``
    larger than n the keyword (sparse) variant is evaluated, where only the
    first dimension shrinks to n; the download is then independent of s.
    """
    if scheme not in ("sealpir", "mulpir"):
        raise ValueError("scheme must be 'sealpir' or 'mulpir'")
    if d < 1 or expansion < 2:
        raise ValueError("need d >= 1 and F > 1")
    sparse = domain is not None and domain != n
    domain = n if domain is None else domain
    terms = _dim_terms(n, domain, d)
    bits = dimensionwise_bits(domain, d)
    reps = 1 if sparse else s
    if scheme == "sealpir":
        pm = sum(term * expansion ** i for i, term in enumerate(terms)) * reps
        mul = 0
        download = expansion ** (d - 1) * reps
    else:
        pm = n * reps
        mul = sum(terms[1:]) * reps
        download = reps
    return CostReport(scheme, d - 1, bits, 1, download, pm, mul, mul, 0)


def expansion_factor(coeff_bits: int, plain_bits: int) -> int:
    """F = ceil(2 log q / log t), the plaintexts needed to carry one ciphertext."""
    return -(-2 * coeff_bits // plain_bits)


def ciphertext_bytes(degree: int, coeff_bits: int, components: int = 2, seeded: bool = False) -> int:
    """Serialized size: header, then each stored polynomial at fixed width."""
    width = -(-coeff_bits // 8)
    stored = components - 1 if seeded else components
    return CT_HEADER_BYTES + (SEED_BYTES if seeded else 0) + stored * degree * width


# ---------------------------------------------------------------------------
# encoding-size comparison table


COMPARISON_COLUMNS = ("log2_domain", "k=1", "k=2", "k=3", "k=4", "d=1", "d=2", "d=3")
COMPARISON_ROWS = tuple(range(4, 50, 2))
# longest domain bit-length displayed for each multiplicative depth
DISPLAY_LIMIT = {0: 18, 1: 38}


def comparison_rows(log_domains: Iterable[int] = COMPARISON_ROWS, weights: Sequence[int] = (1, 2, 3, 4),
                    dims: Sequence[int] = (1, 2, 3), limits: dict | None = None) -> list[list[str]]:
    """Query bit-lengths for constant-weight and dimension-wise encodings.

    Entries whose depth has a display limit below the row are shown as "-".
    """
    limits = DISPLAY_LIMIT if limits is None else limits
    rows = []
    for b in log_domains:
        size = 1 << b
        row = [str(b)]
        for k in weights:
            lim = limits.get(ceil_log2(k))
            row.append("-" if lim is not None and b > lim else str(min_code_length(size, k)))
        for d in dims:
            lim = limits.get(d - 1)
            row.append("-" if lim is not None and b > lim else str(dimensionwise_bits(size, d)))
        rows.append(row)
    return rows


def comparison_table_csv(**kwargs) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COMPARISON_COLUMNS)
    w.writerows(comparison_rows(**kwargs))
    return buf.getvalue()


# ---------------------------------------------------------------------------
# operator and protocol summaries


@dataclass(frozen=True)
class OperatorCost:
    operator: str
    width: int
    weight: int
    muls_bound: int
    muls_actual: int
    plain_muls: int
    depth: int


def equality_operator_costs(n: int, k: int) -> list[OperatorCost]:
    """The four equality operators sized so each domain holds at least n elements."""
    ell = max(1, ceil_log2(n))
    m = min_code_length(n, k)
    lk, ll = ceil_log2(k), ceil_log2(ell)
    return [
        OperatorCost("plain-fl", ell, 0, ell, ell - 1, 0, ll),
        OperatorCost("plain-cw", m, k, k, k - 1, 0, lk),
        OperatorCost("arith-fl", ell, 0, 2 * ell, 2 * ell - 1, 0, 1 + ll),
        OperatorCost("arith-cw", m, k, m + k, m + k - 1, 1, 1 + lk),
    ]


def records_csv(records: Sequence) -> str:
    if not records:
        return ""
    buf = io.StringIO()
    fields = list(asdict(records[0]))
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    for r in records:
        w.writerow(asdict(r))
    return buf.getvalue()
