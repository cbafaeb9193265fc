"""Constant-weight PIR: setup, query, server processing and extraction.

Index mode retrieves row i by mapping i onto a constant-weight codeword.
Keyword mode maps identifiers drawn from a domain S (integers of a fixed
bit length, or arbitrary bytes through the lossy map) onto CW(m, k) with
C(m, k) >= |S|, so the server's work depends only on the number of stored
rows.  An absent keyword yields an all-zero response.
"""

from __future__ import annotations

import math
import os
import struct
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .backend import CipherValue, EvalKeySet, HeBackend, TransparentBackend, expansion_galois_elements
from .bfv import BfvBackend, get_preset
from .cwcode import CodeSpec, Codeword, lossy_map, min_code_length, perfect_map
from .encoding import bytes_to_chunks, chunks_to_bytes, coeff_decode, coeff_encode
from .eq import ceil_log2, product_tree
from .errors import ParameterMismatch, ProtocolError
from .expansion import ExpandedQuery, PackedQuery, expand, packed_count
from .parallel import pmap, worker_count
from .ring import RingElement

INDEX, KEYWORD = "index", "keyword"
LENGTH_PREFIX = struct.Struct("<I")
DEFAULT_CACHE_BYTES = 1 << 30


def default_weight(domain_size: int, depth_budget: int) -> int:
    """Weight with the shortest code among those whose tree depth fits the budget.

    Ties go to the smaller weight.
    """
    best = None
    for k in range(1, (1 << depth_budget) + 1):
        m = min_code_length(domain_size, k)
        if best is None or m < best[0]:
            best = (m, k)
    return best[1]


@dataclass(frozen=True)
class PirConfig:
    """Parameters both parties must agree on.

    ``keyword_bits`` fixes the keyword domain |S| = 2^keyword_bits; index mode
    uses |S| = n.  ``lossy`` switches keyword mapping to the seeded hash.
    """

    mode: str
    n: int
    weight: int
    compression: int
    preset: str = "toy-1024"
    keyword_bits: int = 0
    lossy: bool = False
    lossy_seed: bytes = b""

    def __post_init__(self):
        if self.mode not in (INDEX, KEYWORD):
            raise ValueError(f"mode must be {INDEX!r} or {KEYWORD!r}")
        if self.n < 1:
            raise ValueError("need at least one row")
        if self.mode == KEYWORD and self.keyword_bits < 1:
            raise ValueError("keyword mode needs keyword_bits >= 1")
        if self.lossy and not self.lossy_seed:
            raise ValueError("lossy mapping needs a seed")
        p = get_preset(self.preset)
        if not 0 <= self.compression <= int(math.log2(p.degree)):
            raise ValueError(f"compression {self.compression} outside [0, log2 N]")
        if self.weight >= p.plain_modulus:
            raise ValueError("weight must be below the plaintext modulus")
        if self.weight > self.code_length:
            raise ValueError("weight exceeds code length")

    @classmethod
    def create(cls, mode: str, n: int, preset: str = "toy-1024", *, weight: int | None = None,
               compression: int | None = None, keyword_bits: int = 0, lossy: bool = False,
               lossy_seed: bytes = b"") -> "PirConfig":
        """Fill in the default weight and the smallest compression giving one ciphertext."""
        p = get_preset(preset)
        domain = n if mode == INDEX else 1 << keyword_bits
        if weight is None:
            weight = default_weight(domain, p.pir_depth)
        if compression is None:
            compression = min(ceil_log2(min_code_length(domain, weight)), int(math.log2(p.degree)))
        return cls(mode, n, weight, compression, get_preset(preset).name, keyword_bits, lossy, lossy_seed)

    @property
    def domain_size(self) -> int:
        return self.n if self.mode == INDEX else 1 << self.keyword_bits

    @property
    def code_length(self) -> int:
        return min_code_length(self.domain_size, self.weight)

    @property
    def spec(self) -> CodeSpec:
        return CodeSpec(self.code_length, self.weight)

    @property
    def upload_count(self) -> int:
        return packed_count(self.code_length, self.compression)

    @property
    def depth(self) -> int:
        return ceil_log2(self.weight)

    @property
    def degree(self) -> int:
        return get_preset(self.preset).degree

    @property
    def plain_modulus(self) -> int:
        return get_preset(self.preset).plain_modulus

    @property
    def chunk_bits(self) -> int:
        """Payload bits per plaintext coefficient."""
        return self.plain_modulus.bit_length() - 1

    @property
    def plaintext_bytes(self) -> int:
        return self.degree * self.chunk_bits // 8

    def chunks_per_row(self, payload_len: int) -> int:
        return max(1, -(-(payload_len + LENGTH_PREFIX.size) // self.plaintext_bytes))

    @property
    def galois_elements(self) -> list[int]:
        return expansion_galois_elements(self.degree, self.compression)

    def codeword(self, identifier) -> Codeword:
        """Map an identifier (row index, integer keyword or bytes) to its codeword."""
        spec = self.spec
        if self.mode == INDEX:
            i = int(identifier)
            if not 0 <= i < self.n:
                raise ValueError(f"index {i} outside [0, {self.n})")
            return perfect_map(i, spec)
        if self.lossy:
            key = identifier if isinstance(identifier, bytes) else _int_bytes(identifier, self.keyword_bits)
            return lossy_map(key, spec, self.lossy_seed)
        x = int.from_bytes(identifier, "big") if isinstance(identifier, bytes) else int(identifier)
        if not 0 <= x < 1 << self.keyword_bits:
            raise ValueError(f"keyword outside the {self.keyword_bits}-bit domain")
        return perfect_map(x, spec)


def _int_bytes(x: int, bits: int) -> bytes:
    return int(x).to_bytes(max(1, -(-bits // 8)), "big")


# ---------------------------------------------------------------------------
# payload encoding


def encode_payload(payload: bytes, config: PirConfig, s: int) -> list[RingElement]:
    """Length-prefixed payload split into s coefficient-packed plaintexts."""
    ring = get_preset(config.preset).context.params.plaintext_ring
    blob = LENGTH_PREFIX.pack(len(payload)) + payload
    per = config.plaintext_bytes
    if len(blob) > s * per:
        raise ValueError(f"payload of {len(payload)} bytes does not fit in {s} plaintexts")
    bits = config.chunk_bits
    out = []
    for j in range(s):
        piece = blob[j * per : (j + 1) * per]
        out.append(coeff_encode(bytes_to_chunks(piece, bits) if piece else [], ring))
    return out


def decode_payload(plaintexts: Sequence[RingElement], config: PirConfig) -> bytes | None:
    """Inverse of :func:`encode_payload`; ``None`` for the all-zero sentinel."""
    bits, per = config.chunk_bits, config.plaintext_bytes
    coeffs_per = -(-per * 8 // bits)
    limit = 1 << bits
    blob = bytearray()
    for p in plaintexts:
        chunks = coeff_decode(p)
        if any(c >= limit for c in chunks) or any(chunks[coeffs_per:]):
            raise ProtocolError("response plaintext out of range; noise budget likely exhausted")
        blob += chunks_to_bytes(chunks[:coeffs_per], bits, per)
    if not any(blob):
        return None
    (length,) = LENGTH_PREFIX.unpack_from(blob)
    if length == 0 or length > len(blob) - LENGTH_PREFIX.size or any(blob[LENGTH_PREFIX.size + length :]):
        raise ProtocolError("malformed response payload; noise budget likely exhausted")
    return bytes(blob[LENGTH_PREFIX.size : LENGTH_PREFIX.size + length])


# ---------------------------------------------------------------------------
# database


@dataclass
class PirDatabase:
    """Plaintext table with one codeword per stored identifier."""

    config: PirConfig
    identifiers: list
    codewords: list
    rows: list  # list of s-tuples of RingElement
    s: int
    payload_sizes: list = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.rows)


def setup(rows: Iterable[tuple], config: PirConfig, s: int | None = None) -> PirDatabase:
    """Chunk payloads into plaintexts and precompute codewords.

    ``rows`` yields (identifier, payload) pairs; in index mode the identifier
    is ignored and row position is used.
    """
    rows = list(rows)
    if len(rows) != config.n:
        raise ParameterMismatch(f"config expects {config.n} rows, got {len(rows)}")
    ids = [i for i in range(len(rows))] if config.mode == INDEX else [r[0] for r in rows]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate identifier")
    payloads = [bytes(r[1]) for r in rows]
    if any(len(p) == 0 for p in payloads):
        raise ValueError("empty payloads are reserved for the not-found sentinel")
    need = max(config.chunks_per_row(len(p)) for p in payloads)
    if s is None:
        s = need
    elif s < need:
        raise ValueError(f"payload needs {need} plaintexts but s={s}")
    codewords = [config.codeword(i) for i in ids]
    if len(set(cw.bits for cw in codewords)) != len(codewords):
        raise ValueError("two identifiers map to the same codeword")
    table = [tuple(encode_payload(p, config, s)) for p in payloads]
    return PirDatabase(config, ids, codewords, table, s, [len(p) for p in payloads])


# ---------------------------------------------------------------------------
# client side


@dataclass(frozen=True)
class PirResponse:
    cts: tuple


def query_plaintexts(codeword: Codeword, config: PirConfig) -> list[RingElement]:
    """Bits of E_q packed 2^c per plaintext and scaled by 2^-c."""
    ring = get_preset(config.preset).context.params.plaintext_ring
    t = config.plain_modulus
    width = 1 << config.compression
    inv = pow(width, -1, t)
    bits = codeword.to_list()
    out = []
    for h in range(config.upload_count):
        part = bits[h * width : (h + 1) * width]
        out.append(coeff_encode([b * inv % t for b in part], ring))
    return out


def build_query(identifier, config: PirConfig, backend: HeBackend) -> PackedQuery:
    """Encrypt the packed codeword of ``identifier`` under the client's key."""
    cw = config.codeword(identifier)
    cts = tuple(backend.encrypt(p) for p in query_plaintexts(cw, config))
    return PackedQuery(cts, config.compression, config.code_length)


def unpack_query(pq: PackedQuery, config: PirConfig, backend: HeBackend) -> Codeword:
    """Client-side self check: decrypt and unscale the packed query."""
    t = config.plain_modulus
    width = 1 << config.compression
    bits = []
    for ct in pq.cts:
        vals = backend.decrypt(ct).to_list()[:width]
        bits.extend(v * width % t for v in vals)
    return Codeword.from_list(bits[: config.code_length])


def extract(resp: PirResponse, config: PirConfig, backend: HeBackend) -> bytes | None:
    """Decrypt and decode a response; ``None`` means the keyword is absent."""
    return decode_payload([backend.decrypt(c) for c in resp.cts], config)


# ---------------------------------------------------------------------------
# server side


def compute_selection_vector(eq: ExpandedQuery, db: PirDatabase, backend: HeBackend) -> list:
    """sel[i] = product of the expanded bits selected by row i's codeword."""
    if len(eq) != db.config.code_length:
        raise ParameterMismatch(f"expanded query has {len(eq)} entries, code length is {db.config.code_length}")
    return pmap(lambda cw: product_tree(backend, [eq[j] for j in cw.positions()]), db.codewords)


def inner_product(sel: Sequence[CipherValue], db: PirDatabase, backend: HeBackend,
                  prepared: Sequence | None = None) -> PirResponse:
    """response[j] = sum_i sel[i] * DB[i][j]."""
    if len(sel) != db.n:
        raise ParameterMismatch(f"selection vector has {len(sel)} entries, database has {db.n} rows")
    rows = prepared if prepared is not None else db.rows
    out = []
    for j in range(db.s):
        out.append(backend.add_many([backend.plain_mul(rows[i][j], sel[i]) for i in range(db.n)]))
    return PirResponse(tuple(out))


class PirServer:
    """Answers packed queries against one database with one set of evaluation keys.

    Plaintexts are converted to the backend's multiplication form once and
    cached while the cache stays under ``cache_bytes``; the remainder is
    converted on the fly.  Rows are processed in groups, one group per
    worker thread, and partial sums are combined at the end.
    """

    def __init__(self, db: PirDatabase, backend: HeBackend, *, cache_bytes: int | None = None,
                 group_size: int = 64):
        self.db = db
        self.backend = backend
        self.group_size = group_size
        if cache_bytes is None:
            cache_bytes = int(os.environ.get("CWPIR_CACHE_BYTES", DEFAULT_CACHE_BYTES))
        self._prepared = self._prepare_rows(cache_bytes)

    def _prepare_rows(self, budget: int) -> list:
        out, used = [], 0
        for row in self.db.rows:
            if used >= budget:
                out.append(None)
                continue
            prepped = tuple(self.backend.prepare(p) for p in row)
            used += sum(getattr(getattr(p, "ntt", None), "nbytes", 0) for p in prepped)
            out.append(prepped)
        return out

    def row(self, i: int):
        r = self._prepared[i]
        if r is None:
            r = tuple(self.backend.prepare(p) for p in self.db.rows[i])
        return r

    def _group(self, bounds, eq: ExpandedQuery, be: HeBackend):
        db = self.db
        terms = [[] for _ in range(db.s)]
        for i in range(*bounds):
            sel = product_tree(be, [eq[j] for j in db.codewords[i].positions()])
            row = self.row(i)
            for j in range(db.s):
                terms[j].append(be.plain_mul(row[j], sel))
        return [be.add_many(t) for t in terms]

    def answer_expanded(self, eq: ExpandedQuery, backend: HeBackend | None = None) -> PirResponse:
        be = backend or self.backend
        n = self.db.n
        if len(eq) != self.db.config.code_length:
            raise ParameterMismatch("expanded query length does not match the code length")
        step = self.group_size
        if worker_count() > 1:
            step = min(step, -(-n // worker_count()))
        groups = [(a, min(a + step, n)) for a in range(0, n, step)]
        partials = pmap(lambda b: self._group(b, eq, be), groups)
        out = []
        for j in range(self.db.s):
            acc = partials[0][j]
            for p in partials[1:]:
                acc = be.add(acc, p[j])
            out.append(_finish(be, acc))
        return PirResponse(tuple(out))

    def process(self, pq: PackedQuery, backend: HeBackend | None = None) -> PirResponse:
        """Expansion, selection vector and inner product in one pass.

        ``backend`` evaluates this query (e.g. one holding a particular
        client's keys); it must share the preset of the preparing backend.
        """
        be = backend or self.backend
        if be.params != self.backend.params:
            raise ParameterMismatch("evaluation backend uses different parameters")
        if pq.code_length != self.db.config.code_length or pq.compression != self.db.config.compression:
            raise ParameterMismatch("query does not match the server configuration")
        return self.answer_expanded(expand(pq, be), be)


def _finish(backend: HeBackend, c):
    fin = getattr(backend, "finalize", None)
    return fin(c) if fin is not None else c


# ---------------------------------------------------------------------------
# convenience wiring


def make_client(config: PirConfig, seed: int | None = None, transparent: bool = False) -> HeBackend:
    """Key-holding backend for ``config`` with the expansion Galois keys."""
    if transparent:
        return TransparentBackend(get_preset(config.preset).context.params,
                                  galois=config.galois_elements)
    return BfvBackend.client(config.preset, config.galois_elements, seed=seed)


def make_server_backend(config: PirConfig, keys: EvalKeySet, transparent: bool = False) -> HeBackend:
    if transparent:
        return TransparentBackend(get_preset(config.preset).context.params, galois=keys.galois_elements)
    return BfvBackend(config.preset, keys=keys)
