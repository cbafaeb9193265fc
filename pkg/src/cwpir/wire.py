"""Byte layouts: wire frames, database files, ciphertexts and evaluation keys.

All integers are little-endian.  A frame is::

    "CWP1" | version u8 | type u8 | payload length u32 | payload

A serialized ciphertext is::

    "CWCT" | version u8 | preset id u8 | form u8 | components u8
    | [32-byte seed if form is SEEDED] | stored polynomials

where each stored coefficient is its value mod Q written in
ceil(log2 Q / 8) bytes.  A seeded ciphertext omits its uniform component,
which the receiver regenerates from the seed.
"""

from __future__ import annotations

import enum
import io
import json
import struct
from dataclasses import dataclass
from typing import BinaryIO, Iterable

import numpy as np

from .backend import EvalKeySet
from .bfv import STD, BfvCiphertext, KeySwitchKey, expand_seed, get_context, get_preset
from .errors import ProtocolError
from .expansion import PackedQuery

MAGIC = b"CWP1"
VERSION = 1
FRAME_HEADER = struct.Struct("<4sBBI")
DEFAULT_MAX_FRAME = 256 << 20


class MsgType(enum.IntEnum):
    HELLO = 1
    QUERY = 2
    RESPONSE = 3
    ERROR = 4


@dataclass(frozen=True)
class Frame:
    kind: MsgType
    payload: bytes = b""
    version: int = VERSION

    def encode(self) -> bytes:
        return FRAME_HEADER.pack(MAGIC, self.version, int(self.kind), len(self.payload)) + self.payload


def decode_frame(data: bytes, max_len: int = DEFAULT_MAX_FRAME) -> Frame:
    if len(data) < FRAME_HEADER.size:
        raise ProtocolError("truncated frame header")
    magic, version, kind, length = FRAME_HEADER.unpack_from(data)
    _check_header(magic, version, kind, length, max_len)
    body = data[FRAME_HEADER.size :]
    if len(body) != length:
        raise ProtocolError(f"frame length {length} does not match {len(body)} payload bytes")
    return Frame(MsgType(kind), bytes(body), version)


def _check_header(magic, version, kind, length, max_len):
    if magic != MAGIC:
        raise ProtocolError(f"bad frame magic {magic!r}")
    if version != VERSION:
        raise ProtocolError(f"unsupported protocol version {version}")
    if kind not in MsgType._value2member_map_:
        raise ProtocolError(f"unknown message type {kind}")
    if length > max_len:
        raise ProtocolError(f"frame of {length} bytes exceeds the {max_len}-byte cap")


def _read_exact(stream: BinaryIO, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        chunk = stream.read(n - len(buf))
        if not chunk:
            raise EOFError("connection closed mid-frame")
        buf += chunk
    return bytes(buf)


def read_frame(stream: BinaryIO, max_len: int = DEFAULT_MAX_FRAME) -> Frame | None:
    """Read one frame; ``None`` on a clean end of stream.

    An oversized frame raises :class:`ProtocolError` after its payload has
    been drained, so the stream stays aligned on frame boundaries.
    """
    head = stream.read(FRAME_HEADER.size)
    if not head:
        return None
    if len(head) < FRAME_HEADER.size:
        head += _read_exact(stream, FRAME_HEADER.size - len(head))
    magic, version, kind, length = FRAME_HEADER.unpack(head)
    if magic == MAGIC and length > max_len:
        remaining = length
        while remaining:
            got = stream.read(min(remaining, 1 << 20))
            if not got:
                break
            remaining -= len(got)
    _check_header(magic, version, kind, length, max_len)
    return Frame(MsgType(kind), _read_exact(stream, length), version)


def write_frame(stream: BinaryIO, frame: Frame) -> None:
    stream.write(frame.encode())
    stream.flush()


# ---------------------------------------------------------------------------
# ciphertexts

CT_MAGIC = b"CWCT"
CT_HEADER = struct.Struct("<4sBBBB")
FULL, SEEDED = 0, 1


def coeff_width(preset) -> int:
    return (get_context(preset).params.coeff_modulus.bit_length() + 7) // 8


def _poly_bytes(ctx, residues: np.ndarray, width: int) -> bytes:
    vals = ctx.q.reconstruct(residues)
    return b"".join(v.to_bytes(width, "little") for v in vals)


def _poly_from_bytes(ctx, data: bytes, width: int) -> np.ndarray:
    n = ctx.degree
    vals = [int.from_bytes(data[i * width : (i + 1) * width], "little") for i in range(n)]
    Q = ctx.params.coeff_modulus
    if any(v >= Q for v in vals):
        raise ProtocolError("coefficient not reduced modulo Q")
    obj = np.array(vals, dtype=object)
    return np.stack([(obj % int(p)).astype(np.uint64) for p in ctx.q.primes])


def serialize_ciphertext(ct: BfvCiphertext, seeded: bool | None = None) -> bytes:
    """Deterministic encoding of a finalized BFV ciphertext.

    Fresh encryptions remember their seed and are written in seeded form
    unless ``seeded=False``.
    """
    if ct.kind != STD:
        raise ValueError("finalize the ciphertext before serializing it")
    preset = get_preset(ct.params.name)
    ctx = get_context(preset)
    width = coeff_width(preset)
    if seeded is None:
        seeded = ct.seed is not None
    if seeded and (ct.seed is None or ct.size != 2):
        raise ValueError("only fresh two-component ciphertexts can be written seeded")
    form = SEEDED if seeded else FULL
    out = io.BytesIO()
    out.write(CT_HEADER.pack(CT_MAGIC, VERSION, preset.preset_id, form, ct.size))
    if seeded:
        out.write(ct.seed)
        out.write(_poly_bytes(ctx, ct.data[0], width))
    else:
        for comp in ct.data:
            out.write(_poly_bytes(ctx, comp, width))
    return out.getvalue()


def deserialize_ciphertext(data: bytes, preset=None) -> BfvCiphertext:
    if len(data) < CT_HEADER.size:
        raise ProtocolError("truncated ciphertext header")
    magic, version, preset_id, form, comps = CT_HEADER.unpack_from(data)
    if magic != CT_MAGIC:
        raise ProtocolError(f"bad ciphertext magic {magic!r}")
    if version != VERSION:
        raise ProtocolError(f"unsupported ciphertext version {version}")
    try:
        p = get_preset(preset_id)
    except KeyError:
        raise ProtocolError(f"unknown preset id {preset_id}") from None
    if preset is not None and get_preset(preset).preset_id != preset_id:
        raise ProtocolError(f"ciphertext for preset {p.name}, expected {get_preset(preset).name}")
    if form not in (FULL, SEEDED) or not 2 <= comps <= 3 or (form == SEEDED and comps != 2):
        raise ProtocolError("invalid ciphertext form")
    ctx = get_context(p)
    width = coeff_width(p)
    poly = ctx.degree * width
    pos = CT_HEADER.size
    seed = None
    if form == SEEDED:
        seed = data[pos : pos + 32]
        pos += 32
    stored = 1 if form == SEEDED else comps
    if len(data) != pos + stored * poly:
        raise ProtocolError(f"ciphertext body has {len(data) - pos} bytes, expected {stored * poly}")
    polys = [_poly_from_bytes(ctx, data[pos + i * poly : pos + (i + 1) * poly], width) for i in range(stored)]
    if seed is not None:
        polys.append(expand_seed(seed, ctx.q.p, ctx.degree)[0])
    return BfvCiphertext(ctx.params, STD, np.stack(polys), seed=seed)


def ciphertext_size(preset, seeded: bool = False, components: int = 2) -> int:
    ctx = get_context(preset)
    stored = 1 if seeded else components
    return CT_HEADER.size + (32 if seeded else 0) + stored * ctx.degree * coeff_width(preset)


# ---------------------------------------------------------------------------
# evaluation keys


def _key_bytes(key: KeySwitchKey) -> bytes:
    return key.seed + np.ascontiguousarray(key.b, dtype="<u4").tobytes()


def _key_from(ctx, data: bytes, pos: int) -> tuple[KeySwitchKey, int]:
    shape = (ctx.L, ctx.qs.size, ctx.degree)
    size = 4 * int(np.prod(shape))
    if len(data) < pos + 32 + size:
        raise ProtocolError("truncated evaluation key")
    seed = data[pos : pos + 32]
    b = np.frombuffer(data, dtype="<u4", count=int(np.prod(shape)), offset=pos + 32).reshape(shape)
    if np.any(b >= ctx.qs.col.astype(np.uint32)[None]):
        raise ProtocolError("evaluation key coefficient out of range")
    return KeySwitchKey(ctx, b.astype(np.uint64), seed), pos + 32 + size


def serialize_keys(keys: EvalKeySet, preset) -> bytes:
    """Galois and relinearization keys; uniform parts travel as seeds."""
    out = io.BytesIO()
    out.write(struct.pack("<BI", get_preset(preset).preset_id, len(keys.galois)))
    for g in sorted(keys.galois):
        out.write(struct.pack("<I", g))
        out.write(_key_bytes(keys.galois[g]))
    out.write(struct.pack("<B", keys.relin is not None))
    if keys.relin is not None:
        out.write(_key_bytes(keys.relin))
    return out.getvalue()


def deserialize_keys(data: bytes, pos: int = 0) -> tuple[EvalKeySet, int]:
    preset_id, count = struct.unpack_from("<BI", data, pos)
    ctx = get_context(preset_id)
    pos += 5
    galois = {}
    for _ in range(count):
        (g,) = struct.unpack_from("<I", data, pos)
        galois[g], pos = _key_from(ctx, data, pos + 4)
    (has_relin,) = struct.unpack_from("<B", data, pos)
    pos += 1
    relin = None
    if has_relin:
        relin, pos = _key_from(ctx, data, pos)
    return EvalKeySet(galois=galois, relin=relin), pos


# ---------------------------------------------------------------------------
# query / response payloads

KEYS_INCLUDED = 1


def encode_query(pq: PackedQuery, keys: EvalKeySet | None, preset) -> bytes:
    out = io.BytesIO()
    out.write(struct.pack("<B", KEYS_INCLUDED if keys is not None else 0))
    if keys is not None:
        blob = serialize_keys(keys, preset)
        out.write(struct.pack("<I", len(blob)))
        out.write(blob)
    out.write(struct.pack("<BIH", pq.compression, pq.code_length, len(pq.cts)))
    for ct in pq.cts:
        b = serialize_ciphertext(ct)
        out.write(struct.pack("<I", len(b)))
        out.write(b)
    return out.getvalue()


def decode_query(data: bytes, preset) -> tuple[PackedQuery, EvalKeySet | None]:
    try:
        (flags,) = struct.unpack_from("<B", data, 0)
        pos = 1
        keys = None
        if flags & KEYS_INCLUDED:
            (klen,) = struct.unpack_from("<I", data, pos)
            keys, end = deserialize_keys(data[pos + 4 : pos + 4 + klen])
            if end != klen:
                raise ProtocolError("trailing bytes in key block")
            pos += 4 + klen
        c, m, h = struct.unpack_from("<BIH", data, pos)
        pos += 7
        cts = []
        for _ in range(h):
            (ln,) = struct.unpack_from("<I", data, pos)
            cts.append(deserialize_ciphertext(data[pos + 4 : pos + 4 + ln], preset))
            pos += 4 + ln
    except struct.error as exc:
        raise ProtocolError(f"truncated query: {exc}") from None
    if pos != len(data):
        raise ProtocolError("trailing bytes after query")
    try:
        return PackedQuery(tuple(cts), c, m), keys
    except ValueError as exc:
        raise ProtocolError(str(exc)) from None


def encode_response(cts: Iterable[BfvCiphertext]) -> bytes:
    blobs = [serialize_ciphertext(c, seeded=False) for c in cts]
    return struct.pack("<H", len(blobs)) + b"".join(struct.pack("<I", len(b)) + b for b in blobs)


def decode_response(data: bytes, preset) -> list[BfvCiphertext]:
    try:
        (count,) = struct.unpack_from("<H", data, 0)
        pos, out = 2, []
        for _ in range(count):
            (ln,) = struct.unpack_from("<I", data, pos)
            out.append(deserialize_ciphertext(data[pos + 4 : pos + 4 + ln], preset))
            pos += 4 + ln
    except struct.error as exc:
        raise ProtocolError(f"truncated response: {exc}") from None
    if pos != len(data):
        raise ProtocolError("trailing bytes after response")
    return out


def encode_hello(info: dict) -> bytes:
    return json.dumps(info, sort_keys=True).encode()


def decode_hello(data: bytes) -> dict:
    try:
        return json.loads(data.decode()) if data else {}
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolError(f"malformed HELLO payload: {exc}") from None


# ---------------------------------------------------------------------------
# database files

DB_HEADER = struct.Struct("<QBHIB")
MODES = {0: "index", 1: "keyword", 2: "keyword-lossy"}
MODE_IDS = {v: k for k, v in MODES.items()}


@dataclass(frozen=True)
class DbFile:
    mode: str
    keyword_bits: int
    s: int
    preset_id: int
    records: tuple  # (key bytes, payload bytes)

    def __post_init__(self):
        if self.mode not in MODE_IDS:
            raise ValueError(f"unknown mode {self.mode!r}")
        keys = [k for k, _ in self.records]
        if len(set(keys)) != len(keys):
            raise ValueError("duplicate keys in database file")

    def to_bytes(self) -> bytes:
        out = io.BytesIO()
        out.write(DB_HEADER.pack(len(self.records), MODE_IDS[self.mode], self.keyword_bits, self.s, self.preset_id))
        for key, payload in self.records:
            out.write(struct.pack("<I", len(key)) + key)
            out.write(struct.pack("<I", len(payload)) + payload)
        return out.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "DbFile":
        try:
            count, mode, bits, s, preset_id = DB_HEADER.unpack_from(data)
            pos, records = DB_HEADER.size, []
            for _ in range(count):
                (kl,) = struct.unpack_from("<I", data, pos)
                key = data[pos + 4 : pos + 4 + kl]
                pos += 4 + kl
                (pl,) = struct.unpack_from("<I", data, pos)
                payload = data[pos + 4 : pos + 4 + pl]
                pos += 4 + pl
                if len(key) != kl or len(payload) != pl:
                    raise ProtocolError("truncated database record")
                records.append((bytes(key), bytes(payload)))
        except struct.error as exc:
            raise ProtocolError(f"truncated database file: {exc}") from None
        if pos != len(data):
            raise ProtocolError("trailing bytes in database file")
        if mode not in MODES:
            raise ProtocolError(f"unknown database mode {mode}")
        return cls(MODES[mode], bits, s, preset_id, tuple(records))

    def write(self, path) -> None:
        with open(path, "wb") as f:
            f.write(self.to_bytes())

    @classmethod
    def read(cls, path) -> "DbFile":
        with open(path, "rb") as f:
            return cls.from_bytes(f.read())
