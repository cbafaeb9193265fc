"""PIR client: negotiates parameters over HELLO and retrieves rows in one round each."""

from __future__ import annotations

import socket
from dataclasses import dataclass, field

from .bfv import BfvBackend
from .errors import ProtocolError
from .protocol import PirConfig, PirResponse, build_query, extract
from .wire import (
    DEFAULT_MAX_FRAME,
    Frame,
    MsgType,
    decode_hello,
    decode_response,
    encode_query,
    read_frame,
    write_frame,
)


@dataclass
class TraceEntry:
    direction: str  # "send" or "recv"
    kind: MsgType
    length: int


@dataclass
class FrameTrace:
    entries: list = field(default_factory=list)

    def record(self, direction: str, frame: Frame) -> None:
        self.entries.append(TraceEntry(direction, frame.kind, len(frame.payload)))

    def count(self, kind: MsgType, direction: str | None = None) -> int:
        return sum(1 for e in self.entries if e.kind == kind and (direction is None or e.direction == direction))

    def since(self, mark: int) -> "FrameTrace":
        return FrameTrace(self.entries[mark:])


def config_from_hello(info: dict) -> tuple[PirConfig, int]:
    cfg = PirConfig(
        mode=info["mode"], n=info["n"], weight=info["weight"], compression=info["compression"],
        preset=info["preset"], keyword_bits=info["keyword_bits"], lossy=info["lossy"],
        lossy_seed=bytes.fromhex(info["lossy_seed"]),
    )
    if cfg.code_length != info["code_length"]:
        raise ProtocolError("server code length disagrees with the negotiated parameters")
    return cfg, info["s"]


class PirClient:
    """Holds the secret key; keys are uploaded with the first query only."""

    def __init__(self, address: tuple[str, int], seed: int | None = None, timeout: float | None = None,
                 max_frame: int = DEFAULT_MAX_FRAME):
        self.sock = socket.create_connection(address, timeout=timeout)
        self.rfile = self.sock.makefile("rb")
        self.wfile = self.sock.makefile("wb")
        self.trace = FrameTrace()
        self.max_frame = max_frame
        reply = self._round(Frame(MsgType.HELLO))
        if reply.kind != MsgType.HELLO:
            raise ProtocolError(f"expected HELLO, got {reply.kind.name}")
        self.info = decode_hello(reply.payload)
        self.config, self.s = config_from_hello(self.info)
        self.backend = BfvBackend.client(self.config.preset, self.config.galois_elements, seed=seed)
        self._keys_sent = False
        self.last_query_bytes = 0
        self.last_response_bytes = 0

    def _round(self, frame: Frame) -> Frame:
        write_frame(self.wfile, frame)
        self.trace.record("send", frame)
        reply = read_frame(self.rfile, self.max_frame)
        if reply is None:
            raise ProtocolError("server closed the connection")
        self.trace.record("recv", reply)
        return reply

    def query(self, identifier) -> bytes | None:
        """Retrieve the payload for ``identifier``; ``None`` when it is absent."""
        pq = build_query(identifier, self.config, self.backend)
        keys = None if self._keys_sent else self.backend.keys
        payload = encode_query(pq, keys, self.config.preset)
        reply = self._round(Frame(MsgType.QUERY, payload))
        if reply.kind == MsgType.ERROR:
            raise ProtocolError(f"server error: {reply.payload.decode(errors='replace')}")
        if reply.kind != MsgType.RESPONSE:
            raise ProtocolError(f"expected RESPONSE, got {reply.kind.name}")
        self._keys_sent = True
        cts = decode_response(reply.payload, self.config.preset)
        self.last_query_bytes = len(payload)
        self.last_response_bytes = len(reply.payload)
        return extract(PirResponse(tuple(cts)), self.config, self.backend)

    def close(self) -> None:
        for f in (self.rfile, self.wfile, self.sock):
            try:
                f.close()
            except OSError:
                pass

    def __enter__(self) -> "PirClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def parse_key(text: str, config: PirConfig):
    """CLI keyword syntax: decimal or 0x-hex integers, or raw text for the lossy map."""
    if config.lossy:
        return text.encode()
    try:
        return int(text, 0)
    except ValueError:
        raise ValueError(f"key {text!r} is not an integer") from None
