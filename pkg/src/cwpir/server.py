"""Threaded TCP server answering framed PIR queries."""

from __future__ import annotations

import logging
import socketserver
import threading
from dataclasses import dataclass

from .bfv import BfvBackend, get_preset
from .errors import CwPirError, ProtocolError
from .protocol import INDEX, KEYWORD, PirConfig, PirDatabase, PirServer, setup
from .wire import (
    DEFAULT_MAX_FRAME,
    DbFile,
    Frame,
    MsgType,
    decode_query,
    encode_hello,
    encode_response,
    read_frame,
    write_frame,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ServeOptions:
    weight: int | None = None
    compression: int | None = None
    preset: str | None = None
    lossy_seed: bytes = b""
    max_frame: int = DEFAULT_MAX_FRAME


def config_from_dbfile(dbf: DbFile, opts: ServeOptions) -> PirConfig:
    preset = opts.preset or get_preset(dbf.preset_id).name
    mode = INDEX if dbf.mode == "index" else KEYWORD
    lossy = dbf.mode == "keyword-lossy"
    return PirConfig.create(
        mode, len(dbf.records), preset, weight=opts.weight, compression=opts.compression,
        keyword_bits=dbf.keyword_bits, lossy=lossy, lossy_seed=opts.lossy_seed if lossy else b"",
    )


def database_from_dbfile(dbf: DbFile, config: PirConfig) -> PirDatabase:
    s = dbf.s if dbf.s > 0 else None
    return setup(dbf.records, config, s=s)


def hello_info(config: PirConfig, db: PirDatabase, max_frame: int) -> dict:
    return {
        "mode": config.mode,
        "n": config.n,
        "weight": config.weight,
        "code_length": config.code_length,
        "compression": config.compression,
        "preset": config.preset,
        "preset_id": get_preset(config.preset).preset_id,
        "keyword_bits": config.keyword_bits,
        "lossy": config.lossy,
        "lossy_seed": config.lossy_seed.hex(),
        "s": db.s,
        "max_frame": max_frame,
    }


class PirService:
    """Protocol state shared by all connections: the database and its prepared rows."""

    def __init__(self, config: PirConfig, db: PirDatabase, max_frame: int = DEFAULT_MAX_FRAME):
        self.config = config
        self.db = db
        self.max_frame = max_frame
        self.engine = PirServer(db, BfvBackend(config.preset))
        self.hello = encode_hello(hello_info(config, db, max_frame))

    def handle(self, frame: Frame, session: dict) -> Frame:
        """Answer one request frame; ``session`` caches the connection's keys."""
        if frame.kind == MsgType.HELLO:
            return Frame(MsgType.HELLO, self.hello)
        if frame.kind != MsgType.QUERY:
            raise ProtocolError(f"unexpected {frame.kind.name} frame")
        pq, keys = decode_query(frame.payload, self.config.preset)
        if keys is not None:
            session["backend"] = BfvBackend(self.config.preset, keys=keys)
        backend = session.get("backend")
        if backend is None:
            raise ProtocolError("no evaluation keys on this connection")
        resp = self.engine.process(pq, backend)
        return Frame(MsgType.RESPONSE, encode_response(resp.cts))


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        service: PirService = self.server.service
        session: dict = {}
        while True:
            try:
                frame = read_frame(self.rfile, service.max_frame)
            except EOFError:
                return
            except ProtocolError as exc:
                self._error(exc)
                continue
            if frame is None:
                return
            try:
                reply = service.handle(frame, session)
            except (CwPirError, ValueError, KeyError) as exc:
                log.warning("request failed: %s", exc)
                self._error(exc)
                continue
            write_frame(self.wfile, reply)

    def _error(self, exc: Exception) -> None:
        try:
            write_frame(self.wfile, Frame(MsgType.ERROR, str(exc).encode()))
        except OSError:
            pass


class PirTcpServer(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, address, service: PirService):
        super().__init__(address, _Handler)
        self.service = service

    def start_background(self) -> threading.Thread:
        th = threading.Thread(target=self.serve_forever, daemon=True)
        th.start()
        return th


def parse_bind(addr: str) -> tuple[str, int]:
    host, _, port = addr.rpartition(":")
    if not port.isdigit():
        raise ValueError(f"address must be HOST:PORT, got {addr!r}")
    return host or "127.0.0.1", int(port)
