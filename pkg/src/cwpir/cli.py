"""Command line entry point: ``cwpir {serve,query,bench,analyze,build-db}``."""

from __future__ import annotations

import argparse
import logging
import random
import sys
import time

from . import cost
from .backend import TransparentBackend
from .bfv import PRESETS, BfvBackend, get_preset
from .cwcode import CodeSpec, min_code_length, perfect_map
from .encoding import batch_decode
from .errors import CwPirError
from .eq import BitSlicedBatch, arith_cw_eq, arith_folklore_eq, ceil_log2, plain_cw_eq, plain_folklore_eq
from .expansion import expand
from .protocol import INDEX, PirConfig, build_query, compute_selection_vector, extract, inner_product, make_client, make_server_backend, setup
from .wire import DbFile, ciphertext_size


def parse_size(text: str) -> int:
    """Integers written plainly or as powers, e.g. ``4096`` or ``2^16``."""
    text = text.strip()
    if "^" in text:
        base, exp = text.split("^", 1)
        return int(base) ** int(exp)
    if "**" in text:
        base, exp = text.split("**", 1)
        return int(base) ** int(exp)
    return int(text)


def _emit(rows: list[dict], out=None) -> None:
    out = out or sys.stdout
    if not rows:
        return
    cols = list(rows[0])
    print(",".join(cols), file=out)
    for r in rows:
        print(",".join(str(r[c]) for c in cols), file=out)


# ---------------------------------------------------------------------------
# serve / query


def cmd_serve(args) -> int:
    from .server import PirService, PirTcpServer, ServeOptions, config_from_dbfile, database_from_dbfile, parse_bind

    dbf = DbFile.read(args.db)
    opts = ServeOptions(weight=args.k, compression=args.c, preset=args.preset,
                        lossy_seed=bytes.fromhex(args.lossy_seed) if args.lossy_seed else b"",
                        max_frame=args.max_frame)
    config = config_from_dbfile(dbf, opts)
    db = database_from_dbfile(dbf, config)
    service = PirService(config, db, args.max_frame)
    server = PirTcpServer(parse_bind(args.bind), service)
    host, port = server.server_address[:2]
    logging.info("serving %d rows on %s:%d (m=%d, k=%d, c=%d, preset=%s)",
                 config.n, host, port, config.code_length, config.weight, config.compression, config.preset)
    print(f"listening on {host}:{port}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


def cmd_query(args) -> int:
    from .client import PirClient, parse_key
    from .server import parse_bind

    with PirClient(parse_bind(args.addr), timeout=args.timeout) as client:
        result = client.query(parse_key(args.key, client.config))
        if args.trace:
            for e in client.trace.entries:
                print(f"{e.direction} {e.kind.name} {e.length}", file=sys.stderr)
    if result is None:
        print("not found", file=sys.stderr)
        return 1
    if args.out:
        with open(args.out, "wb") as f:
            f.write(result)
    else:
        sys.stdout.buffer.write(result)
        sys.stdout.flush()
    return 0


def cmd_build_db(args) -> int:
    rng = random.Random(args.seed)
    preset = get_preset(args.preset)
    if args.mode == "index":
        keys = [i.to_bytes(8, "little") for i in range(args.n)]
    elif args.mode == "keyword":
        width = -(-args.keyword_bits // 8)
        keys = [k.to_bytes(width, "big") for k in rng.sample(range(1 << args.keyword_bits), args.n)]
    else:
        keys = [f"key-{i}".encode() for i in range(args.n)]
    records = tuple((k, rng.randbytes(args.payload_size)) for k in keys)
    DbFile(args.mode, args.keyword_bits, 0, preset.preset_id, records).write(args.out)
    print(f"wrote {args.n} records to {args.out}")
    return 0


# ---------------------------------------------------------------------------
# bench


def _bench_backend(name: str, preset: str, galois=()):
    if name == "transparent":
        return TransparentBackend(get_preset(preset).context.params)
    return BfvBackend.client(preset, galois, seed=0)


def bench_eq(op: str, n: int, k: int, preset: str = "paper-8192", backend: str = "transparent",
             elements: int = 16, seed: int = 0) -> dict:
    """Evaluate one equality operator on a batch of random elements and report its cost."""
    rng = random.Random(seed)
    be = _bench_backend(backend, preset)
    slots = min(elements, be.params.degree)
    if op in ("plain-fl", "arith-fl"):
        width = max(1, ceil_log2(n))
        draw = lambda: rng.randrange(min(n, 1 << width))  # noqa: E731
        enc = lambda v: v  # noqa: E731
    else:
        width = min_code_length(n, k)
        spec = CodeSpec(width, k)
        draw = lambda: rng.randrange(min(n, spec.capacity))  # noqa: E731
        enc = lambda v: perfect_map(v, spec).bits  # noqa: E731
    ref = draw()
    xs = [ref if i % 2 == 0 else draw() for i in range(slots)]
    x = BitSlicedBatch.encrypt(be, [enc(v) for v in xs], width)
    before = be.meter.snapshot()
    t0 = time.perf_counter()
    if op == "plain-fl":
        res = plain_folklore_eq(be, x, ref)
    elif op == "plain-cw":
        res = plain_cw_eq(be, x, perfect_map(ref, spec), k)
    else:
        y = BitSlicedBatch.encrypt(be, [enc(ref)] * slots, width)
        before = be.meter.snapshot()
        t0 = time.perf_counter()
        res = arith_folklore_eq(be, x, y) if op == "arith-fl" else arith_cw_eq(be, x, y, k)
    fin = getattr(be, "finalize", None)
    res = fin(res) if fin else res
    elapsed = time.perf_counter() - t0
    counts = be.meter.snapshot() - before
    got = batch_decode(be.decrypt(res))[:slots]
    ok = got == [int(v == ref) for v in xs]
    return {
        "op": op, "n_bits": n.bit_length() - 1, "k": k if op.endswith("cw") else "",
        "width": width, "depth": res.depth, "mul": counts.mul, "plain_mul": counts.plain_mul,
        "backend": backend, "seconds": round(elapsed, 4), "correct": ok,
    }


def bench_pir(n: int, k: int, s: int = 1, preset: str = "paper-8192", backend: str = "bfv",
              c: int | None = None, queries: int = 1, payload: int | None = None, seed: int = 0) -> dict:
    """Index PIR over random rows, timing the server stages separately."""
    rng = random.Random(seed)
    cfg = PirConfig.create(INDEX, n, preset, weight=k, compression=c)
    size = payload if payload is not None else max(1, s * cfg.plaintext_bytes - 4)
    rows = [(i, rng.randbytes(size)) for i in range(n)]
    db = setup(rows, cfg, s=s)
    transparent = backend == "transparent"
    client = make_client(cfg, seed=seed, transparent=transparent)
    server = make_server_backend(cfg, client.keys, transparent)
    prepared = [tuple(server.prepare(p) for p in r) for r in db.rows]
    t_exp = t_sel = t_ip = 0.0
    correct = 0
    counts = None
    for _ in range(queries):
        q = rng.randrange(n)
        pq = build_query(q, cfg, client)
        before = server.meter.snapshot()
        t0 = time.perf_counter()
        eq = expand(pq, server)
        t1 = time.perf_counter()
        sel = compute_selection_vector(eq, db, server)
        mid = server.meter.snapshot()
        t2 = time.perf_counter()
        resp = inner_product(sel, db, server, prepared)
        t3 = time.perf_counter()
        t_exp, t_sel, t_ip = t_exp + t1 - t0, t_sel + t2 - t1, t_ip + t3 - t2
        sel_counts = mid - before
        counts = server.meter.snapshot() - before
        correct += extract(resp, cfg, client) == rows[q][1]
    report = {
        "n": n, "k": k, "s": s, "m": cfg.code_length, "c": cfg.compression,
        "upload_cts": cfg.upload_count, "download_cts": s, "depth": cfg.depth,
        "sel_mul": sel_counts.mul, "plain_mul": counts.plain_mul, "substitutions": counts.substitute,
        "expand_s": round(t_exp / queries, 3), "select_s": round(t_sel / queries, 3),
        "inner_s": round(t_ip / queries, 3), "correct": f"{correct}/{queries}",
    }
    if not transparent:
        report["query_bytes"] = cfg.upload_count * ciphertext_size(preset, seeded=True)
        report["response_bytes"] = s * ciphertext_size(preset)
    return report


def cmd_bench(args) -> int:
    if args.what == "eq":
        rows = [bench_eq(op, parse_size(args.n), args.k, args.preset, args.backend, args.elements, args.seed)
                for op in args.op]
    else:
        rows = [bench_pir(parse_size(args.n), args.k, args.s, args.preset, args.backend, args.c,
                          args.queries, args.payload, args.seed)]
    _emit(rows)
    return 0 if all(r["correct"] in (True, f"{args.queries}/{args.queries}") for r in rows) else 1


# ---------------------------------------------------------------------------
# analyze


def cmd_analyze(args) -> int:
    if args.table == "lengths":
        text = cost.comparison_table_csv()
        if args.out:
            with open(args.out, "w") as f:
                f.write(text)
        else:
            sys.stdout.write(text)
        return 0
    n = parse_size(args.n)
    if args.table == "operators":
        sys.stdout.write(cost.records_csv(cost.equality_operator_costs(n, args.k)))
        return 0
    p = get_preset(args.preset)
    ctx = p.context
    F = args.expansion or cost.expansion_factor(ctx.params.coeff_modulus.bit_length(), p.plain_modulus.bit_length() - 1)
    domain = parse_size(args.domain) if args.domain else n
    c = args.c if args.c is not None else min(ceil_log2(min_code_length(domain, args.k)), ceil_log2(p.degree))
    reports = [
        cost.sealpir_mulpir_cost("sealpir", n, args.d, args.s, F, domain),
        cost.sealpir_mulpir_cost("mulpir", n, args.d, args.s, F, domain),
        cost.cw_pir_cost(n, domain, args.k, args.s, c),
    ]
    if domain == n:
        ell = max(1, ceil_log2(n))
        reports.insert(2, cost.folklore_pir_cost(n, args.s, min(ceil_log2(ell), ceil_log2(p.degree))))
    sys.stdout.write(cost.records_csv(reports))
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cwpir", description="Constant-weight keyword PIR")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("serve", help="answer PIR queries over TCP")
    sp.add_argument("--db", required=True)
    sp.add_argument("--bind", default="127.0.0.1:7878")
    sp.add_argument("--k", type=int, default=None, help="Hamming weight (default: preset rule)")
    sp.add_argument("--c", type=int, default=None, help="compression factor")
    sp.add_argument("--preset", choices=sorted(PRESETS), default=None)
    sp.add_argument("--lossy-seed", default="", help="hex seed for keyword-lossy databases")
    sp.add_argument("--max-frame", type=int, default=256 << 20)
    sp.set_defaults(func=cmd_serve)

    sp = sub.add_parser("query", help="retrieve one row")
    sp.add_argument("--addr", required=True)
    sp.add_argument("--key", required=True)
    sp.add_argument("--out", default=None)
    sp.add_argument("--timeout", type=float, default=None)
    sp.add_argument("--trace", action="store_true", help="print the frame trace to stderr")
    sp.set_defaults(func=cmd_query)

    sp = sub.add_parser("build-db", help="write a random database file")
    sp.add_argument("--out", required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--mode", choices=["index", "keyword", "keyword-lossy"], default="index")
    sp.add_argument("--keyword-bits", type=int, default=0)
    sp.add_argument("--payload-size", type=int, default=32)
    sp.add_argument("--preset", choices=sorted(PRESETS), default="toy-1024")
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_build_db)

    sp = sub.add_parser("bench", help="equality-operator and PIR benchmarks")
    sp.add_argument("what", choices=["eq", "pir"])
    sp.add_argument("--op", nargs="+", choices=["plain-fl", "plain-cw", "arith-fl", "arith-cw"],
                    default=["plain-fl", "plain-cw", "arith-fl", "arith-cw"])
    sp.add_argument("--n", default="2^16")
    sp.add_argument("--k", type=int, default=2)
    sp.add_argument("--s", type=int, default=1)
    sp.add_argument("--c", type=int, default=None)
    sp.add_argument("--preset", choices=sorted(PRESETS), default="paper-8192")
    sp.add_argument("--backend", choices=["transparent", "bfv"], default=None)
    sp.add_argument("--elements", type=int, default=16, help="slots filled in eq benchmarks")
    sp.add_argument("--queries", type=int, default=1)
    sp.add_argument("--payload", type=int, default=None)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("analyze", help="closed-form cost tables")
    sp.add_argument("--table", choices=["operators", "protocols", "lengths"], required=True,
                    help="equality-operator costs, protocol comparison, or query-length comparison")
    sp.add_argument("--n", default="2^14")
    sp.add_argument("--domain", default=None, help="keyword domain size (default: n)")
    sp.add_argument("--k", type=int, default=2)
    sp.add_argument("--d", type=int, default=2)
    sp.add_argument("--s", type=int, default=1)
    sp.add_argument("--c", type=int, default=None)
    sp.add_argument("--preset", choices=sorted(PRESETS), default="paper-8192")
    sp.add_argument("--expansion", type=int, default=None, help="override F")
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_analyze)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "backend", "x") is None:
        args.backend = "transparent" if args.what == "eq" else "bfv"
    try:
        return args.func(args)
    except (CwPirError, ValueError, OSError) as exc:
        if args.verbose:
            raise
        print(f"cwpir: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
