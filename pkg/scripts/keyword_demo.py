"""Keyword PIR over TCP: start a loopback server, look up present and absent keys, print the frame trace."""

import argparse
import random
import sys

from cwpir.client import PirClient
from cwpir.server import PirService, PirTcpServer, ServeOptions, config_from_dbfile, database_from_dbfile
from cwpir.wire import DbFile


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=64)
    ap.add_argument("--keyword-bits", type=int, default=32)
    ap.add_argument("--lookups", type=int, default=3)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args(argv)

    rng = random.Random(args.seed)
    width = -(-args.keyword_bits // 8)
    keys = rng.sample(range(1 << args.keyword_bits), args.n)
    records = tuple((k.to_bytes(width, "big"), f"record for {k}".encode()) for k in keys)
    dbf = DbFile("keyword", args.keyword_bits, 0, 1, records)
    cfg = config_from_dbfile(dbf, ServeOptions())
    print(f"n={cfg.n} |S|=2^{cfg.keyword_bits} k={cfg.weight} m={cfg.code_length} c={cfg.compression} "
          f"preset={cfg.preset}")
    server = PirTcpServer(("127.0.0.1", 0), PirService(cfg, database_from_dbfile(dbf, cfg)))
    server.start_background()
    ok = True
    try:
        with PirClient(server.server_address, seed=args.seed) as client:
            stored = set(keys)
            absent = [x for x in (rng.randrange(1 << args.keyword_bits) for _ in range(100)) if x not in stored]
            for key, want in [(k, f"record for {k}".encode()) for k in keys[: args.lookups]] + \
                             [(x, None) for x in absent[: args.lookups]]:
                got = client.query(key)
                ok &= got == want
                print(f"key {key:>12d}: {got!r}  (query {client.last_query_bytes} B, "
                      f"response {client.last_response_bytes} B)")
            print("frame trace:")
            for e in client.trace.entries:
                print(f"  {e.direction:4s} {e.kind.name:8s} {e.length} B")
    finally:
        server.shutdown()
        server.server_close()
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
