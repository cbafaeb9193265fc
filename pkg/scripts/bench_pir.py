"""Index PIR benchmark across Hamming weights, with per-stage timings and op counts."""

import argparse
import sys

from cwpir.cli import _emit, bench_pir, parse_size


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", default="512")
    ap.add_argument("--weights", type=int, nargs="+", default=[1, 2, 4])
    ap.add_argument("--preset", default="toy-1024")
    ap.add_argument("--backend", choices=["transparent", "bfv"], default="bfv")
    ap.add_argument("--queries", type=int, default=2)
    ap.add_argument("--payload", type=int, default=None)
    args = ap.parse_args(argv)
    n = parse_size(args.n)
    rows = [bench_pir(n, k, preset=args.preset, backend=args.backend, queries=args.queries,
                      payload=args.payload) for k in args.weights]
    _emit(rows)
    return 0 if all(r["correct"] == f"{args.queries}/{args.queries}" for r in rows) else 1


if __name__ == "__main__":
    sys.exit(main())
