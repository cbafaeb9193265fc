"""Sweep the four equality operators over weights and report depth, multiplications and time."""

import argparse
import sys

from cwpir.cli import _emit, bench_eq


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--log-n", type=int, default=16)
    ap.add_argument("--weights", type=int, nargs="+", default=[2, 4, 8, 16])
    ap.add_argument("--backend", choices=["transparent", "bfv"], default="transparent")
    ap.add_argument("--preset", default="paper-8192")
    ap.add_argument("--elements", type=int, default=16)
    args = ap.parse_args(argv)
    rows = []
    for k in args.weights:
        for op in ("plain-fl", "plain-cw", "arith-fl", "arith-cw"):
            if op.endswith("fl") and k != args.weights[0]:
                continue
            rows.append(bench_eq(op, 1 << args.log_n, k, args.preset, args.backend, args.elements))
    _emit(rows)
    return 0 if all(r["correct"] for r in rows) else 1


if __name__ == "__main__":
    sys.exit(main())
