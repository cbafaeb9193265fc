"""Regenerate the code-length and comparison tables and diff them against the golden CSV."""

import argparse
import difflib
import sys
from pathlib import Path

from cwpir.cost import comparison_table_csv, equality_operator_costs, records_csv
from cwpir.cwcode import min_code_length

GOLDEN = Path(__file__).resolve().parent.parent / "tests" / "data" / "query_lengths.csv"


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--golden", type=Path, default=GOLDEN)
    args = ap.parse_args(argv)

    print("code length m for n = 2^(2^j), j = 3..9")
    for shift in range(4):
        label = "k = log2 n" if shift == 0 else f"k = log2 n / {2**shift}"
        row = [min_code_length(2 ** (2**j), 2 ** (j - shift)) for j in range(3, 10)]
        print(f"  {label:14s} {row}")
    print("code length m for k = 2, n = 2^8 .. 2^18")
    print("  ", [min_code_length(2**b, 2) for b in range(8, 19)])
    print()
    print("equality operators at n = 2^16, k = 16")
    print(records_csv(equality_operator_costs(1 << 16, 16)))

    ours = comparison_table_csv()
    sys.stdout.write(ours)
    diff = list(difflib.unified_diff(args.golden.read_text().splitlines(), ours.splitlines(),
                                     "golden", "computed", lineterm=""))
    print("\n".join(diff) if diff else f"no differences against {args.golden}")
    return 1 if diff else 0


if __name__ == "__main__":
    sys.exit(main())
