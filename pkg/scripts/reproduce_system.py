"""Print the free-mode determining system next to the reference table.

Each printed row is matched against the computed coefficient of the same jet
monomial, up to a nonzero constant, with the numeric oracle.
"""

import argparse

from grdcsym.catalog import compare_structure, compare_system
from grdcsym.lang import render


def main():
    ap = argparse.ArgumentParser(description="compare the determining system with the reference table")
    ap.add_argument("--seed", type=int, default=42)
    args = ap.parse_args()

    system, rows = compare_system(seed=args.seed)
    print(f"computed rows: {len(system.rows)}")
    for m, c in system.rows:
        print(f"  [{render(m)}]  {render(c)}")
    print()
    for row in rows:
        tag = row["status"]
        if tag == "match":
            tag += f" (constant {row['constant']})"
        print(f"{row['monomial']:>12}  {tag}")
        if row["status"] == "mismatch":
            print(f"{'':>14}printed : {row['printed']}")
            print(f"{'':>14}computed: {row['computed']}")

    _, facts, eqs = compare_structure(seed=args.seed)
    print()
    print("facts: " + ", ".join(f"{f} = 0" for f in facts))
    for row in eqs:
        print(f"  {row['status']:>8}  {row['printed']} = 0")


if __name__ == "__main__":
    main()
