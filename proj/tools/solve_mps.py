#!/usr/bin/env python3
"""Solve an exported MPS model with HiGHS and write a "name value" solution file.

The exported objective row holds -Z, so the reported Z is the negated optimum.
With --fix, binaries X*/Y* are pinned to the values in a solution file (absent
names are pinned to zero) and only the continuous columns are optimized.
"""

import argparse
import sys

import highspy


def read_fixings(path):
    values = {}
    with open(path) as handle:
        for line in handle:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            name, value = line.split()
            values[name] = float(value)
    return values


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("mps")
    parser.add_argument("--solution", help="write the optimal column values here")
    parser.add_argument("--fix", help="pin X and Y columns to this solution file")
    parser.add_argument("--time-limit", type=float, default=600.0)
    args = parser.parse_args()

    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("time_limit", args.time_limit)
    h.setOptionValue("mip_rel_gap", 0.0)
    if h.readModel(args.mps) != highspy.HighsStatus.kOk:
        print(f"cannot read {args.mps}", file=sys.stderr)
        return 2
    lp = h.getLp()
    names = list(lp.col_names_)

    if args.fix:
        fixings = read_fixings(args.fix)
        for col, name in enumerate(names):
            if name[0] in "XY":
                v = round(fixings.get(name, 0.0))
                h.changeColBounds(col, v, v)

    h.run()
    status = h.getModelStatus()
    if status != highspy.HighsModelStatus.kOptimal:
        print(f"solver status: {h.modelStatusToString(status)}", file=sys.stderr)
        return 1
    objective = -h.getInfo().objective_function_value
    print(f"Z {objective:.17g}")

    if args.solution:
        values = h.getSolution().col_value
        with open(args.solution, "w") as out:
            out.write(f"# objective {objective:.17g}\n")
            for name, value in zip(names, values):
                if name[0] in "XY":
                    value = float(round(value))
                if value != 0.0:
                    out.write(f"{name} {value:.17g}\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
