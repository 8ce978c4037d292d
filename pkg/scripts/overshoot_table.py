"""Two-flow overshoot table, analytic against simulated.

    python3 scripts/overshoot_table.py [--capacity 1000 50]

The engine-rounded oracle runs on integer weights; the raw columns repeat it
on unrounded, unfloored weights, which follows the closed forms.
"""

import argparse

from plasticflow.analysis import PARAMETER_SETS, TABLE_RULES, analytic_overshoot, rule_for_set, two_flow_oracle


def cell(result):
    n = "never" if result.never else result.n
    return f"{result.overshoot:.4g} ({n})"


def main():
    parser = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    parser.add_argument("--capacity", type=int, nargs="+", default=[1000, 50])
    args = parser.parse_args()
    for capacity in args.capacity:
        print(f"C = {capacity}")
        print(f"  {'rule':<6}{'set':<21}{'rounded':>16}{'raw':>16}{'formula at raw n':>18}")
        for kind in TABLE_RULES:
            if kind == "opt":
                continue
            for name in PARAMETER_SETS:
                rule = rule_for_set(kind, name)
                rounded = two_flow_oracle(rule, capacity)
                raw = two_flow_oracle(rule, capacity, rounding=False, floor=False)
                formula = "" if raw.never or kind == "oja" else f"{analytic_overshoot(rule, capacity, raw.n):.4g}"
                print(f"  {kind:<6}{name:<21}{cell(rounded):>16}{cell(raw):>16}{formula:>18}")


if __name__ == "__main__":
    main()
