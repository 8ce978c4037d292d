"""Rush hour with per-rule parameters picked from a drop-model sweep.

    python3 scripts/rush_hour.py [--sweep results/sweep_drop_C100/summary.csv] [--capacity 100]

Prints the transient drop (first three bins after onset), one-sided Welch
p-values of AIMD against the others and the steady bandwidth during rush.
"""

import argparse
import dataclasses
from pathlib import Path

import numpy as np

from plasticflow import scenarios
from plasticflow.config import parse_config
from plasticflow.metrics import welch_less

ROOT = Path(__file__).resolve().parent.parent


def main():
    parser = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    parser.add_argument("--sweep", type=Path, default=ROOT / "results" / "sweep_drop_C100" / "summary.csv")
    parser.add_argument("--capacity", type=int, default=100)
    parser.add_argument("--workers", type=int, default=1)
    args = parser.parse_args()

    config = parse_config(ROOT / "configs" / "rushhour.cfg")
    config = dataclasses.replace(
        config, params_from=str(args.sweep), capacity=args.capacity, workers=args.workers
    )
    out = ROOT / f"{config.output_dir}_C{args.capacity}"
    out.mkdir(parents=True, exist_ok=True)
    rules = scenarios.selected_rules(config)
    results = scenarios.run_experiment(config, rules, keep_series=True)
    scenarios.write_simulation(config, rules, results, out)
    width = config.series_bin
    onset, stop = config.schedule_window
    transient, steady = {}, {}
    for rule in rules:
        mine = [r for r in results if r.rule == rule]
        transient[rule.kind.value] = [scenarios.transient_drop(r, onset, width) for r in mine]
        steady[rule.kind.value] = np.mean(
            [scenarios.window_bandwidth(r, (onset + stop) // 2, stop, width) for r in mine]
        )
    print(f"{'rule':<7}{'ki':>6}{'kd':>6}{'transient %':>13}{'p (aimd <)':>12}{'steady bw':>11}")
    for rule in rules:
        k = rule.kind.value
        p = "" if k == "aimd" else f"{welch_less(transient['aimd'], transient[k]):.3g}"
        print(f"{k:<7}{rule.ki:>6g}{rule.kd:>6g}{np.mean(transient[k]):>13.2f}{p:>12}{steady[k]:>11.2f}")
    print(f"CSV files in {out}")


if __name__ == "__main__":
    main()
