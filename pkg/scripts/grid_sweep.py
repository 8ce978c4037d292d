"""Grid sweep over every rule in both congestion models; prints per-rule means.

    python3 scripts/grid_sweep.py [--capacity 100] [--repeats 25] [--workers 1]
"""

import argparse
import dataclasses
import time
from pathlib import Path

import numpy as np

from plasticflow import scenarios
from plasticflow.config import parse_config

ROOT = Path(__file__).resolve().parent.parent


def main():
    parser = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    parser.add_argument("--capacity", type=int, default=100)
    parser.add_argument("--repeats", type=int, default=25)
    parser.add_argument("--workers", type=int, default=1)
    args = parser.parse_args()

    for model in ("drop", "queue"):
        config = parse_config(ROOT / "configs" / f"sweep_{model}.cfg")
        config = dataclasses.replace(
            config, capacity=args.capacity, repeats=args.repeats, workers=args.workers
        )
        out = ROOT / "results" / f"sweep_{model}_C{args.capacity}"
        out.mkdir(parents=True, exist_ok=True)
        start = time.perf_counter()
        scenarios.sweep(config, out)
        rows = scenarios.read_summary(out / "summary.csv")
        penalty = "drop_pct" if model == "drop" else "queue_pct"
        print(f"{model} model, C={args.capacity}, {time.perf_counter() - start:.0f}s -> {out}")
        print(f"  {'rule':<9}{'points':>7}{'mean %':>10}{'min %':>10}{'mean bw':>10}")
        for kind in config.rules:
            mine = [r for r in rows if r.rule == kind.value]
            pen = [getattr(r, penalty) for r in mine]
            bw = np.nanmean([r.bandwidth for r in mine])
            print(f"  {kind.value:<9}{len(mine):>7}{np.mean(pen):>10.2f}{np.min(pen):>10.2f}{bw:>10.2f}")


if __name__ == "__main__":
    main()
