"""Sweep the gap between consecutive means and report identification rate and regret per gap."""

import argparse
import csv
from pathlib import Path

from collision_mmab.harness import ExperimentSpec, run_sweep


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--gaps", default="0.09,0.05,0.02")
    parser.add_argument("--T", type=int, default=100_000)
    parser.add_argument("--seeds", type=int, default=5)
    parser.add_argument("--beta", type=float, default=1.5)
    parser.add_argument("--out", default="results/gap_sweep")
    args = parser.parse_args()
    spec = ExperimentSpec.from_dict({"K": 10, "M": 5, "T": args.T, "gap": 0.05, "beta": args.beta,
                                     "seeds": args.seeds})
    gaps = [float(g) for g in args.gaps.split(",")]
    run_sweep(spec, "delta_gap", gaps, args.out)
    with open(Path(args.out) / "sweep.csv") as fh:
        rows = list(csv.DictReader(fh))
    print(f"{'gap':>6} {'identified':>10} {'regret':>10} {'individual':>10} {'rounds':>6}")
    for g in gaps:
        sub = [r for r in rows if float(r["delta_gap"]) == g]
        ident = sum(r["top_identified"] == "True" for r in sub) / len(sub)
        mean = lambda key: sum(float(r[key]) for r in sub) / len(sub)
        print(f"{g:>6} {ident:>10.0%} {mean('regret'):>10.0f} {mean('regret_individual'):>10.0f} "
              f"{mean('comm_rounds'):>6.1f}")


if __name__ == "__main__":
    main()
