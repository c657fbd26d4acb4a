"""Run the 20-seed reference configuration and write CSVs (K=10, M=5, T=5e4, means 0.9..0.89, beta=4)."""

import argparse
import logging

from collision_mmab.harness import ExperimentSpec, failure_report, run_experiment, write_outputs


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="results/reference")
    parser.add_argument("--seeds", type=int, default=20)
    parser.add_argument("--workers", type=int, default=1)
    args = parser.parse_args()
    logging.basicConfig(level=logging.INFO)
    spec = ExperimentSpec.from_dict({"K": 10, "M": 5, "T": 50_000, "beta": 4.0,
                                     "seeds": args.seeds, "workers": args.workers})
    runs = run_experiment(spec)
    paths = write_outputs(spec, runs, args.out)
    final = [r.row["regret"] for r in runs]
    print(f"mean final regret {sum(final) / len(final):.1f} over {len(final)} seeds; curves in {paths['curves']}")
    if failure_report(runs):
        raise SystemExit(f"invariant failures: {failure_report(runs)}")


if __name__ == "__main__":
    main()
