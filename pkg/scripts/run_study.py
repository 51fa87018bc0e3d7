#!/usr/bin/env python3
"""Desk-scale end-to-end study on a synthetic dataset.

Generates a dataset, establishes the true non-dominated front by exhaustive
enumeration, runs the evolutionary search over many seeds, evaluates the
reference baselines, and merges everything into comparison and curve tables.

    python3 scripts/run_study.py --out-dir study_out            # ~5 min
    python3 scripts/run_study.py --out-dir study_out --quick    # ~30 s
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from mscopt.cli import main as mscopt


def sh(args):
    print("+ mscopt " + " ".join(args))
    rc = mscopt(args)
    if rc != 0:
        sys.exit(rc)


def run(out_dir: str, quick: bool, seed: int):
    out = Path(out_dir)
    data_dir = out / "data"
    runs = 10 if quick else 50
    pop, iters = (80, 30) if quick else (300, 150)

    sh(["synth", "--out-dir", str(data_dir), "--seed", str(seed),
        "--n-features", "8", "--n-samples", "600", "--n-informative", "5",
        "--cost-classes", "3", "--scaling", "linear100"])
    data = str(data_dir / "dataset.csv")
    costs = str(data_dir / "costs.json")
    common = ["--data", data, "--costs", costs,
              "--override", "k=3", "--override", "p_hat=0.75"]

    sh(["bruteforce", *common, "--out-dir", str(out)])
    sh(["evolve", *common, "--out-dir", str(out / "runs"), "--seed", str(seed),
        "--runs", str(runs),
        "--override", f"pop_size={pop}", "--override", f"max_iter={iters}"])
    sh(["baseline", *common, "--out-dir", str(out),
        *([] if not quick else ["--lambda-step", "5"])])

    reports = sorted(str(p) for p in (out / "runs").glob("run_report_*.json"))
    if not reports:
        reports = [str(out / "runs" / "run_report.json")]
    sh(["report", "--out-dir", str(out),
        "--global-front", str(out / "global_front.json"),
        "--baselines", str(out / "baselines.json"), *reports])

    print(f"\nstudy artifacts in {out}/: global_front.json, baselines.json, "
          f"comparison.csv, curves.csv, runs/")


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", default="study_out")
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--quick", action="store_true", help="smaller population and fewer runs")
    args = parser.parse_args()
    run(args.out_dir, args.quick, args.seed)
