"""Command-line interface: dataset prep, evolution runs, brute-force fronts,
baselines, neighborhood scans, and report merging.

Every command resolves its configuration as defaults < --config JSON <
--override key=value, echoes the resolved values into its artifacts, and
writes artifacts atomically (write to a temp file, then rename). The only
non-deterministic output field is the `created_at` header key.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import tempfile
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
from scipy import stats

from .baselines import aggregate_metric, cact_lasso, cost_ordered, single_stage
from .cascade import CascadeEvaluator, Chromosome
from .classifier import Regularization
from .data import SplitSpec, assign_gini_cost_classes, impute_standardize, load_csv, make_synthetic, split
from .evolution import EvolutionConfig, run
from .space import (
    DEFAULT_ENUMERATION_CAP,
    EnumerationCapExceeded,
    GlobalFront,
    global_front,
    neighborhood_scan,
)

DEFAULTS = {
    "m_hat": 0.075,
    "r_hat": 0.8,
    "b": 0.2,
    "pop_size": 300,
    "beta": 2.0,
    "p_hat": 0.75,
    "epsilon": 0.01,
    "max_iter": 150,
    "patience": 20,
    "k": None,  # defaults to min(n, max(ceil(n/2), 10))
    "lambda": 1.0,
    "fractions": [0.5, 0.25, 0.25],
    "split_seed": 0,
    "seed": 0,
    "enumeration_cap": DEFAULT_ENUMERATION_CAP,
}


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _write_atomic(path: Path, write_fn):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            write_fn(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path: Path, doc: dict):
    _write_atomic(path, lambda fh: json.dump(doc, fh, indent=2, sort_keys=True))


def write_csv(path: Path, header, rows):
    def emit(fh):
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)

    _write_atomic(path, emit)


def _coerce(value: str):
    try:
        return json.loads(value)
    except json.JSONDecodeError:
        return value


def resolve_config(args) -> dict:
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        with open(args.config) as fh:
            cfg.update(json.load(fh))
    for item in getattr(args, "override", None) or []:
        if "=" not in item:
            raise SystemExit(f"--override expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        cfg[key] = _coerce(value)
    if getattr(args, "seed", None) is not None:
        cfg["seed"] = args.seed
    return cfg


def _default_k(n: int) -> int:
    return min(n, max(math.ceil(n / 2), 10))


def _prepare(args, cfg):
    ds, schema = load_csv(args.data, args.costs)
    spec = SplitSpec(tuple(cfg["fractions"]), int(cfg["split_seed"]))
    train_ds, val_ds, test_ds = split(ds, spec)
    train_ds, (val_ds, test_ds), _ = impute_standardize(train_ds, [val_ds, test_ds])
    return ds, schema, train_ds, val_ds, test_ds


def _evolution_config(cfg, n: int) -> EvolutionConfig:
    k = cfg["k"] if cfg["k"] else _default_k(n)
    return EvolutionConfig(
        n_features=n,
        k=int(k),
        pop_size=int(cfg["pop_size"]),
        m_hat=float(cfg["m_hat"]),
        r_hat=float(cfg["r_hat"]),
        b=float(cfg["b"]),
        beta=float(cfg["beta"]),
        p_hat=float(cfg["p_hat"]),
        epsilon=float(cfg["epsilon"]),
        max_iter=int(cfg["max_iter"]),
        patience=int(cfg["patience"]),
        seed=int(cfg["seed"]),
    )


def cmd_synth(args) -> int:
    cfg = resolve_config(args)
    out = Path(args.out_dir)
    ds = make_synthetic(
        args.n_features, args.n_samples, args.n_classes, args.n_informative,
        int(cfg["seed"]), class_sep=args.class_sep,
    )
    schema = assign_gini_cost_classes(ds, args.cost_classes, scaling=args.scaling, seed=int(cfg["seed"]))

    def emit_csv(fh):
        writer = csv.writer(fh)
        writer.writerow(list(ds.feature_names) + ["label"])
        for row, lab in zip(ds.features, ds.labels):
            writer.writerow([repr(float(v)) for v in row] + [int(lab)])

    _write_atomic(out / "dataset.csv", emit_csv)
    write_json(out / "costs.json", schema.to_json_dict(ds.feature_names))
    write_json(out / "synth_manifest.json", {
        "created_at": _now(),
        "config": {
            "n_features": args.n_features, "n_samples": args.n_samples,
            "n_classes": args.n_classes, "n_informative": args.n_informative,
            "class_sep": args.class_sep, "cost_classes": args.cost_classes,
            "scaling": args.scaling, "seed": int(cfg["seed"]),
        },
    })
    print(f"wrote {out / 'dataset.csv'} and {out / 'costs.json'}")
    return 0


def cmd_split(args) -> int:
    cfg = resolve_config(args)
    out = Path(args.out_dir)
    ds, schema = load_csv(args.data, args.costs)
    spec = SplitSpec(tuple(cfg["fractions"]), int(cfg["split_seed"]))
    parts = split(ds, spec)
    names = ("train", "validation", "test")
    for name, part in zip(names, parts):
        def emit(fh, part=part):
            writer = csv.writer(fh)
            writer.writerow(list(ds.feature_names) + ["label"])
            for row, lab in zip(part.features, part.labels):
                writer.writerow(["" if np.isnan(v) else repr(float(v)) for v in row] + [int(lab)])
        _write_atomic(out / f"{name}.csv", emit)
    write_json(out / "split.json", {
        "created_at": _now(),
        "config": {"fractions": list(spec.fractions), "split_seed": spec.seed},
        "sizes": {name: part.n_samples for name, part in zip(names, parts)},
    })
    print(f"wrote {', '.join(str(out / (n + '.csv')) for n in names)}")
    return 0


def _front_row(member) -> dict:
    o = member.objectives
    return {
        "chromosome": member.chromosome.to_text(),
        "g1": o.coverage,
        "g2": o.conclusive_accuracy,
        "g3": o.inverse_cost,
        "g3_raw": o.raw_cost,
        "rank": member.rank,
        "fitness": member.fitness,
    }


def run_report_doc(cfg_resolved, ea_cfg, result, test_metrics) -> dict:
    return {
        "created_at": _now(),
        "config": {**cfg_resolved, "k": ea_cfg.k, "seed": ea_cfg.seed},
        "seed": ea_cfg.seed,
        "n_generations": result.n_generations,
        "halted_on": result.halted_on,
        "front": [_front_row(m) for m in result.front],
        "generations": [
            {
                "index": rec.index,
                "top_fitness": rec.top_fitness,
                "top_chromosome": ",".join(str(v) for v in rec.top_assignments),
                "front_size": rec.front_size,
                "elite": [",".join(str(v) for v in a) for a in rec.elite_assignments],
            }
            for rec in result.history
        ],
        "test_eval": test_metrics,
    }


def cmd_evolve(args) -> int:
    cfg = resolve_config(args)
    out = Path(args.out_dir)
    _, schema, train_ds, val_ds, test_ds = _prepare(args, cfg)
    reg = Regularization("l2", float(cfg["lambda"]))
    ea_cfg = _evolution_config(cfg, train_ds.n_features)
    evaluator = CascadeEvaluator(train_ds, val_ds, schema, ea_cfg.p_hat, reg, k_max=ea_cfg.k)
    test_eval = CascadeEvaluator(
        train_ds, test_ds, schema, ea_cfg.p_hat, reg, k_max=ea_cfg.k, cache=evaluator.cache
    )

    base_seed = int(cfg["seed"])
    paths = []
    for i in range(args.runs):
        seed = base_seed + i
        run_cfg = EvolutionConfig(**{**ea_cfg.__dict__, "seed": seed})
        result = run(run_cfg, evaluator)
        top = result.front[0]
        g1, g2, raw = test_eval.objectives(top.chromosome.assignments)
        test_metrics = {
            "chromosome": top.chromosome.to_text(),
            "g1": g1,
            "g2": g2,
            "g3_raw": raw,
            "aggregate": aggregate_metric(g1, g2, raw, schema.total_cost),
            "total_cost": schema.total_cost,
        }
        doc = run_report_doc(cfg, run_cfg, result, test_metrics)
        path = out / ("run_report.json" if args.runs == 1 else f"run_report_{seed}.json")
        write_json(path, doc)
        paths.append(path)
    print(f"wrote {len(paths)} run report(s) to {out}")
    return 0


def cmd_bruteforce(args) -> int:
    cfg = resolve_config(args)
    out = Path(args.out_dir)
    _, schema, train_ds, val_ds, _ = _prepare(args, cfg)
    reg = Regularization("l2", float(cfg["lambda"]))
    n = train_ds.n_features
    k = int(cfg["k"]) if cfg["k"] else _default_k(n)
    evaluator = CascadeEvaluator(train_ds, val_ds, schema, float(cfg["p_hat"]), reg, k_max=k)
    front = global_front(n, k, evaluator, cap=int(cfg["enumeration_cap"]),
                         force=args.force_enumeration)
    doc = front.to_json_dict()
    doc["created_at"] = _now()
    doc["config"] = {"k": k, "p_hat": cfg["p_hat"], "lambda": cfg["lambda"],
                     "fractions": list(cfg["fractions"]), "split_seed": cfg["split_seed"]}
    write_json(out / "global_front.json", doc)
    print(f"evaluated {front.count.total} chromosomes; front size {len(front.entries)}")
    return 0


def cmd_baseline(args) -> int:
    cfg = resolve_config(args)
    out = Path(args.out_dir)
    _, schema, train_ds, val_ds, test_ds = _prepare(args, cfg)
    reg = Regularization("l2", float(cfg["lambda"]))
    p_hat = float(cfg["p_hat"])
    lambdas = None
    if args.lambda_step:
        count = int(round(100.0 / args.lambda_step)) + 1
        lambdas = [round(i * args.lambda_step, 10) for i in range(count)]
    rows = [
        single_stage(train_ds, test_ds, schema, reg),
        cost_ordered(train_ds, test_ds, schema, p_hat, reg),
        cact_lasso(train_ds, val_ds, test_ds, schema, p_hat, lambdas=lambdas),
    ]
    write_json(out / "baselines.json", {
        "created_at": _now(),
        "config": {"p_hat": p_hat, "lambda": cfg["lambda"], "fractions": list(cfg["fractions"]),
                   "split_seed": cfg["split_seed"], "lambda_step": args.lambda_step},
        "results": [r.to_json_dict() for r in rows],
    })
    for r in rows:
        print(f"{r.method}: g1={r.coverage:.3f} g2={r.conclusive_accuracy:.3f} "
              f"g3_raw={r.raw_cost:.1f} aggregate={r.aggregate:.3f}")
    return 0


def cmd_neighborhood(args) -> int:
    cfg = resolve_config(args)
    out = Path(args.out_dir)
    _, schema, train_ds, val_ds, _ = _prepare(args, cfg)
    reg = Regularization("l2", float(cfg["lambda"]))
    n = train_ds.n_features
    k = int(cfg["k"]) if cfg["k"] else _default_k(n)
    chrom = Chromosome.from_text(args.chromosome, k)
    evaluator = CascadeEvaluator(train_ds, val_ds, schema, float(cfg["p_hat"]), reg, k_max=k)
    space_min = None
    if args.global_front:
        with open(args.global_front) as fh:
            space_min = GlobalFront.from_json_dict(json.load(fh)).space_min_cost
    center = evaluator.objectives(chrom.assignments)
    rows = [["center", chrom.to_text(), center[0], center[1], center[2],
             "" if space_min is None else space_min / center[2]]]
    for neighbor, (g1, g2, raw, inv) in neighborhood_scan(chrom, evaluator, space_min):
        rows.append(["neighbor", neighbor.to_text(), g1, g2, raw, "" if inv is None else inv])
    write_csv(out / "neighborhood.csv", ["role", "chromosome", "g1", "g2", "g3_raw", "g3_global"], rows)
    print(f"wrote {out / 'neighborhood.csv'} ({len(rows) - 1} neighbors)")
    return 0


def _mean_moe(values) -> tuple[float, float]:
    # Summation order is canonicalized so aggregation is input-order independent.
    values = np.sort(np.asarray(values, dtype=float))
    mean = float(values.mean())
    if values.size < 2 or values.std(ddof=1) == 0:
        return mean, 0.0
    half = float(stats.t.ppf(0.975, values.size - 1) * values.std(ddof=1) / math.sqrt(values.size))
    return mean, half


def cmd_report(args) -> int:
    out = Path(args.out_dir)
    reports = []
    for path in args.run_reports:
        with open(path) as fh:
            reports.append(json.load(fh))
    if not reports:
        raise SystemExit("no run reports given")

    front_set = None
    if args.global_front:
        with open(args.global_front) as fh:
            front_set = GlobalFront.from_json_dict(json.load(fh)).assignment_set

    comparison = []
    g1s = [r["test_eval"]["g1"] for r in reports]
    g2s = [r["test_eval"]["g2"] for r in reports]
    raws = [r["test_eval"]["g3_raw"] for r in reports]
    aggs = [r["test_eval"].get("aggregate", "") for r in reports]
    (g1m, g1e), (g2m, g2e), (rawm, rawe) = _mean_moe(g1s), _mean_moe(g2s), _mean_moe(raws)
    aggm, agge = _mean_moe(aggs) if all(a != "" for a in aggs) else ("", "")
    comparison.append(["evolved_cascade", g1m, g1e, g2m, g2e, rawm, rawe, aggm, agge,
                       len(reports), ""])
    if args.baselines:
        with open(args.baselines) as fh:
            doc = json.load(fh)
        for row in doc["results"]:
            comparison.append([row["method"], row["g1"], 0.0, row["g2"], 0.0,
                               row["g3_raw"], 0.0, row["aggregate"], 0.0, 1,
                               json.dumps(row["config"], sort_keys=True)])
    write_csv(
        out / "comparison.csv",
        ["method", "g1_mean", "g1_moe95", "g2_mean", "g2_moe95", "g3_raw_mean", "g3_raw_moe95",
         "aggregate_mean", "aggregate_moe95", "n_runs", "config"],
        comparison,
    )

    # Per-generation curves; counts of globally optimal elites when a front is given.
    n_gens = max(len(r["generations"]) for r in reports)
    curve_rows = []
    for g in range(n_gens):
        per_run = []
        for r in reports:
            if g >= len(r["generations"]):
                continue
            rec = r["generations"][g]
            if front_set is not None:
                elites = {tuple(int(v) for v in text.split(",")) for text in rec["elite"]}
                per_run.append(len(elites & front_set))
            else:
                per_run.append(rec["front_size"])
        mean, moe = _mean_moe(per_run)
        curve_rows.append([g, mean, mean - moe, mean + moe, len(per_run)])
    label = "optimal_count" if front_set is not None else "front_size"
    write_csv(out / "curves.csv",
              ["generation", f"{label}_mean", "ci95_low", "ci95_high", "n_runs"], curve_rows)
    print(f"wrote {out / 'comparison.csv'} and {out / 'curves.csv'}")
    return 0


def _add_common(parser, data=True):
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--out-dir", default=".", help="artifact directory")
    parser.add_argument("--override", action="append", metavar="KEY=VALUE",
                        help="override a resolved config key (repeatable)")
    if data:
        parser.add_argument("--data", required=True, help="dataset CSV (label last)")
        parser.add_argument("--costs", required=True, help="cost schema JSON")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mscopt", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset + cost schema")
    _add_common(p, data=False)
    p.add_argument("--n-features", type=int, default=8)
    p.add_argument("--n-samples", type=int, default=600)
    p.add_argument("--n-classes", type=int, default=2)
    p.add_argument("--n-informative", type=int, default=5)
    p.add_argument("--class-sep", type=float, default=2.0)
    p.add_argument("--cost-classes", type=int, default=3)
    p.add_argument("--scaling", default="linear100", choices=["linear100", "power10"])
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("split", help="write stratified train/validation/test CSVs")
    _add_common(p)
    p.set_defaults(fn=cmd_split)

    p = sub.add_parser("evolve", help="run the evolutionary search")
    _add_common(p)
    p.add_argument("--runs", type=int, default=1, help="independent seeded runs")
    p.set_defaults(fn=cmd_evolve)

    p = sub.add_parser("bruteforce", help="enumerate the space and save the true front")
    _add_common(p)
    p.add_argument("--force-enumeration", action="store_true",
                   help="override the enumeration size cap")
    p.set_defaults(fn=cmd_bruteforce)

    p = sub.add_parser("baseline", help="run the reference methods")
    _add_common(p)
    p.add_argument("--lambda-step", type=float, default=None,
                   help="grid step for the lasso baseline (default 0.1)")
    p.set_defaults(fn=cmd_baseline)

    p = sub.add_parser("neighborhood", help="score all single-step stage reassignments")
    _add_common(p)
    p.add_argument("--chromosome", required=True, help='e.g. "0,0,1,1"')
    p.add_argument("--global-front", help="global_front.json for globally normalized inverse cost")
    p.set_defaults(fn=cmd_neighborhood)

    p = sub.add_parser("report", help="merge runs, baselines and a front into tables")
    p.add_argument("--out-dir", default=".")
    p.add_argument("--global-front")
    p.add_argument("--baselines")
    p.add_argument("run_reports", nargs="+", help="run_report JSON files")
    p.set_defaults(fn=cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, EnumerationCapExceeded, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
