"""Command-line entry point: generate, lint, train, score, calibrate, run.

Every artifact write goes through deterministic serializers, so identical
configs and seeds reproduce identical bytes.  Paths inside a run config are
resolved relative to the config file's directory.
"""

from __future__ import annotations

import argparse
import copy
import json
import os
import sys
from typing import Optional, Sequence

import numpy as np

from .claims import (
    CLASS_ORDER,
    ErrorCategory,
    Label,
    Verdict,
    load_dataset,
    parse_claim_set,
    write_dataset,
)
from .corpus import build_pool
from .errors import ClaimTriageError, ConfigError, InsufficientPoints
from .expert import (
    EndpointConfig,
    build_copt_prompt,
    evaluate_many,
    mock_expert,
)
from .gatekeeper import (
    TrainConfig,
    align_scores,
    load_model,
    load_scores,
    predict_dist,
    save_model,
    train,
    write_scores,
)
from .harness import (
    CostProfile,
    aurc,
    compute_metrics,
    retained_f1_curve,
    run_pipeline,
    simulate_skew,
    split_records,
    stratified_folds,
)
from .injector import GenerationSpec, generate_dataset
from .oracle import default_lexicons, lint_lines, load_lexicons
from .router import (
    calibrate,
    default_grid,
    fast_verdict,
    load_profile,
    save_profile,
    uncertainties_from_dists,
)

PROG = "claimtriage"


def _write_json(doc: dict, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(doc, sort_keys=True, indent=2))
        fh.write("\n")


def _read_json(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _deep_merge(base: dict, override: dict) -> dict:
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


# --- generate ---

def _generation_spec(doc: dict) -> tuple[int, int, GenerationSpec]:
    try:
        pool_size = int(doc["pool_size"])
        pool_seed = int(doc.get("pool_seed", doc.get("seed", 0)))
        spec = GenerationSpec(
            pass_count=int(doc["pass_count"]),
            fail_counts={str(k): int(v) for k, v in doc["fail_counts"].items()},
            seed=int(doc.get("seed", 0)),
            disjoint_anchors=bool(doc.get("disjoint_anchors", True)),
        )
    except KeyError as exc:
        raise ConfigError(f"generation spec missing key {exc.args[0]!r}") from exc
    return pool_size, pool_seed, spec


def cmd_generate(args: argparse.Namespace) -> int:
    doc = _read_json(args.spec)
    if args.seed is not None:
        doc["seed"] = args.seed
    pool_size, pool_seed, spec = _generation_spec(doc)
    pool = build_pool(pool_size, pool_seed)
    records, report = generate_dataset(pool, spec)
    write_dataset(records, args.out)
    _write_json(report, args.out + ".report.json")
    print(f"wrote {len(records)} records to {args.out}")
    return 0


# --- lint ---

def cmd_lint(args: argparse.Namespace) -> int:
    lexicons = load_lexicons(args.lexicons) if args.lexicons else default_lexicons()
    with open(args.path, encoding="utf-8") as fh:
        text = fh.read()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        for record in load_dataset(args.path):
            for line in lint_lines(record.claim_set, lexicons):
                print(f"{record.id}\t{line}")
    else:
        for line in lint_lines(parse_claim_set(text), lexicons):
            print(line)
    return 0


# --- train / score ---

def _train_config(args: argparse.Namespace) -> TrainConfig:
    return TrainConfig(dim=args.dim, epochs=args.epochs, step=args.step,
                       l2=args.l2, seed=args.seed)


def cmd_train(args: argparse.Namespace) -> int:
    records = load_dataset(args.data)
    model = train(records, _train_config(args))
    save_model(model, args.out)
    print(f"trained on {len(records)} records; model written to {args.out}")
    return 0


def cmd_score(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    records = load_dataset(args.data)
    dists = predict_dist(model, [r.text for r in records])
    write_scores(args.out, [r.id for r in records], dists)
    print(f"scored {len(records)} records to {args.out}")
    return 0


# --- calibrate / evaluate ---

def _aligned(scores_path: str, gold_path: str):
    gold = load_dataset(gold_path)
    dists = align_scores(load_scores(scores_path), [r.id for r in gold])
    return gold, dists


def cmd_calibrate(args: argparse.Namespace) -> int:
    gold, dists = _aligned(args.scores, args.gold)
    profile = calibrate(
        uncertainties_from_dists(dists),
        [fast_verdict(d) for d in dists],
        [r.label for r in gold],
        lam=args.lam,
        grid=default_grid(args.grid_step),
        f1_mode=args.f1_mode,
    )
    save_profile(profile, args.out)
    print(f"gamma_star={profile.gamma_star} tau={profile.tau!r} "
          f"n={profile.calibration_set_size}")
    return 0


def _curve_doc(uncertainties, verdicts, gold) -> tuple[list[dict], Optional[float]]:
    curve = retained_f1_curve(uncertainties, verdicts, gold)
    doc = [
        {"gamma": p.gamma, "retained_f1": p.retained_f1, "escalated": p.escalated}
        for p in curve
    ]
    try:
        area = aurc(curve)
    except InsufficientPoints:
        area = None
    return doc, area


def cmd_evaluate(args: argparse.Namespace) -> int:
    gold, dists = _aligned(args.scores, args.gold)
    gold_labels = [r.label for r in gold]
    verdicts = [fast_verdict(d) for d in dists]
    p_inv = [float(np.asarray(d)[1:].sum()) for d in dists]
    metrics = compute_metrics(verdicts, gold_labels, scores=p_inv)
    curve, area = _curve_doc(
        uncertainties_from_dists(dists), verdicts, gold_labels)
    doc = {"metrics": metrics.to_dict(), "curve": curve, "aurc": area}
    text = json.dumps(doc, sort_keys=True, indent=2)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text + "\n")
        print(f"evaluation written to {args.out}")
    else:
        print(text)
    return 0


# --- skew / folds ---

def cmd_skew(args: argparse.Namespace) -> int:
    records = load_dataset(args.data)
    sample = simulate_skew(records, args.ratio, args.seed, total=args.total)
    write_dataset(sample, args.out)
    n_pass = sum(1 for r in sample if r.label.verdict is Verdict.PASS)
    print(f"wrote {len(sample)} records ({n_pass} Pass, "
          f"{len(sample) - n_pass} Fail) to {args.out}")
    return 0


def cmd_folds(args: argparse.Namespace) -> int:
    records = load_dataset(args.data)
    folds = stratified_folds(records, args.k, args.seed)
    os.makedirs(args.out_dir, exist_ok=True)
    for i, (train_part, val_part) in enumerate(folds):
        write_dataset(train_part, os.path.join(args.out_dir, f"fold-{i}-train.jsonl"))
        write_dataset(val_part, os.path.join(args.out_dir, f"fold-{i}-val.jsonl"))
        print(f"fold {i}: {len(train_part)} train / {len(val_part)} val")
    return 0


# --- expert ---

def _endpoint_from_args(args: argparse.Namespace) -> EndpointConfig:
    return EndpointConfig(
        base_url=args.endpoint,
        model=args.model_name,
        timeout_s=args.timeout,
        max_retries=args.max_retries,
    )


def cmd_expert(args: argparse.Namespace) -> int:
    records = load_dataset(args.data)
    if args.ids:
        wanted = set(args.ids.split(","))
        records = [r for r in records if r.id in wanted]
        missing = wanted - {r.id for r in records}
        if missing:
            raise ConfigError(f"ids not in dataset: {sorted(missing)}")
    lines = []
    failures: dict[str, Exception] = {}
    if args.mock:
        for r in records:
            verdict = mock_expert(r.claim_set)
            lines.append((r.id, verdict))
    else:
        config = _endpoint_from_args(args)
        items = [(r.id, build_copt_prompt(r.claim_set)) for r in records]
        results, failures = evaluate_many(config, items, args.concurrency)
        lines = [(r.id, results[r.id]) for r in records if r.id in results]
    out = sys.stdout
    close = False
    if args.out:
        out = open(args.out, "w", encoding="utf-8", newline="\n")
        close = True
    try:
        for rid, verdict in lines:
            doc = {"id": rid, "verdict": verdict.verdict.value,
                   "reasoning": verdict.reasoning}
            out.write(json.dumps(doc, sort_keys=True) + "\n")
    finally:
        if close:
            out.close()
    for rid in sorted(failures):
        exc = failures[rid]
        print(f"error: {type(exc).__name__}: {rid}: {exc}", file=sys.stderr)
    return 1 if failures else 0


# --- run ---

def _default_run_config() -> dict:
    return {
        "paths": {
            "dataset": "dataset.jsonl",
            "model": "model.json",
            "scores": "scores.csv",
            "calibration": "calibration.json",
            "report": "report.json",
        },
        "generation": {
            "pool_size": 700,
            "pool_seed": 7,
            "pass_count": 200,
            "fail_counts": {c.value: 40 for c in ErrorCategory},
            "seed": 7,
            "disjoint_anchors": True,
        },
        "gatekeeper": {"dim": 2 ** 18, "epochs": 50, "step": 0.5,
                       "l2": 1e-4, "seed": 0},
        "lambda": 0.1,
        "grid_step": 1,
        "f1_mode": "binary",
        "cost": {"fast_latency_s": 0.12, "expert_latency_s": 6.88,
                 "hourly_rate_usd": 3.0, "volume": 1_000_000},
        "expert": {"mode": "mock"},
        "split": {"ratios": [0.8, 0.1, 0.1], "seed": 0},
        "measure": False,
    }


def _load_run_config(args: argparse.Namespace) -> tuple[dict, str]:
    config = _default_run_config()
    base_dir = os.getcwd()
    if args.config:
        config = _deep_merge(config, _read_json(args.config))
        base_dir = os.path.dirname(os.path.abspath(args.config))
    if args.lam is not None:
        config["lambda"] = args.lam
    if args.epochs is not None:
        config["gatekeeper"]["epochs"] = args.epochs
    if args.step is not None:
        config["gatekeeper"]["step"] = args.step
    if args.dim is not None:
        config["gatekeeper"]["dim"] = args.dim
    if args.l2 is not None:
        config["gatekeeper"]["l2"] = args.l2
    if args.mock:
        config["expert"] = {"mode": "mock"}
    if args.endpoint:
        config["expert"] = {"mode": "remote",
                            "endpoint": {"base_url": args.endpoint}}
    if args.measure:
        config["measure"] = True
    ratios = config["split"]["ratios"]
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise ConfigError(f"split ratios must be three positive values: {ratios}")
    return config, base_dir


def _expert_mode_from_config(doc: dict):
    mode = doc.get("mode", "mock")
    if mode == "mock":
        return "mock"
    if mode == "remote":
        endpoint = dict(doc.get("endpoint", {}))
        if "base_url" not in endpoint:
            raise ConfigError("remote expert mode requires endpoint.base_url")
        return EndpointConfig(**endpoint)
    raise ConfigError(f"unknown expert mode {mode!r}")


def cmd_run(args: argparse.Namespace) -> int:
    config, base_dir = _load_run_config(args)
    paths = {k: os.path.join(base_dir, v) for k, v in config["paths"].items()}

    pool_size, pool_seed, spec = _generation_spec(config["generation"])
    pool = build_pool(pool_size, pool_seed)
    records, gen_report = generate_dataset(pool, spec)
    write_dataset(records, paths["dataset"])

    train_part, val_part, test_part = split_records(
        records, tuple(config["split"]["ratios"]), config["split"]["seed"])

    model = train(train_part, TrainConfig(**config["gatekeeper"]))
    save_model(model, paths["model"])

    dists_all = predict_dist(model, [r.text for r in records])
    write_scores(paths["scores"], [r.id for r in records], dists_all)
    by_id = {r.id: dists_all[i] for i, r in enumerate(records)}

    val_dists = np.stack([by_id[r.id] for r in val_part])
    profile = calibrate(
        uncertainties_from_dists(val_dists),
        [fast_verdict(d) for d in val_dists],
        [r.label for r in val_part],
        lam=config["lambda"],
        grid=default_grid(config["grid_step"]),
        f1_mode=config["f1_mode"],
    )
    save_profile(profile, paths["calibration"])

    test_dists = np.stack([by_id[r.id] for r in test_part])
    cost_profile = CostProfile(**config["cost"])
    result = run_pipeline(
        test_part, test_dists, profile,
        expert_mode=_expert_mode_from_config(config["expert"]),
        cost_profile=cost_profile,
        measure=config["measure"],
    )

    curve, area = _curve_doc(
        uncertainties_from_dists(test_dists),
        [fast_verdict(d) for d in test_dists],
        [r.label for r in test_part],
    )
    report = {
        "config": config,
        "generation_report": gen_report,
        "calibration": _read_json(paths["calibration"]),
        "split_sizes": {"train": len(train_part), "validation": len(val_part),
                        "test": len(test_part)},
        "metrics": result.to_dict(),
        "per_category": result.per_category,
        "curve": curve,
        "aurc": area,
        "cost": {
            "seconds_per_claim": result.cost_seconds_per_claim,
            "usd": result.cost_usd,
            "profile": config["cost"],
        },
        "unresolved_ids": result.unresolved_ids,
    }
    _write_json(report, paths["report"])
    print(f"gamma_star={profile.gamma_star} tau={profile.tau!r} "
          f"realized_gamma={result.realized_gamma}")
    print(f"hybrid accuracy={result.hybrid.accuracy:.4f} "
          f"binary_f1={result.hybrid.binary_f1:.4f}")
    print(f"report written to {paths['report']}")
    return 0


# --- report rendering ---

def cmd_report(args: argparse.Namespace) -> int:
    doc = _read_json(args.path)
    metrics = doc["metrics"]
    hybrid = metrics["metrics_hybrid"]
    gatekeeper = metrics["metrics_gatekeeper"]
    calibration = doc.get("calibration", {})
    lines = [
        "triage run report",
        "=================",
        f"test set: {metrics['n']} records "
        f"({metrics['fast']} fast, {metrics['rigorous']} rigorous, "
        f"{len(doc.get('unresolved_ids', []))} unresolved)",
        f"gamma_star={calibration.get('gamma_star')} "
        f"tau={calibration.get('tau')} lambda={calibration.get('lambda')}",
        f"realized escalation rate: {metrics['realized_gamma']:.4f}",
        "",
        f"{'':12s}{'accuracy':>10s}{'binary F1':>11s}{'macro F1':>10s}"
        f"{'AUC':>8s}",
    ]
    for name, m in (("hybrid", hybrid), ("gatekeeper", gatekeeper)):
        auc = "n/a" if m.get("auc") is None else f"{m['auc']:.4f}"
        lines.append(
            f"{name:12s}{m['accuracy']:>10.4f}{m['binary_f1']:>11.4f}"
            f"{m['macro_f1']:>10.4f}{auc:>8s}")
    lines.append("")
    lines.append(f"{'category':14s}{'n':>6s}{'escalated':>11s}{'correct':>9s}"
                 f"{'unresolved':>12s}")
    for name, row in doc.get("per_category", {}).items():
        lines.append(
            f"{name:14s}{row['n']:>6d}{row['escalated']:>11d}"
            f"{row['correct']:>9d}{row['unresolved']:>12d}")
    cost = doc.get("cost", {})
    if cost:
        volume = cost.get("profile", {}).get("volume", 0)
        lines.append("")
        lines.append(
            f"cost: {cost['seconds_per_claim']:.5f} s/claim, "
            f"${cost['usd']:.2f} per {volume:,} claims")
    if doc.get("aurc") is not None:
        lines.append(f"aurc: {doc['aurc']:.6f}")
    print("\n".join(lines))
    return 0


# --- parser wiring ---

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=PROG,
        description="Claim triage toolkit: synthesize labeled claim sets, "
                    "train the gatekeeper, calibrate routing, run the "
                    "hybrid pipeline.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("generate", help="synthesize a labeled dataset")
    p.add_argument("--spec", required=True, help="generation spec JSON file")
    p.add_argument("--out", required=True, help="output dataset (.jsonl)")
    p.add_argument("--seed", type=int, default=None, help="override spec seed")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("lint", help="run the structural audit over a file")
    p.add_argument("path", help="dataset (.jsonl) or raw claim text file")
    p.add_argument("--lexicons", default=None, help="lexicon JSON file")
    p.set_defaults(func=cmd_lint)

    p = sub.add_parser("train", help="train the gatekeeper classifier")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--dim", type=int, default=2 ** 18)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--step", type=float, default=0.5)
    p.add_argument("--l2", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("score", help="score a dataset with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("calibrate", help="fit gamma* and tau from scores")
    p.add_argument("--scores", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=0.1)
    p.add_argument("--grid-step", type=int, default=1,
                   help="grid spacing in hundredths")
    p.add_argument("--f1-mode", choices=("binary", "macro"), default="binary")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("evaluate", help="metrics and risk-coverage curve")
    p.add_argument("--scores", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--out", default=None, help="write JSON here (default stdout)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("skew", help="subsample a dataset at a Pass:Fail ratio")
    p.add_argument("--data", required=True)
    p.add_argument("--ratio", required=True, help='e.g. "9:1"')
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--total", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_skew)

    p = sub.add_parser("folds", help="write stratified train/val folds")
    p.add_argument("--data", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_folds)

    p = sub.add_parser("expert", help="query the expert for dataset records")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--mock", action="store_true",
                       help="use the offline audit-backed expert")
    group.add_argument("--endpoint", default=None, help="remote base URL")
    p.add_argument("--data", required=True)
    p.add_argument("--ids", default=None, help="comma-separated record ids")
    p.add_argument("--out", default=None)
    p.add_argument("--model-name", default="copt-expert")
    p.add_argument("--timeout", type=float, default=30.0)
    p.add_argument("--max-retries", type=int, default=2)
    p.add_argument("--concurrency", type=int, default=4)
    p.set_defaults(func=cmd_expert)

    p = sub.add_parser("run", help="full pipeline: generate through report")
    p.add_argument("--config", default=None, help="run config JSON file")
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--step", type=float, default=None)
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--l2", type=float, default=None)
    p.add_argument("--mock", action="store_true")
    p.add_argument("--endpoint", default=None)
    p.add_argument("--measure", action="store_true",
                   help="record measured expert latency instead of constants")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="render a run report as text")
    p.add_argument("path", help="report JSON file")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ClaimTriageError as exc:
        message = " ".join(str(exc).split())
        print(f"error: {type(exc).__name__}: {message}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: MissingPath: {exc}", file=sys.stderr)
        return 1
    except json.JSONDecodeError as exc:
        print(f"error: MalformedJSON: {exc}", file=sys.stderr)
        return 1


def run_main() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    run_main()
