"""Command-line entry point wiring data prep, training, auditing, sweeps, and
the experiment lifecycle. Every subcommand writes a manifest with its fully
resolved configuration; identical configurations produce byte-identical
artifacts."""

from __future__ import annotations

import argparse
import json
import subprocess
import sys
from pathlib import Path

from . import kernel_backend
from ._version import __version__
from .align import ConstraintVector, derive_constraints, load_survey, pdp, violations
from .data import (
    Dataset,
    FeatureSchema,
    SplitSpec,
    SyntheticSpec,
    generate_synthetic,
    load_dataset,
    save_dataset_csv,
    stratified_split,
)
from .distance import distance_report
from .experiment import (
    ExperimentDesign,
    ExperimentStore,
    SeparationError,
    ConvergenceError,
    build_tasks,
    fit_choice_model,
    summary_stats,
)
from .explain import tree_shap
from .gbt import DEFAULT_GRID, HyperGrid, TreeEnsemble, train
from .metrics import auc_roc, average_precision
from .sweep import (
    DESK_SEEDS_PER_SIZE,
    DESK_SWEEP_SIZES,
    SweepConfig,
    load_records,
    run_sweep,
    write_distance_csv,
    write_performance_csv,
)


class CliError(Exception):
    pass


def _source_revision() -> str | None:
    try:
        out = subprocess.run(
            ["git", "rev-parse", "HEAD"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=5,
        )
    except (OSError, subprocess.SubprocessError):
        return None
    return out.stdout.strip() if out.returncode == 0 else None


def _write_manifest(out_dir: Path, command: str, config: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": command,
        "config": config,
        "version": __version__,
        "source_revision": _source_revision(),
        "kernel_backend": kernel_backend(),
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=1) + "\n", encoding="utf-8"
    )


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.split(",") if x.strip())


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(",") if x.strip())


def _load_data(args) -> Dataset:
    schema = FeatureSchema.load(args.schema)
    return load_dataset(args.data, schema)


def _load_constraints(spec: str | None, schema: FeatureSchema) -> ConstraintVector:
    if spec is None or spec == "none":
        return ConstraintVector.unconstrained()
    path = Path(spec)
    if not path.exists():
        raise CliError(f"constraints file {spec!r} does not exist")
    if path.suffix.lower() == ".csv":
        vec = derive_constraints(schema, load_survey(path))
    else:
        vec = ConstraintVector.load(path)
        vec.validate_against(schema)
    return vec


def _grid_from_args(args) -> HyperGrid:
    return HyperGrid(
        learning_rates=_floats(args.learning_rates),
        num_rounds=_ints(args.num_rounds),
        max_depths=_ints(args.max_depths),
        folds=args.folds,
    )


def _add_grid_flags(p: argparse.ArgumentParser, small_default: bool) -> None:
    if small_default:
        lr, rounds, depth = "0.3", "50", "3"
    else:
        lr = ",".join(str(v) for v in DEFAULT_GRID.learning_rates)
        rounds = ",".join(str(v) for v in DEFAULT_GRID.num_rounds)
        depth = ",".join(str(v) for v in DEFAULT_GRID.max_depths)
    p.add_argument("--learning-rates", default=lr, help="comma-separated learning rates")
    p.add_argument("--num-rounds", default=rounds, help="comma-separated boosting round counts")
    p.add_argument("--max-depths", default=depth, help="comma-separated tree depth limits")
    p.add_argument("--folds", type=int, default=5, help="CV folds when the grid has multiple cells")


# ---------------------------------------------------------------------------
# Subcommands


def cmd_synth(args) -> int:
    out = Path(args.out)
    monotone = []
    for item in args.monotone:
        name, direction, effect = item.split(":")
        monotone.append((name, int(direction), float(effect)))
    spec = SyntheticSpec(
        n=args.n,
        seed=args.seed,
        monotone_features=tuple(monotone),
        noise_features=args.noise_features,
        label_noise=args.label_noise,
        levels=args.levels,
        intercept=args.intercept,
    )
    ds = generate_synthetic(spec)
    out.mkdir(parents=True, exist_ok=True)
    save_dataset_csv(ds, out / "data.csv")
    ds.schema.with_id_column().save(out / "schema.json")
    if args.emit_survey:
        lines = ["respondent,feature,answer"]
        for i in range(args.emit_survey):
            for name, direction, _ in spec.monotone_features:
                answer = "always-increase" if direction > 0 else "always-decrease"
                lines.append(f"respondent{i + 1},{name},{answer}")
        (out / "survey.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    _write_manifest(
        out,
        "synth",
        {
            "n": args.n,
            "seed": args.seed,
            "monotone": args.monotone,
            "noise_features": args.noise_features,
            "label_noise": args.label_noise,
            "levels": args.levels,
            "intercept": args.intercept,
            "emit_survey": args.emit_survey,
        },
    )
    print(f"wrote {ds.n_rows} rows to {out / 'data.csv'}")
    return 0


def cmd_train(args) -> int:
    ds = _load_data(args)
    constraints = _load_constraints(args.constraints, ds.schema)
    grid = _grid_from_args(args)
    model = train(ds, constraints, grid, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    model.save(out / "model.json")
    cv = model.cv.to_dict() if model.cv is not None else {"skipped": True}
    (out / "cv_report.json").write_text(json.dumps(cv, sort_keys=True, indent=1) + "\n", encoding="utf-8")
    p = model.predict_proba(ds)
    train_metrics = {"auc_roc": auc_roc(p, ds.labels), "avg_precision": average_precision(p, ds.labels)}
    (out / "train_metrics.json").write_text(
        json.dumps(train_metrics, sort_keys=True, indent=1) + "\n", encoding="utf-8"
    )
    _write_manifest(
        out,
        "train",
        {
            "data": str(args.data),
            "schema": str(args.schema),
            "constraints": args.constraints,
            "grid": grid.to_dict(),
            "seed": args.seed,
        },
    )
    print(f"model written to {out / 'model.json'} (params {model.params.to_dict()})")
    return 0


def _pdp_tables(model: TreeEnsemble, full: Dataset, test: Dataset, feature: str, out: Path, tolerance, direction):
    from .plots import emit_pdp_svg

    curve = pdp(model, test, full, feature)
    rows = curve.rows()
    csv_path = out / f"pdp_{feature}.csv"
    with csv_path.open("w", encoding="utf-8") as fh:
        fh.write("feature,value,mean,se\n")
        for f, v, m, s in rows:
            fh.write(f"{f},{v!r},{m!r},{s!r}\n")
    (out / f"pdp_{feature}.json").write_text(
        json.dumps(curve.to_dict(), sort_keys=True) + "\n", encoding="utf-8"
    )
    emit_pdp_svg(curve, out / f"pdp_{feature}.svg", direction)
    viol = violations(curve, direction, tolerance) if direction else []
    return curve, [{"pair": list(pair), "magnitude": mag} for pair, mag in viol]


def cmd_pdp(args) -> int:
    ds = _load_data(args)
    test = ds if args.test is None else load_dataset(args.test, ds.schema)
    model = TreeEnsemble.load(args.model)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    direction = model.constraints.of(args.feature)
    _pdp_tables(model, ds, test, args.feature, out, args.tolerance, direction or None)
    _write_manifest(
        out,
        "pdp",
        {
            "model": str(args.model),
            "data": str(args.data),
            "schema": str(args.schema),
            "test": None if args.test is None else str(args.test),
            "feature": args.feature,
        },
    )
    print(f"partial dependence for {args.feature!r} written under {out}")
    return 0


def cmd_audit(args) -> int:
    ds = _load_data(args)
    test = ds if args.test is None else load_dataset(args.test, ds.schema)
    model = TreeEnsemble.load(args.model)
    directions = dict(model.constraints.nonzero())
    if args.constraints:
        directions = dict(_load_constraints(args.constraints, ds.schema).nonzero())
    if args.features:
        features = args.features.split(",")
    else:
        features = sorted(directions)
    if not features:
        raise CliError("no features to audit: the model is unconstrained and no --constraints given")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report = {}
    for feature in features:
        direction = directions.get(feature)
        if direction is None:
            raise CliError(f"no expected direction for feature {feature!r}; pass --constraints")
        _, viol = _pdp_tables(model, ds, test, feature, out, args.tolerance, direction)
        report[feature] = {"direction": direction, "violations": viol}
    (out / "violations.json").write_text(json.dumps(report, sort_keys=True, indent=1) + "\n", encoding="utf-8")
    _write_manifest(
        out,
        "audit",
        {
            "model": str(args.model),
            "data": str(args.data),
            "schema": str(args.schema),
            "features": features,
            "tolerance": args.tolerance,
        },
    )
    n_viol = sum(len(v["violations"]) for v in report.values())
    print(f"audited {len(features)} feature(s): {n_viol} violation(s)")
    return 0


def cmd_distance(args) -> int:
    ds = _load_data(args)
    model_a = TreeEnsemble.load(args.model_a)
    model_b = TreeEnsemble.load(args.model_b)
    report = distance_report(
        model_a.predict_proba(ds),
        model_b.predict_proba(ds),
        ds.labels,
        tree_shap(model_a, ds),
        tree_shap(model_b, ds),
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report.save(out / "distance.json")
    _write_manifest(
        out,
        "distance",
        {"model_a": str(args.model_a), "model_b": str(args.model_b), "data": str(args.data)},
    )
    print(f"d_pred={report.d_pred:.4f} d_rank={report.d_rank:.4f} d_shap={report.d_shap:.4f}")
    return 0


def _emit_all_curves(records, out: Path) -> None:
    from .plots import emit_curves_svg
    from .sweep import distance_curves, performance_curves

    write_performance_csv(records, out / "performance_curves.csv")
    perf = performance_curves(records)
    for metric in ("auc_roc", "avg_precision"):
        series = {mode: pts for (mode, m), pts in perf.items() if m == metric}
        emit_curves_svg(series, f"learning curve: {metric}", metric, out / f"learning_{metric}.svg")
    if any(r.distance is not None for r in records):
        write_distance_csv(records, out / "distance_curves.csv")
        for metric, pts in distance_curves(records).items():
            emit_curves_svg({"pair": pts}, f"divergence: {metric}", metric, out / f"{metric}.svg")


def cmd_sweep(args) -> int:
    ds = _load_data(args)
    train80, test = stratified_split(ds, SplitSpec(args.test_fraction, seed=args.split_seed))
    constraints = _load_constraints(args.constraints, ds.schema)
    grid = _grid_from_args(args)
    out = Path(args.out)
    config = SweepConfig(
        sizes=_ints(args.sizes),
        seeds_per_size=args.seeds,
        grid=grid,
        constraints=constraints,
        modes=tuple(args.modes.split(",")),
        out_dir=out,
        base_seed=args.seed,
        workers=args.workers,
    )
    out.mkdir(parents=True, exist_ok=True)
    save_dataset_csv(test, out / "test.csv")
    test.schema.with_id_column().save(out / "schema.json")
    records = run_sweep(config, train80, test)
    _emit_all_curves(records, out)
    _write_manifest(
        out,
        "sweep",
        {
            "data": str(args.data),
            "schema": str(args.schema),
            "constraints": args.constraints,
            "sizes": list(config.sizes),
            "seeds_per_size": config.seeds_per_size,
            "modes": list(config.modes),
            "grid": grid.to_dict(),
            "seed": args.seed,
            "test_fraction": args.test_fraction,
            "split_seed": args.split_seed,
        },
    )
    failed = sum(1 for r in records if r.error)
    print(f"sweep complete: {len(records)} cells ({failed} failed)")
    return 0


def cmd_curves(args) -> int:
    records = load_records(args.records)
    if not records:
        raise CliError(f"no records found under {args.records}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _emit_all_curves(records, out)
    _write_manifest(out, "curves", {"records": str(args.records)})
    print(f"curves written under {out}")
    return 0


def cmd_exp_prepare(args) -> int:
    sweep_dir = Path(args.records)
    schema = FeatureSchema.load(sweep_dir / "schema.json")
    test = load_dataset(sweep_dir / "test.csv", schema)
    design = ExperimentDesign(
        raters=tuple(args.raters.split(",")),
        n_runs=args.n_runs,
        pair_quantile=args.pair_quantile,
        n_pairs=args.n_pairs,
        patients_per_pair=args.patients_per_pair,
        patients_per_rater=args.patients_per_rater,
        train_size=args.train_size,
        seed=args.seed,
    )
    records = [r for r in load_records(sweep_dir) if r.size == design.train_size and r.error is None]

    def shap_provider(record):
        mc = TreeEnsemble.load(sweep_dir / record.model_paths["constrained"])
        mu = TreeEnsemble.load(sweep_dir / record.model_paths["unconstrained"])
        return tree_shap(mc, test), tree_shap(mu, test)

    tasks, pair_order = build_tasks(records, test, design, shap_provider)
    store = ExperimentStore.initialize(Path(args.out), design, tasks, pair_order)
    _write_manifest(
        Path(args.out),
        "exp-prepare",
        {
            "records": str(args.records),
            "design": design.to_dict(),
        },
    )
    print(f"store initialized under {store.root} with {len(tasks)} tasks for {len(design.raters)} raters")
    print(f"rater tokens in {store.root / 'tokens.json'}")
    return 0


def cmd_exp_serve(args) -> int:
    from .server import serve

    serve(args.store, host=args.host, port=args.port)
    return 0


def cmd_exp_analyze(args) -> int:
    store = ExperimentStore(args.store)
    responses = sorted(store.responses.values(), key=lambda r: r.task_id)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = summary_stats(responses, store.tasks)
    result: dict = {"summary": summary.to_dict(), "n_responses": len(responses)}
    text_parts = [summary.to_text(), ""]
    try:
        reg = fit_choice_model(responses, store.tasks, pair_order=store.pair_order or None)
        result["regression"] = reg.to_dict()
        text_parts.append(reg.to_text())
    except (SeparationError, ConvergenceError, ValueError) as exc:
        result["regression"] = {"error": f"{type(exc).__name__}: {exc}"}
        text_parts.append(f"regression not fit: {exc}")
    (out / "analysis.json").write_text(json.dumps(result, sort_keys=True, indent=1) + "\n", encoding="utf-8")
    (out / "analysis.txt").write_text("\n".join(text_parts) + "\n", encoding="utf-8")
    _write_manifest(out, "exp-analyze", {"store": str(args.store)})
    print("\n".join(text_parts))
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="alignboost", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset with known monotone effects")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--monotone", action="append", default=[], metavar="NAME:DIR:EFFECT")
    p.add_argument("--noise-features", type=int, default=3)
    p.add_argument("--label-noise", type=float, default=0.2)
    p.add_argument("--levels", type=int, default=8)
    p.add_argument("--intercept", type=float, default=0.0)
    p.add_argument("--emit-survey", type=int, default=0, metavar="N_RESPONDENTS")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train one model on the given dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--constraints", default=None, help="survey CSV, constraints JSON, or 'none'")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    _add_grid_flags(p, small_default=False)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("pdp", help="partial dependence curve for one feature")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True, help="full dataset (grid source)")
    p.add_argument("--schema", required=True)
    p.add_argument("--test", default=None, help="rows to populate the curve (default: --data)")
    p.add_argument("--feature", required=True)
    p.add_argument("--tolerance", type=float, default=0.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_pdp)

    p = sub.add_parser("audit", help="scan features for monotonicity violations")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--test", default=None)
    p.add_argument("--features", default=None, help="comma-separated (default: all constrained)")
    p.add_argument("--constraints", default=None, help="expected directions source")
    p.add_argument("--tolerance", type=float, default=0.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("distance", help="behavioral divergence between two models")
    p.add_argument("--model-a", required=True)
    p.add_argument("--model-b", required=True)
    p.add_argument("--data", required=True, help="shared test set")
    p.add_argument("--schema", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_distance)

    p = sub.add_parser("sweep", help="paired training across sizes and seeds")
    p.add_argument("--data", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--constraints", required=True)
    p.add_argument("--sizes", default=",".join(str(s) for s in DESK_SWEEP_SIZES))
    p.add_argument("--seeds", type=int, default=DESK_SEEDS_PER_SIZE)
    p.add_argument("--modes", default="constrained,unconstrained")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.add_argument("--split-seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    _add_grid_flags(p, small_default=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("curves", help="re-aggregate curves from sweep records")
    p.add_argument("--records", required=True, help="sweep output directory")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_curves)

    p = sub.add_parser("exp-prepare", help="sample pairs/patients and build the task store")
    p.add_argument("--records", required=True, help="sweep output directory")
    p.add_argument("--out", required=True, help="experiment store directory")
    p.add_argument("--raters", required=True, help="comma-separated rater names")
    p.add_argument("--n-runs", type=int, default=150)
    p.add_argument("--pair-quantile", type=float, default=0.75)
    p.add_argument("--n-pairs", type=int, default=9)
    p.add_argument("--patients-per-pair", type=int, default=24)
    p.add_argument("--patients-per-rater", type=int, default=36)
    p.add_argument("--train-size", type=int, default=400)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_exp_prepare)

    p = sub.add_parser("exp-serve", help="serve the rating tasks over HTTP")
    p.add_argument("--store", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_exp_serve)

    p = sub.add_parser("exp-analyze", help="regression and summary statistics from responses")
    p.add_argument("--store", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_exp_analyze)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
