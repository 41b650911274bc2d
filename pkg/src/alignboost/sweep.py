"""Underspecification sweep: paired models across train sizes and seeds.

Each cell (size, replicate) draws one subsample and trains every requested
mode on that identical subsample, so the constrained/unconstrained pair
differs only in the constraints. Records persist one JSON file per cell and
the sweep resumes by skipping completed cells.
"""

from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from ._util import derive_seed
from .align import ConstraintVector
from .data import Dataset, subsample_train
from .distance import DistanceReport, distance_report
from .explain import tree_shap
from .gbt import HyperGrid, TreeEnsemble, train
from .metrics import CurvePoint, MetricPoint, aggregate_values, auc_roc, average_precision

logger = logging.getLogger(__name__)

MODE_CONSTRAINED = "constrained"
MODE_UNCONSTRAINED = "unconstrained"
MODE_OPPOSITE = "opposite"
ALL_MODES = (MODE_CONSTRAINED, MODE_UNCONSTRAINED, MODE_OPPOSITE)

#: Production protocol sizes; the cap limits correlation between subsamples.
FULL_SWEEP_SIZES = (100, 200, 300, 400, 500, 600, 700, 800, 900, 1000, 1250, 1500, 1750, 2000, 3000, 4000, 6000, 8000)
FULL_SEEDS_PER_SIZE = 300

#: Desk-scale defaults.
DESK_SWEEP_SIZES = (100, 200, 400, 800, 1600)
DESK_SEEDS_PER_SIZE = 30


def opposite_constraints(c: ConstraintVector) -> ConstraintVector:
    """Flip every nonzero direction; an involution used for falsification runs."""
    return ConstraintVector({k: -v for k, v in c.directions.items()}, provenance="opposite-flip")


@dataclass(frozen=True)
class SweepConfig:
    sizes: tuple[int, ...]
    seeds_per_size: int
    grid: HyperGrid
    constraints: ConstraintVector
    modes: tuple[str, ...] = (MODE_CONSTRAINED, MODE_UNCONSTRAINED)
    out_dir: str | Path = "sweep-out"
    base_seed: int = 0
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))
        object.__setattr__(self, "modes", tuple(self.modes))
        if any(b <= a for a, b in zip(self.sizes, self.sizes[1:])):
            raise ValueError("sizes must be strictly ascending")
        if self.seeds_per_size < 2:
            raise ValueError("seeds_per_size must be >= 2")
        unknown = set(self.modes) - set(ALL_MODES)
        if unknown:
            raise ValueError(f"unknown modes {sorted(unknown)}")
        if not self.modes:
            raise ValueError("at least one mode required")

    def constraints_for(self, mode: str) -> ConstraintVector:
        if mode == MODE_CONSTRAINED:
            return self.constraints
        if mode == MODE_UNCONSTRAINED:
            return ConstraintVector.unconstrained()
        if mode == MODE_OPPOSITE:
            return opposite_constraints(self.constraints)
        raise ValueError(f"unknown mode {mode!r}")


@dataclass(frozen=True)
class SweepRecord:
    """One completed cell: every mode trained on the same subsample."""

    size: int
    replicate: int
    cell_seed: int
    subsample_fingerprint: str
    metrics: dict[str, MetricPoint]
    model_paths: dict[str, str]
    distance: DistanceReport | None = None
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "size": self.size,
            "replicate": self.replicate,
            "cell_seed": self.cell_seed,
            "subsample_fingerprint": self.subsample_fingerprint,
            "metrics": {
                mode: {
                    "train_size": m.train_size,
                    "seed": m.seed,
                    "constrained": m.constrained,
                    "auc_roc": m.auc_roc,
                    "avg_precision": m.avg_precision,
                }
                for mode, m in self.metrics.items()
            },
            "model_paths": dict(self.model_paths),
            "distance": self.distance.to_dict() if self.distance else None,
            "error": self.error,
        }

    @staticmethod
    def from_dict(d: dict) -> "SweepRecord":
        return SweepRecord(
            size=int(d["size"]),
            replicate=int(d["replicate"]),
            cell_seed=int(d["cell_seed"]),
            subsample_fingerprint=d["subsample_fingerprint"],
            metrics={
                mode: MetricPoint(
                    train_size=int(m["train_size"]),
                    seed=int(m["seed"]),
                    constrained=bool(m["constrained"]),
                    auc_roc=float(m["auc_roc"]),
                    avg_precision=float(m["avg_precision"]),
                )
                for mode, m in d["metrics"].items()
            },
            model_paths=dict(d["model_paths"]),
            distance=DistanceReport.from_dict(d["distance"]) if d.get("distance") else None,
            error=d.get("error"),
        )


def cell_seed(base_seed: int, size: int, replicate: int) -> int:
    return derive_seed("sweep-cell", base_seed, size, replicate)


def record_path(out_dir: Path, size: int, replicate: int) -> Path:
    return Path(out_dir) / "records" / f"size{size}_rep{replicate}.json"


def _compute_cell(config: SweepConfig, train80: Dataset, test: Dataset, size: int, replicate: int):
    """Train every mode on one shared subsample; returns (record, mode -> model json)."""
    seed = cell_seed(config.base_seed, size, replicate)
    sub = subsample_train(train80, size, seed)
    fingerprint = sub.membership_fingerprint()
    models: dict[str, TreeEnsemble] = {}
    metrics: dict[str, MetricPoint] = {}
    for mode in config.modes:
        model = train(sub, config.constraints_for(mode), config.grid, seed=seed)
        p = model.predict_proba(test)
        metrics[mode] = MetricPoint(
            train_size=size,
            seed=seed,
            constrained=mode != MODE_UNCONSTRAINED,
            auc_roc=auc_roc(p, test.labels),
            avg_precision=average_precision(p, test.labels),
        )
        models[mode] = model
    dist = None
    if MODE_CONSTRAINED in models and MODE_UNCONSTRAINED in models:
        mc, mu = models[MODE_CONSTRAINED], models[MODE_UNCONSTRAINED]
        dist = distance_report(
            mc.predict_proba(test),
            mu.predict_proba(test),
            test.labels,
            tree_shap(mc, test),
            tree_shap(mu, test),
        )
    rel_paths = {mode: f"models/size{size}_rep{replicate}_{mode}.json" for mode in config.modes}
    record = SweepRecord(
        size=size,
        replicate=replicate,
        cell_seed=seed,
        subsample_fingerprint=fingerprint,
        metrics=metrics,
        model_paths=rel_paths,
        distance=dist,
    )
    return record, {mode: models[mode].to_json() for mode in config.modes}


_WORKER_DATA: dict = {}


def _worker_init(config: SweepConfig, train80: Dataset, test: Dataset) -> None:
    _WORKER_DATA["args"] = (config, train80, test)


def _worker_run(cell: tuple[int, int]):
    config, train80, test = _WORKER_DATA["args"]
    size, replicate = cell
    try:
        return cell, _compute_cell(config, train80, test, size, replicate), None
    except Exception as exc:  # recorded per-cell; the sweep continues
        return cell, None, f"{type(exc).__name__}: {exc}"


def _write_cell(out_dir: Path, record: SweepRecord, model_jsons: dict[str, str]) -> None:
    for mode, text in model_jsons.items():
        path = out_dir / record.model_paths[mode]
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text + "\n", encoding="utf-8")
    path = record_path(out_dir, record.size, record.replicate)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(record.to_dict(), sort_keys=True) + "\n", encoding="utf-8")


def _load_complete_record(path: Path, modes: tuple[str, ...]) -> SweepRecord | None:
    if not path.exists():
        return None
    try:
        rec = SweepRecord.from_dict(json.loads(path.read_text(encoding="utf-8")))
    except (json.JSONDecodeError, KeyError, ValueError):
        return None
    if rec.error is None and set(modes) <= set(rec.metrics):
        return rec
    return None


def run_sweep(config: SweepConfig, train80: Dataset, test: Dataset) -> list[SweepRecord]:
    """Run every (size, replicate) cell, skipping ones already on disk.

    Training failures are written into the cell record and the sweep moves
    on. Existing complete records are never rewritten.
    """
    if max(config.sizes) > train80.n_rows:
        raise ValueError(f"largest size {max(config.sizes)} exceeds train rows {train80.n_rows}")
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records: dict[tuple[int, int], SweepRecord] = {}
    pending: list[tuple[int, int]] = []
    for size in config.sizes:
        for rep in range(config.seeds_per_size):
            existing = _load_complete_record(record_path(out_dir, size, rep), config.modes)
            if existing is not None:
                records[(size, rep)] = existing
            else:
                pending.append((size, rep))

    def finish(cell, result, error):
        size, rep = cell
        if error is not None:
            logger.error("cell size=%d rep=%d failed: %s", size, rep, error)
            rec = SweepRecord(
                size=size,
                replicate=rep,
                cell_seed=cell_seed(config.base_seed, size, rep),
                subsample_fingerprint="",
                metrics={},
                model_paths={},
                error=error,
            )
            _write_cell(out_dir, rec, {})
            records[cell] = rec
            return
        record, model_jsons = result
        _write_cell(out_dir, record, model_jsons)
        records[cell] = record

    if config.workers > 1 and pending:
        with ProcessPoolExecutor(
            max_workers=config.workers, initializer=_worker_init, initargs=(config, train80, test)
        ) as pool:
            for cell, result, error in pool.map(_worker_run, pending):
                finish(cell, result, error)
    else:
        for cell in pending:
            size, rep = cell
            try:
                finish(cell, _compute_cell(config, train80, test, size, rep), None)
            except Exception as exc:
                finish(cell, None, f"{type(exc).__name__}: {exc}")
    return [records[k] for k in sorted(records)]


# ---------------------------------------------------------------------------
# Curve aggregation and export


def performance_curves(records: list[SweepRecord]) -> dict[tuple[str, str], list[CurvePoint]]:
    """(mode, metric) -> per-size aggregated curve."""
    out: dict[tuple[str, str], list[CurvePoint]] = {}
    modes = sorted({m for r in records for m in r.metrics})
    for mode in modes:
        for metric in ("auc_roc", "avg_precision"):
            by_size: dict[int, list[float]] = {}
            for r in records:
                if mode in r.metrics:
                    by_size.setdefault(r.size, []).append(getattr(r.metrics[mode], metric))
            out[(mode, metric)] = aggregate_values(by_size)
    return out


def distance_curves(records: list[SweepRecord]) -> dict[str, list[CurvePoint]]:
    """metric -> per-size aggregated curve over cells with a model pair."""
    out: dict[str, list[CurvePoint]] = {}
    paired = [r for r in records if r.distance is not None]
    if not paired:
        raise ValueError("no records carry a model pair distance")
    sizes_missing = {r.size for r in records} - {r.size for r in paired}
    if sizes_missing:
        raise ValueError(f"sizes {sorted(sizes_missing)} have no paired records")
    for metric in ("d_pred", "d_rank", "d_shap"):
        by_size: dict[int, list[float]] = {}
        for r in paired:
            by_size.setdefault(r.size, []).append(getattr(r.distance, metric))
        out[metric] = aggregate_values(by_size)
    return out


def write_performance_csv(records: list[SweepRecord], path) -> None:
    curves = performance_curves(records)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["train_size", "model_kind", "metric", "mean", "ci_low", "ci_high"])
        for (mode, metric), points in sorted(curves.items()):
            for p in points:
                w.writerow([p.train_size, mode, metric, repr(p.mean), repr(p.ci_low), repr(p.ci_high)])


def write_distance_csv(records: list[SweepRecord], path) -> None:
    curves = distance_curves(records)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["train_size", "model_kind", "metric", "mean", "ci_low", "ci_high"])
        for metric, points in sorted(curves.items()):
            for p in points:
                w.writerow([p.train_size, "pair", metric, repr(p.mean), repr(p.ci_low), repr(p.ci_high)])


def load_records(out_dir) -> list[SweepRecord]:
    records_dir = Path(out_dir) / "records"
    records = []
    for path in sorted(records_dir.glob("*.json")):
        records.append(SweepRecord.from_dict(json.loads(path.read_text(encoding="utf-8"))))
    records.sort(key=lambda r: (r.size, r.replicate))
    return records
