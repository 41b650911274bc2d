"""Randomized preference-elicitation experiment over paired model explanations.

Model pairs are drawn from the top quantile of pair-level attribution
distance; per pair, half the patients are drawn uniformly and half from the
top quantile of per-patient attribution distance. Tasks are dealt so every
rater sees the same number of patients from every pair, with a fair-coin
left/right assignment. Responses feed a fixed-effects logistic regression of
"chose the constrained model" on the per-patient attribution distance.
"""

from __future__ import annotations

import json
import math
import threading
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._util import derive_seed
from .data import Dataset
from .explain import BarPlotPayload, top_k_payload
from .metrics import Z_95, wilson_interval
from .sweep import MODE_CONSTRAINED, MODE_UNCONSTRAINED, SweepRecord

CHOICES = ("left", "right")
MODEL_A = MODE_CONSTRAINED
MODEL_B = MODE_UNCONSTRAINED


class AssignmentError(ValueError):
    """Design counts do not divide into a balanced assignment."""


class SeparationError(RuntimeError):
    """Perfect or quasi-perfect separation: the MLE does not exist."""


class ConvergenceError(RuntimeError):
    """IRLS failed to converge within the iteration budget."""


@dataclass(frozen=True)
class ExperimentDesign:
    raters: tuple[str, ...]
    n_runs: int = 150
    pair_quantile: float = 0.75
    n_pairs: int = 9
    patients_per_pair: int = 24
    patients_per_rater: int = 36
    train_size: int = 400
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "raters", tuple(self.raters))
        if len(set(self.raters)) != len(self.raters) or not self.raters:
            raise ValueError("raters must be non-empty and unique")
        if self.patients_per_pair % 2 != 0:
            raise ValueError("patients_per_pair must be even (half uniform, half top-quantile)")
        if not (0.0 <= self.pair_quantile < 1.0):
            raise ValueError("pair_quantile must be in [0, 1)")
        if self.n_pairs * self.patients_per_pair != len(self.raters) * self.patients_per_rater:
            raise AssignmentError(
                f"{self.n_pairs} pairs x {self.patients_per_pair} patients != "
                f"{len(self.raters)} raters x {self.patients_per_rater} tasks"
            )
        if self.patients_per_pair % len(self.raters) != 0:
            per = self.patients_per_pair
            feasible = sorted(k for k in range(1, per + 1) if per % k == 0)
            raise AssignmentError(
                f"patients_per_pair={per} does not divide among {len(self.raters)} raters; "
                f"feasible rater counts: {feasible}"
            )

    @property
    def total_tasks(self) -> int:
        return self.n_pairs * self.patients_per_pair

    def to_dict(self) -> dict:
        return {
            "raters": list(self.raters),
            "n_runs": self.n_runs,
            "pair_quantile": self.pair_quantile,
            "n_pairs": self.n_pairs,
            "patients_per_pair": self.patients_per_pair,
            "patients_per_rater": self.patients_per_rater,
            "train_size": self.train_size,
            "seed": self.seed,
        }

    @staticmethod
    def from_dict(d: dict) -> "ExperimentDesign":
        return ExperimentDesign(
            raters=tuple(d["raters"]),
            n_runs=int(d["n_runs"]),
            pair_quantile=float(d["pair_quantile"]),
            n_pairs=int(d["n_pairs"]),
            patients_per_pair=int(d["patients_per_pair"]),
            patients_per_rater=int(d["patients_per_rater"]),
            train_size=int(d["train_size"]),
            seed=int(d["seed"]),
        )


def top_quantile_indices(values, quantile: float) -> np.ndarray:
    """Indices of the ceil(n * (1 - quantile)) largest values; ties broken by
    smaller index for determinism."""
    v = np.asarray(values, dtype=np.float64)
    k = math.ceil(v.size * (1.0 - quantile))
    order = sorted(range(v.size), key=lambda i: (-v[i], i))
    return np.asarray(sorted(order[:k]), dtype=np.intp)


def pair_id_of(record: SweepRecord) -> str:
    return f"size{record.size}_rep{record.replicate}"


def sample_pairs(records: list[SweepRecord], design: ExperimentDesign) -> list[SweepRecord]:
    """Uniform draw of n_pairs among runs whose pair-level attribution distance
    sits in the configured top quantile. Returned in sampling order (the first
    pair becomes the regression reference category)."""
    usable = [r for r in records if r.distance is not None]
    if len(usable) < design.n_runs:
        raise ValueError(f"need at least n_runs={design.n_runs} paired records, have {len(usable)}")
    eligible_idx = top_quantile_indices([r.distance.d_shap for r in usable], design.pair_quantile)
    if eligible_idx.size < design.n_pairs:
        raise ValueError(f"only {eligible_idx.size} eligible runs for {design.n_pairs} pairs")
    rng = np.random.default_rng(derive_seed("pairs", design.seed))
    chosen = rng.choice(eligible_idx, size=design.n_pairs, replace=False)
    return [usable[int(i)] for i in chosen]


def sample_patients(record: SweepRecord, test: Dataset, design: ExperimentDesign) -> list[str]:
    """Half uniform over the test set, half uniform over the top quantile of
    per-patient attribution distance; overlaps resolved by redrawing the
    uniform half."""
    if record.distance is None:
        raise ValueError("record has no pair distance")
    l1 = np.asarray(record.distance.per_row_shap_l1, dtype=np.float64)
    if record.distance.row_ids != test.row_ids:
        raise ValueError("distance report rows do not match the test set")
    half = design.patients_per_pair // 2
    top_idx = top_quantile_indices(l1, 0.75)
    if top_idx.size < half:
        raise ValueError(f"top-quantile subset ({top_idx.size}) smaller than half-count ({half})")
    rng = np.random.default_rng(derive_seed("patients", design.seed, pair_id_of(record)))
    quantile_half = rng.choice(top_idx, size=half, replace=False)
    for _ in range(1000):
        random_half = rng.choice(test.n_rows, size=half, replace=False)
        if not set(random_half.tolist()) & set(quantile_half.tolist()):
            break
    else:
        raise ValueError("could not draw a disjoint uniform half")
    idx = [int(i) for i in quantile_half] + [int(i) for i in random_half]
    return [test.row_ids[i] for i in idx]


@dataclass(frozen=True)
class TaskItem:
    """One rating task. ``left_model`` is the unblinding key and must never
    reach a rater-visible serialization."""

    task_id: str
    rater: str
    order: int
    pair_id: str
    row_id: str
    left_model: str
    shap_l1: float
    patient: tuple[dict, ...]
    left_entries: tuple[dict, ...]
    right_entries: tuple[dict, ...]

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "rater": self.rater,
            "order": self.order,
            "pair_id": self.pair_id,
            "row_id": self.row_id,
            "left_model": self.left_model,
            "shap_l1": self.shap_l1,
            "patient": [dict(p) for p in self.patient],
            "left_entries": [dict(e) for e in self.left_entries],
            "right_entries": [dict(e) for e in self.right_entries],
        }

    @staticmethod
    def from_dict(d: dict) -> "TaskItem":
        return TaskItem(
            task_id=d["task_id"],
            rater=d["rater"],
            order=int(d["order"]),
            pair_id=d["pair_id"],
            row_id=d["row_id"],
            left_model=d["left_model"],
            shap_l1=float(d["shap_l1"]),
            patient=tuple(d["patient"]),
            left_entries=tuple(d["left_entries"]),
            right_entries=tuple(d["right_entries"]),
        )

    def blinded_view(self) -> dict:
        """Rater-facing payload: LEFT/RIGHT bar plots and the patient table,
        nothing that identifies which side is which model."""
        return {
            "task_id": self.task_id,
            "patient": [dict(p) for p in self.patient],
            "left": [_blind_entry(e) for e in self.left_entries],
            "right": [_blind_entry(e) for e in self.right_entries],
        }


def _blind_entry(e: dict) -> dict:
    return {
        "feature": e["feature"],
        "value": e["value"],
        "attribution": e["attribution"],
        "direction": e["direction"],
    }


def _patient_table(test: Dataset, row_id: str) -> tuple[dict, ...]:
    r = test.row_ids.index(row_id)
    return tuple(
        {"feature": f.name, "value": test.display_value(f.name, r)} for f in test.schema.features
    )


def assign_tasks(
    pair_patients: dict[str, list[str]],
    design: ExperimentDesign,
    payloads: dict[tuple[str, str], tuple[BarPlotPayload, float]],
    test: Dataset,
) -> list[TaskItem]:
    """Deal each pair's patients evenly across raters, randomize rater task
    order and left/right sides, and freeze everything into TaskItems.

    Every patient lands with exactly one rater; each rater gets
    patients_per_pair / n_raters patients from every pair.
    """
    raters = design.raters
    per_rater_pair = design.patients_per_pair // len(raters)
    rng = np.random.default_rng(derive_seed("assign", design.seed))
    rater_tasks: dict[str, list[tuple[str, str]]] = {r: [] for r in raters}
    for pid in sorted(pair_patients):
        patients = pair_patients[pid]
        if len(patients) != design.patients_per_pair:
            raise AssignmentError(f"pair {pid} has {len(patients)} patients, expected {design.patients_per_pair}")
        perm = rng.permutation(len(patients))
        for ri, rater in enumerate(raters):
            for k in range(per_rater_pair):
                rater_tasks[rater].append((pid, patients[perm[ri * per_rater_pair + k]]))
    items: list[TaskItem] = []
    counter = 0
    for rater in raters:
        tasks = rater_tasks[rater]
        order_perm = rng.permutation(len(tasks))
        for pos, ti in enumerate(order_perm):
            pid, row_id = tasks[ti]
            payload, shap_l1 = payloads[(pid, row_id)]
            counter += 1
            left_model = MODEL_A if payload.left == "A" else MODEL_B
            items.append(
                TaskItem(
                    task_id=f"t{counter:04d}",
                    rater=rater,
                    order=pos,
                    pair_id=pid,
                    row_id=row_id,
                    left_model=left_model,
                    shap_l1=float(shap_l1),
                    patient=_patient_table(test, row_id),
                    left_entries=payload.left_entries(),
                    right_entries=payload.right_entries(),
                )
            )
    return items


def build_tasks(
    records: list[SweepRecord],
    test: Dataset,
    design: ExperimentDesign,
    shap_provider,
) -> tuple[list[TaskItem], list[str]]:
    """Sample pairs and patients, build payloads, and assign tasks.

    ``shap_provider(record) -> (S_constrained, S_unconstrained)`` supplies the
    attribution matrices for one sampled pair (normally recomputed from the
    stored models on the shared test set).
    """
    pairs = sample_pairs(records, design)
    pair_order = [pair_id_of(r) for r in pairs]
    pair_patients: dict[str, list[str]] = {}
    payloads: dict[tuple[str, str], tuple[BarPlotPayload, float]] = {}
    for record in pairs:
        pid = pair_id_of(record)
        patients = sample_patients(record, test, design)
        pair_patients[pid] = patients
        SA, SB = shap_provider(record)
        l1_by_row = dict(zip(record.distance.row_ids, record.distance.per_row_shap_l1))
        for row_id in patients:
            payload = top_k_payload(
                SA, SB, test, row_id, k=5, side_seed=derive_seed("task-side", design.seed, pid, row_id)
            )
            payloads[(pid, row_id)] = (payload, float(l1_by_row[row_id]))
    items = assign_tasks(pair_patients, design, payloads, test)
    return items, pair_order


# ---------------------------------------------------------------------------
# Response store


@dataclass(frozen=True)
class Response:
    task_id: str
    rater: str
    choice: str
    confidence: int
    timestamp: float

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "rater": self.rater,
            "choice": self.choice,
            "confidence": self.confidence,
            "timestamp": self.timestamp,
        }

    @staticmethod
    def from_dict(d: dict) -> "Response":
        return Response(d["task_id"], d["rater"], d["choice"], int(d["confidence"]), float(d["timestamp"]))


class DuplicateResponseError(ValueError):
    pass


class OutOfOrderError(ValueError):
    pass


class ExperimentStore:
    """On-disk experiment state: design, tasks, tokens, append-only responses.

    The response log is the single source of truth; restart recovers session
    state by replaying it. Appends serialize through one lock.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self._lock = threading.Lock()
        self.design = ExperimentDesign.from_dict(
            json.loads((self.root / "design.json").read_text(encoding="utf-8"))["design"]
        )
        meta = json.loads((self.root / "design.json").read_text(encoding="utf-8"))
        self.pair_order: list[str] = meta.get("pair_order", [])
        self.tasks: list[TaskItem] = []
        with (self.root / "tasks.jsonl").open(encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    self.tasks.append(TaskItem.from_dict(json.loads(line)))
        tokens = json.loads((self.root / "tokens.json").read_text(encoding="utf-8"))
        self.rater_tokens: dict[str, str] = tokens["raters"]
        self.admin_token: str = tokens["admin"]
        self.responses: dict[str, Response] = {}
        resp_path = self.root / "responses.jsonl"
        if resp_path.exists():
            with resp_path.open(encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        r = Response.from_dict(json.loads(line))
                        self.responses[r.task_id] = r

    @staticmethod
    def initialize(
        root: str | Path,
        design: ExperimentDesign,
        tasks: list[TaskItem],
        pair_order: list[str],
    ) -> "ExperimentStore":
        root = Path(root)
        root.mkdir(parents=True, exist_ok=True)
        (root / "static").mkdir(exist_ok=True)
        rng = np.random.default_rng(derive_seed("tokens", design.seed))

        def token() -> str:
            return "".join(format(b, "02x") for b in rng.integers(0, 256, size=16, dtype=np.uint8))

        tokens = {"raters": {r: token() for r in design.raters}, "admin": token()}
        (root / "design.json").write_text(
            json.dumps({"design": design.to_dict(), "pair_order": pair_order}, sort_keys=True, indent=1) + "\n",
            encoding="utf-8",
        )
        with (root / "tasks.jsonl").open("w", encoding="utf-8") as fh:
            for t in tasks:
                fh.write(json.dumps(t.to_dict(), sort_keys=True) + "\n")
        (root / "tokens.json").write_text(json.dumps(tokens, sort_keys=True, indent=1) + "\n", encoding="utf-8")
        (root / "responses.jsonl").touch()
        return ExperimentStore(root)

    def rater_for_token(self, token: str) -> str | None:
        for rater, t in self.rater_tokens.items():
            if t == token:
                return rater
        return None

    def tasks_for(self, rater: str) -> list[TaskItem]:
        return sorted((t for t in self.tasks if t.rater == rater), key=lambda t: t.order)

    def progress(self, rater: str) -> tuple[int, int]:
        tasks = self.tasks_for(rater)
        done = sum(1 for t in tasks if t.task_id in self.responses)
        return done, len(tasks)

    def current_task(self, rater: str) -> TaskItem | None:
        for t in self.tasks_for(rater):
            if t.task_id not in self.responses:
                return t
        return None

    def append_response(self, rater: str, task_id: str, choice: str, confidence) -> Response:
        if choice not in CHOICES:
            raise ValueError(f"choice must be one of {CHOICES}")
        if not isinstance(confidence, int) or isinstance(confidence, bool) or not (1 <= confidence <= 5):
            raise ValueError("confidence must be an integer between 1 and 5")
        with self._lock:
            if task_id in self.responses:
                raise DuplicateResponseError(f"task {task_id} already answered")
            current = self.current_task(rater)
            if current is None or current.task_id != task_id:
                raise OutOfOrderError(f"task {task_id} is not the current task for {rater}")
            resp = Response(task_id, rater, choice, confidence, timestamp=time.time())
            with (self.root / "responses.jsonl").open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(resp.to_dict(), sort_keys=True) + "\n")
                fh.flush()
            self.responses[task_id] = resp
            return resp

    def export_lines(self) -> list[str]:
        """Response log joined to its unblinding fields, one JSON object per
        line, deterministically ordered."""
        by_task = {t.task_id: t for t in self.tasks}
        rows = []
        for t in sorted(self.tasks, key=lambda t: (t.rater, t.order)):
            r = self.responses.get(t.task_id)
            if r is None:
                continue
            chosen = t.left_model if r.choice == "left" else (MODEL_B if t.left_model == MODEL_A else MODEL_A)
            rows.append(
                {
                    "task_id": t.task_id,
                    "rater": t.rater,
                    "order": t.order,
                    "pair_id": t.pair_id,
                    "row_id": t.row_id,
                    "left_model": t.left_model,
                    "choice": r.choice,
                    "chosen_model": chosen,
                    "confidence": r.confidence,
                    "shap_l1": t.shap_l1,
                    "timestamp": r.timestamp,
                }
            )
        assert all(row["task_id"] in by_task for row in rows)
        return [json.dumps(row, sort_keys=True) for row in rows]


# ---------------------------------------------------------------------------
# Fixed-effects logistic regression (IRLS)


@dataclass(frozen=True)
class RegressionResult:
    names: tuple[str, ...]
    coef: tuple[float, ...]
    se: tuple[float, ...]
    z: tuple[float, ...]
    p: tuple[float, ...]
    n: int
    converged: bool
    n_iter: int
    loglik: float

    def coefficient(self, name: str) -> tuple[float, float, float, float]:
        i = self.names.index(name)
        return self.coef[i], self.se[i], self.z[i], self.p[i]

    def to_dict(self) -> dict:
        return {
            "names": list(self.names),
            "coef": list(self.coef),
            "se": list(self.se),
            "z": list(self.z),
            "p": list(self.p),
            "n": self.n,
            "converged": self.converged,
            "n_iter": self.n_iter,
            "loglik": self.loglik,
        }

    def to_text(self) -> str:
        lines = ["Logistic regression: choosing the constrained model", ""]
        lines.append(f"{'variable':<24}{'estimate':>12}{'SE':>10}{'z':>8}{'p':>9}")
        for name, c, s, z, p in zip(self.names, self.coef, self.se, self.z, self.p):
            star = "*" if p < 0.05 and name != "intercept" else ""
            lines.append(f"{name:<24}{c:>12.4f}{s:>10.3f}{z:>8.2f}{p:>8.3f}{star}")
        lines.append("")
        lines.append(f"n = {self.n}, log-likelihood = {self.loglik:.4f}, iterations = {self.n_iter}")
        return "\n".join(lines)


def _sigmoid(eta: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(eta, -36.0, 36.0)))


def _loglik(X: np.ndarray, y: np.ndarray, beta: np.ndarray) -> float:
    eta = X @ beta
    # log(1 + exp(eta)) computed stably on both tails
    pos = eta > 0
    out = np.empty_like(eta)
    out[pos] = eta[pos] + np.log1p(np.exp(-eta[pos]))
    out[~pos] = np.log1p(np.exp(eta[~pos]))
    return float(np.sum(y * eta - out))


def logistic_irls(
    X: np.ndarray,
    y: np.ndarray,
    names: tuple[str, ...],
    tol: float = 1e-8,
    max_iter: int = 100,
    separation_bound: float = 15.0,
) -> RegressionResult:
    """Newton/IRLS maximum likelihood with step halving.

    Convergence is declared when the log-likelihood improves by less than
    ``tol``. Non-convergence with any |coefficient| above ``separation_bound``
    is reported as separation rather than returned silently.
    """
    n, k = X.shape
    beta = np.zeros(k)
    ll = _loglik(X, y, beta)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        p = _sigmoid(X @ beta)
        w = p * (1.0 - p)
        XtWX = X.T @ (X * w[:, None])
        grad = X.T @ (y - p)
        try:
            delta = np.linalg.solve(XtWX, grad)
        except np.linalg.LinAlgError:
            raise SeparationError("singular information matrix (separation or collinearity)") from None
        step = 1.0
        for _ in range(30):
            candidate = beta + step * delta
            ll_new = _loglik(X, y, candidate)
            if ll_new >= ll - 1e-12:
                break
            step *= 0.5
        beta = beta + step * delta
        ll_new = _loglik(X, y, beta)
        if abs(ll_new - ll) < tol:
            ll = ll_new
            converged = True
            break
        ll = ll_new
    if not converged:
        if float(np.max(np.abs(beta))) > separation_bound:
            raise SeparationError(
                f"coefficients diverged beyond {separation_bound} without convergence"
            )
        raise ConvergenceError(f"IRLS did not converge in {max_iter} iterations")
    p = _sigmoid(X @ beta)
    w = p * (1.0 - p)
    info = X.T @ (X * w[:, None])
    try:
        cov = np.linalg.inv(info)
    except np.linalg.LinAlgError:
        raise SeparationError("singular information matrix at the optimum") from None
    se = np.sqrt(np.diag(cov))
    z = beta / se
    pvals = np.array([2.0 * (1.0 - _phi(abs(v))) for v in z])
    return RegressionResult(
        names=tuple(names),
        coef=tuple(float(b) for b in beta),
        se=tuple(float(s) for s in se),
        z=tuple(float(v) for v in z),
        p=tuple(float(v) for v in pvals),
        n=n,
        converged=True,
        n_iter=it,
        loglik=ll,
    )


def _phi(x: float) -> float:
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


def choice_design_matrix(
    responses: list[Response],
    tasks: list[TaskItem],
    pair_order: list[str] | None = None,
) -> tuple[np.ndarray, np.ndarray, tuple[str, ...]]:
    """Regressors: intercept, per-patient attribution distance (raw), and pair
    dummies with the first pair as reference. Dependent: chose constrained."""
    by_task = {t.task_id: t for t in tasks}
    used = [r for r in responses if r.task_id in by_task]
    if not used:
        raise ValueError("no responses join to the task list")
    pairs_present = []
    for r in used:
        pid = by_task[r.task_id].pair_id
        if pid not in pairs_present:
            pairs_present.append(pid)
    if pair_order is None:
        pair_order = sorted(pairs_present)
    missing = sorted(set(pairs_present) - set(pair_order))
    if missing:
        raise ValueError(f"responses reference pairs outside pair_order: {missing}")
    order = [p for p in pair_order if p in set(pairs_present)]
    names = ["intercept", "shap_distance"] + [f"pair[{p}]" for p in order[1:]]
    X = np.zeros((len(used), len(names)))
    y = np.zeros(len(used))
    for i, r in enumerate(used):
        t = by_task[r.task_id]
        chosen = t.left_model if r.choice == "left" else (MODEL_B if t.left_model == MODEL_A else MODEL_A)
        y[i] = 1.0 if chosen == MODEL_A else 0.0
        X[i, 0] = 1.0
        X[i, 1] = t.shap_l1
        if t.pair_id != order[0]:
            X[i, 2 + order[1:].index(t.pair_id)] = 1.0
    return X, y, tuple(names)


def fit_choice_model(
    responses: list[Response],
    tasks: list[TaskItem],
    pair_order: list[str] | None = None,
) -> RegressionResult:
    """Fixed-effects logistic regression of constrained-model choice on the
    per-patient attribution distance."""
    X, y, names = choice_design_matrix(responses, tasks, pair_order)
    if y.min() == y.max():
        raise SeparationError("all responses chose the same model")
    by_task = {t.task_id: t for t in tasks}
    outcomes_by_pair: dict[str, set[float]] = {}
    for r, yi in zip([r for r in responses if r.task_id in by_task], y):
        outcomes_by_pair.setdefault(by_task[r.task_id].pair_id, set()).add(float(yi))
    degenerate = sorted(p for p, outs in outcomes_by_pair.items() if len(outs) == 1)
    if degenerate:
        raise SeparationError(f"pairs with all-identical outcomes: {degenerate}")
    return logistic_irls(X, y, names)


# ---------------------------------------------------------------------------
# Summary statistics


@dataclass(frozen=True)
class SummaryReport:
    n: int
    chose_constrained: int
    rate: float
    rate_ci: tuple[float, float]
    shap_by_choice: dict[str, tuple[float, float, float] | None]
    confidence_by_choice: dict[str, tuple[float, float, float] | None]

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "chose_constrained": self.chose_constrained,
            "rate": self.rate,
            "rate_ci": list(self.rate_ci),
            "shap_by_choice": {k: list(v) if v else None for k, v in self.shap_by_choice.items()},
            "confidence_by_choice": {
                k: list(v) if v else None for k, v in self.confidence_by_choice.items()
            },
        }

    def to_text(self) -> str:
        lines = ["Experiment summary", ""]
        lines.append(
            f"constrained model chosen: {100 * self.rate:.1f}% "
            f"({100 * self.rate_ci[0]:.1f}-{100 * self.rate_ci[1]:.1f}), n = {self.n}"
        )
        for label, table in (
            ("attribution distance (mean)", self.shap_by_choice),
            ("confidence level (mean)", self.confidence_by_choice),
        ):
            lines.append(label)
            for k in sorted(table):
                entry = table[k]
                if entry is None:
                    lines.append(f"  {k} chosen: never")
                else:
                    m, lo, hi = entry
                    lines.append(f"  {k} chosen: {m:.3f} ({lo:.3f}-{hi:.3f})")
        return "\n".join(lines)


def _mean_ci(values: list[float]) -> tuple[float, float, float] | None:
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        return None
    m = float(v.mean())
    if v.size == 1:
        return (m, m, m)
    half = Z_95 * float(v.std(ddof=1)) / math.sqrt(v.size)
    return (m, m - half, m + half)


def summary_stats(responses: list[Response], tasks: list[TaskItem]) -> SummaryReport:
    by_task = {t.task_id: t for t in tasks}
    used = [r for r in responses if r.task_id in by_task]
    if not used:
        raise ValueError("no responses to summarize")
    shap_by: dict[str, list[float]] = {MODEL_A: [], MODEL_B: []}
    conf_by: dict[str, list[float]] = {MODEL_A: [], MODEL_B: []}
    chose_a = 0
    for r in used:
        t = by_task[r.task_id]
        chosen = t.left_model if r.choice == "left" else (MODEL_B if t.left_model == MODEL_A else MODEL_A)
        if chosen == MODEL_A:
            chose_a += 1
        shap_by[chosen].append(t.shap_l1)
        conf_by[chosen].append(float(r.confidence))
    return SummaryReport(
        n=len(used),
        chose_constrained=chose_a,
        rate=chose_a / len(used),
        rate_ci=wilson_interval(chose_a, len(used)),
        shap_by_choice={k: _mean_ci(v) for k, v in shap_by.items()},
        confidence_by_choice={k: _mean_ci(v) for k, v in conf_by.items()},
    )
