"""Compare the compiled and pure-Python kernel backends on the hot paths.

Runs training, prediction, and attribution workloads under each backend in a
subprocess (backend selection happens at import time) and prints a table.

    python3 benchmarks/bench_kernels.py [--n 4000] [--rounds 40] [--repeats 3]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys

WORKLOAD = r"""
import json
import time

import alignboost
from alignboost.align import ConstraintVector
from alignboost.data import SplitSpec, SyntheticSpec, generate_synthetic, stratified_split
from alignboost.explain import tree_shap
from alignboost.gbt import HyperGrid, train

params = json.loads({params!r})
spec = SyntheticSpec(
    n=params["n"],
    seed=3,
    monotone_features=(("sev", -1, 1.2), ("stage", -1, 0.8)),
    noise_features=3,
    label_noise=0.2,
    levels=8,
)
full = generate_synthetic(spec)
train80, test = stratified_split(full, SplitSpec(0.2, seed=1))
grid = HyperGrid((0.3,), (params["rounds"],), (3,), folds=2)
constraints = ConstraintVector({{"sev": -1, "stage": -1}})

def best_of(f, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        f()
        times.append(time.perf_counter() - t0)
    return min(times)

model = train(train80, constraints, grid, seed=0)  # warm-up
t_train = best_of(lambda: train(train80, constraints, grid, seed=0), params["repeats"])
t_pred = best_of(lambda: model.predict_proba(test), params["repeats"])
t_shap = best_of(lambda: tree_shap(model, test), params["repeats"])
print(json.dumps({{
    "backend": alignboost.kernel_backend(),
    "train_s": t_train,
    "predict_s": t_pred,
    "shap_s": t_shap,
}}))
"""


def run_backend(backend: str, params: dict) -> dict:
    env = dict(os.environ, ALIGNBOOST_KERNELS=backend)
    code = WORKLOAD.format(params=json.dumps(params))
    out = subprocess.run(
        [sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True
    )
    return json.loads(out.stdout.strip().splitlines()[-1])


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=4000, help="synthetic dataset size")
    parser.add_argument("--rounds", type=int, default=40, help="boosting rounds")
    parser.add_argument("--repeats", type=int, default=3, help="repeats per measurement (min taken)")
    args = parser.parse_args()
    params = {"n": args.n, "rounds": args.rounds, "repeats": args.repeats}

    results = {}
    for backend in ("python", "compiled"):
        try:
            results[backend] = run_backend(backend, params)
        except subprocess.CalledProcessError as exc:
            if backend == "compiled":
                print("compiled backend unavailable; build the extension first", file=sys.stderr)
                print(exc.stderr, file=sys.stderr)
                continue
            raise

    print(f"\nworkload: n={args.n}, train 80% split, {args.rounds} rounds, depth 3, 6 columns")
    print(f"{'stage':<12}" + "".join(f"{b:>14}" for b in results) + f"{'speedup':>10}")
    for stage, key in (("train", "train_s"), ("predict", "predict_s"), ("tree-shap", "shap_s")):
        row = f"{stage:<12}"
        for backend in results:
            row += f"{results[backend][key] * 1000:>12.1f}ms"
        if len(results) == 2:
            row += f"{results['python'][key] / results['compiled'][key]:>9.1f}x"
        print(row)
    return 0


if __name__ == "__main__":
    sys.exit(main())
