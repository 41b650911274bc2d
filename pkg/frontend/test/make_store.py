"""Build a small experiment store for the frontend round-trip test.

Usage: python3 make_store.py <store-dir>
Prints the tokens JSON on stdout.
"""

import sys
from pathlib import Path

from alignboost.experiment import ExperimentDesign, ExperimentStore, TaskItem

ATTRIBUTIONS = (0.52, -0.34, 0.26, -0.18, 0.07)
FEATURES = ("sev", "stage", "noise_0", "noise_1", "noise_2")


def entries(flip: int):
    out = []
    for feature, a in zip(FEATURES, ATTRIBUTIONS):
        a = flip * a
        out.append(
            {
                "feature": feature,
                "column": feature,
                "value": 2.0 if feature != "stage" else None,
                "attribution": a,
                "direction": 0 if a == 0 else (1 if a > 0 else -1),
            }
        )
    return tuple(out)


def main() -> int:
    root = Path(sys.argv[1])
    design = ExperimentDesign(
        raters=("r1", "r2"),
        n_runs=10,
        n_pairs=1,
        patients_per_pair=6,
        patients_per_rater=3,
        train_size=80,
        seed=3,
    )
    tasks = []
    k = 0
    for rater in ("r1", "r2"):
        for order in range(3):
            k += 1
            tasks.append(
                TaskItem(
                    task_id=f"t{k:04d}",
                    rater=rater,
                    order=order,
                    pair_id="pair0",
                    row_id=f"p{k}",
                    left_model="constrained" if k % 2 else "unconstrained",
                    shap_l1=1.0 + k / 10.0,
                    patient=(
                        {"feature": "sev", "value": 2.0},
                        {"feature": "stage", "value": None},
                    ),
                    left_entries=entries(+1),
                    right_entries=entries(-1),
                )
            )
    store = ExperimentStore.initialize(root, design, tasks, ["pair0"])
    print((store.root / "tokens.json").read_text())
    return 0


if __name__ == "__main__":
    sys.exit(main())
