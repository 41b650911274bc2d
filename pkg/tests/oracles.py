"""Independent brute-force oracles used to pin expected values.

Everything here recomputes results from first principles (pair enumeration,
threshold recomputation, coalition enumeration, generic numerical
optimization) and deliberately shares no code with the implementations under
test.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


def auc_bruteforce(scores, labels) -> float:
    """All positive/negative pairs: win 1, tie 1/2."""
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels, dtype=int)
    pos = s[y == 1]
    neg = s[y == 0]
    total = 0.0
    for a in pos:
        for b in neg:
            if a > b:
                total += 1.0
            elif a == b:
                total += 0.5
    return total / (len(pos) * len(neg))


def ap_bruteforce(scores, labels) -> float:
    """Recompute precision/recall from scratch at each distinct threshold."""
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels, dtype=int)
    n_pos = int(y.sum())
    thresholds = sorted(set(s.tolist()), reverse=True)
    ap = 0.0
    prev_recall = 0.0
    for t in thresholds:
        retrieved = s >= t
        tp = int((y[retrieved] == 1).sum())
        precision = tp / int(retrieved.sum())
        recall = tp / n_pos
        ap += (recall - prev_recall) * precision
        prev_recall = recall
    return ap


def drank_bruteforce(pa, pb, labels) -> float:
    """Mixed-outcome pair enumeration with sign comparison."""
    a = np.asarray(pa, dtype=float)
    b = np.asarray(pb, dtype=float)
    y = np.asarray(labels, dtype=int)
    total = 0.0
    count = 0
    for i in range(len(y)):
        for j in range(len(y)):
            if y[i] == 1 and y[j] == 0:
                count += 1
                sa = int(a[i] > a[j]) - int(a[i] < a[j])
                sb = int(b[i] > b[j]) - int(b[i] < b[j])
                if sa == sb:
                    continue
                total += 0.5 if (sa == 0 or sb == 0) else 1.0
    return total / count


# ---------------------------------------------------------------------------
# Shapley oracle (path-dependent conditional expectation over a tree)


def tree_value_given_coalition(tree_dicts, x, coalition: frozenset) -> float:
    """Expected leaf weight when features outside the coalition are averaged
    by cover and features inside follow the row's values (missing rows follow
    the recorded default direction)."""

    def walk(node) -> float:
        if "leaf" in node:
            return node["leaf"]
        f = node["feature"]
        if f in coalition:
            xv = x[f]
            if isinstance(xv, float) and math.isnan(xv):
                child = node["left"] if node["default_left"] else node["right"]
            elif xv < node["threshold"]:
                child = node["left"]
            else:
                child = node["right"]
            return walk(child)
        wl = node["left"]["cover"] / node["cover"]
        wr = node["right"]["cover"] / node["cover"]
        return wl * walk(node["left"]) + wr * walk(node["right"])

    return sum(walk(t) for t in tree_dicts)


def shapley_bruteforce(tree_dicts, x, n_features: int) -> np.ndarray:
    """Exact Shapley values of the coalition value function above."""
    phi = np.zeros(n_features)
    all_features = list(range(n_features))
    fact = math.factorial
    for j in all_features:
        rest = [f for f in all_features if f != j]
        for r in range(len(rest) + 1):
            for subset in itertools.combinations(rest, r):
                s = frozenset(subset)
                weight = fact(len(s)) * fact(n_features - len(s) - 1) / fact(n_features)
                gain = tree_value_given_coalition(tree_dicts, x, s | {j}) - tree_value_given_coalition(
                    tree_dicts, x, s
                )
                phi[j] += weight * gain
    return phi


# ---------------------------------------------------------------------------
# Split enumeration oracle


def best_split_bruteforce(X, g, h, directions, lo, hi, lam, gamma, mcw):
    """Enumerate every (feature, threshold, missing-route) candidate with
    plain Python loops; returns (gain, feature, threshold, default_left)."""

    def leaf_score(G, H, w):
        return -(G * w + 0.5 * (H + lam) * w * w)

    def clipped(G, H):
        return min(max(-G / (H + lam), lo), hi)

    n, p = X.shape
    G_all = sum(g)
    H_all = sum(h)
    parent = leaf_score(G_all, H_all, clipped(G_all, H_all))
    best = None
    for j in range(p):
        present = [i for i in range(n) if not math.isnan(X[i, j])]
        missing = [i for i in range(n) if math.isnan(X[i, j])]
        values = sorted(set(X[i, j] for i in present))
        for a, b in zip(values, values[1:]):
            thr = (a + b) / 2.0
            left_present = [i for i in present if X[i, j] < thr]
            for default_left in (True, False):
                left = left_present + (missing if default_left else [])
                GL = sum(g[i] for i in left)
                HL = sum(h[i] for i in left)
                GR = G_all - GL
                HR = H_all - HL
                if HL < mcw or HR < mcw:
                    continue
                wl = clipped(GL, HL)
                wr = clipped(GR, HR)
                if directions[j] == 1 and wl > wr:
                    continue
                if directions[j] == -1 and wl < wr:
                    continue
                gain = leaf_score(GL, HL, wl) + leaf_score(GR, HR, wr) - parent - gamma
                cand = (gain, j, thr, default_left)
                if best is None or gain > best[0] + 1e-15:
                    best = cand
    return best


# ---------------------------------------------------------------------------
# Logistic regression oracle


def logistic_mle_oracle(X, y):
    """Direct likelihood maximization with a generic optimizer; standard
    errors from a central-difference Hessian of the gradient."""
    from scipy.optimize import minimize

    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)

    def negll(beta):
        eta = X @ beta
        return float(np.sum(np.logaddexp(0.0, eta) - y * eta))

    def grad(beta):
        p = 1.0 / (1.0 + np.exp(-np.clip(X @ beta, -36, 36)))
        return X.T @ (p - y)

    res = minimize(negll, np.zeros(X.shape[1]), jac=grad, method="BFGS", options={"gtol": 1e-12, "maxiter": 500})
    beta = res.x
    k = len(beta)
    H = np.zeros((k, k))
    for i in range(k):
        step = 1e-6 * max(1.0, abs(beta[i]))
        ei = np.zeros(k)
        ei[i] = step
        H[i] = (grad(beta + ei) - grad(beta - ei)) / (2 * step)
    H = 0.5 * (H + H.T)
    se = np.sqrt(np.diag(np.linalg.inv(H)))
    return beta, se
