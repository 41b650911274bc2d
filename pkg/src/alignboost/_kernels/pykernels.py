"""Pure-Python/numpy kernels.

Reference implementation of the three hot loops: split scanning for boosted
tree growth, leaf-weight accumulation for prediction, and per-row additive
attributions. The compiled backend mirrors the arithmetic of each function
operation for operation, so both produce identical trees.
"""

from __future__ import annotations

import math

import numpy as np

NEG_INF = float("-inf")


def scan_feature(
    values: np.ndarray,
    g: np.ndarray,
    h: np.ndarray,
    g_miss: float,
    h_miss: float,
    g_total: float,
    h_total: float,
    direction: int,
    lo: float,
    hi: float,
    lam: float,
    gamma: float,
    min_child_weight: float,
    parent_score: float,
):
    """Best split of one feature at one node.

    ``values`` are the node's present (non-missing) cell values sorted
    ascending, with ``g``/``h`` aligned. Missing rows contribute
    ``(g_miss, h_miss)`` to whichever side they are routed to; both routings
    are scored and the better one becomes the default direction. Candidate
    thresholds are midpoints between consecutive distinct values. A split on
    a direction-constrained feature is rejected unless the clipped child
    weights are ordered accordingly. Returns
    ``(gain, threshold, default_left, w_left, w_right)`` with ``gain=-inf``
    when no admissible split exists.
    """
    n = values.size
    if n < 2:
        return (NEG_INF, math.nan, True, 0.0, 0.0)
    boundaries = np.nonzero(values[:-1] != values[1:])[0]
    if boundaries.size == 0:
        return (NEG_INF, math.nan, True, 0.0, 0.0)
    cg = np.cumsum(g)
    ch = np.cumsum(h)
    gl0 = cg[boundaries]
    hl0 = ch[boundaries]
    thresholds = (values[boundaries] + values[boundaries + 1]) / 2.0

    def option(miss_left: bool):
        gl = gl0 + g_miss if miss_left else gl0
        hl = hl0 + h_miss if miss_left else hl0
        gr = g_total - gl
        hr = h_total - hl
        ok = (hl >= min_child_weight) & (hr >= min_child_weight)
        wl = np.clip(-gl / (hl + lam), lo, hi)
        wr = np.clip(-gr / (hr + lam), lo, hi)
        if direction == 1:
            ok &= wl <= wr
        elif direction == -1:
            ok &= wl >= wr
        gain = (-(gl * wl + 0.5 * (hl + lam) * wl * wl)) + (-(gr * wr + 0.5 * (hr + lam) * wr * wr))
        gain = gain - parent_score - gamma
        gain = np.where(ok, gain, NEG_INF)
        return gain, wl, wr

    gain_l, wl_l, wr_l = option(True)
    gain_r, wl_r, wr_r = option(False)
    # Canonical candidate order: per boundary, missing-left then missing-right;
    # argmax keeps the first maximum, matching the compiled backend's strict ">".
    interleaved = np.stack([gain_l, gain_r], axis=1).ravel()
    flat = int(np.argmax(interleaved))
    best_gain = float(interleaved[flat])
    if best_gain == NEG_INF:
        return (NEG_INF, math.nan, True, 0.0, 0.0)
    b = flat // 2
    miss_left = flat % 2 == 0
    if miss_left:
        return (best_gain, float(thresholds[b]), True, float(wl_l[b]), float(wr_l[b]))
    return (best_gain, float(thresholds[b]), False, float(wl_r[b]), float(wr_r[b]))


def tree_margin_add(
    feature: np.ndarray,
    threshold: np.ndarray,
    default_left: np.ndarray,
    left: np.ndarray,
    right: np.ndarray,
    weight: np.ndarray,
    X: np.ndarray,
    out: np.ndarray,
) -> None:
    """Route every row of X through one tree and add its leaf weight to out."""
    n = X.shape[0]
    node = np.zeros(n, dtype=np.int32)
    active = feature[node] >= 0
    while active.any():
        idx = np.nonzero(active)[0]
        nd = node[idx]
        x = X[idx, feature[nd]]
        go_left = np.where(np.isnan(x), default_left[nd].astype(bool), x < threshold[nd])
        node[idx] = np.where(go_left, left[nd], right[nd])
        active[idx] = feature[node[idx]] >= 0
    out += weight[node]


def tree_shap_add(
    feature: np.ndarray,
    threshold: np.ndarray,
    default_child: np.ndarray,
    left: np.ndarray,
    right: np.ndarray,
    weight: np.ndarray,
    cover: np.ndarray,
    X: np.ndarray,
    phi: np.ndarray,
) -> None:
    """Add one tree's per-feature attributions for every row of X into phi.

    Weighted-path algorithm over the unique feature path: each path element
    carries the fraction of cover-weighted subsets flowing down when the
    feature is excluded (z), the indicator when included (o), and the
    permutation weight (w). Handles repeated features on a path by unwinding
    the earlier occurrence.
    """
    for r in range(X.shape[0]):
        _shap_row(feature, threshold, default_child, left, right, weight, cover, X[r], phi[r])


def _extend(d: list, z: list, o: list, w: list, pz: float, po: float, pf: int) -> None:
    d.append(pf)
    z.append(pz)
    o.append(po)
    w.append(1.0 if len(w) == 0 else 0.0)
    m = len(d) - 1
    for i in range(m - 1, -1, -1):
        w[i + 1] += po * w[i] * (i + 1) / (m + 1)
        w[i] = pz * w[i] * (m - i) / (m + 1)


def _unwind(d: list, z: list, o: list, w: list, i: int) -> None:
    m = len(d) - 1
    one = o[i]
    zero = z[i]
    next_one = w[m]
    for j in range(m - 1, -1, -1):
        if one != 0:
            tmp = w[j]
            w[j] = next_one * (m + 1) / ((j + 1) * one)
            next_one = tmp - w[j] * zero * (m - j) / (m + 1)
        else:
            w[j] = w[j] * (m + 1) / (zero * (m - j))
    for j in range(i, m):
        d[j] = d[j + 1]
        z[j] = z[j + 1]
        o[j] = o[j + 1]
    d.pop()
    z.pop()
    o.pop()
    w.pop()


def _unwound_sum(z: list, o: list, w: list, i: int) -> float:
    m = len(z) - 1
    one = o[i]
    zero = z[i]
    next_one = w[m]
    total = 0.0
    for j in range(m - 1, -1, -1):
        if one != 0:
            tmp = next_one * (m + 1) / ((j + 1) * one)
            total += tmp
            next_one = w[j] - tmp * zero * (m - j) / (m + 1)
        else:
            total += (w[j] / zero) / ((m - j) / (m + 1))
    return total


def _shap_row(feature, threshold, default_child, left, right, weight, cover, x, phi_row) -> None:
    def recurse(node: int, d: list, z: list, o: list, w: list, pz: float, po: float, pf: int) -> None:
        d, z, o, w = d[:], z[:], o[:], w[:]
        _extend(d, z, o, w, pz, po, pf)
        m = len(d) - 1
        f = int(feature[node])
        if f < 0:
            leaf_value = float(weight[node])
            for i in range(1, m + 1):
                s = _unwound_sum(z, o, w, i)
                phi_row[d[i]] += s * (o[i] - z[i]) * leaf_value
            return
        xv = x[f]
        if math.isnan(xv):
            hot = int(default_child[node])
        elif xv < threshold[node]:
            hot = int(left[node])
        else:
            hot = int(right[node])
        cold = int(right[node]) if hot == int(left[node]) else int(left[node])
        hot_zero = float(cover[hot]) / float(cover[node])
        cold_zero = float(cover[cold]) / float(cover[node])
        iz = 1.0
        io = 1.0
        pi = -1
        for i in range(len(d)):
            if d[i] == f:
                pi = i
                break
        if pi >= 0:
            iz = z[pi]
            io = o[pi]
            _unwind(d, z, o, w, pi)
        recurse(hot, d, z, o, w, hot_zero * iz, io, f)
        recurse(cold, d, z, o, w, cold_zero * iz, 0.0, f)

    recurse(0, [], [], [], [], 1.0, 1.0, -1)
