# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernels: split scanning, margin accumulation, per-row attributions.

Mirrors pykernels.py operation for operation (compiled with FP contraction
off) so both backends grow bit-identical trees.
"""

import math

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, isnan

cnp.import_array()


def scan_feature(
    double[::1] values,
    double[::1] g,
    double[::1] h,
    double g_miss,
    double h_miss,
    double g_total,
    double h_total,
    int direction,
    double lo,
    double hi,
    double lam,
    double gamma,
    double min_child_weight,
    double parent_score,
):
    cdef Py_ssize_t n = values.shape[0]
    if n < 2:
        return (-INFINITY, math.nan, True, 0.0, 0.0)

    cdef double best_gain = -INFINITY
    cdef double best_thr = 0.0
    cdef double best_wl = 0.0
    cdef double best_wr = 0.0
    cdef bint best_miss_left = True
    cdef bint any_boundary = 0

    cdef double cg = 0.0
    cdef double ch = 0.0
    cdef double gl, hl, gr, hr, wl, wr, gain, thr
    cdef Py_ssize_t i
    cdef int opt
    cdef bint miss_left, ok

    for i in range(n - 1):
        cg = cg + g[i]
        ch = ch + h[i]
        if values[i] == values[i + 1]:
            continue
        any_boundary = 1
        thr = (values[i] + values[i + 1]) / 2.0
        for opt in range(2):
            miss_left = opt == 0
            if miss_left:
                gl = cg + g_miss
                hl = ch + h_miss
            else:
                gl = cg
                hl = ch
            gr = g_total - gl
            hr = h_total - hl
            ok = hl >= min_child_weight and hr >= min_child_weight
            if not ok:
                continue
            wl = -gl / (hl + lam)
            if wl < lo:
                wl = lo
            if wl > hi:
                wl = hi
            wr = -gr / (hr + lam)
            if wr < lo:
                wr = lo
            if wr > hi:
                wr = hi
            if direction == 1 and not (wl <= wr):
                continue
            if direction == -1 and not (wl >= wr):
                continue
            gain = (-(gl * wl + 0.5 * (hl + lam) * wl * wl)) + (-(gr * wr + 0.5 * (hr + lam) * wr * wr))
            gain = gain - parent_score - gamma
            if gain > best_gain:
                best_gain = gain
                best_thr = thr
                best_miss_left = miss_left
                best_wl = wl
                best_wr = wr

    if not any_boundary or best_gain == -INFINITY:
        return (-INFINITY, math.nan, True, 0.0, 0.0)
    return (best_gain, best_thr, best_miss_left, best_wl, best_wr)


def tree_margin_add(
    int[::1] feature,
    double[::1] threshold,
    unsigned char[::1] default_left,
    int[::1] left,
    int[::1] right,
    double[::1] weight,
    double[:, ::1] X,
    double[::1] out,
):
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t r
    cdef int node, f
    cdef double x
    for r in range(n):
        node = 0
        f = feature[node]
        while f >= 0:
            x = X[r, f]
            if isnan(x):
                node = left[node] if default_left[node] else right[node]
            elif x < threshold[node]:
                node = left[node]
            else:
                node = right[node]
            f = feature[node]
        out[r] += weight[node]


cdef void _extend(
    int* d, double* z, double* o, double* w, int m, double pz, double po, int pf
) noexcept nogil:
    # m = index of the new element; path occupies 0..m afterwards
    cdef int i
    d[m] = pf
    z[m] = pz
    o[m] = po
    w[m] = 1.0 if m == 0 else 0.0
    for i in range(m - 1, -1, -1):
        w[i + 1] += po * w[i] * (i + 1) / (m + 1)
        w[i] = pz * w[i] * (m - i) / (m + 1)


cdef void _unwind(int* d, double* z, double* o, double* w, int m, int i) noexcept nogil:
    cdef double one = o[i]
    cdef double zero = z[i]
    cdef double next_one = w[m]
    cdef double tmp
    cdef int j
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


cdef double _unwound_sum(double* z, double* o, double* w, int m, int i) noexcept nogil:
    cdef double one = o[i]
    cdef double zero = z[i]
    cdef double next_one = w[m]
    cdef double total = 0.0
    cdef double tmp
    cdef int j
    for j in range(m - 1, -1, -1):
        if one != 0:
            tmp = next_one * (m + 1) / ((j + 1) * one)
            total += tmp
            next_one = w[j] - tmp * zero * (m - j) / (m + 1)
        else:
            total += (w[j] / zero) / ((m - j) / <double>(m + 1))
    return total


cdef void _shap_recurse(
    int[::1] feature,
    double[::1] threshold,
    int[::1] default_child,
    int[::1] left,
    int[::1] right,
    double[::1] weight,
    double[::1] cover,
    double[:] x,
    double[:] phi_row,
    int node,
    int depth_len,        # number of path elements inherited from the parent
    int* pd, double* pz_buf, double* po_buf, double* pw_buf,
    double pz, double po, int pf,
) noexcept nogil:
    # Copy the parent path into this level's slice of the shared buffer, then
    # extend with the incoming fractions.
    cdef int* d = pd + depth_len
    cdef double* z = pz_buf + depth_len
    cdef double* o = po_buf + depth_len
    cdef double* w = pw_buf + depth_len
    cdef int i
    for i in range(depth_len):
        d[i] = pd[i]
        z[i] = pz_buf[i]
        o[i] = po_buf[i]
        w[i] = pw_buf[i]
    _extend(d, z, o, w, depth_len, pz, po, pf)
    cdef int m = depth_len  # highest occupied index after extension

    cdef int f = feature[node]
    cdef double leaf_value, s, xv, hot_zero, cold_zero, iz, io
    cdef int hot, cold, pi

    if f < 0:
        leaf_value = weight[node]
        for i in range(1, m + 1):
            s = _unwound_sum(z, o, w, m, i)
            phi_row[d[i]] += s * (o[i] - z[i]) * leaf_value
        return

    xv = x[f]
    if isnan(xv):
        hot = default_child[node]
    elif xv < threshold[node]:
        hot = left[node]
    else:
        hot = right[node]
    cold = right[node] if hot == left[node] else left[node]
    hot_zero = cover[hot] / cover[node]
    cold_zero = cover[cold] / cover[node]
    iz = 1.0
    io = 1.0
    pi = -1
    for i in range(m + 1):
        if d[i] == f:
            pi = i
            break
    if pi >= 0:
        iz = z[pi]
        io = o[pi]
        _unwind(d, z, o, w, m, pi)
        m -= 1
    _shap_recurse(
        feature, threshold, default_child, left, right, weight, cover, x, phi_row,
        hot, m + 1, d, z, o, w, hot_zero * iz, io, f,
    )
    _shap_recurse(
        feature, threshold, default_child, left, right, weight, cover, x, phi_row,
        cold, m + 1, d, z, o, w, cold_zero * iz, 0.0, f,
    )


def tree_shap_add(
    int[::1] feature,
    double[::1] threshold,
    int[::1] default_child,
    int[::1] left,
    int[::1] right,
    double[::1] weight,
    double[::1] cover,
    double[:, ::1] X,
    double[:, ::1] phi,
):
    cdef Py_ssize_t n_nodes = feature.shape[0]
    cdef Py_ssize_t r, i
    # Nodes are stored preorder, so a child index is always larger than its
    # parent's and one pass computes depths.
    cdef cnp.ndarray[cnp.int32_t, ndim=1] depths = np.zeros(n_nodes, dtype=np.int32)
    cdef int max_depth = 0
    for i in range(n_nodes):
        if feature[i] >= 0:
            depths[left[i]] = depths[i] + 1
            depths[right[i]] = depths[i] + 1
    for i in range(n_nodes):
        if depths[i] > max_depth:
            max_depth = depths[i]

    # Each recursion level copies the path, so the shared buffer needs
    # sum_{k<=max_depth+1} (k+2) slots.
    cdef int levels = max_depth + 2
    cdef int buf_len = (levels + 1) * (levels + 4) // 2
    cdef cnp.ndarray[cnp.int32_t, ndim=1] dbuf = np.zeros(buf_len, dtype=np.int32)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] zbuf = np.zeros(buf_len, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] obuf = np.zeros(buf_len, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] wbuf = np.zeros(buf_len, dtype=np.float64)
    cdef int* dp = <int*>cnp.PyArray_DATA(dbuf)
    cdef double* zp = <double*>cnp.PyArray_DATA(zbuf)
    cdef double* op = <double*>cnp.PyArray_DATA(obuf)
    cdef double* wp = <double*>cnp.PyArray_DATA(wbuf)

    cdef Py_ssize_t n = X.shape[0]
    for r in range(n):
        _shap_recurse(
            feature, threshold, default_child, left, right, weight, cover,
            X[r], phi[r], 0, 0, dp, zp, op, wp, 1.0, 1.0, -1,
        )
