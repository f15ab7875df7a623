"""Hot inner loops: split search, tree traversal and brute-force k-NN.

Each kernel exists twice, a numba loop version (``*_nb``) and a vectorised
numpy version (``*_np``). Both evaluate the same floating point expressions in
the same order so they return bit-identical results; the public names bind to
one of them according to :data:`idsfusion._accel.USE_NUMBA`.
"""

import numpy as np

from ._accel import HAVE_NUMBA, USE_NUMBA, njit

# (feature, threshold, score)
NO_SPLIT = (-1, 0.0, 0.0)


def _midpoint(lo, hi):
    thr = 0.5 * (lo + hi)
    # midpoint can round up onto hi for adjacent floats
    if thr >= hi:
        thr = lo
    return thr


# ---------------------------------------------------------------------------
# Gini split search (classification trees)
# ---------------------------------------------------------------------------

def _gini_split_np(X, y, idx, features, min_leaf):
    n = idx.shape[0]
    fn = float(n)
    yi = y[idx]
    best = (-1, 0.0, np.inf)
    if n < 2 * min_leaf:
        return best
    pos = np.arange(1, n)
    nl = pos.astype(np.float64)
    nr = fn - nl
    total1 = float(yi.sum())
    for f in features:
        vals = X[idx, f]
        order = np.argsort(vals, kind="mergesort")
        vs = vals[order]
        c1l = np.cumsum(yi[order])[:-1].astype(np.float64)
        valid = (vs[1:] != vs[:-1]) & (pos >= min_leaf) & (n - pos >= min_leaf)
        if not valid.any():
            continue
        c0l = nl - c1l
        c1r = total1 - c1l
        c0r = nr - c1r
        score = fn - (c0l * c0l + c1l * c1l) / nl - (c0r * c0r + c1r * c1r) / nr
        score = np.where(valid, score, np.inf)
        i = int(np.argmin(score))
        if score[i] < best[2]:
            best = (int(f), _midpoint(vs[i], vs[i + 1]), float(score[i]))
    return best


@njit
def _gini_split_nb(X, y, idx, features, min_leaf):
    n = idx.shape[0]
    fn = float(n)
    best_f = -1
    best_thr = 0.0
    best_score = np.inf
    if n < 2 * min_leaf:
        return best_f, best_thr, best_score
    vals = np.empty(n)
    labels = np.empty(n, np.int64)
    total1 = 0
    for i in range(n):
        labels[i] = y[idx[i]]
        total1 += labels[i]
    ftotal1 = float(total1)
    for fi in range(features.shape[0]):
        f = features[fi]
        for i in range(n):
            vals[i] = X[idx[i], f]
        order = np.argsort(vals, kind="mergesort")
        c1 = 0
        for i in range(1, n):
            c1 += labels[order[i - 1]]
            if i < min_leaf:
                continue
            if n - i < min_leaf:
                break
            lo = vals[order[i - 1]]
            hi = vals[order[i]]
            if lo == hi:
                continue
            nl = float(i)
            nr = fn - nl
            c1l = float(c1)
            c0l = nl - c1l
            c1r = ftotal1 - c1l
            c0r = nr - c1r
            score = fn - (c0l * c0l + c1l * c1l) / nl - (c0r * c0r + c1r * c1r) / nr
            if score < best_score:
                best_score = score
                best_f = f
                thr = 0.5 * (lo + hi)
                if thr >= hi:
                    thr = lo
                best_thr = thr
    return best_f, best_thr, best_score


# ---------------------------------------------------------------------------
# Second-order split search (boosting trees)
# ---------------------------------------------------------------------------

def _newton_split_np(X, g, h, idx, features, lam, min_leaf, G, H):
    n = idx.shape[0]
    best = (-1, 0.0, 0.0)
    # zero curvature (lam == 0 with saturated probabilities) leaves nothing to fit
    if n < 2 * min_leaf or not H + lam > 0.0:
        return best
    parent = G * G / (H + lam)
    pos = np.arange(1, n)
    for f in features:
        vals = X[idx, f]
        order = np.argsort(vals, kind="mergesort")
        vs = vals[order]
        sel = idx[order]
        gl = np.cumsum(g[sel])[:-1]
        hl = np.cumsum(h[sel])[:-1]
        gr = G - gl
        hr = H - hl
        valid = ((vs[1:] != vs[:-1]) & (pos >= min_leaf) & (n - pos >= min_leaf)
                 & (hl + lam > 0.0) & (hr + lam > 0.0))
        if not valid.any():
            continue
        with np.errstate(divide="ignore", invalid="ignore"):
            gain = gl * gl / (hl + lam) + gr * gr / (hr + lam) - parent
        gain = np.where(valid, gain, -np.inf)
        i = int(np.argmax(gain))
        if gain[i] > best[2]:
            best = (int(f), _midpoint(vs[i], vs[i + 1]), float(gain[i]))
    return best


@njit
def _newton_split_nb(X, g, h, idx, features, lam, min_leaf, G, H):
    n = idx.shape[0]
    best_f = -1
    best_thr = 0.0
    best_gain = 0.0
    if n < 2 * min_leaf or not H + lam > 0.0:
        return best_f, best_thr, best_gain
    parent = G * G / (H + lam)
    vals = np.empty(n)
    for fi in range(features.shape[0]):
        f = features[fi]
        for i in range(n):
            vals[i] = X[idx[i], f]
        order = np.argsort(vals, kind="mergesort")
        gl = 0.0
        hl = 0.0
        for i in range(1, n):
            j = idx[order[i - 1]]
            gl += g[j]
            hl += h[j]
            if i < min_leaf:
                continue
            if n - i < min_leaf:
                break
            lo = vals[order[i - 1]]
            hi = vals[order[i]]
            if lo == hi:
                continue
            gr = G - gl
            hr = H - hl
            if not (hl + lam > 0.0 and hr + lam > 0.0):
                continue
            gain = gl * gl / (hl + lam) + gr * gr / (hr + lam) - parent
            if gain > best_gain:
                best_gain = gain
                best_f = f
                thr = 0.5 * (lo + hi)
                if thr >= hi:
                    thr = lo
                best_thr = thr
    return best_f, best_thr, best_gain


# ---------------------------------------------------------------------------
# Tree traversal
# ---------------------------------------------------------------------------

def _tree_apply_np(X, feature, threshold, left, right):
    n = X.shape[0]
    node = np.zeros(n, dtype=np.int64)
    active = np.full(n, feature[0] >= 0)
    while active.any():
        rows = np.flatnonzero(active)
        nd = node[rows]
        go_left = X[rows, feature[nd]] <= threshold[nd]
        nxt = np.where(go_left, left[nd], right[nd])
        node[rows] = nxt
        active[rows] = feature[nxt] >= 0
    return node


@njit
def _tree_apply_nb(X, feature, threshold, left, right):
    n = X.shape[0]
    out = np.empty(n, np.int64)
    for r in range(n):
        node = 0
        while feature[node] >= 0:
            if X[r, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[r] = node
    return out


# ---------------------------------------------------------------------------
# Brute-force k nearest neighbours (self excluded, ties -> lower index)
# ---------------------------------------------------------------------------

def _knn_np(X, k, max_block=2_000_000):
    n, d = X.shape
    out = np.empty((n, k), dtype=np.int64)
    chunk = max(1, max_block // max(n, 1))
    for start in range(0, n, chunk):
        stop = min(n, start + chunk)
        a = X[start:stop]
        dist = np.zeros((stop - start, n))
        for f in range(d):
            t = a[:, f, None] - X[None, :, f]
            dist += t * t
        rows = np.arange(stop - start)
        dist[rows, start + rows] = np.inf
        out[start:stop] = np.argsort(dist, axis=1, kind="stable")[:, :k]
    return out


@njit
def _knn_nb(X, k):
    n, d = X.shape
    out = np.empty((n, k), np.int64)
    bd = np.empty(k)
    bi = np.empty(k, np.int64)
    for i in range(n):
        for p in range(k):
            bd[p] = np.inf
            bi[p] = -1
        for j in range(n):
            if j == i:
                continue
            dist = 0.0
            for f in range(d):
                t = X[i, f] - X[j, f]
                dist += t * t
            if dist < bd[k - 1]:
                p = k - 1
                while p > 0 and bd[p - 1] > dist:
                    bd[p] = bd[p - 1]
                    bi[p] = bi[p - 1]
                    p -= 1
                bd[p] = dist
                bi[p] = j
        for p in range(k):
            out[i, p] = bi[p]
    return out


if USE_NUMBA:
    gini_split = _gini_split_nb
    newton_split = _newton_split_nb
    tree_apply = _tree_apply_nb
    knn = _knn_nb
else:
    gini_split = _gini_split_np
    newton_split = _newton_split_np
    tree_apply = _tree_apply_np
    knn = _knn_np

__all__ = ["HAVE_NUMBA", "USE_NUMBA", "gini_split", "newton_split", "tree_apply", "knn"]
