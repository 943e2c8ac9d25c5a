"""Pure-numpy kernels: exhaustive best-split search and tree routing.

This module is the reference for the compiled extension in ``_core.pyx``;
the two must return bit-identical results.  To make that achievable the
split score is assembled from exact integer class counts with a fixed
order of floating-point operations:

    score      = sl/nl + sr/nr          (one rounding per op, int64 -> float64)
    decrease   = (score - st/n) / n
    threshold  = (v[i] + v[i+1]) / 2

where sl, sr, st are sums of squared class counts (left / right / total)
and the strict-improvement test is done entirely in int64:

    (sl*nr + sr*nl) * n  >  st * (nl*nr)

The integer test is exact for node sizes up to ~40000 observations, far
above anything a bootstrap sample here produces.
"""

import numpy as np


def best_split(X, rows, y, candidates, n_classes):
    """Scan all midpoints of all candidate covariates for the best Gini split.

    Parameters
    ----------
    X : (N, p) float64 array of covariate values for the full dataset.
    rows : int64 array of row indices making up the node (a multiset).
    y : int64 array of class codes, one per row of ``X``.
    candidates : int64 array of candidate covariate indices, ascending.
    n_classes : number of distinct classes.

    Returns ``(covariate, threshold, decrease)`` for the split maximising
    the Gini impurity decrease, or ``None`` when no split improves on the
    parent.  Ties go to the lowest covariate index, then lowest threshold.
    """
    n = rows.shape[0]
    if n < 2:
        return None
    labels = y[rows]
    tot = np.bincount(labels, minlength=n_classes).astype(np.int64)
    st = np.int64(np.sum(tot * tot))
    class_ids = np.arange(n_classes, dtype=np.int64)

    best_score = -np.inf
    best_feat = -1
    best_thr = 0.0
    for f in candidates:
        v = X[rows, f]
        order = np.argsort(v, kind="stable")
        vs = v[order]
        # boundary i sits between sorted positions i and i+1
        bnd = np.flatnonzero(vs[1:] > vs[:-1])
        if bnd.size == 0:
            continue
        onehot = (labels[order][:, None] == class_ids[None, :]).astype(np.int64)
        cum = np.cumsum(onehot, axis=0)
        cl = cum[bnd]
        nl = bnd + 1
        nr = n - nl
        sl = np.sum(cl * cl, axis=1)
        cr = tot[None, :] - cl
        sr = np.sum(cr * cr, axis=1)
        positive = (sl * nr + sr * nl) * n > st * (nl * nr)
        if not positive.any():
            continue
        score = np.where(positive, sl / nl + sr / nr, -np.inf)
        j = int(np.argmax(score))  # first max -> lowest threshold
        if score[j] > best_score:
            best_score = float(score[j])
            best_feat = int(f)
            i = int(bnd[j])
            best_thr = (vs[i] + vs[i + 1]) / 2
    if best_feat < 0:
        return None
    decrease = (best_score - float(st) / n) / n
    return best_feat, float(best_thr), float(decrease)


def route_rows(X, rows, feature, threshold, left, right, root=0):
    """Route each row down the tree; returns the leaf node id per row.

    ``feature`` holds -1 at leaves; values equal to a node's threshold
    go left.
    """
    m = rows.shape[0]
    cur = np.full(m, root, dtype=np.int64)
    active = np.flatnonzero(feature[cur] >= 0)
    while active.size:
        nodes = cur[active]
        f = feature[nodes]
        vals = X[rows[active], f]
        go_left = vals <= threshold[nodes]
        cur[active] = np.where(go_left, left[nodes], right[nodes])
        active = active[feature[cur[active]] >= 0]
    return cur


def route_rows_override(X, rows, feature, threshold, left, right,
                        override_feature, override_values, root=0):
    """Like :func:`route_rows` but reads covariate ``override_feature`` of
    ``rows[k]`` from ``override_values[k]`` instead of ``X`` (used for
    permutation importance without copying the matrix)."""
    m = rows.shape[0]
    cur = np.full(m, root, dtype=np.int64)
    active = np.flatnonzero(feature[cur] >= 0)
    while active.size:
        nodes = cur[active]
        f = feature[nodes]
        vals = X[rows[active], f]
        overridden = f == override_feature
        if overridden.any():
            vals = np.where(overridden, override_values[active], vals)
        go_left = vals <= threshold[nodes]
        cur[active] = np.where(go_left, left[nodes], right[nodes])
        active = active[feature[cur[active]] >= 0]
    return cur
