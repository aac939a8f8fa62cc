"""numba-compiled versions of the hot kernels (see ``_numpy`` for the
reference semantics)."""

import numpy as np
from numba import njit


@njit(cache=True)
def midpoint(lo, hi):
    thr = lo + (hi - lo) * 0.5
    if thr <= lo:
        thr = hi
    return thr


@njit(cache=True)
def stump_scan(Xt, order, cand, member, WY, total):
    n = order.shape[1]
    K = WY.shape[1]
    best_edge = 0.0
    for k in range(K):
        best_edge += abs(total[k])
    best_feat = -1
    best_thr = -np.inf
    best_gamma = total.copy()
    prefix = np.empty(K)
    for ci in range(cand.shape[0]):
        c = cand[ci]
        prefix[:] = 0.0
        have_prev = False
        prev = 0.0
        for t in range(n):
            i = order[c, t]
            if not member[i]:
                continue
            v = Xt[c, i]
            if have_prev and v > prev:
                e = 0.0
                for k in range(K):
                    e += abs(total[k] - 2.0 * prefix[k])
                if e > best_edge or (best_feat == -1 and e == best_edge):
                    best_edge = e
                    best_feat = c
                    best_thr = midpoint(prev, v)
                    for k in range(K):
                        best_gamma[k] = total[k] - 2.0 * prefix[k]
            for k in range(K):
                prefix[k] += WY[i, k]
            prev = v
            have_prev = True
    return best_edge, best_feat, best_thr, best_gamma


@njit(cache=True)
def route(X, feature, threshold, left, right):
    n = X.shape[0]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        node = 0
        while left[node] >= 0:
            if X[i, feature[node]] >= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = node
    return out


@njit(cache=True)
def _rect(ii, i, ch, x, y, w, h):
    return (ii[i, ch, y + h, x + w] - ii[i, ch, y, x + w]
            - ii[i, ch, y + h, x] + ii[i, ch, y, x])


@njit(cache=True)
def haar_eval(ii, filters):
    n = ii.shape[0]
    nf = filters.shape[0]
    out = np.empty((n, nf))
    for f in range(nf):
        typ = filters[f, 0]
        x = filters[f, 1]
        y = filters[f, 2]
        w = filters[f, 3]
        h = filters[f, 4]
        ch = filters[f, 5]
        for i in range(n):
            if typ == 0:
                b = w // 2
                r = _rect(ii, i, ch, x, y, b, h) - _rect(ii, i, ch, x + b, y, b, h)
            elif typ == 1:
                b = h // 2
                r = _rect(ii, i, ch, x, y, w, b) - _rect(ii, i, ch, x, y + b, w, b)
            elif typ == 2:
                b = w // 3
                r = (_rect(ii, i, ch, x, y, b, h) + _rect(ii, i, ch, x + 2 * b, y, b, h)
                     - 2.0 * _rect(ii, i, ch, x + b, y, b, h))
            elif typ == 3:
                b = h // 3
                r = (_rect(ii, i, ch, x, y, w, b) + _rect(ii, i, ch, x, y + 2 * b, w, b)
                     - 2.0 * _rect(ii, i, ch, x, y + b, w, b))
            else:
                bw = w // 2
                bh = h // 2
                r = (_rect(ii, i, ch, x, y, bw, bh) + _rect(ii, i, ch, x + bw, y + bh, bw, bh)
                     - _rect(ii, i, ch, x + bw, y, bw, bh) - _rect(ii, i, ch, x, y + bh, bw, bh))
            out[i, f] = r
    return out
