"""Pure-numpy versions of the hot kernels.

Every function here has a twin of the same name and signature in
``_numba``; the two must agree on tie-breaking: the first maximum wins, except that a real
threshold beats the constant classifier on an exact tie (so a node whose
best split has zero gain on its own can still be split further).
"""

import numpy as np

HAAR_TWO_H, HAAR_TWO_V, HAAR_THREE_H, HAAR_THREE_V, HAAR_FOUR = range(5)


def midpoint(lo, hi):
    thr = lo + (hi - lo) * 0.5
    if thr <= lo:
        thr = hi
    return thr


def stump_scan(Xt, order, cand, member, WY, total):
    """Best single-threshold split over the candidate rows of ``Xt``.

    Returns ``(edge, feature, threshold, gamma)``; ``feature == -1`` means
    the constant classifier (phi == +1 everywhere) won.
    """
    best_edge = float(np.abs(total).sum())
    best_feat = -1
    best_thr = -np.inf
    best_gamma = total.copy()
    for c in cand:
        idx = order[c]
        idx = idx[member[idx]]
        if idx.shape[0] < 2:
            continue
        vals = Xt[c, idx]
        prefix = np.cumsum(WY[idx], axis=0)
        cut = np.flatnonzero(vals[1:] > vals[:-1])
        if cut.shape[0] == 0:
            continue
        gam = total[None, :] - 2.0 * prefix[cut]
        edges = np.abs(gam).sum(axis=1)
        k = int(np.argmax(edges))
        if edges[k] > best_edge or (best_feat == -1 and edges[k] == best_edge):
            best_edge = float(edges[k])
            best_feat = int(c)
            t = cut[k]
            best_thr = midpoint(vals[t], vals[t + 1])
            best_gamma = gam[k].copy()
    return best_edge, best_feat, best_thr, best_gamma


def route(X, feature, threshold, left, right):
    """Leaf index reached by every row of ``X``; ``x >= thr`` goes left."""
    n = X.shape[0]
    node = np.zeros(n, dtype=np.int64)
    active = left[node] >= 0
    while active.any():
        rows = np.flatnonzero(active)
        cur = node[rows]
        go_left = X[rows, feature[cur]] >= threshold[cur]
        node[rows] = np.where(go_left, left[cur], right[cur])
        active = left[node] >= 0
    return node


def _rect(ii, ch, x, y, w, h):
    return (ii[:, ch, y + h, x + w] - ii[:, ch, y, x + w]
            - ii[:, ch, y + h, x] + ii[:, ch, y, x])


def haar_eval(ii, filters):
    """Responses of ``filters`` (rows: type, x, y, w, h, channel) on a stack
    of integral images ``ii`` shaped ``(n, channels, H + 1, W + 1)``."""
    n = ii.shape[0]
    out = np.empty((n, filters.shape[0]), dtype=np.float64)
    for f in range(filters.shape[0]):
        typ, x, y, w, h, ch = (int(v) for v in filters[f])
        if typ == HAAR_TWO_H:
            b = w // 2
            out[:, f] = _rect(ii, ch, x, y, b, h) - _rect(ii, ch, x + b, y, b, h)
        elif typ == HAAR_TWO_V:
            b = h // 2
            out[:, f] = _rect(ii, ch, x, y, w, b) - _rect(ii, ch, x, y + b, w, b)
        elif typ == HAAR_THREE_H:
            b = w // 3
            out[:, f] = (_rect(ii, ch, x, y, b, h) + _rect(ii, ch, x + 2 * b, y, b, h)
                         - 2.0 * _rect(ii, ch, x + b, y, b, h))
        elif typ == HAAR_THREE_V:
            b = h // 3
            out[:, f] = (_rect(ii, ch, x, y, w, b) + _rect(ii, ch, x, y + 2 * b, w, b)
                         - 2.0 * _rect(ii, ch, x, y + b, w, b))
        else:
            bw, bh = w // 2, h // 2
            out[:, f] = (_rect(ii, ch, x, y, bw, bh) + _rect(ii, ch, x + bw, y + bh, bw, bh)
                         - _rect(ii, ch, x + bw, y, bw, bh) - _rect(ii, ch, x, y + bh, bw, bh))
    return out
