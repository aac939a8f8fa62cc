"""Vector-valued weak learners: multi-class decision stumps ``v * phi(x)``
and Hamming trees grown from them.

A stump scores a candidate split by its multi-class edge
``sum_l |gamma_l|`` with ``gamma_l = sum_i w_il y_il phi(x_i)``, and votes
``v_l = sign(gamma_l)`` (``sign(0) = +1``). ``phi(x) = +1`` iff
``x[feature] >= threshold``. The constant classifier (``feature == -1``,
threshold ``-inf``) is always a candidate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .haar import enumerate_filters, integral_images

CONSTANT = -1
# splits must beat this to count as an improvement of the tree edge
MIN_GAIN = 1e-12


def edge_of(H, W, Y) -> float:
    H, W, Y = (np.asarray(a, dtype=np.float64) for a in (H, W, Y))
    if not H.shape == W.shape == Y.shape:
        raise ValueError(f"shape mismatch: H{H.shape} W{W.shape} Y{Y.shape}")
    return float(np.sum(W * H * Y))


def _votes(gamma) -> np.ndarray:
    return np.where(np.asarray(gamma) >= 0, 1, -1).astype(np.int8)


@dataclass(frozen=True)
class Stump:
    feature: int
    threshold: float
    v: np.ndarray
    edge: float = 0.0

    def phi(self, X) -> np.ndarray:
        X = np.asarray(X)
        if self.feature == CONSTANT:
            return np.ones(X.shape[0])
        return np.where(X[:, self.feature] >= self.threshold, 1.0, -1.0)

    def predict(self, X) -> np.ndarray:
        return self.phi(X)[:, None] * self.v[None, :]


# -- feature sources -----------------------------------------------------------

class ColumnSource:
    """Candidate features are columns of a dense matrix, presorted once."""

    def __init__(self, X):
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2:
            raise ValueError(f"expected a 2-D matrix, got shape {X.shape}")
        self.X = X
        self.Xt = np.ascontiguousarray(X.T)
        self.order = np.argsort(self.Xt, axis=1, kind="stable").astype(np.int32)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def block(self, rng, d_prime, features=None):
        if features is not None:
            cand = np.asarray(sorted(features), dtype=np.int64)
        elif d_prime is None or d_prime >= self.n_features:
            cand = np.arange(self.n_features, dtype=np.int64)
        else:
            cand = np.sort(rng.choice(self.n_features, size=d_prime, replace=False)).astype(np.int64)
        return self.Xt, self.order, cand, None

    def resolve(self, c, token) -> int:
        return int(c)

    def column(self, feature: int) -> np.ndarray:
        return self.Xt[feature]


class HaarSource:
    """Candidate features are Haar filters drawn afresh for every split.

    Filters that win a split are registered; their ids index
    :attr:`filters` and are what the trees store as feature numbers.
    """

    def __init__(self, X, geometry, filters=None):
        self.geometry = tuple(geometry)
        self.ii = np.ascontiguousarray(integral_images(X, self.geometry))
        self.table = enumerate_filters(self.geometry)
        self.filters: list[tuple[int, ...]] = []
        self._ids: dict[tuple[int, ...], int] = {}
        self._cols: list[np.ndarray] = []
        for row in filters or ():
            self.register(row)

    @property
    def n(self) -> int:
        return self.ii.shape[0]

    @property
    def n_features(self) -> int:
        return len(self.table)

    def block(self, rng, d_prime, features=None):
        rows = self.table[rng.integers(len(self.table), size=d_prime)]
        vals = np.ascontiguousarray(kernels.haar_eval(self.ii, rows).T)
        order = np.argsort(vals, axis=1, kind="stable").astype(np.int32)
        return vals, order, np.arange(d_prime, dtype=np.int64), (rows, vals)

    def register(self, row, values=None) -> int:
        key = tuple(int(v) for v in row)
        if key not in self._ids:
            if values is None:
                values = kernels.haar_eval(self.ii, np.array([key], dtype=np.int64))[:, 0]
            self._ids[key] = len(self.filters)
            self.filters.append(key)
            self._cols.append(np.asarray(values, dtype=np.float64))
        return self._ids[key]

    def resolve(self, c, token) -> int:
        rows, vals = token
        return self.register(rows[c], vals[c])

    def column(self, feature: int) -> np.ndarray:
        return self._cols[feature]

    def matrix(self) -> np.ndarray:
        if not self._cols:
            return np.zeros((self.n, 0))
        return np.column_stack(self._cols)


def as_source(X):
    return X if isinstance(X, (ColumnSource, HaarSource)) else ColumnSource(X)


def _fit_stump(source, rng, d_prime, member, WY, features=None) -> tuple[Stump, np.ndarray]:
    """Best stump on the rows flagged in ``member``; also returns phi over
    all rows (meaningful on members only)."""
    Xt, order, cand, token = source.block(rng, d_prime, features)
    total = WY[member].sum(axis=0)
    edge, c, thr, gamma = kernels.stump_scan(Xt, order, cand, member, WY, total)
    if c == CONSTANT:
        return Stump(CONSTANT, -np.inf, _votes(gamma), float(edge)), np.ones(member.shape[0])
    values = Xt[c]
    feature = source.resolve(c, token)
    phi = np.where(values >= thr, 1.0, -1.0)
    return Stump(feature, float(thr), _votes(gamma), float(edge)), phi


def learn_stump(X, W, Y, candidate_features) -> Stump:
    """Exhaustive stump search over ``candidate_features`` at every midpoint
    between consecutive distinct values."""
    candidate_features = list(candidate_features)
    if not candidate_features:
        raise ValueError("no candidate features")
    W = np.asarray(W, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    source = as_source(X)
    WY = np.ascontiguousarray(W * Y)
    member = np.ones(source.n, dtype=np.bool_)
    stump, _ = _fit_stump(source, None, None, member, WY, candidate_features)
    return stump


# -- Hamming trees ---------------------------------------------------------------

@dataclass
class HammingTree:
    """Binary tree of stumps. Inner nodes route by ``phi`` (+1 left, -1
    right); a leaf outputs its own ``v * phi(x)``."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    votes: np.ndarray
    edge: float = 0.0
    growth: list = field(default_factory=list)

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.left < 0))

    @property
    def K(self) -> int:
        return self.votes.shape[1]

    def features_used(self) -> set[int]:
        return {int(f) for f in self.feature if f != CONSTANT}

    def leaves(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        return kernels.route(X, self.feature, self.threshold, self.left, self.right)

    def predict(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        used = self.feature[self.feature >= 0]
        if X.ndim != 2 or (used.size and used.max() >= X.shape[1]):
            raise ValueError(f"tree needs at least {used.max() + 1 if used.size else 0} columns, "
                             f"got shape {X.shape}")
        leaf = kernels.route(X, self.feature, self.threshold, self.left, self.right)
        f = self.feature[leaf]
        phi = np.ones(X.shape[0])
        real = f >= 0
        rows = np.flatnonzero(real)
        phi[rows] = np.where(X[rows, f[real]] >= self.threshold[leaf[real]], 1.0, -1.0)
        return self.votes[leaf].astype(np.float64) * phi[:, None]

    def to_dict(self) -> dict:
        return {
            "feature": [int(v) for v in self.feature],
            "threshold": [float(v) for v in self.threshold],
            "left": [int(v) for v in self.left],
            "right": [int(v) for v in self.right],
            "votes": ["".join("+" if s > 0 else "-" for s in row) for row in self.votes],
            "edge": float(self.edge),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HammingTree":
        votes = np.array([[1 if ch == "+" else -1 for ch in row] for row in d["votes"]],
                         dtype=np.int8)
        return cls(np.array(d["feature"], dtype=np.int64),
                   np.array(d["threshold"], dtype=np.float64),
                   np.array(d["left"], dtype=np.int64),
                   np.array(d["right"], dtype=np.int64),
                   votes, float(d.get("edge", 0.0)))


def tree_predict(tree: HammingTree, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return tree.predict(x[None, :])[0] if x.ndim == 1 else tree.predict(x)


class _Leaf:
    __slots__ = ("member", "stump", "phi", "children")

    def __init__(self, member, stump, phi):
        self.member = member
        self.stump = stump
        self.phi = phi
        self.children = None

    def gain(self) -> float:
        if self.children is None:
            return -np.inf
        a, b = self.children
        return a.stump.edge + b.stump.edge - self.stump.edge


def learn_tree(X, W, Y, N: int, d_prime: Optional[int] = None,
               rng: Optional[np.random.Generator] = None) -> tuple[HammingTree, np.ndarray]:
    """Grow a Hamming tree with at most ``N`` leaves, best-first.

    Every node draws its own ``d_prime`` candidate features. A leaf is
    split when replacing it by two child stumps raises the total edge
    the most; growth stops early when no split helps. Returns the tree and
    its ``{-1, +1}`` output matrix on the training rows.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    source = as_source(X)
    rng = np.random.default_rng() if rng is None else rng
    W = np.asarray(W, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    WY = np.ascontiguousarray(W * Y)
    n, K = WY.shape

    def make(member):
        stump, phi = _fit_stump(source, rng, d_prime, member, WY)
        return _Leaf(member, stump, phi)

    root = make(np.ones(n, dtype=np.bool_))
    nodes = [root]
    links = [[-1, -1]]
    leaves = [0]
    growth = [root.stump.edge]
    while len(leaves) < N:
        for idx in leaves:
            leaf = nodes[idx]
            if leaf.children is not None or leaf.stump.feature == CONSTANT:
                continue
            pos = leaf.member & (leaf.phi > 0)
            neg = leaf.member & (leaf.phi < 0)
            if not pos.any() or not neg.any():
                continue
            leaf.children = (make(pos), make(neg))
        best = max(leaves, key=lambda i: nodes[i].gain())
        gain = nodes[best].gain()
        if not gain > MIN_GAIN:
            break
        parent = nodes[best]
        for side, child in enumerate(parent.children):
            links[best][side] = len(nodes)
            nodes.append(child)
            links.append([-1, -1])
        leaves.remove(best)
        leaves.extend(links[best])
        growth.append(growth[-1] + gain)

    H = np.empty((n, K))
    edge = 0.0
    for idx in leaves:
        leaf = nodes[idx]
        rows = leaf.member
        H[rows] = leaf.phi[rows, None] * leaf.stump.v[None, :]
        edge += leaf.stump.edge
    tree = HammingTree(
        np.array([nd.stump.feature for nd in nodes], dtype=np.int64),
        np.array([nd.stump.threshold for nd in nodes], dtype=np.float64),
        np.array([lk[0] for lk in links], dtype=np.int64),
        np.array([lk[1] for lk in links], dtype=np.int64),
        np.array([nd.stump.v for nd in nodes], dtype=np.int8).reshape(len(nodes), K),
        edge,
        growth,
    )
    return tree, H
