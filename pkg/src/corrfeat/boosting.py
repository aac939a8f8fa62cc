"""AdaBoost.MH over Hamming trees.

The state is a weight matrix ``W`` over (instance, label) cells that sums
to one. Each iteration grows a tree against ``W``, measures its edge
``gamma``, weighs it by ``alpha = 0.5 * log((1 + gamma) / (1 - gamma))``
and multiplies every cell by ``exp(-alpha * h * y)`` before renormalizing.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .data import SchemaError, label_code
from .learners import (CONSTANT, ColumnSource, HaarSource, HammingTree, _fit_stump, as_source,
                       edge_of, learn_tree)

log = logging.getLogger(__name__)

ENSEMBLE_FORMAT = "corrfeat.ensemble"
ENSEMBLE_VERSION = 1
GAMMA_CAP = 1.0 - 1e-7


def init_weights(Y, scheme: str = "mh") -> np.ndarray:
    """Initial weights for a +-1 label code ``Y`` (n x K).

    ``"mh"`` puts half of each row's mass on its positive labels and half
    on its negative ones; for single-label data that is ``1/(2n)`` on the
    correct label and ``1/(2n(K-1))`` on each other one. Rows without
    positives (or without negatives) spread their mass evenly. ``"uniform"``
    gives every cell ``1/(nK)``.
    """
    Y = np.asarray(Y, dtype=np.float64)
    n, K = Y.shape
    if scheme == "uniform" or K == 1:
        return np.full((n, K), 1.0 / (n * K))
    if scheme != "mh":
        raise ValueError(f"unknown weight scheme {scheme!r}")
    pos = (Y > 0).sum(axis=1, keepdims=True)
    neg = K - pos
    mixed = (pos > 0) & (neg > 0)
    W = np.where(Y > 0, 1.0 / (2 * n * np.maximum(pos, 1)), 1.0 / (2 * n * np.maximum(neg, 1)))
    return np.where(mixed, W, 1.0 / (n * K))


def alpha_of(gamma: float) -> float:
    g = min(max(float(gamma), -GAMMA_CAP), GAMMA_CAP)
    return 0.5 * np.log((1.0 + g) / (1.0 - g))


def update_weights(W, alpha: float, H, Y) -> tuple[np.ndarray, float]:
    """Multiplicative update; returns the renormalized matrix and its
    normalizer ``Z``."""
    W = np.asarray(W) * np.exp(-alpha * np.asarray(H) * np.asarray(Y))
    Z = float(W.sum())
    return W / Z, Z


@dataclass
class TrainConfig:
    T: int = 100
    N: int = 8
    d_prime: Optional[int] = None
    seed: int = 0
    cadence: Optional[int] = None
    weight_init: str = "mh"

    def validate(self, n_features: int) -> None:
        if self.T < 1 or self.N < 1:
            raise ValueError("T and N must be >= 1")
        if self.d_prime is not None and not 1 <= self.d_prime <= n_features:
            raise ValueError(f"d_prime must lie in 1..{n_features}")

    def eval_every(self) -> int:
        if self.cadence:
            return int(self.cadence)
        return 1 if self.T <= 10_000 else 10


def _argmax_classes(F) -> np.ndarray:
    # np.argmax keeps the first maximum: ties go to the smaller class
    return np.argmax(F, axis=1) + 1


@dataclass
class Ensemble:
    K: int
    mode: str = "raw"
    schema: dict = field(default_factory=dict)
    alphas: list = field(default_factory=list)
    trees: list = field(default_factory=list)
    haar_filters: list = field(default_factory=list)
    config: dict = field(default_factory=dict)
    label_map: Optional[list] = None

    def __len__(self) -> int:
        return len(self.trees)

    def add(self, alpha: float, tree: HammingTree) -> None:
        if not alpha > 0:
            raise ValueError("stage coefficients must be positive")
        self.alphas.append(float(alpha))
        self.trees.append(tree)

    def scores(self, F) -> np.ndarray:
        F = np.asarray(F, dtype=np.float64)
        S = np.zeros((F.shape[0], self.K))
        for a, tree in zip(self.alphas, self.trees):
            S += a * tree.predict(F)
        return S

    def predict(self, F) -> tuple[np.ndarray, np.ndarray]:
        S = self.scores(F)
        return _argmax_classes(S), S

    def staged_errors(self, F, y) -> np.ndarray:
        """Zero-one error of every prefix ensemble, in one pass."""
        F = np.asarray(F, dtype=np.float64)
        y = np.asarray(y)
        S = np.zeros((F.shape[0], self.K))
        out = np.empty(len(self.trees))
        for t, (a, tree) in enumerate(zip(self.alphas, self.trees)):
            S += a * tree.predict(F)
            out[t] = np.mean(_argmax_classes(S) != y)
        return out

    def importance(self) -> dict[int, float]:
        """Per-feature sum of stage coefficients over the trees using it."""
        imp: dict[int, float] = {}
        for a, tree in zip(self.alphas, self.trees):
            for f in tree.features_used():
                imp[f] = imp.get(f, 0.0) + a
        return imp

    def to_dict(self) -> dict:
        return {
            "format": ENSEMBLE_FORMAT,
            "version": ENSEMBLE_VERSION,
            "K": self.K,
            "mode": self.mode,
            "schema": self.schema,
            "config": self.config,
            "label_map": self.label_map,
            "haar_filters": [list(f) for f in self.haar_filters],
            "stages": [{"alpha": a, "tree": _tree_json(t)}
                       for a, t in zip(self.alphas, self.trees)],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":")) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def from_dict(cls, d: dict) -> "Ensemble":
        if d.get("format") != ENSEMBLE_FORMAT:
            raise SchemaError(f"not an ensemble file (format={d.get('format')!r})")
        if d.get("version") != ENSEMBLE_VERSION:
            raise SchemaError(f"unsupported ensemble version {d.get('version')}")
        ens = cls(int(d["K"]), d["mode"], d.get("schema", {}), config=d.get("config", {}),
                  label_map=d.get("label_map"),
                  haar_filters=[tuple(f) for f in d.get("haar_filters", [])])
        for st in d["stages"]:
            ens.add(st["alpha"], _tree_from_json(st["tree"]))
        return ens

    @classmethod
    def load(cls, path) -> "Ensemble":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _tree_json(tree: HammingTree) -> dict:
    d = tree.to_dict()
    d["threshold"] = [None if np.isinf(t) else t for t in d["threshold"]]
    return d


def _tree_from_json(d: dict) -> HammingTree:
    d = dict(d)
    d["threshold"] = [-np.inf if t is None else t for t in d["threshold"]]
    return HammingTree.from_dict(d)


@dataclass
class LearningCurve:
    iteration: list = field(default_factory=list)
    train_error: list = field(default_factory=list)
    test_error: list = field(default_factory=list)
    wall: list = field(default_factory=list)
    gamma: list = field(default_factory=list)
    Z: list = field(default_factory=list)
    hamming_loss: list = field(default_factory=list)

    def mean_last_half(self) -> float:
        """Mean recorded test error over iterations ``T/2 < t <= T``."""
        if not self.iteration:
            return float("nan")
        T = self.iteration[-1]
        errs = [e for t, e in zip(self.iteration, self.test_error)
                if t > T / 2 and e is not None and not np.isnan(e)]
        return float(np.mean(errs)) if errs else float("nan")

    def to_csv(self, with_time: bool = False) -> str:
        rows = ["iteration,train_error,test_error,wall_seconds"]
        for t, tr, te, w in zip(self.iteration, self.train_error, self.test_error, self.wall):
            te_s = "" if te is None or np.isnan(te) else repr(float(te))
            w_s = f"{w:.3f}" if with_time else ""
            rows.append(f"{t},{tr!r},{te_s},{w_s}")
        return "\n".join(rows) + "\n"

    def save(self, path, with_time: bool = False) -> None:
        Path(path).write_text(self.to_csv(with_time))


@dataclass
class TrainResult:
    ensemble: Ensemble
    curve: LearningCurve
    aborted: bool = False
    message: str = ""
    weights: Optional[np.ndarray] = None  # current W, refreshed every iteration


def train(X, y, K: int, config: TrainConfig, eval_set=None, Y=None,
          callback=None) -> TrainResult:
    """Boost ``config.T`` Hamming trees.

    ``X`` is a feature matrix or a feature source (``HaarSource`` for the
    Haar baseline). ``eval_set`` is ``(X_eval, y_eval)`` in the same form;
    for a ``HaarSource`` training input pass a ``HaarSource`` for the
    evaluation rows as well. ``Y`` overrides the one-hot label code (for
    multi-label targets). ``callback(t, result)`` runs after each stage.
    """
    source = as_source(X)
    config.validate(source.n_features)
    Y = label_code(y, K) if Y is None else np.asarray(Y, dtype=np.float64)
    y = None if y is None else np.asarray(y)
    rng = np.random.default_rng(config.seed)
    W0 = init_weights(Y, config.weight_init)
    W = W0
    haar = isinstance(source, HaarSource)
    ens = Ensemble(Y.shape[1], "haar" if haar else "raw", config=asdict(config))
    curve = LearningCurve()
    F_train = np.zeros(Y.shape)
    if eval_set is not None:
        E, y_eval = eval_set
        if haar and not isinstance(E, HaarSource):
            raise TypeError("Haar training needs a HaarSource for the evaluation rows")
        E_mat = None if haar else np.ascontiguousarray(E, dtype=np.float64)
        F_eval = np.zeros((len(y_eval), Y.shape[1]))
        y_eval = np.asarray(y_eval)
    every = config.eval_every()
    start = time.perf_counter()
    result = TrainResult(ens, curve, weights=W0)
    for t in range(1, config.T + 1):
        tree, H = learn_tree(source, W, Y, config.N, config.d_prime, rng)
        gamma = edge_of(H, W, Y)
        if not gamma > 0:
            result.aborted = True
            result.message = f"iteration {t}: no base learner with positive edge (gamma={gamma:.3g})"
            log.warning(result.message)
            break
        alpha = alpha_of(gamma)
        ens.add(alpha, tree)
        W, Z = update_weights(W, alpha, H, Y)
        result.weights = W
        F_train += alpha * H
        curve.iteration.append(t)
        curve.gamma.append(gamma)
        curve.Z.append(Z)
        curve.hamming_loss.append(float(np.sum(W0 * (F_train * Y <= 0))))
        curve.train_error.append(float(np.mean(_argmax_classes(F_train) != y)) if y is not None
                                 else float("nan"))
        if eval_set is not None:
            if haar:
                for row in source.filters[len(E.filters):]:
                    E.register(row)
                E_mat = E.matrix()
            F_eval += alpha * tree.predict(E_mat)
            if t % every == 0 or t == config.T:
                curve.test_error.append(float(np.mean(_argmax_classes(F_eval) != y_eval)))
            else:
                curve.test_error.append(float("nan"))
        else:
            curve.test_error.append(float("nan"))
        curve.wall.append(time.perf_counter() - start)
        if callback is not None:
            callback(t, result)
    if haar:
        ens.haar_filters = list(source.filters)
        ens.schema = {"mode": "haar", "geometry": list(source.geometry)}
    return result


def evaluate(ensemble: Ensemble, F, y) -> tuple[float, np.ndarray]:
    """Final zero-one error and the error of every prefix ensemble."""
    curve = ensemble.staged_errors(F, y)
    final = float(curve[-1]) if len(curve) else float(np.mean(np.asarray(y) != 1))
    return final, curve


# -- autoassociative selection -----------------------------------------------------

def binarize_median(X) -> np.ndarray:
    """+1 where a value exceeds its column median, -1 elsewhere."""
    X = np.asarray(X, dtype=np.float64)
    return np.where(X > np.median(X, axis=0), 1.0, -1.0)


def autoassociative_select(X_sub, T_aa: int, weight_init: str = "mh",
                           return_trace: bool = False):
    """Distinct input features of the first ``T_aa`` stumps that
    AdaBoost.MH picks when predicting every (median-binarized) feature from
    a single feature. Features come back in first-pick order."""
    X = np.ascontiguousarray(X_sub, dtype=np.float64)
    if T_aa < 1:
        raise ValueError("T_aa must be >= 1")
    varying = np.flatnonzero(np.ptp(X, axis=0) > 0)
    if varying.size == 0:
        raise ValueError("every input feature is constant")
    Y = binarize_median(X)
    W = init_weights(Y, weight_init)
    source = ColumnSource(X)
    picked: list[int] = []
    seen = set()
    trace = []
    for t in range(T_aa):
        f, H = _single_stump(source, W, Y, varying)
        gamma = edge_of(H, W, Y)
        if not gamma > 0:
            break
        alpha = alpha_of(gamma)
        W, _ = update_weights(W, alpha, H, Y)
        trace.append((f, gamma))
        if f != CONSTANT and f not in seen:
            seen.add(f)
            picked.append(f)
    return (picked, trace) if return_trace else picked


def _single_stump(source, W, Y, features):
    WY = np.ascontiguousarray(W * Y)
    member = np.ones(source.n, dtype=np.bool_)
    stump, phi = _fit_stump(source, None, None, member, WY, features)
    return stump.feature, phi[:, None] * stump.v[None, :].astype(np.float64)
