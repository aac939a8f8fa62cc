"""Neighborhood and edge features built from feature correlations.

A fitted :class:`FeatureTransform` records the selected raw columns, the
neighborhoods (sets of correlated columns, averaged into one feature
each) and the edges (pairs of correlated neighborhood features, whose
difference is one feature each). It replays on any matrix with the raw
schema it was fitted on.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .correlation import CorrelationMatrix, correlation_matrix
from .data import (Dataset, Normalizer, SchemaError, apply_normalizer, fit_normalizer,
                   subsample_indices)

TRANSFORM_FORMAT = "corrfeat.transform"
TRANSFORM_VERSION = 1


@dataclass(frozen=True)
class NeighborhoodSet:
    """``members[k]`` holds positions into ``selected`` (sorted, unique)."""

    selected: tuple[int, ...]
    members: tuple[tuple[int, ...], ...]
    thresholds: tuple[float, ...]

    @property
    def q(self) -> int:
        return len(self.members)

    def raw_members(self, k: int) -> list[int]:
        return [self.selected[j] for j in self.members[k]]


@dataclass(frozen=True)
class EdgeSet:
    pairs: tuple[tuple[int, int], ...]
    threshold: float

    @property
    def L(self) -> int:
        return len(self.pairs)


def _check_thresholds(thresholds) -> tuple[float, ...]:
    ts = tuple(float(t) for t in np.atleast_1d(thresholds))
    if not ts:
        raise ValueError("need at least one neighborhood threshold")
    for t in ts:
        if not 0.0 < t <= 1.0:
            raise ValueError(f"threshold {t} outside (0, 1]")
    return ts


def build_neighborhoods(C: CorrelationMatrix, thresholds,
                        selected: Optional[Sequence[int]] = None) -> NeighborhoodSet:
    """One neighborhood per (feature, threshold): every column whose
    correlation with the feature is at least the threshold. Identical
    member sets are kept once, at their first occurrence."""
    ts = _check_thresholds(thresholds)
    rho = C.rho
    p = rho.shape[0]
    if selected is None:
        selected = range(p)
    selected = tuple(int(s) for s in selected)
    if len(selected) != p:
        raise ValueError(f"{len(selected)} selected indices for a {p}x{p} correlation matrix")
    seen = set()
    members = []
    for j in range(p):
        for t in ts:
            m = np.flatnonzero(rho[j] >= t)
            if j not in m:  # constant columns still own their neighborhood
                m = np.union1d(m, [j])
            key = tuple(int(v) for v in m)
            if key not in seen:
                seen.add(key)
                members.append(key)
    return NeighborhoodSet(selected, tuple(members), ts)


def averaging_matrix(NS: NeighborhoodSet) -> np.ndarray:
    M = np.zeros((len(NS.selected), NS.q))
    for k, m in enumerate(NS.members):
        M[list(m), k] = 1.0 / len(m)
    return M


def neighborhood_features(X, NS: NeighborhoodSet, chunk: int = 8192) -> np.ndarray:
    """Mean of each neighborhood's member columns; ``X`` holds the selected
    columns in ``NS.selected`` order."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != len(NS.selected):
        raise IndexError(f"expected {len(NS.selected)} columns, got shape {X.shape}")
    M = averaging_matrix(NS)
    Z = np.empty((X.shape[0], NS.q))
    for a in range(0, X.shape[0], chunk):
        Z[a:a + chunk] = X[a:a + chunk] @ M
    return Z


def build_edges(C_Z: CorrelationMatrix, rho_e: float) -> EdgeSet:
    iu, ju = np.triu_indices(C_Z.p, 1)
    keep = C_Z.rho[iu, ju] >= rho_e
    pairs = tuple((int(a), int(b)) for a, b in zip(iu[keep], ju[keep]))
    return EdgeSet(pairs, float(rho_e))


def edge_features(Z, ES: EdgeSet) -> np.ndarray:
    Z = np.asarray(Z, dtype=np.float64)
    if not ES.pairs:
        return np.zeros((Z.shape[0], 0))
    idx = np.array(ES.pairs, dtype=np.int64)
    if idx.max() >= Z.shape[1] or idx.min() < 0:
        raise IndexError(f"edge index out of range for {Z.shape[1]} neighborhood features")
    return Z[:, idx[:, 0]] - Z[:, idx[:, 1]]


@dataclass
class FeatureConfig:
    """Knobs of the construction. ``normalize=None`` means: on for sets
    without image geometry, off for images."""

    rho_n: tuple[float, ...] = (0.5,)
    rho_e: float = 0.7
    subsample: int = 1000
    seed: int = 0
    normalize: Optional[bool] = None
    selected: Optional[Sequence[int]] = None


@dataclass(frozen=True)
class FeatureTransform:
    raw_dim: int
    neighborhoods: NeighborhoodSet
    edges: EdgeSet
    normalizer: Optional[Normalizer] = None
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def n_outputs(self) -> int:
        return self.neighborhoods.q + self.edges.L

    def to_dict(self) -> dict:
        return {
            "format": TRANSFORM_FORMAT,
            "version": TRANSFORM_VERSION,
            "raw_dim": self.raw_dim,
            "selected": list(self.neighborhoods.selected),
            "rho_n": list(self.neighborhoods.thresholds),
            "rho_e": self.edges.threshold,
            "neighborhoods": [list(m) for m in self.neighborhoods.members],
            "edges": [list(p) for p in self.edges.pairs],
            "normalizer": self.normalizer.to_dict() if self.normalizer else None,
            "meta": self.meta,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"

    def digest(self) -> str:
        body = self.to_dict()
        body.pop("meta")
        return hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureTransform":
        if d.get("format") != TRANSFORM_FORMAT:
            raise SchemaError(f"not a feature transform (format={d.get('format')!r})")
        if d.get("version") != TRANSFORM_VERSION:
            raise SchemaError(f"unsupported transform version {d.get('version')}")
        NS = NeighborhoodSet(tuple(d["selected"]),
                             tuple(tuple(m) for m in d["neighborhoods"]),
                             tuple(d["rho_n"]))
        ES = EdgeSet(tuple((int(a), int(b)) for a, b in d["edges"]), float(d["rho_e"]))
        norm = Normalizer.from_dict(d["normalizer"]) if d.get("normalizer") else None
        return cls(int(d["raw_dim"]), NS, ES, norm, d.get("meta", {}))

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "FeatureTransform":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def output_names(self) -> list[str]:
        return ([f"nbhd{k}" for k in range(self.neighborhoods.q)]
                + [f"edge{k}" for k in range(self.edges.L)])


def _prepare(T: FeatureTransform, X_raw) -> np.ndarray:
    X = np.asarray(X_raw, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != T.raw_dim:
        raise SchemaError(f"transform expects {T.raw_dim} raw columns, got shape {X.shape}")
    if T.normalizer is not None:
        X = apply_normalizer(T.normalizer, X)
    return X[:, list(T.neighborhoods.selected)]


def apply_transform(T: FeatureTransform, X_raw) -> np.ndarray:
    """``[z_1 .. z_q, s_1 .. s_L]`` for every row of ``X_raw``."""
    Z = neighborhood_features(_prepare(T, X_raw), T.neighborhoods)
    return np.hstack([Z, edge_features(Z, T.edges)])


def fit_transform_pipeline(ds: Dataset, config: FeatureConfig) -> FeatureTransform:
    """Subsample, optionally normalize, correlate, build neighborhoods,
    correlate their responses on the same subsample, build edges.

    Labels are never read.
    """
    m = min(config.subsample, ds.n)
    rows = subsample_indices(ds.n, m, config.seed)
    normalize = config.normalize
    if normalize is None:
        normalize = ds.geometry is None
    norm = fit_normalizer(ds.X) if normalize else None
    X_sub = ds.X[rows]
    if norm is not None:
        X_sub = apply_normalizer(norm, X_sub)
    selected = list(range(ds.d)) if config.selected is None else [int(s) for s in config.selected]
    if len(set(selected)) != len(selected) or min(selected) < 0 or max(selected) >= ds.d:
        raise ValueError("selected indices must be distinct raw column indices")
    Xs = X_sub[:, selected]
    NS = build_neighborhoods(correlation_matrix(Xs), config.rho_n, selected)
    Z_sub = neighborhood_features(Xs, NS)
    ES = build_edges(correlation_matrix(Z_sub), config.rho_e)
    meta = {"subsample": m, "seed": config.seed, "normalize": bool(normalize)}
    return FeatureTransform(ds.d, NS, ES, norm, meta)


# -- mask export ---------------------------------------------------------------

def feature_masks(T: FeatureTransform, k: int) -> tuple[str, list[int], list[int]]:
    """``(kind, positive raw members, negative raw members)`` of output ``k``."""
    NS = T.neighborhoods
    if k < NS.q:
        return "neighborhood", NS.raw_members(k), []
    a, b = T.edges.pairs[k - NS.q]
    return "edge", NS.raw_members(a), NS.raw_members(b)


def write_mask_table(T: FeatureTransform, path, outputs: Optional[Sequence[int]] = None) -> None:
    outputs = range(T.n_outputs) if outputs is None else outputs
    lines = ["output,kind,positive,negative"]
    for k in outputs:
        kind, pos, neg = feature_masks(T, k)
        lines.append(f"{k},{kind},{' '.join(map(str, pos))},{' '.join(map(str, neg))}")
    Path(path).write_text("\n".join(lines) + "\n")


def mask_image(geometry, positive, negative=(), levels=(255, 96)) -> np.ndarray:
    """Greymap of a mask: positive members at ``levels[0]``, negative at
    ``levels[1]``, background 0. Channels collapse onto their pixel."""
    h, w, _ = geometry
    img = np.zeros((h, w), dtype=np.uint8)
    for members, level in ((negative, levels[1]), (positive, levels[0])):
        for raw in members:
            pix = raw % (h * w)
            img[pix // w, pix % w] = level
    return img


def write_pgm(path, img: np.ndarray) -> None:
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode())
        fh.write(np.ascontiguousarray(img, dtype=np.uint8).tobytes())


def export_masks(T: FeatureTransform, outdir, geometry=None,
                 outputs: Optional[Sequence[int]] = None) -> Path:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    outputs = list(range(T.n_outputs)) if outputs is None else list(outputs)
    write_mask_table(T, outdir / "masks.csv", outputs)
    if geometry is not None:
        for rank, k in enumerate(outputs):
            kind, pos, neg = feature_masks(T, k)
            write_pgm(outdir / f"{rank:04d}_{kind}_{k}.pgm", mask_image(geometry, pos, neg))
    return outdir
