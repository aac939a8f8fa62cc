"""Datasets: loaders for MNIST IDX, CIFAR-10 binary batches and delimited
text, label coding, normalization, subsampling and splitting.

Labels are 1-based throughout (classes ``1..K``); file formats that store
0-based labels are shifted on load.
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801
CIFAR_RECORD = 1 + 3 * 32 * 32
INTERCHANGE_VERSION = 1


class DataFormatError(ValueError):
    """Base class for malformed input files."""


class BadMagicError(DataFormatError):
    pass


class TruncatedFileError(DataFormatError):
    pass


class CountMismatchError(DataFormatError):
    pass


class LabelError(DataFormatError):
    pass


class SchemaError(ValueError):
    """A model, transform or dataset does not match what it is applied to."""


@dataclass(frozen=True)
class Dataset:
    """Instance matrix ``X`` (n x d) with 1-based labels ``y``.

    ``geometry`` is ``(height, width, channels)`` for image sets, with
    columns laid out channel-planar then row-major. ``label_map[k - 1]`` is
    the original token of class ``k`` when labels came from text.
    """

    X: np.ndarray
    y: np.ndarray
    K: int
    geometry: Optional[tuple[int, int, int]] = None
    label_map: Optional[tuple[str, ...]] = None
    name: str = ""

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.int64)
        if X.ndim != 2:
            raise ValueError(f"X must be 2-D, got shape {X.shape}")
        if y.shape != (X.shape[0],):
            raise ValueError(f"y has shape {y.shape}, expected ({X.shape[0]},)")
        if not np.all(np.isfinite(X)):
            raise ValueError("X contains missing or non-finite entries")
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if y.size and (y.min() < 1 or y.max() > self.K):
            raise LabelError(f"labels must lie in 1..{self.K}")
        if self.geometry is not None:
            h, w, c = self.geometry
            if h * w * c != X.shape[1]:
                raise ValueError(f"geometry {self.geometry} does not match d={X.shape[1]}")
            object.__setattr__(self, "geometry", (int(h), int(w), int(c)))
        if self.label_map is not None:
            if len(self.label_map) != self.K:
                raise ValueError("label_map length must equal K")
            object.__setattr__(self, "label_map", tuple(str(t) for t in self.label_map))
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.y - 1, minlength=self.K)

    def missing_classes(self) -> list[int]:
        return [k + 1 for k, c in enumerate(self.class_counts()) if c == 0]

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        return Dataset(self.X[rows], self.y[rows], self.K, self.geometry,
                       self.label_map, self.name)

    def summary(self) -> str:
        geo = "x".join(map(str, self.geometry)) if self.geometry else "none"
        hist = " ".join(f"{k + 1}:{c}" for k, c in enumerate(self.class_counts()))
        return f"n={self.n} d={self.d} K={self.K} geometry={geo}\nclasses {hist}"


def label_code(y: np.ndarray, K: int) -> np.ndarray:
    """+-1 one-hot code: ``Y[i, l] = +1`` iff ``l + 1 == y[i]``."""
    y = np.asarray(y)
    Y = -np.ones((y.shape[0], K), dtype=np.float64)
    Y[np.arange(y.shape[0]), y - 1] = 1.0
    return Y


# -- loaders -----------------------------------------------------------------

def _read_bytes(path) -> bytes:
    return Path(path).read_bytes()


def _idx_header(buf: bytes, path, magic: int, ndim: int) -> tuple[int, ...]:
    need = 4 + 4 * ndim
    if len(buf) < need:
        raise TruncatedFileError(f"{path}: header needs {need} bytes, file has {len(buf)}")
    got = struct.unpack(">I", buf[:4])[0]
    if got != magic:
        raise BadMagicError(f"{path}: magic 0x{got:08x}, expected 0x{magic:08x}")
    return struct.unpack(f">{ndim}I", buf[4:need])


def load_mnist_idx(image_path, label_path) -> Dataset:
    img = _read_bytes(image_path)
    lab = _read_bytes(label_path)
    n_img, rows, cols = _idx_header(img, image_path, IDX_IMAGE_MAGIC, 3)
    (n_lab,) = _idx_header(lab, label_path, IDX_LABEL_MAGIC, 1)
    want = 16 + n_img * rows * cols
    if len(img) < want:
        raise TruncatedFileError(f"{image_path}: expected {want} bytes, found {len(img)}")
    if len(lab) < 8 + n_lab:
        raise TruncatedFileError(f"{label_path}: expected {8 + n_lab} bytes, found {len(lab)}")
    if n_img != n_lab:
        raise CountMismatchError(f"{n_img} images but {n_lab} labels")
    pixels = np.frombuffer(img, dtype=np.uint8, count=n_img * rows * cols, offset=16)
    labels = np.frombuffer(lab, dtype=np.uint8, count=n_lab, offset=8).astype(np.int64)
    if labels.size and labels.max() > 9:
        raise LabelError(f"{label_path}: label byte {labels.max()} > 9")
    X = pixels.reshape(n_img, rows * cols).astype(np.float64) / 255.0
    return Dataset(X, labels + 1, 10, (rows, cols, 1), name="mnist")


def load_cifar10(batch_paths: Sequence) -> Dataset:
    if isinstance(batch_paths, (str, Path)):
        batch_paths = [batch_paths]
    blocks = []
    for path in batch_paths:
        buf = _read_bytes(path)
        if len(buf) == 0 or len(buf) % CIFAR_RECORD:
            raise TruncatedFileError(
                f"{path}: length {len(buf)} is not a positive multiple of {CIFAR_RECORD}")
        blocks.append(np.frombuffer(buf, dtype=np.uint8).reshape(-1, CIFAR_RECORD))
    raw = np.concatenate(blocks)
    labels = raw[:, 0].astype(np.int64)
    if labels.max() > 9:
        bad = int(np.argmax(labels > 9))
        raise LabelError(f"record {bad}: label byte {labels[bad]} > 9")
    X = raw[:, 1:].astype(np.float64) / 255.0
    return Dataset(X, labels + 1, 10, (32, 32, 3), name="cifar10")


def _resolve_column(label_column: int, width: int) -> int:
    if label_column == 0 or abs(label_column) > width:
        raise ValueError(f"label column {label_column} outside 1..{width}")
    return label_column - 1 if label_column > 0 else width + label_column


def _is_int(token: str) -> bool:
    try:
        int(token)
    except ValueError:
        return False
    return True


def load_delimited(path, label_column: int = -1, delimiter: str = ",",
                   skip_header: bool = False,
                   label_map: Optional[Sequence[str]] = None) -> Dataset:
    """Read a rectangular numeric table with one label column.

    ``label_column`` is 1-based; negative values count from the end.
    Integer labels are ranked numerically onto ``1..K``; other tokens are
    numbered in first-appearance order. Pass the training set's
    ``label_map`` when loading a test file so the coding stays fixed.
    """
    lines = Path(path).read_text().splitlines()
    if skip_header and lines:
        lines = lines[1:]
    rows = []
    for lineno, line in enumerate(lines, start=1 + int(skip_header)):
        if not line.strip() or line.lstrip().startswith(("#", "@")):
            continue
        rows.append((lineno, [t.strip() for t in line.split(delimiter)]))
    if not rows:
        raise DataFormatError(f"{path}: no data rows")
    width = len(rows[0][1])
    col = _resolve_column(label_column, width)
    feats, tokens = [], []
    for lineno, cells in rows:
        if len(cells) != width:
            raise DataFormatError(f"{path}:{lineno}: {len(cells)} cells, expected {width}")
        tokens.append(cells[col])
        try:
            feats.append([float(c) for k, c in enumerate(cells) if k != col])
        except ValueError as exc:
            raise DataFormatError(f"{path}:{lineno}: non-numeric feature cell ({exc})") from None
    if label_map is None:
        uniq = list(dict.fromkeys(tokens))
        if all(_is_int(t) for t in uniq):
            uniq.sort(key=int)
        label_map = uniq
    lookup = {t: k + 1 for k, t in enumerate(label_map)}
    try:
        y = np.array([lookup[t] for t in tokens], dtype=np.int64)
    except KeyError as exc:
        raise LabelError(f"{path}: label token {exc.args[0]!r} not in the fixed label map") from None
    return Dataset(np.array(feats, dtype=np.float64), y, len(label_map),
                   label_map=tuple(label_map), name=Path(path).stem)


def save_dataset(ds: Dataset, path) -> None:
    """Write the ``.npz`` interchange format (bit-exact round trip)."""
    extra = {}
    if ds.geometry is not None:
        extra["geometry"] = np.array(ds.geometry, dtype=np.int64)
    if ds.label_map is not None:
        extra["label_map"] = np.array(ds.label_map, dtype=str)
    with open(path, "wb") as fh:
        np.savez(fh, version=np.int64(INTERCHANGE_VERSION), X=ds.X, y=ds.y,
                 K=np.int64(ds.K), name=np.array(ds.name), **extra)


def load_dataset(path) -> Dataset:
    with np.load(path, allow_pickle=False) as z:
        if int(z["version"]) != INTERCHANGE_VERSION:
            raise DataFormatError(f"{path}: unsupported interchange version {int(z['version'])}")
        geometry = tuple(int(v) for v in z["geometry"]) if "geometry" in z else None
        label_map = tuple(str(t) for t in z["label_map"]) if "label_map" in z else None
        return Dataset(z["X"], z["y"], int(z["K"]), geometry, label_map, str(z["name"]))


# -- normalization -------------------------------------------------------------

@dataclass(frozen=True)
class Normalizer:
    mu: np.ndarray
    sigma: np.ndarray

    def to_dict(self) -> dict:
        return {"mu": [float(v) for v in self.mu], "sigma": [float(v) for v in self.sigma]}

    @classmethod
    def from_dict(cls, d: dict) -> "Normalizer":
        return cls(np.array(d["mu"], dtype=np.float64), np.array(d["sigma"], dtype=np.float64))


def fit_normalizer(X) -> Normalizer:
    X = np.asarray(X, dtype=np.float64)
    mu = X.mean(axis=0)
    sigma = X.std(axis=0, ddof=1) if X.shape[0] > 1 else np.zeros(X.shape[1])
    sigma[np.ptp(X, axis=0) == 0] = 0.0
    return Normalizer(mu, sigma)


def apply_normalizer(norm: Normalizer, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != norm.mu.shape[0]:
        raise ValueError(f"normalizer fitted on d={norm.mu.shape[0]}, got shape {X.shape}")
    scale = np.where(norm.sigma > 0, norm.sigma, 1.0)
    return (X - norm.mu) / scale


# -- sampling ---------------------------------------------------------------

def split_train_valid(ds: Dataset, fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must lie strictly between 0 and 1")
    perm = np.random.default_rng(seed).permutation(ds.n)
    cut = int(round(fraction * ds.n))
    train, valid = ds.subset(perm[:cut]), ds.subset(perm[cut:])
    missing = train.missing_classes()
    if missing:
        warnings.warn(f"classes {missing} absent from the training part", stacklevel=2)
    return train, valid


def subsample_indices(n: int, m: int, seed: int) -> np.ndarray:
    if m > n:
        raise ValueError(f"cannot draw {m} rows from {n} without replacement")
    return np.random.default_rng(seed).choice(n, size=m, replace=False)


def subsample_instances(ds: Dataset, m: int, seed: int) -> np.ndarray:
    return ds.X[subsample_indices(ds.n, m, seed)]
