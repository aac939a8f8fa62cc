"""Haar-like rectangle filters over integral images.

Five filter types, each a footprint ``(x, y, width, height)`` split into
equal bands:

* ``two_h``   two bands side by side, left minus right (responds to
  vertical boundaries)
* ``two_v``   two bands stacked, top minus bottom
* ``three_h`` three bands side by side, outer bands minus twice the middle
* ``three_v`` three bands stacked, same weighting
* ``four``    2x2 checkerboard, main diagonal minus anti-diagonal

Band weights balance positive and negative area, so every filter answers 0
on a constant image.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import kernels

TYPE_NAMES = ("two_h", "two_v", "three_h", "three_v", "four")
# bands along (x, y) per type
BANDS = ((2, 1), (1, 2), (3, 1), (1, 3), (2, 2))


@dataclass(frozen=True)
class HaarFilter:
    type: int
    x: int
    y: int
    width: int
    height: int
    channel: int = 0

    def as_row(self) -> tuple[int, ...]:
        return (self.type, self.x, self.y, self.width, self.height, self.channel)

    def admissible(self, geometry) -> bool:
        h, w, c = geometry
        bx, by = BANDS[self.type]
        return (0 <= self.channel < c and self.width > 0 and self.height > 0
                and self.width % bx == 0 and self.height % by == 0
                and self.x >= 0 and self.y >= 0
                and self.x + self.width <= w and self.y + self.height <= h)

    def describe(self) -> str:
        return (f"{TYPE_NAMES[self.type]}@({self.x},{self.y}) "
                f"{self.width}x{self.height} ch{self.channel}")


def integral_image(channel) -> np.ndarray:
    """Cumulative sum table with a zero first row and column."""
    img = np.asarray(channel, dtype=np.float64)
    ii = np.zeros((img.shape[0] + 1, img.shape[1] + 1))
    ii[1:, 1:] = img.cumsum(axis=0).cumsum(axis=1)
    return ii


def rectangle_sum(ii, x, y, w, h) -> float:
    return ii[y + h, x + w] - ii[y, x + w] - ii[y + h, x] + ii[y, x]


def integral_images(X, geometry) -> np.ndarray:
    """Stack of integral images ``(n, channels, H + 1, W + 1)`` for rows of
    ``X`` laid out channel-planar, row-major."""
    h, w, c = geometry
    X = np.asarray(X, dtype=np.float64)
    imgs = X.reshape(X.shape[0], c, h, w)
    ii = np.zeros((X.shape[0], c, h + 1, w + 1))
    ii[:, :, 1:, 1:] = imgs.cumsum(axis=2).cumsum(axis=3)
    return ii


@lru_cache(maxsize=8)
def _filter_table(h: int, w: int, c: int) -> np.ndarray:
    rows = []
    for t, (bx, by) in enumerate(BANDS):
        for fw in range(bx, w + 1, bx):
            for fh in range(by, h + 1, by):
                ys, xs = np.mgrid[0:h - fh + 1, 0:w - fw + 1]
                block = np.empty((xs.size, 6), dtype=np.int64)
                block[:, 0] = t
                block[:, 1] = xs.ravel()
                block[:, 2] = ys.ravel()
                block[:, 3] = fw
                block[:, 4] = fh
                rows.append(block)
    table = np.concatenate(rows)
    full = np.concatenate([np.column_stack([table[:, :5], np.full(len(table), ch)])
                           for ch in range(c)])
    full.setflags(write=False)
    return full


def enumerate_filters(geometry) -> np.ndarray:
    """Every admissible filter as rows ``(type, x, y, w, h, channel)``."""
    h, w, c = geometry
    return _filter_table(int(h), int(w), int(c))


def count_filters(geometry) -> int:
    h, w, c = geometry
    total = 0
    for bx, by in BANDS:
        total += sum((w - fw + 1) for fw in range(bx, w + 1, bx)) * \
            sum((h - fh + 1) for fh in range(by, h + 1, by))
    return total * c


def sample_haar_filter(rng: np.random.Generator, geometry, size=None):
    """Uniform draw over all admissible filters (one, or an array of rows)."""
    table = enumerate_filters(geometry)
    if len(table) == 0:
        raise ValueError(f"geometry {geometry} admits no filter")
    if size is None:
        return HaarFilter(*(int(v) for v in table[rng.integers(len(table))]))
    return table[rng.integers(len(table), size=size)]


def eval_haar(ii, filt) -> np.ndarray:
    """Responses of one filter or a table of filters.

    ``ii`` is a single integral image (2-D), a per-channel stack (3-D) or a
    batch (4-D, from :func:`integral_images`).
    """
    ii = np.asarray(ii, dtype=np.float64)
    if ii.ndim == 2:
        ii = ii[None, None]
    elif ii.ndim == 3:
        ii = ii[None]
    rows = np.atleast_2d(np.asarray(filt.as_row() if isinstance(filt, HaarFilter) else filt,
                                    dtype=np.int64))
    out = kernels.haar_eval(np.ascontiguousarray(ii), rows)
    if isinstance(filt, HaarFilter):
        return out[:, 0] if out.shape[0] > 1 else out[0, 0]
    return out
