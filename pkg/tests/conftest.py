import os
import struct
from pathlib import Path

import numpy as np
import pytest

DATA_ROOT = Path(os.environ.get("CORRFEAT_DATA", "/root/data"))


def write_idx_images(path, images):
    images = np.asarray(images, dtype=np.uint8)
    n, r, c = images.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack(">IIII", 0x00000803, n, r, c))
        fh.write(images.tobytes())


def write_idx_labels(path, labels):
    labels = np.asarray(labels, dtype=np.uint8)
    with open(path, "wb") as fh:
        fh.write(struct.pack(">II", 0x00000801, len(labels)))
        fh.write(labels.tobytes())


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def idx_pair(tmp_path):
    img = np.zeros((3, 2, 2), dtype=np.uint8)
    img[0, 0, 0] = 255
    img[1] = 51
    img[2, 1, 1] = 102
    ip, lp = tmp_path / "img.idx", tmp_path / "lab.idx"
    write_idx_images(ip, img)
    write_idx_labels(lp, [9, 0, 4])
    return ip, lp


def dyadic_weights(rng, shape, bits=20):
    """Positive weights summing to exactly 1, all multiples of 2**-bits, so
    every partial sum is exact in float64."""
    total = 2 ** bits
    k = int(np.prod(shape))
    cuts = np.sort(rng.choice(np.arange(1, total), size=k - 1, replace=False))
    parts = np.diff(np.concatenate([[0], cuts, [total]]))
    return (parts / total).reshape(shape)


# one line per acceptance criterion, echoed again in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
