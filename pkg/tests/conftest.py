import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

DATA = Path(__file__).parent / "data"
MNIST_IMAGES = DATA / "mnist3k-images-idx3-ubyte.gz"
MNIST_LABELS = DATA / "mnist3k-labels-idx1-ubyte.gz"

_acceptance_lines: list[str] = []


def record_criterion(name: str, ok: bool, detail: str = "") -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] {name}" + (f" -- {detail}" if detail else "")
    _acceptance_lines.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)


def random_glyph(rng, max_side=40):
    """Dark ink (one level) on a light background (one level), random blob strokes."""
    h, w = rng.integers(3, max_side, size=2)
    ink, bg = int(rng.integers(0, 100)), int(rng.integers(150, 256))
    img = np.full((h, w), bg, dtype=np.uint8)
    for _ in range(rng.integers(1, 6)):
        cy, cx = rng.integers(0, h), rng.integers(0, w)
        r = rng.integers(0, max(1, min(h, w) // 3) + 1)
        yy, xx = np.ogrid[:h, :w]
        img[(yy - cy) ** 2 + (xx - cx) ** 2 <= r * r] = ink
    if (img == ink).all():
        img[0, 0] = bg
    return img, bg


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def mnist_paths():
    return MNIST_IMAGES, MNIST_LABELS


def clustered(rng, n_per_class=30, n_classes=10, dim=None, noise=0.05):
    """One-hot-like clusters in [0,1]^dim: class c sits near 0.9 on coordinate c and 0.1 elsewhere."""
    dim = dim or n_classes
    X, y = [], []
    for c in range(n_classes):
        centre = np.full(dim, 0.1)
        centre[c] = 0.9
        X.append(np.clip(centre + rng.normal(0, noise, (n_per_class, dim)), 0, 1))
        y += [c] * n_per_class
    return np.vstack(X), np.array(y)
