"""88-element glyph descriptor: octant shadow lengths over three windows plus octant centroids.

Geometry is evaluated in doubled integer coordinates (pixel centers become odd
integers) so octant membership and projection bins are exact.

Octants of a square window are the triangles (C, P[i], P[i+1]) where C is the
window center and P walks the boundary clockwise from the top-left corner:
top-left, top-mid, top-right, right-mid, bottom-right, bottom-mid,
bottom-left, left-mid.

Centroids need a partition of the pixels: a center lying on a radial edge
belongs to the octant for which that edge is the leading one (C-P[i] belongs to
octant i), which keeps the partition equivariant under 90 degree rotation.
Shadows use closed triangles, so such a center casts onto both octants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .preprocess import FRAME, BinaryImage

N_SHADOW = 72
N_CENTROID = 16
N_FEATURES = N_SHADOW + N_CENTROID


@dataclass(frozen=True)
class Window:
    x0: int
    y0: int
    w: int
    h: int

    def __post_init__(self):
        if self.w != self.h or self.w < 2:
            raise ValueError("windows are squares of side >= 2")
        if self.x0 < 0 or self.y0 < 0 or self.x0 + self.w > FRAME or self.y0 + self.h > FRAME:
            raise ValueError(f"{self} leaves the {FRAME}x{FRAME} frame")

    @property
    def center(self) -> tuple[float, float]:
        return (self.x0 + self.w / 2, self.y0 + self.h / 2)


@dataclass(frozen=True)
class Octant:
    index: int
    vertices: tuple[tuple[float, float], tuple[float, float], tuple[float, float]]

    @property
    def area(self) -> float:
        (cx, cy), (ax, ay), (bx, by) = self.vertices
        return abs((ax - cx) * (by - cy) - (ay - cy) * (bx - cx)) / 2

    @property
    def centroid(self) -> tuple[float, float]:
        xs, ys = zip(*self.vertices)
        return (sum(xs) / 3, sum(ys) / 3)

    def sides(self):
        """Outer edge, then the radial edges from the center, as (start, end) pairs."""
        c, a, b = self.vertices
        return ((a, b), (c, a), (c, b))


def make_windows() -> tuple[Window, Window, Window]:
    return (Window(0, 0, 32, 32), Window(4, 4, 24, 24), Window(8, 8, 16, 16))


def _ring2(win: Window):
    """Doubled-coordinate center and the 8 boundary points, clockwise from top-left."""
    x0, y0, w, h = 2 * win.x0, 2 * win.y0, 2 * win.w, 2 * win.h
    c = (x0 + w // 2, y0 + h // 2)
    xm, ym, x1, y1 = x0 + w // 2, y0 + h // 2, x0 + w, y0 + h
    ring = [(x0, y0), (xm, y0), (x1, y0), (x1, ym), (x1, y1), (xm, y1), (x0, y1), (x0, ym)]
    return c, ring


def make_octants(win: Window) -> list[Octant]:
    c, ring = _ring2(win)
    half = lambda p: (p[0] / 2, p[1] / 2)  # noqa: E731
    return [Octant(i, (half(c), half(ring[i]), half(ring[(i + 1) % 8]))) for i in range(8)]


def _cross(o, a, p):
    return (a[0] - o[0]) * (p[1] - o[1]) - (a[1] - o[1]) * (p[0] - o[0])


def _octant_of(p, c, ring) -> int:
    for i in range(8):
        a, b = ring[i], ring[(i + 1) % 8]
        d1, d2, d3 = _cross(c, a, p), _cross(a, b, p), _cross(b, c, p)
        inside = (d1 >= 0 and d2 >= 0 and d3 >= 0) or (d1 <= 0 and d2 <= 0 and d3 <= 0)
        if inside and (d3 != 0 or p == c):
            return i
    return -1


def _ceil_half_sqrt(n: int) -> int:
    """ceil(sqrt(n) / 2) for integer n >= 0."""
    k = math.isqrt(n)
    if k * k < n:
        k += 1
    return (k + 1) // 2


@dataclass(frozen=True)
class _WindowTable:
    octant: np.ndarray     # (32, 32) partition octant per pixel, -1 outside the window
    pixel: np.ndarray      # (M,) flat pixel index of each (pixel, side) projection
    bin_id: np.ndarray     # (M,) global bin lit by that projection
    n_bins: np.ndarray     # (24,) bins per (octant, side)
    offsets: np.ndarray    # (24,) first global bin id per (octant, side)


def _in_closed(p, c, a, b) -> bool:
    d1, d2, d3 = _cross(c, a, p), _cross(a, b, p), _cross(b, c, p)
    return (d1 >= 0 and d2 >= 0 and d3 >= 0) or (d1 <= 0 and d2 <= 0 and d3 <= 0)


@lru_cache(maxsize=None)
def _table(win: Window) -> _WindowTable:
    c, ring = _ring2(win)
    sides = []
    for i in range(8):
        a, b = ring[i], ring[(i + 1) % 8]
        sides.extend([(a, b), (c, a), (c, b)])
    n_bins = np.array(
        [_ceil_half_sqrt((q[0] - p[0]) ** 2 + (q[1] - p[1]) ** 2) for p, q in sides], dtype=np.int64
    )
    offsets = np.concatenate([[0], np.cumsum(n_bins)[:-1]])

    octant = np.full((FRAME, FRAME), -1, dtype=np.int64)
    pixel, bin_id = [], []
    for y in range(win.y0, win.y0 + win.h):
        for x in range(win.x0, win.x0 + win.w):
            p = (2 * x + 1, 2 * y + 1)
            octant[y, x] = _octant_of(p, c, ring)
            # shadows: a center on a shared edge projects for both octants
            for k in range(8):
                if not _in_closed(p, c, ring[k], ring[(k + 1) % 8]):
                    continue
                for s in range(3):
                    j = 3 * k + s
                    (sx, sy), (ex, ey) = sides[j]
                    dx, dy = ex - sx, ey - sy
                    dot = (p[0] - sx) * dx + (p[1] - sy) * dy
                    b = (dot * int(n_bins[j])) // (dx * dx + dy * dy)
                    b = min(max(b, 0), int(n_bins[j]) - 1)
                    pixel.append(y * FRAME + x)
                    bin_id.append(offsets[j] + b)
    pixel = np.array(pixel, dtype=np.int64)
    bin_id = np.array(bin_id, dtype=np.int64)
    for arr in (octant, pixel, bin_id, n_bins, offsets):
        arr.setflags(write=False)
    return _WindowTable(octant, pixel, bin_id, n_bins, offsets)


def octant_map(win: Window) -> np.ndarray:
    """Octant index of every pixel of the frame (-1 outside ``win``)."""
    return _table(win).octant.copy()


def _bits32(img) -> np.ndarray:
    bits = img.bits if isinstance(img, BinaryImage) else np.asarray(img)
    if bits.shape != (FRAME, FRAME):
        raise ValueError(f"expected a {FRAME}x{FRAME} binary image, got {bits.shape}")
    return bits != 0


def shadow_features_window(img, win: Window) -> np.ndarray:
    """24 normalized shadow lengths of ``img`` inside ``win``.

    Ordered by octant, then (outer edge, radial edge to P[i], radial edge to
    P[i+1]). Each value is the fraction of the side's unit bins that receive
    the orthogonal projection of at least one ink pixel center lying in the
    closed octant triangle; centers on a shared edge cast onto both octants.
    """
    t = _table(win)
    hit = _bits32(img).ravel()[t.pixel]
    lit = np.zeros(int(t.n_bins.sum()), dtype=np.int64)
    lit[t.bin_id[hit]] = 1
    return np.add.reduceat(lit, t.offsets) / t.n_bins


def shadow_features(img) -> np.ndarray:
    return np.concatenate([shadow_features_window(img, w) for w in make_windows()])


def centroid_features(img) -> np.ndarray:
    """Normalized (x, y) mean of ink pixel centers per octant of the full frame.

    An octant without ink reports its triangle centroid instead.
    """
    win = make_windows()[0]
    t = _table(win)
    bits = _bits32(img)
    oct_idx = t.octant[bits]
    ys, xs = np.nonzero(bits)
    count = np.bincount(oct_idx, minlength=8)
    sx = np.bincount(oct_idx, weights=xs + 0.5, minlength=8)
    sy = np.bincount(oct_idx, weights=ys + 0.5, minlength=8)
    out = np.empty(N_CENTROID)
    for k, octant in enumerate(make_octants(win)):
        if count[k]:
            out[2 * k] = sx[k] / count[k] / FRAME
            out[2 * k + 1] = sy[k] / count[k] / FRAME
        else:
            (cx, cy), (ax, ay), (bx, by) = octant.vertices
            out[2 * k] = (2 * (cx + ax + bx)) / 6 / FRAME
            out[2 * k + 1] = (2 * (cy + ay + by)) / 6 / FRAME
    return out


def extract_features(img) -> np.ndarray:
    """Shadow features (72) followed by centroid features (16)."""
    return np.concatenate([shadow_features(img), centroid_features(img)])


def extract_many(images) -> np.ndarray:
    images = list(images)
    out = np.empty((len(images), N_FEATURES))
    for i, img in enumerate(images):
        out[i] = extract_features(img)
    return out
