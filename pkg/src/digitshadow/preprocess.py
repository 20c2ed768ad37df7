"""Glyph normalization: threshold, crop to the ink bounding box, rescale to 32x32."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset_io import GrayImage

FRAME = 32


class EmptyGlyphError(ValueError):
    """The image has no ink pixel, so its bounding box is undefined."""


@dataclass(frozen=True)
class Fixed:
    threshold: int

    def __post_init__(self):
        if not 0 <= self.threshold <= 255:
            raise ValueError(f"fixed threshold must lie in [0, 255], got {self.threshold}")


@dataclass(frozen=True)
class Otsu:
    pass


ThresholdPolicy = Fixed | Otsu


def parse_policy(text: str) -> ThresholdPolicy:
    """Parse ``otsu`` or ``fixed:<t>``."""
    text = text.strip().lower()
    if text == "otsu":
        return Otsu()
    if text.startswith("fixed:"):
        try:
            return Fixed(int(text[6:]))
        except ValueError as exc:
            raise ValueError(f"bad threshold policy {text!r}: {exc}") from None
    raise ValueError(f"bad threshold policy {text!r}; expected 'otsu' or 'fixed:<t>'")


@dataclass(eq=False)
class BinaryImage:
    """Row-major bit raster; 1 is ink, 0 is background."""

    bits: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.bits)
        if arr.ndim != 2:
            raise ValueError("binary image must be 2-D")
        if arr.dtype != np.uint8:
            arr = (arr != 0).astype(np.uint8)
        self.bits = arr

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    def __eq__(self, other):
        if not isinstance(other, BinaryImage):
            return NotImplemented
        return np.array_equal(self.bits, other.bits)

    def to_gray(self) -> GrayImage:
        """Render ink as 0 and background as 255."""
        return GrayImage(np.where(self.bits == 1, 0, 255).astype(np.uint8))


@dataclass(frozen=True)
class Rect:
    x0: int
    y0: int
    w: int
    h: int


def otsu_threshold(pixels: np.ndarray) -> int:
    """Threshold ``t`` maximising between-class variance of ``{v < t}`` vs ``{v >= t}``.

    Every ``t`` on the maximal plateau gives the same split, so the midpoint of
    the first and last maximiser is returned. A single-level image has no split
    and returns its own level, which classifies nothing as ink.
    """
    hist = np.bincount(np.asarray(pixels, dtype=np.uint8).ravel(), minlength=256).astype(np.float64)
    levels = np.flatnonzero(hist)
    if len(levels) == 1:
        return int(levels[0])
    total = hist.sum()
    values = np.arange(256, dtype=np.float64)
    # t in 1..255: class 0 is levels [0, t)
    w0 = np.cumsum(hist)[:-1]
    s0 = np.cumsum(hist * values)[:-1]
    w1 = total - w0
    s1 = s0[-1] + hist[255] * 255.0 - s0
    with np.errstate(divide="ignore", invalid="ignore"):
        between = w0 * w1 * (s0 / w0 - s1 / w1) ** 2
    between = np.where((w0 > 0) & (w1 > 0), between, -1.0)
    best = between.max()
    hits = np.flatnonzero(between >= best * (1 - 1e-12))
    return int((hits[0] + hits[-1]) // 2) + 1


def binarize(img: GrayImage, policy: ThresholdPolicy = Otsu()) -> BinaryImage:
    px = img.pixels
    t = policy.threshold if isinstance(policy, Fixed) else otsu_threshold(px)
    return BinaryImage((px < t).astype(np.uint8))


def minimal_bounding_box(img: BinaryImage) -> Rect:
    rows = np.flatnonzero(img.bits.any(axis=1))
    cols = np.flatnonzero(img.bits.any(axis=0))
    if len(rows) == 0:
        raise EmptyGlyphError("image contains no ink pixel")
    return Rect(int(cols[0]), int(rows[0]), int(cols[-1] - cols[0] + 1), int(rows[-1] - rows[0] + 1))


def _axis_coords(n_in: int, n_out: int):
    # align-corners mapping: output ends land exactly on input ends
    if n_in == 1:
        src = np.zeros(n_out)
    else:
        src = np.arange(n_out, dtype=np.float64) * (n_in - 1) / (n_out - 1)
    lo = np.floor(src).astype(np.intp)
    lo = np.minimum(lo, n_in - 1)
    hi = np.minimum(lo + 1, n_in - 1)
    frac = src - lo
    return lo, hi, frac


def crop_and_scale(img: GrayImage, box: Rect, size: int = FRAME) -> GrayImage:
    """Bilinearly resample ``box`` of ``img`` to ``size`` x ``size``.

    Width and height are scaled independently. Results round half up to 8 bits.
    """
    if box.w < 1 or box.h < 1 or box.x0 < 0 or box.y0 < 0 \
            or box.x0 + box.w > img.width or box.y0 + box.h > img.height:
        raise ValueError(f"{box} does not lie within a {img.width}x{img.height} image")
    crop = img.pixels[box.y0 : box.y0 + box.h, box.x0 : box.x0 + box.w].astype(np.float64)
    y0, y1, fy = _axis_coords(box.h, size)
    x0, x1, fx = _axis_coords(box.w, size)
    fx = fx[None, :]
    fy = fy[:, None]
    top = crop[y0][:, x0] * (1 - fx) + crop[y0][:, x1] * fx
    bottom = crop[y1][:, x0] * (1 - fx) + crop[y1][:, x1] * fx
    out = top * (1 - fy) + bottom * fy
    return GrayImage(np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8))


def normalize_sample(img: GrayImage, policy: ThresholdPolicy = Otsu(), invert: bool = False) -> BinaryImage:
    """Canonical 32x32 binary glyph of ``img``.

    The raw image is thresholded only to locate the ink bounding box; the box
    is then rescaled in gray and thresholded again. With ``invert`` the input
    is treated as light strokes on a dark background.
    """
    if invert:
        img = GrayImage(255 - img.pixels)
    box = minimal_bounding_box(binarize(img, policy))
    scaled = crop_and_scale(img, box)
    out = binarize(scaled, policy)
    if not out.bits.any():
        # uniform crop (solid block) or a stroke thinner than the sampling step
        out = BinaryImage((scaled.pixels == scaled.pixels.min()).astype(np.uint8))
    return out
