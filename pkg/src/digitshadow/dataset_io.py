"""Readers and writers for PGM images, IDX digit corpora and labelled directories."""

from __future__ import annotations

import gzip
import logging
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


class DataError(Exception):
    """Base class for unreadable or inconsistent input data."""


class PgmError(DataError):
    pass


class MissingFileError(PgmError, FileNotFoundError):
    pass


class MalformedHeaderError(PgmError):
    pass


class TruncatedPayloadError(PgmError):
    pass


class MaxvalError(PgmError):
    pass


class IdxError(DataError):
    pass


class MagicMismatchError(IdxError):
    pass


class CountMismatchError(IdxError):
    pass


class IdxTruncatedError(IdxError):
    pass


@dataclass(eq=False)
class GrayImage:
    """8-bit grayscale raster, stored as a (height, width) uint8 array."""

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.pixels)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"image must be a nonempty 2-D grid, got shape {arr.shape}")
        if arr.dtype != np.uint8:
            if arr.size and (arr.min() < 0 or arr.max() > 255):
                raise ValueError("intensities must lie in [0, 255]")
            arr = arr.astype(np.uint8)
        self.pixels = arr

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def __eq__(self, other):
        if not isinstance(other, GrayImage):
            return NotImplemented
        return np.array_equal(self.pixels, other.pixels)


@dataclass
class LabeledSample:
    image: GrayImage
    label: int
    name: str = ""

    def __post_init__(self):
        if not 0 <= int(self.label) <= 9:
            raise ValueError(f"label must be a digit 0-9, got {self.label}")
        self.label = int(self.label)


@dataclass
class SampleSet:
    """Ordered labelled samples.

    ``ink_high`` records the storage polarity of the source: IDX digit corpora
    store strokes as high intensities, scanned pages as low ones.
    """

    samples: list[LabeledSample] = field(default_factory=list)
    source: str = ""
    ink_high: bool = False
    skipped: int = 0

    def __len__(self):
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    def __getitem__(self, i):
        return self.samples[i]

    @property
    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.samples], dtype=np.int64)


# --- PGM -------------------------------------------------------------------


def _pgm_tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    """Read ``count`` whitespace-separated header tokens, skipping comments.

    Returns the tokens and the offset just past the single whitespace byte
    that terminates the last one.
    """
    tokens = []
    pos = 0
    n = len(data)
    while len(tokens) < count:
        while pos < n and data[pos : pos + 1].isspace():
            pos += 1
        if pos >= n:
            raise MalformedHeaderError("header ends prematurely")
        if data[pos : pos + 1] == b"#":
            while pos < n and data[pos] not in (0x0A, 0x0D):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
            pos += 1
        tokens.append(data[start:pos])
    if pos < n:
        pos += 1
    return tokens, pos


def parse_pgm(data: bytes, name: str = "<bytes>") -> GrayImage:
    if data[:2] not in (b"P2", b"P5"):
        raise MalformedHeaderError(f"{name}: not a P2/P5 PGM file")
    try:
        tokens, offset = _pgm_tokens(data, 4)
    except MalformedHeaderError as exc:
        raise MalformedHeaderError(f"{name}: {exc}") from None
    magic = tokens[0]
    if magic not in (b"P2", b"P5"):
        raise MalformedHeaderError(f"{name}: bad magic {magic!r}")
    try:
        width, height, maxval = (int(t) for t in tokens[1:4])
    except ValueError:
        raise MalformedHeaderError(f"{name}: non-integer size or maxval") from None
    if width <= 0 or height <= 0:
        raise MalformedHeaderError(f"{name}: nonpositive size {width}x{height}")
    if maxval > 255:
        raise MaxvalError(f"{name}: maxval {maxval} exceeds 255")
    if maxval <= 0:
        raise MalformedHeaderError(f"{name}: maxval must be positive")
    count = width * height

    if magic == b"P5":
        payload = data[offset : offset + count]
        if len(payload) < count:
            raise TruncatedPayloadError(
                f"{name}: expected {count} pixel bytes, found {len(payload)}"
            )
        values = np.frombuffer(payload, dtype=np.uint8)
    else:
        body = data[offset:]
        fields = [t for t in _strip_comments(body).split()]
        if len(fields) < count:
            raise TruncatedPayloadError(
                f"{name}: expected {count} pixel values, found {len(fields)}"
            )
        try:
            values = np.array([int(t) for t in fields[:count]], dtype=np.int64)
        except ValueError:
            raise MalformedHeaderError(f"{name}: non-integer pixel value") from None
    if values.max(initial=0) > maxval:
        raise PgmError(f"{name}: pixel value above maxval {maxval}")
    return GrayImage(values.astype(np.uint8).reshape(height, width))


def _strip_comments(body: bytes) -> bytes:
    return b"\n".join(line.split(b"#", 1)[0] for line in body.splitlines())


def load_pgm(path) -> GrayImage:
    path = Path(path)
    try:
        data = path.read_bytes()
    except FileNotFoundError:
        raise MissingFileError(f"{path}: no such file") from None
    except IsADirectoryError:
        raise MissingFileError(f"{path}: is a directory") from None
    return parse_pgm(data, str(path))


def pgm_bytes(img: GrayImage, binary: bool = True) -> bytes:
    header = f"{'P5' if binary else 'P2'}\n{img.width} {img.height}\n255\n".encode()
    if binary:
        return header + img.pixels.tobytes()
    rows = "\n".join(" ".join(str(v) for v in row) for row in img.pixels)
    return header + rows.encode() + b"\n"


def write_pgm(img: GrayImage, path, binary: bool = True) -> None:
    atomic_write_bytes(path, pgm_bytes(img, binary))


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    tmp = path.with_name(f".{path.name}.tmp{os.getpid()}")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode())


# --- IDX -------------------------------------------------------------------


def _read_maybe_gz(path) -> bytes:
    path = Path(path)
    if not path.exists():
        raise IdxError(f"{path}: no such file")
    with open(path, "rb") as fh:
        head = fh.read(2)
    opener = gzip.open if head == b"\x1f\x8b" else open
    with opener(path, "rb") as fh:
        return fh.read()


def parse_idx_images(data: bytes, name: str = "<images>") -> np.ndarray:
    if len(data) < 16:
        raise IdxTruncatedError(f"{name}: header truncated")
    magic, count, rows, cols = struct.unpack(">IIII", data[:16])
    if magic != IDX_IMAGES_MAGIC:
        raise MagicMismatchError(f"{name}: magic {magic:#010x}, expected {IDX_IMAGES_MAGIC:#010x}")
    need = count * rows * cols
    payload = data[16 : 16 + need]
    if len(payload) < need:
        raise IdxTruncatedError(f"{name}: expected {need} pixel bytes, found {len(payload)}")
    return np.frombuffer(payload, dtype=np.uint8).reshape(count, rows, cols)


def parse_idx_labels(data: bytes, name: str = "<labels>") -> np.ndarray:
    if len(data) < 8:
        raise IdxTruncatedError(f"{name}: header truncated")
    magic, count = struct.unpack(">II", data[:8])
    if magic != IDX_LABELS_MAGIC:
        raise MagicMismatchError(f"{name}: magic {magic:#010x}, expected {IDX_LABELS_MAGIC:#010x}")
    payload = data[8 : 8 + count]
    if len(payload) < count:
        raise IdxTruncatedError(f"{name}: expected {count} labels, found {len(payload)}")
    return np.frombuffer(payload, dtype=np.uint8)


def load_idx(images_path, labels_path) -> SampleSet:
    images = parse_idx_images(_read_maybe_gz(images_path), str(images_path))
    labels = parse_idx_labels(_read_maybe_gz(labels_path), str(labels_path))
    if len(images) != len(labels):
        raise CountMismatchError(
            f"{images_path} holds {len(images)} images but {labels_path} holds {len(labels)} labels"
        )
    try:
        samples = [
            LabeledSample(GrayImage(img.copy()), int(lab), name=f"{i:06d}")
            for i, (img, lab) in enumerate(zip(images, labels))
        ]
    except ValueError as exc:
        raise IdxError(f"{labels_path}: {exc}") from None
    return SampleSet(samples, source=f"idx:{images_path}", ink_high=True)


def idx_bytes(images: np.ndarray, labels) -> tuple[bytes, bytes]:
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    count, rows, cols = images.shape
    img = struct.pack(">IIII", IDX_IMAGES_MAGIC, count, rows, cols) + images.tobytes()
    lab = struct.pack(">II", IDX_LABELS_MAGIC, len(labels)) + labels.tobytes()
    return img, lab


def write_idx(images, labels, images_path, labels_path, compress: bool = False) -> None:
    img, lab = idx_bytes(images, labels)
    if compress:
        img, lab = gzip.compress(img, mtime=0), gzip.compress(lab, mtime=0)
    atomic_write_bytes(images_path, img)
    atomic_write_bytes(labels_path, lab)


# --- directory tree --------------------------------------------------------


def load_directory(root) -> SampleSet:
    """Load ``root/<digit>/*.pgm``; the subdirectory name is the label.

    Subdirectories not named 0-9 are skipped; the number of files skipped that
    way is kept in ``SampleSet.skipped`` and in the provenance string.
    """
    root = Path(root)
    if not root.is_dir():
        raise DataError(f"{root}: not a directory")
    samples = []
    skipped = 0
    for sub in sorted(p for p in root.iterdir() if p.is_dir()):
        files = sorted(p for p in sub.iterdir() if p.is_file() and p.suffix.lower() == ".pgm")
        if sub.name not in {str(d) for d in range(10)}:
            skipped += len(files)
            log.warning("skipping %d file(s) under unlabelled directory %s", len(files), sub)
            continue
        for f in files:
            samples.append(LabeledSample(load_pgm(f), int(sub.name), name=f"{sub.name}/{f.name}"))
    source = f"dir:{root}"
    if skipped:
        source += f" (skipped {skipped})"
    return SampleSet(samples, source=source, skipped=skipped)
