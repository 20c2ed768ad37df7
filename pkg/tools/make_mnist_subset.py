"""Build tests/data/mnist3k-*.gz: a stratified 3000-sample MNIST subset in IDX form.

Source: the 5000-sample MNIST extract bundled with mlxtend
(``mlxtend/data/data/mnist_5k.csv.gz``, 500 images per class). The first 300
images of each class, in source order, are kept.

    python tools/make_mnist_subset.py path/to/mlxtend-*.whl
"""

import gzip
import io
import sys
import zipfile
from pathlib import Path

import numpy as np

from digitshadow.dataset_io import write_idx

PER_CLASS = 300


def main(wheel):
    raw = zipfile.ZipFile(wheel).read("mlxtend/data/data/mnist_5k.csv.gz")
    table = np.loadtxt(io.BytesIO(gzip.decompress(raw)), delimiter=",")
    pixels, labels = table[:, :-1].astype(np.uint8), table[:, -1].astype(np.uint8)
    keep = np.sort(np.concatenate([np.flatnonzero(labels == d)[:PER_CLASS] for d in range(10)]))
    out = Path(__file__).resolve().parent.parent / "tests" / "data"
    write_idx(
        pixels[keep].reshape(-1, 28, 28),
        labels[keep],
        out / "mnist3k-images-idx3-ubyte.gz",
        out / "mnist3k-labels-idx1-ubyte.gz",
        compress=True,
    )


if __name__ == "__main__":
    main(sys.argv[1])
