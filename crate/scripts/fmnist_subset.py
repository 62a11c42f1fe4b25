#!/usr/bin/env python3
"""Build the small Fashion-MNIST IDX fixtures used by the end-to-end tests.

Source: the per-class JSON pixel dumps shipped in the `fashion-mnist` npm
package (`npm pack fashion-mnist`, then untar). Each class file holds raw
uint8 rows of 784 pixels.

    python3 scripts/fmnist_subset.py <package-dir> crates/core/tests/data

Writes gzip-compressed IDX files:
    fmnist-train-images-idx3-ubyte.gz / fmnist-train-labels-idx1-ubyte.gz  (2000)
    fmnist-test-images-idx3-ubyte.gz  / fmnist-test-labels-idx1-ubyte.gz   (500)
"""
import gzip
import json
import random
import struct
import sys
from pathlib import Path

TRAIN_PER_CLASS = 200
TEST_PER_CLASS = 50
TEST_OFFSET = 6500


def write_idx(out_dir, name, rows, labels):
    n = len(rows)
    images = struct.pack(">IIII", 0x00000803, n, 28, 28) + b"".join(bytes(r) for r in rows)
    lbls = struct.pack(">II", 0x00000801, n) + bytes(labels)
    # mtime=0 keeps the archives byte-stable across regenerations
    with open(out_dir / f"fmnist-{name}-images-idx3-ubyte.gz", "wb") as f:
        f.write(gzip.compress(images, mtime=0))
    with open(out_dir / f"fmnist-{name}-labels-idx1-ubyte.gz", "wb") as f:
        f.write(gzip.compress(lbls, mtime=0))


def main():
    src = Path(sys.argv[1])
    out_dir = Path(sys.argv[2])
    train, test = [], []
    for c in range(10):
        data = json.loads((src / "src" / "clothes" / f"{c}.json").read_text())["data"]
        train += [(row, c) for row in data[:TRAIN_PER_CLASS]]
        test += [(row, c) for row in data[TEST_OFFSET:TEST_OFFSET + TEST_PER_CLASS]]
    rng = random.Random(20190801)
    rng.shuffle(train)
    rng.shuffle(test)
    for name, items in (("train", train), ("test", test)):
        write_idx(out_dir, name, [r for r, _ in items], [c for _, c in items])


if __name__ == "__main__":
    main()
