#!/usr/bin/env python3
"""Build the bundled MNIST 0/3/8 subset as gzipped IDX files.

Source: the `mnist` npm package (MIT), which ships roughly a thousand MNIST
digits per class as JSON arrays of 28x28 intensities in [0, 1].

    npm pack mnist && tar xzf mnist-*.tgz
    python3 tools/mnist_subset.py package/src/digits data/mnist
"""
import gzip
import json
import struct
import sys
from pathlib import Path

DIGITS = (0, 3, 8)
SIDE = 28


def main(src: Path, dst: Path) -> None:
    images = []
    labels = []
    for digit in DIGITS:
        raw = json.loads((src / f"{digit}.json").read_text())["data"]
        count = len(raw) // (SIDE * SIDE)
        for k in range(count):
            chunk = raw[k * SIDE * SIDE:(k + 1) * SIDE * SIDE]
            images.append(bytes(min(255, max(0, round(v * 255))) for v in chunk))
            labels.append(digit)

    dst.mkdir(parents=True, exist_ok=True)
    n = len(images)
    with gzip.GzipFile(dst / "digits038-images-idx3-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">IIII", 0x00000803, n, SIDE, SIDE))
        for img in images:
            f.write(img)
    with gzip.GzipFile(dst / "digits038-labels-idx1-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">II", 0x00000801, n))
        f.write(bytes(labels))
    print(f"wrote {n} images to {dst}")


if __name__ == "__main__":
    main(Path(sys.argv[1]), Path(sys.argv[2]))
