#!/usr/bin/env python3
"""Convert the MNIST digits bundled in the npm ``mnist`` package to IDX files.

The npm package (https://www.npmjs.com/package/mnist, MIT) ships 10,000 MNIST
digits as per-class JSON arrays of intensities in [0, 1]. This script writes
them as gzipped IDX files (images: magic 0x00000803, labels: 0x00000801) in a
fixed pseudo-random interleaved order so that any prefix is class-balanced.

Usage:
    npm pack mnist && tar xzf mnist-*.tgz
    python3 tools/make_mnist_idx.py package/src/digits data/mnist
"""

import argparse
import gzip
import json
import os
import random
import struct


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("digits_dir", help="directory holding 0.json .. 9.json")
    parser.add_argument("out_dir")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    samples = []
    for label in range(10):
        with open(os.path.join(args.digits_dir, f"{label}.json")) as f:
            data = json.load(f)["data"]
        assert len(data) % 784 == 0
        for i in range(len(data) // 784):
            pixels = data[i * 784:(i + 1) * 784]
            samples.append((label, bytes(min(255, max(0, round(v * 255))) for v in pixels)))

    random.Random(args.seed).shuffle(samples)
    os.makedirs(args.out_dir, exist_ok=True)
    n = len(samples)

    images_path = os.path.join(args.out_dir, "mnist-10k-images-idx3-ubyte.gz")
    with gzip.GzipFile(images_path, "wb", mtime=0) as f:
        f.write(struct.pack(">IIII", 0x00000803, n, 28, 28))
        for _, pixels in samples:
            f.write(pixels)

    labels_path = os.path.join(args.out_dir, "mnist-10k-labels-idx1-ubyte.gz")
    with gzip.GzipFile(labels_path, "wb", mtime=0) as f:
        f.write(struct.pack(">II", 0x00000801, n))
        f.write(bytes(label for label, _ in samples))

    print(f"wrote {n} samples to {args.out_dir}")


if __name__ == "__main__":
    main()
