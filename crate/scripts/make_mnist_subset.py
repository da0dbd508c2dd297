#!/usr/bin/env python3
"""Build the class-balanced MNIST-1k IDX fixtures from the npm `mnist` package.

    npm pack mnist && tar xzf mnist-*.tgz
    python3 scripts/make_mnist_subset.py package crates/core/tests/data/mnist-1k

The package ships 28x28 digits as floats rounded to three decimals; pixels are
mapped back to bytes with round(v * 255). Train takes the first 100 digits of
each class, test the next 50, interleaved by class.
"""
import json
import os
import struct
import sys

TRAIN_PER_CLASS = 100
TEST_PER_CLASS = 50
PIXELS = 28 * 28


def load(pkg):
    digits = []
    for d in range(10):
        with open(os.path.join(pkg, "src", "digits", f"{d}.json")) as f:
            flat = json.load(f)["data"]
        digits.append([flat[i:i + PIXELS] for i in range(0, len(flat), PIXELS)])
    return digits


def write(path_prefix, samples):
    with open(path_prefix + "-images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 0x803, len(samples), 28, 28))
        for img, _ in samples:
            f.write(bytes(min(255, max(0, round(v * 255))) for v in img))
    with open(path_prefix + "-labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 0x801, len(samples)))
        f.write(bytes(label for _, label in samples))


def main():
    pkg, out = sys.argv[1], sys.argv[2]
    digits = load(pkg)
    train, test = [], []
    for i in range(TRAIN_PER_CLASS):
        for d in range(10):
            train.append((digits[d][i], d))
    for i in range(TRAIN_PER_CLASS, TRAIN_PER_CLASS + TEST_PER_CLASS):
        for d in range(10):
            test.append((digits[d][i], d))
    os.makedirs(out, exist_ok=True)
    write(os.path.join(out, "train"), train)
    write(os.path.join(out, "t10k"), test)


if __name__ == "__main__":
    main()
