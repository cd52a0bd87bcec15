#!/usr/bin/env python3
"""Convert the digit JSON files shipped in the npm `mnist` package into IDX files.

The npm package stores 10,000 MNIST digits as per-class JSON arrays of
pixel/255 rounded to three decimals; round(v * 255) recovers the original
byte exactly. Samples are written in a fixed shuffled order so that any
prefix of the files is class-balanced in expectation.

    npm pack mnist && tar xzf mnist-*.tgz
    python3 tools/mnist_json_to_idx.py package/src/digits data/mnist
"""
import argparse
import json
import random
import struct
from pathlib import Path


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("digits_dir", type=Path)
    ap.add_argument("out_dir", type=Path)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    samples = []
    for label in range(10):
        flat = json.loads((args.digits_dir / f"{label}.json").read_text())["data"]
        assert len(flat) % 784 == 0
        for k in range(len(flat) // 784):
            pixels = bytes(int(round(v * 255)) for v in flat[k * 784:(k + 1) * 784])
            samples.append((pixels, label))
    random.Random(args.seed).shuffle(samples)

    args.out_dir.mkdir(parents=True, exist_ok=True)
    n = len(samples)
    with open(args.out_dir / "images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, n, 28, 28))
        for pixels, _ in samples:
            f.write(pixels)
    with open(args.out_dir / "labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 0x00000801, n))
        f.write(bytes(label for _, label in samples))
    print(f"wrote {n} samples to {args.out_dir}")


if __name__ == "__main__":
    main()
