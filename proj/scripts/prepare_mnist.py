#!/usr/bin/env python3
"""Build an MNIST IDX subset from the npm `mnist` package.

The npm package (https://www.npmjs.com/package/mnist) ships ~1000 real MNIST
digits per class as JSON, pixel values normalized to [0,1] at 3 decimals.
This script recovers the original u8 pixels and writes a class-balanced
subset as standard big-endian IDX files:

    python3 scripts/prepare_mnist.py --src node_modules/mnist/src/digits \
        --out data/mnist --per-class 600

Output: <out>/mnist-images-idx3-ubyte (magic 2051, dims [n,28,28]) and
<out>/mnist-labels-idx1-ubyte (magic 2049). Samples are interleaved
round-robin across classes.
"""
import argparse
import json
import struct
from pathlib import Path


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--src", required=True, help="directory with 0.json .. 9.json")
    ap.add_argument("--out", required=True)
    ap.add_argument("--per-class", type=int, default=600)
    args = ap.parse_args()

    src = Path(args.src)
    per_digit = []
    for d in range(10):
        flat = json.loads((src / f"{d}.json").read_text())["data"]
        n = len(flat) // 784
        if n < args.per_class:
            raise SystemExit(f"digit {d}: only {n} samples, need {args.per_class}")
        px = bytes(round(v * 255) for v in flat[: args.per_class * 784])
        per_digit.append(px)

    images = bytearray()
    labels = bytearray()
    for i in range(args.per_class):
        for d in range(10):
            images += per_digit[d][i * 784 : (i + 1) * 784]
            labels.append(d)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    n = args.per_class * 10
    (out / "mnist-images-idx3-ubyte").write_bytes(
        struct.pack(">iiii", 0x00000803, n, 28, 28) + bytes(images)
    )
    (out / "mnist-labels-idx1-ubyte").write_bytes(
        struct.pack(">ii", 0x00000801, n) + bytes(labels)
    )
    print(f"wrote {n} samples to {out}")


if __name__ == "__main__":
    main()
