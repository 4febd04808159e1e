#!/usr/bin/env python3
"""Build a 10,000-digit MNIST subset in IDX format.

Source: the digit JSON files bundled with the `mnist` npm package
(`npm pack mnist`, then point --digits at package/src/digits). Pixels there
are byte/255 rounded to three decimals, so round(v * 255) recovers the byte.
Rows are shuffled with a fixed seed so that a tail split is class-balanced.
"""
import argparse
import json
import random
import struct
from pathlib import Path


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--digits", required=True, type=Path)
    ap.add_argument("--out", required=True, type=Path)
    ap.add_argument("--seed", type=int, default=2017)
    args = ap.parse_args()

    rows = []
    for label in range(10):
        flat = json.loads((args.digits / f"{label}.json").read_text())["data"]
        assert len(flat) % 784 == 0
        for k in range(len(flat) // 784):
            pix = bytes(min(255, max(0, round(v * 255))) for v in flat[k * 784:(k + 1) * 784])
            rows.append((pix, label))
    random.Random(args.seed).shuffle(rows)

    args.out.mkdir(parents=True, exist_ok=True)
    with open(args.out / "images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 2051, len(rows), 28, 28))
        for pix, _ in rows:
            f.write(pix)
    with open(args.out / "labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 2049, len(rows)))
        f.write(bytes(label for _, label in rows))
    print(f"wrote {len(rows)} digits to {args.out}")


if __name__ == "__main__":
    main()
