#!/usr/bin/env python3
"""Regenerate the bundled MNIST subset under data/mnist/.

The repository ships a 10,000-digit subset (8,500 train / 1,500 test) in
the standard IDX container format. This script rebuilds those four files
from either source:

  1. the official MNIST IDX files (pass --from-idx DIR pointing at the
     uncompressed train-images-idx3-ubyte etc.), or
  2. the `mnist` npm package's per-digit JSON arrays (pass --from-json DIR
     pointing at its src/digits/ folder), which bundles the same images
     as normalized floats.

The subset is a seeded shuffle of the pooled digits, so regeneration is
byte-reproducible.
"""

import argparse
import json
import pathlib
import random
import struct
import sys

TRAIN_COUNT = 8500
TEST_COUNT = 1500
SEED = 0
SIDE = 28


def write_idx(images, labels, images_path, labels_path):
    n = len(labels)
    with open(images_path, "wb") as f:
        f.write(struct.pack(">IIII", 0x803, n, SIDE, SIDE))
        for img in images:
            f.write(bytes(img))
    with open(labels_path, "wb") as f:
        f.write(struct.pack(">II", 0x801, n))
        f.write(bytes(labels))


def load_from_json(digits_dir):
    samples = []
    for digit in range(10):
        path = pathlib.Path(digits_dir) / f"{digit}.json"
        flat = json.loads(path.read_text())["data"]
        if len(flat) % (SIDE * SIDE) != 0:
            sys.exit(f"{path}: payload is not a multiple of {SIDE * SIDE}")
        for start in range(0, len(flat), SIDE * SIDE):
            pixels = [min(255, max(0, round(v * 255))) for v in flat[start:start + SIDE * SIDE]]
            samples.append((pixels, digit))
    return samples


def load_from_idx(idx_dir):
    samples = []
    for img_name, lab_name in (("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
                               ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte")):
        img_path = pathlib.Path(idx_dir) / img_name
        lab_path = pathlib.Path(idx_dir) / lab_name
        img = img_path.read_bytes()
        lab = lab_path.read_bytes()
        magic, n, rows, cols = struct.unpack(">IIII", img[:16])
        if magic != 0x803 or rows != SIDE or cols != SIDE:
            sys.exit(f"{img_path}: unexpected header {magic:#x} {rows}x{cols}")
        lmagic, ln = struct.unpack(">II", lab[:8])
        if lmagic != 0x801 or ln != n:
            sys.exit(f"{lab_path}: unexpected header {lmagic:#x} count {ln}")
        for i in range(n):
            pixels = list(img[16 + i * SIDE * SIDE: 16 + (i + 1) * SIDE * SIDE])
            samples.append((pixels, lab[8 + i]))
    return samples


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--from-json", metavar="DIR", help="mnist npm package src/digits dir")
    source.add_argument("--from-idx", metavar="DIR", help="dir with official uncompressed IDX files")
    parser.add_argument("--out", default="data/mnist", help="output directory (default data/mnist)")
    args = parser.parse_args()

    samples = load_from_json(args.from_json) if args.from_json else load_from_idx(args.from_idx)
    if len(samples) < TRAIN_COUNT + TEST_COUNT:
        sys.exit(f"only {len(samples)} samples available, need {TRAIN_COUNT + TEST_COUNT}")

    random.Random(SEED).shuffle(samples)
    samples = samples[: TRAIN_COUNT + TEST_COUNT]

    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    train, test = samples[:TRAIN_COUNT], samples[TRAIN_COUNT:]
    write_idx([s[0] for s in train], [s[1] for s in train],
              out / "train-images-idx3-ubyte", out / "train-labels-idx1-ubyte")
    write_idx([s[0] for s in test], [s[1] for s in test],
              out / "t10k-images-idx3-ubyte", out / "t10k-labels-idx1-ubyte")
    print(f"wrote {len(train)} train / {len(test)} test samples to {out}/")


if __name__ == "__main__":
    main()
