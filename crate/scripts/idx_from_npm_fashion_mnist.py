#!/usr/bin/env python3
"""Rebuild Fashion MNIST IDX archives from the per-category JSON files shipped
in the `fashion-mnist` npm package (`npm pack fashion-mnist`).

The npm package stores the 70,000 images grouped by category, so the original
sample order of the published archives is lost. Images 0..6000 of every
category become the training split and 6000..7000 the test split; samples are
interleaved with a seeded shuffle. Counts and shapes match the published files
(60,000 / 10,000 images of 28x28), byte order does not.

  python3 scripts/idx_from_npm_fashion_mnist.py PACKAGE_DIR DEST [--subset DEST2]

`--subset` additionally writes the 1,000-image desk-scale subset
(50 train + 50 test images per category) used by the acceptance tests.
"""
import argparse
import gzip
import json
import os
import random
import struct

PER_CATEGORY = 7000
TRAIN_PER_CATEGORY = 6000


def write_idx(path, images, labels):
    with gzip.GzipFile(path + "-images-idx3-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">IIII", 0x00000803, len(images), 28, 28))
        for img in images:
            f.write(bytes(img))
    with gzip.GzipFile(path + "-labels-idx1-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(bytes(labels))


def split(pairs, seed):
    rng = random.Random(seed)
    rng.shuffle(pairs)
    return [p[1] for p in pairs], [p[0] for p in pairs]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("package_dir")
    ap.add_argument("dest")
    ap.add_argument("--subset")
    ap.add_argument("--seed", type=int, default=2024)
    args = ap.parse_args()

    train, test, sub_train, sub_test = [], [], [], []
    for c in range(10):
        path = os.path.join(args.package_dir, "src", "clothes", f"{c}.json")
        with open(path) as f:
            # category 0 carries two empty placeholder entries
            data = [img for img in json.load(f)["data"] if img][:PER_CATEGORY]
        assert len(data) == PER_CATEGORY and all(len(img) == 784 for img in data)
        train += [(c, img) for img in data[:TRAIN_PER_CATEGORY]]
        test += [(c, img) for img in data[TRAIN_PER_CATEGORY:]]
        sub_train += [(c, img) for img in data[TRAIN_PER_CATEGORY:TRAIN_PER_CATEGORY + 50]]
        sub_test += [(c, img) for img in data[TRAIN_PER_CATEGORY + 50:TRAIN_PER_CATEGORY + 100]]

    os.makedirs(args.dest, exist_ok=True)
    write_idx(os.path.join(args.dest, "train"), *split(train, args.seed))
    write_idx(os.path.join(args.dest, "t10k"), *split(test, args.seed + 1))
    if args.subset:
        os.makedirs(args.subset, exist_ok=True)
        write_idx(os.path.join(args.subset, "subset-train"), *split(sub_train, args.seed + 2))
        write_idx(os.path.join(args.subset, "subset-test"), *split(sub_test, args.seed + 3))


if __name__ == "__main__":
    main()
