#!/usr/bin/env python3
"""Build the desk-scale digit dataset as MNIST-style IDX files.

Source: scikit-learn's bundled handwritten digits (UCI optical digits,
1797 samples of 8x8 grayscale), upscaled to 28x28 by nearest neighbor and
augmented with one-pixel shifts to reach 2000 train / 1000 test images.
Train and test are split by original sample before augmentation, so no
digit appears on both sides.

Output: data/mnist/{train,t10k}-{images-idx3,labels-idx1}-ubyte
"""

import struct
from pathlib import Path

import numpy as np
from sklearn.datasets import load_digits


def upscale(images):
    idx = np.minimum((np.arange(28) / 3.5).astype(int), 7)
    return images[:, idx][:, :, idx]


def shift(img, dy, dx):
    out = np.zeros_like(img)
    ys, yd = (slice(dy, None), slice(None, -dy)) if dy > 0 else (slice(None, dy or None), slice(-dy or None, None))
    xs, xd = (slice(dx, None), slice(None, -dx)) if dx > 0 else (slice(None, dx or None), slice(-dx or None, None))
    out[ys, xs] = img[yd, xd]
    return out


def augment(images, labels, target, rng):
    shifts = [(0, 1), (0, -1), (1, 0), (-1, 0)]
    imgs = list(images)
    labs = list(labels)
    i = 0
    while len(imgs) < target:
        dy, dx = shifts[rng.integers(len(shifts))]
        imgs.append(shift(images[i % len(images)], dy, dx))
        labs.append(labels[i % len(labels)])
        i += 1
    return np.stack(imgs[:target]), np.array(labs[:target], dtype=np.uint8)


def write_idx(out_dir, stem, images, labels):
    n = len(images)
    with open(out_dir / f"{stem}-images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 0x803, n, 28, 28))
        f.write(images.astype(np.uint8).tobytes())
    with open(out_dir / f"{stem}-labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 0x801, n))
        f.write(labels.astype(np.uint8).tobytes())


def main():
    rng = np.random.default_rng(20240824)
    d = load_digits()
    images = upscale((d.images / 16.0 * 255.0).round().astype(np.uint8))
    labels = d.target.astype(np.uint8)

    perm = rng.permutation(len(images))
    train_n = 1200
    tr, te = perm[:train_n], perm[train_n:]
    train_imgs, train_labs = augment(images[tr], labels[tr], 2000, rng)
    test_imgs, test_labs = augment(images[te], labels[te], 1000, rng)

    out_dir = Path(__file__).resolve().parent.parent / "data" / "mnist"
    out_dir.mkdir(parents=True, exist_ok=True)
    write_idx(out_dir, "train", train_imgs, train_labs)
    write_idx(out_dir, "t10k", test_imgs, test_labs)
    print(f"wrote {len(train_imgs)} train / {len(test_imgs)} test images to {out_dir}")


if __name__ == "__main__":
    main()
