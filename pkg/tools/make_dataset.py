#!/usr/bin/env python3
"""Render a deterministic handwritten-style digit dataset into IDX files.

The environment this repository is developed in has no route to the
usual MNIST mirrors, so the committed dataset is synthesized: digits
drawn with system TrueType fonts, randomly shifted, rotated, sheared,
scaled, thickness-varied, and lightly blurred, then stored in the same
28x28 IDX containers MNIST uses.  A fixed seed makes the files
reproducible bit for bit.
"""

from __future__ import annotations

import argparse
import glob
import os
import sys

import numpy as np
from PIL import Image, ImageDraw, ImageFilter, ImageFont

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))
from fdsnn.oracle import write_idx  # noqa: E402

FONT_DIRS = [
    "/usr/share/fonts/truetype/dejavu",
]
FONT_NAMES = ["DejaVuSans.ttf", "DejaVuSans-Bold.ttf", "DejaVuSerif.ttf",
              "DejaVuSerif-Bold.ttf", "DejaVuSansMono.ttf",
              "DejaVuSansMono-Bold.ttf"]


def find_fonts() -> list[str]:
    found = []
    for d in FONT_DIRS:
        for name in FONT_NAMES:
            p = os.path.join(d, name)
            if os.path.exists(p):
                found.append(p)
    if not found:
        found = sorted(glob.glob("/usr/share/fonts/**/*.ttf", recursive=True))
    if not found:
        raise RuntimeError("no TrueType fonts available")
    return found


def render_digit(digit: int, font_path: str, rng: np.random.Generator) -> np.ndarray:
    size = int(rng.integers(30, 44))
    font = ImageFont.truetype(font_path, size)
    canvas = Image.new("L", (64, 64), 0)
    draw = ImageDraw.Draw(canvas)
    draw.text((32, 34), str(digit), fill=255, font=font, anchor="mm")

    angle = rng.uniform(-14, 14)
    shear = rng.uniform(-0.25, 0.25)
    canvas = canvas.rotate(angle, resample=Image.BILINEAR, center=(32, 34))
    canvas = canvas.transform((64, 64), Image.AFFINE,
                              (1, shear, -32 * shear, 0, 1, 0),
                              resample=Image.BILINEAR)
    if rng.random() < 0.5:
        canvas = canvas.filter(ImageFilter.MaxFilter(3))  # thicker stroke
    canvas = canvas.filter(ImageFilter.GaussianBlur(rng.uniform(0.4, 1.0)))

    arr = np.asarray(canvas, dtype=np.float64)
    ys, xs = np.nonzero(arr > 16)
    if len(ys) == 0:
        return render_digit(digit, font_path, rng)
    crop = canvas.crop((xs.min(), ys.min(), xs.max() + 1, ys.max() + 1))
    # fit the glyph into a 20x20 box then center in 28x28, MNIST style
    w, h = crop.size
    s = 20.0 / max(w, h)
    crop = crop.resize((max(1, round(w * s)), max(1, round(h * s))),
                       Image.BILINEAR)
    out = Image.new("L", (28, 28), 0)
    dx = int(rng.integers(-2, 3))
    dy = int(rng.integers(-2, 3))
    out.paste(crop, ((28 - crop.size[0]) // 2 + dx, (28 - crop.size[1]) // 2 + dy))
    arr = np.asarray(out, dtype=np.float64)
    peak = arr.max()
    if peak > 0:
        arr = arr * (255.0 * rng.uniform(0.85, 1.0) / peak)
    return np.clip(np.round(arr), 0, 255).astype(np.uint8)


def make_split(count: int, fonts: list[str], rng: np.random.Generator):
    images = np.zeros((count, 28, 28), dtype=np.uint8)
    labels = np.zeros(count, dtype=np.uint8)
    for i in range(count):
        digit = i % 10
        font = fonts[int(rng.integers(len(fonts)))]
        images[i] = render_digit(digit, font, rng)
        labels[i] = digit
    order = rng.permutation(count)
    return images[order], labels[order]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--train", type=int, default=6000)
    ap.add_argument("--test", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=20240901)
    ap.add_argument("--out", default=os.path.join(os.path.dirname(__file__),
                                                  "..", "data"))
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    fonts = find_fonts()
    os.makedirs(args.out, exist_ok=True)
    tr_x, tr_y = make_split(args.train, fonts, rng)
    te_x, te_y = make_split(args.test, fonts, rng)
    write_idx(os.path.join(args.out, "train-images.idx3-ubyte"), tr_x)
    write_idx(os.path.join(args.out, "train-labels.idx1-ubyte"), tr_y)
    write_idx(os.path.join(args.out, "test-images.idx3-ubyte"), te_x)
    write_idx(os.path.join(args.out, "test-labels.idx1-ubyte"), te_y)
    print(f"wrote {args.train}+{args.test} images with {len(fonts)} fonts "
          f"to {os.path.abspath(args.out)}")


if __name__ == "__main__":
    main()
