"""Render the procedural smiley-face image used by the image-smiley preset."""

import argparse
from pathlib import Path

import numpy as np

from mmdiff.targets import write_pgm


def smiley(size=64, width=0.035):
    u = (np.arange(size) + 0.5) / size
    X, Y = np.meshgrid(u, 1.0 - u)   # row 0 at the top
    cx, cy = X - 0.5, Y - 0.5
    r = np.hypot(cx, cy)
    face = np.exp(-0.5 * ((r - 0.40) / width) ** 2)
    eyes = sum(np.exp(-0.5 * (np.hypot(X - ex, Y - 0.62) / 0.045) ** 2) for ex in (0.36, 0.64))
    # lower arc of a circle around (0.5, 0.52)
    rs = np.hypot(X - 0.5, Y - 0.52)
    arc = np.exp(-0.5 * ((rs - 0.22) / width) ** 2) * (Y < 0.45)
    img = face + eyes + arc
    return np.round(255 * img / img.max()).astype(int)


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--size", type=int, default=64)
    ap.add_argument("--out", default=str(Path(__file__).resolve().parents[1] / "src/mmdiff/presets/smiley.pgm"))
    args = ap.parse_args()
    write_pgm(args.out, smiley(args.size))
    print(args.out)
