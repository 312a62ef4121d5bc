#!/usr/bin/env python3
"""Writes the deterministic 224x224 RGB fixture patches used for oracle records.

Five patterns with distinct color and frequency content, all derived from
literal seeds so reruns are byte-identical. Run once; the PNGs are
committed alongside the oracle records they anchor.
"""

import argparse
from pathlib import Path

import numpy as np
from PIL import Image

SIDE = 224


def gradient() -> np.ndarray:
    x = np.linspace(0, 255, SIDE, dtype=np.float32)
    img = np.empty((SIDE, SIDE, 3), dtype=np.float32)
    img[:, :, 0] = x[np.newaxis, :]
    img[:, :, 1] = x[:, np.newaxis]
    img[:, :, 2] = 255.0 - x[np.newaxis, :]
    return img.astype(np.uint8)


def stripes() -> np.ndarray:
    x = np.arange(SIDE)
    diag = (x[np.newaxis, :] + x[:, np.newaxis]) // 16 % 2
    img = np.where(diag[..., np.newaxis] == 0, (200, 80, 60), (40, 90, 180))
    return img.astype(np.uint8)


def checker() -> np.ndarray:
    rng = np.random.default_rng(101)
    x = np.arange(SIDE) // 28
    board = (x[np.newaxis, :] + x[:, np.newaxis]) % 2
    img = np.where(board[..., np.newaxis] == 0, (230, 220, 210), (60, 50, 70)).astype(np.float32)
    img += rng.normal(0, 6, size=img.shape).astype(np.float32)
    return np.clip(img, 0, 255).astype(np.uint8)


def blobs() -> np.ndarray:
    rng = np.random.default_rng(202)
    yy, xx = np.mgrid[0:SIDE, 0:SIDE].astype(np.float32)
    img = np.full((SIDE, SIDE, 3), 235.0, dtype=np.float32)
    for _ in range(12):
        cx, cy = rng.uniform(20, SIDE - 20, size=2)
        radius = rng.uniform(8, 30)
        color = rng.uniform(40, 180, size=3)
        dist2 = (xx - cx) ** 2 + (yy - cy) ** 2
        weight = np.exp(-dist2 / (2 * radius**2))[..., np.newaxis]
        img = img * (1 - weight) + color * weight
    return np.clip(img, 0, 255).astype(np.uint8)


def waves() -> np.ndarray:
    u = np.linspace(0, 1, SIDE, dtype=np.float32)[np.newaxis, :]
    v = np.linspace(0, 1, SIDE, dtype=np.float32)[:, np.newaxis]
    img = np.empty((SIDE, SIDE, 3), dtype=np.float32)
    img[:, :, 0] = 130 + 70 * np.sin(2 * np.pi * (3 * u + 1 * v))
    img[:, :, 1] = 120 + 60 * np.sin(2 * np.pi * (1 * u + 4 * v) + 1.0)
    img[:, :, 2] = 110 + 50 * np.sin(2 * np.pi * (5 * u - 2 * v) + 2.0)
    return np.clip(img, 0, 255).astype(np.uint8)


PATTERNS = {
    "gradient.png": gradient,
    "stripes.png": stripes,
    "checker.png": checker,
    "blobs.png": blobs,
    "waves.png": waves,
}


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default=str(Path(__file__).parent / "fixtures"))
    args = parser.parse_args()
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, build in PATTERNS.items():
        Image.fromarray(build()).save(out_dir / name, format="PNG")
        print(out_dir / name)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
