#!/usr/bin/env python3
"""Regenerates the toy10 fixture: five colour classes with two images each.

Images are 40x40 with a class colour, a diagonal stripe pattern and a small
deterministic noise term. Even-numbered images are PNG, odd-numbered PPM.
Standard library only.
"""

import json
import random
import struct
import zlib
from pathlib import Path

CLASSES = {
    "red": (200, 40, 40),
    "green": (40, 180, 60),
    "blue": (40, 60, 200),
    "yellow": (220, 200, 40),
    "purple": (140, 50, 170),
}
SIZE = 40


def render(colour, variant, rng):
    rows = []
    for y in range(SIZE):
        row = []
        for x in range(SIZE):
            stripe = 1.0 if ((x + y + 5 * variant) // 6) % 2 == 0 else 0.7
            px = []
            for c in colour:
                v = c * stripe + rng.randint(-12, 12)
                px.append(max(0, min(255, int(v))))
            row.append(px)
        rows.append(row)
    return rows


def write_png(path, rows):
    raw = b"".join(b"\x00" + bytes(v for px in row for v in px) for row in rows)

    def chunk(tag, data):
        body = tag + data
        return struct.pack(">I", len(data)) + body + struct.pack(">I", zlib.crc32(body) & 0xFFFFFFFF)

    header = struct.pack(">IIBBBBB", SIZE, SIZE, 8, 2, 0, 0, 0)
    path.write_bytes(b"\x89PNG\r\n\x1a\n" + chunk(b"IHDR", header) +
                     chunk(b"IDAT", zlib.compress(raw, 9)) + chunk(b"IEND", b""))


def write_ppm(path, rows):
    body = bytes(v for row in rows for px in row for v in px)
    path.write_bytes(b"P6\n%d %d\n255\n" % (SIZE, SIZE) + body)


def main():
    root = Path(__file__).resolve().parent / "toy10"
    rng = random.Random(10)
    (root / "images").mkdir(parents=True, exist_ok=True)
    (root / "classes.txt").write_text("".join(name + "\n" for name in CLASSES))
    for name, colour in CLASSES.items():
        folder = root / "images" / name
        folder.mkdir(exist_ok=True)
        for i in range(2):
            rows = render(colour, i, rng)
            if i % 2 == 0:
                write_png(folder / f"{name}_{i}.png", rows)
            else:
                write_ppm(folder / f"{name}_{i}.ppm", rows)
    config = {
        "seed": 1,
        "classes": "classes.txt",
        "augment": {"views": 16, "output_size": 24},
        "explore": {"rho": 0.3, "top_k": 3},
        "evidence": {"masks": 48, "grid_sizes": [3, 4, 6]},
        "encoder": {"backend": "toy", "dim": 24},
        "toy": {"token_dim": 8, "class_dim": 8},
        "dataset": {"root": "images", "layout": "directory"},
    }
    (root / "config.json").write_text(json.dumps(config, indent=2) + "\n")


if __name__ == "__main__":
    main()
