"""Binary PPM (P6) reading and writing.

PPM is the one mandatory image format of this artifact: trivial to parse,
byte-exact, and diffable.  Grayscale arrays are replicated across the three
channels on write; reads can either keep RGB or average down to grayscale.
"""
from __future__ import annotations

import numpy as np


def write_ppm(path, image: np.ndarray) -> None:
    """Write a (H, W) grayscale or (H, W, 3) RGB uint8 array as binary PPM."""
    image = np.asarray(image)
    if image.dtype != np.uint8:
        raise ValueError("PPM writer expects uint8 pixels")
    if image.ndim == 2:
        image = np.repeat(image[:, :, None], 3, axis=2)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError("image must be (H, W) or (H, W, 3)")
    h, w = image.shape[:2]
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        f.write(image.tobytes())


def read_ppm(path, grayscale: bool = False) -> np.ndarray:
    """Read a binary PPM.  Returns (H, W, 3) uint8, or (H, W) with
    ``grayscale=True`` (channel mean, rounded)."""
    with open(path, "rb") as f:
        data = f.read()
    fields: list[bytes] = []
    pos = 0
    while len(fields) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        fields.append(data[start:pos])
    if fields[0] != b"P6":
        raise ValueError(f"not a binary PPM file: {path}")
    w, h, maxval = int(fields[1]), int(fields[2]), int(fields[3])
    if maxval != 255:
        raise ValueError("only maxval 255 is supported")
    pos += 1  # single whitespace after maxval
    pixels = np.frombuffer(data, dtype=np.uint8, count=w * h * 3, offset=pos)
    image = pixels.reshape(h, w, 3)
    if grayscale:
        return np.round(image.mean(axis=2)).astype(np.uint8)
    return image.copy()
