"""Binary PGM (P5) and PPM (P6) readers/writers, bit-exact, maxval 255."""

from __future__ import annotations

import numpy as np


class ImageFormatError(ValueError):
    """File is not a valid P5/P6 netpbm image."""


def _read_header_tokens(data: bytes, count: int):
    """Pull `count` whitespace-separated tokens off a netpbm header,
    honouring '#' comments. Returns (tokens, offset_past_header)."""
    tokens = []
    i = 0
    n = len(data)
    while len(tokens) < count:
        while i < n and data[i : i + 1].isspace():
            i += 1
        if i < n and data[i : i + 1] == b"#":
            while i < n and data[i] != 0x0A:
                i += 1
            continue
        start = i
        while i < n and not data[i : i + 1].isspace():
            i += 1
        if start == i:
            raise ImageFormatError("truncated netpbm header")
        tokens.append(data[start:i])
    # exactly one whitespace byte separates the header from raster data
    return tokens, i + 1


def _load_netpbm(path, magic: bytes, channels: int) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    tokens, off = _read_header_tokens(data, 4)
    if tokens[0] != magic:
        raise ImageFormatError(f"{path}: expected {magic.decode()}, got {tokens[0]!r}")
    try:
        width, height, maxval = (int(t) for t in tokens[1:4])
    except ValueError as exc:
        raise ImageFormatError(f"{path}: non-numeric header field") from exc
    if maxval != 255:
        raise ImageFormatError(f"{path}: only maxval 255 supported, got {maxval}")
    need = width * height * channels
    raster = data[off : off + need]
    if len(raster) != need:
        raise ImageFormatError(f"{path}: raster has {len(raster)} bytes, expected {need}")
    arr = np.frombuffer(raster, dtype=np.uint8)
    if channels == 1:
        return arr.reshape(height, width).copy()
    return arr.reshape(height, width, channels).copy()


def load_pgm(path) -> np.ndarray:
    """Read a binary PGM into a (H, W) uint8 array."""
    return _load_netpbm(path, b"P5", 1)


def load_ppm(path) -> np.ndarray:
    """Read a binary PPM into a (H, W, 3) uint8 array."""
    return _load_netpbm(path, b"P6", 3)


def load_image(path) -> np.ndarray:
    """Read a PGM or PPM by magic number; grayscale is expanded to RGB."""
    with open(path, "rb") as fh:
        magic = fh.read(2)
    if magic == b"P5":
        g = load_pgm(path)
        return np.stack([g, g, g], axis=2)
    if magic == b"P6":
        return load_ppm(path)
    raise ImageFormatError(f"{path}: unsupported magic {magic!r} (want P5 or P6)")


def save_pgm(path, img: np.ndarray) -> None:
    """Write a (H, W) uint8 array as binary PGM."""
    img = np.ascontiguousarray(img, dtype=np.uint8)
    if img.ndim != 2:
        raise ValueError(f"PGM needs a 2-d array, got shape {img.shape}")
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (img.shape[1], img.shape[0]))
        fh.write(img.tobytes())


def save_mask_pgm(path, mask: np.ndarray) -> None:
    """Write a boolean mask as a 0/255 binary PGM."""
    save_pgm(path, np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8))


def load_mask_pgm(path) -> np.ndarray:
    """Read a PGM as a boolean mask; any nonzero byte is foreground."""
    return load_pgm(path) > 0


def save_ppm(path, img: np.ndarray) -> None:
    """Write a (H, W, 3) uint8 array as binary PPM."""
    img = np.ascontiguousarray(img, dtype=np.uint8)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"PPM needs a (H, W, 3) array, got shape {img.shape}")
    with open(path, "wb") as fh:
        fh.write(b"P6\n%d %d\n255\n" % (img.shape[1], img.shape[0]))
        fh.write(img.tobytes())
