"""Silhouette extraction: grayscale conversion, local max-normalization,
Otsu thresholding, opening, largest-blob selection and hole filling.

The optimized chain turns a color view into a binary mask of the largest
object while dropping cast shadows; the naive chain (grayscale + Otsu
only) is the baseline it is compared against.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce

import numpy as np
from scipy import ndimage

GrayImage = np.ndarray  # (H, W) uint8
BinaryMask = np.ndarray  # (H, W) bool


class EmptySilhouette(Exception):
    """Segmentation produced a mask with zero foreground pixels."""


@dataclass(frozen=True)
class StructuringElement:
    mask: np.ndarray  # small 2-d bool grid
    anchor: tuple[int, int] | None = None  # (dy, dx), defaults to centre

    def __post_init__(self):
        m = np.asarray(self.mask, dtype=bool)
        m.setflags(write=False)
        object.__setattr__(self, "mask", m)
        if m.ndim != 2 or not m.any():
            raise ValueError("structuring element needs a 2-d grid with >=1 true cell")
        anchor = self.anchor if self.anchor is not None else (m.shape[0] // 2, m.shape[1] // 2)
        if not (0 <= anchor[0] < m.shape[0] and 0 <= anchor[1] < m.shape[1]):
            raise ValueError(f"anchor {anchor} outside {m.shape} grid")
        object.__setattr__(self, "anchor", anchor)

    def offsets(self):
        """(dy, dx) of every true cell relative to the anchor."""
        ys, xs = np.nonzero(self.mask)
        return [(int(y - self.anchor[0]), int(x - self.anchor[1])) for y, x in zip(ys, xs)]

    @staticmethod
    def square(n: int) -> "StructuringElement":
        return StructuringElement(mask=np.ones((n, n), dtype=bool))


@dataclass(frozen=True)
class PreprocessConfig:
    window: int = 3
    se: StructuringElement = field(default_factory=lambda: StructuringElement.square(3))
    connectivity: int = 8

    def __post_init__(self):
        if self.window < 1 or self.window % 2 == 0:
            raise ValueError(f"window must be odd and >= 1, got {self.window}")
        if self.connectivity not in (4, 8):
            raise ValueError(f"connectivity must be 4 or 8, got {self.connectivity}")


def to_grayscale(img: np.ndarray) -> GrayImage:
    """(H, W, 3) uint8 RGB -> uint8 luma, g = round(.299 R + .587 G + .114 B)."""
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) RGB, got shape {img.shape}")
    f = img.astype(np.float64)
    g = np.floor(0.299 * f[:, :, 0] + 0.587 * f[:, :, 1] + 0.114 * f[:, :, 2] + 0.5)
    return np.clip(g, 0, 255).astype(np.uint8)


def _shift(arr: np.ndarray, dy: int, dx: int, fill):
    """arr translated by (dy, dx); vacated cells take `fill`."""
    out = np.full_like(arr, fill)
    h, w = arr.shape
    ys = slice(max(dy, 0), min(h + dy, h))
    xs = slice(max(dx, 0), min(w + dx, w))
    ys_src = slice(max(-dy, 0), min(h - dy, h))
    xs_src = slice(max(-dx, 0), min(w - dx, w))
    out[ys, xs] = arr[ys_src, xs_src]
    return out


def _sliding_max(img: np.ndarray, window: int) -> np.ndarray:
    """Max over a centred window x window neighbourhood, clamped at borders.

    Separable row/column passes; zero fill equals border clamping because
    intensities are unsigned.
    """
    r = window // 2
    rows = reduce(np.maximum, (_shift(img, 0, dx, 0) for dx in range(-r, r + 1)))
    return reduce(np.maximum, (_shift(rows, dy, 0, 0) for dy in range(-r, r + 1)))


def normalize_local(img: GrayImage, window: int = 3) -> GrayImage:
    """Divide each pixel by its window maximum, rescaled to [0, 255].

    out = round(255 * p / m) with m the clamped-window maximum; m == 0
    maps to 0. Smooth regions go to 255 regardless of their level, so a
    region darkened by a multiplicative shadow normalizes exactly like
    the unshadowed background around it.
    """
    if window < 1 or window % 2 == 0:
        raise ValueError(f"window must be odd and >= 1, got {window}")
    p = np.asarray(img, dtype=np.int64)
    m = _sliding_max(p, window)
    out = np.zeros_like(p)
    nz = m > 0
    # exact round-half-up of 255*p/m in integers
    out[nz] = (510 * p[nz] + m[nz]) // (2 * m[nz])
    return out.astype(np.uint8)


def otsu_from_histogram(hist: np.ndarray) -> int:
    """Threshold maximizing between-class variance over a 256-bin histogram.

    Exact integer arithmetic: sigma_b^2(t) is proportional to
    (S0*n1 - S1*n0)^2 / (n0*n1), compared across t by cross-multiplying,
    so ties break deterministically toward the smallest t. A single
    occupied bin (constant image) returns that bin.
    """
    hist = np.asarray(hist, dtype=np.int64)
    if hist.shape != (256,) or (hist < 0).any():
        raise ValueError("histogram must be 256 nonnegative counts")
    n = int(hist.sum())
    if n == 0:
        raise ValueError("empty histogram")
    occupied = np.nonzero(hist)[0]
    if occupied.size == 1:
        return int(occupied[0])

    counts = [int(c) for c in hist]
    total_sum = sum(i * c for i, c in enumerate(counts))
    best_t, best_num, best_den = 0, -1, 1
    n0 = 0
    s0 = 0
    for t in range(256):
        n0 += counts[t]
        s0 += t * counts[t]
        n1 = n - n0
        if n0 == 0 or n1 == 0:
            continue
        a = s0 * n1 - (total_sum - s0) * n0
        num = a * a
        den = n0 * n1
        if num * best_den > best_num * den:  # strict: keeps the smallest argmax
            best_t, best_num, best_den = t, num, den
    return best_t


def otsu_threshold(img: GrayImage) -> int:
    """Otsu threshold of a uint8 image (class 0 = pixels <= t)."""
    img = np.asarray(img, dtype=np.uint8)
    if img.size == 0:
        raise ValueError("empty image")
    return otsu_from_histogram(np.bincount(img.ravel(), minlength=256))


def threshold_apply(img: GrayImage, t: int) -> BinaryMask:
    """Foreground = pixels strictly above t."""
    if not 0 <= t <= 255:
        raise ValueError(f"threshold {t} outside [0, 255]")
    return np.asarray(img) > t


def erode(mask: BinaryMask, se: StructuringElement) -> BinaryMask:
    """Binary erosion; neighbours outside the image count as background."""
    mask = np.asarray(mask, dtype=bool)
    return reduce(np.logical_and, (_shift(mask, -dy, -dx, False) for dy, dx in se.offsets()))


def dilate(mask: BinaryMask, se: StructuringElement) -> BinaryMask:
    """Binary dilation; contributions falling outside the image are dropped."""
    mask = np.asarray(mask, dtype=bool)
    return reduce(np.logical_or, (_shift(mask, dy, dx, False) for dy, dx in se.offsets()))


def morph_open(mask: BinaryMask, se: StructuringElement) -> BinaryMask:
    """Opening: erosion followed by dilation."""
    return dilate(erode(mask, se), se)


def _conn_structure(connectivity: int) -> np.ndarray:
    if connectivity == 8:
        return np.ones((3, 3), dtype=bool)
    if connectivity == 4:
        return np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
    raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")


def largest_component(mask: BinaryMask, connectivity: int = 8) -> BinaryMask:
    """Keep only the largest connected foreground component.

    Size ties go to the component whose first pixel in row-major order
    comes first. An empty mask stays empty.
    """
    mask = np.asarray(mask, dtype=bool)
    labels, nlab = ndimage.label(mask, structure=_conn_structure(connectivity))
    if nlab == 0:
        return np.zeros_like(mask)
    sizes = np.bincount(labels.ravel())[1:]
    best = int(np.max(sizes))
    candidates = np.nonzero(sizes == best)[0] + 1
    if candidates.size == 1:
        keep = candidates[0]
    else:
        flat = labels.ravel()
        keep = min(candidates, key=lambda lab: int(np.argmax(flat == lab)))
    return labels == keep


def fill_holes(mask: BinaryMask) -> BinaryMask:
    """Turn background pixels not 4-connected to the border into foreground."""
    mask = np.asarray(mask, dtype=bool)
    bg_labels, nlab = ndimage.label(~mask, structure=_conn_structure(4))
    if nlab == 0:
        return mask.copy()
    border = np.zeros_like(mask)
    border[0, :] = border[-1, :] = True
    border[:, 0] = border[:, -1] = True
    outside = np.unique(bg_labels[border & ~mask])
    hole = (bg_labels > 0) & ~np.isin(bg_labels, outside)
    return mask | hole


def extract_silhouette(
    img: np.ndarray,
    cfg: PreprocessConfig | None = None,
    *,
    naive: bool = False,
    invert: bool = False,
) -> BinaryMask:
    """Full preprocessing chain from a color view to the object mask.

    Optimized mode: grayscale -> local max-normalization -> (invert) ->
    Otsu -> opening -> largest component -> hole filling. Naive mode
    keeps only grayscale -> (invert) -> Otsu, the plain-threshold
    baseline. `invert` flips the intensity image just before
    thresholding, for scenes whose object is darker than the background;
    after normalization the object then sits on the bright side.

    Raises EmptySilhouette when no foreground pixel survives.
    """
    cfg = cfg or PreprocessConfig()
    g = to_grayscale(img)
    if not naive:
        g = normalize_local(g, cfg.window)
    if invert:
        g = (255 - g.astype(np.int16)).astype(np.uint8)
    mask = threshold_apply(g, otsu_threshold(g))
    if not naive:
        mask = morph_open(mask, cfg.se)
        mask = largest_component(mask, cfg.connectivity)
        mask = fill_holes(mask)
    if not mask.any():
        raise EmptySilhouette("no foreground pixels after segmentation")
    return mask
