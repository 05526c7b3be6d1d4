"""Shared test helpers: independent brute-force oracles and data builders.

Everything here is deliberately written the slow, obvious way (BFS,
per-pixel loops, full enumeration) so the fast library implementations
are checked against genuinely independent logic.
"""

from __future__ import annotations

from collections import deque
from itertools import product

import numpy as np

from artifact import BinaryMask, RgbImage

FOUR_NEIGHBORS = ((1, 0), (-1, 0), (0, 1), (0, -1))
EIGHT_NEIGHBORS = FOUR_NEIGHBORS + ((1, 1), (1, -1), (-1, 1), (-1, -1))


def flood_fill_components(bits: np.ndarray, connectivity: str) -> list[set[tuple[int, int]]]:
    """BFS labeling; components ordered by their first pixel in raster order."""
    height, width = bits.shape
    offsets = FOUR_NEIGHBORS if connectivity == "four" else EIGHT_NEIGHBORS
    seen = np.zeros_like(bits, dtype=bool)
    components = []
    for y in range(height):
        for x in range(width):
            if not bits[y, x] or seen[y, x]:
                continue
            pixels = set()
            queue = deque([(x, y)])
            seen[y, x] = True
            while queue:
                cx, cy = queue.popleft()
                pixels.add((cx, cy))
                for dx, dy in offsets:
                    nx, ny = cx + dx, cy + dy
                    if 0 <= nx < width and 0 <= ny < height and bits[ny, nx] and not seen[ny, nx]:
                        seen[ny, nx] = True
                        queue.append((nx, ny))
            components.append(pixels)
    return components


def brute_dilate(bits: np.ndarray, radius: int) -> np.ndarray:
    """Chebyshev-ball dilation by explicit neighborhood expansion."""
    height, width = bits.shape
    out = np.zeros_like(bits)
    for y in range(height):
        for x in range(width):
            if not bits[y, x]:
                continue
            y0, y1 = max(0, y - radius), min(height, y + radius + 1)
            x0, x1 = max(0, x - radius), min(width, x + radius + 1)
            out[y0:y1, x0:x1] = True
    return out


def brute_erode(bits: np.ndarray, radius: int) -> np.ndarray:
    """A pixel survives iff its whole (2r+1) square window is foreground."""
    height, width = bits.shape
    out = np.zeros_like(bits)
    for y in range(height):
        for x in range(width):
            window = bits[
                max(0, y - radius) : y + radius + 1, max(0, x - radius) : x + radius + 1
            ]
            full_rows = min(height, y + radius + 1) - max(0, y - radius)
            full_cols = min(width, x + radius + 1) - max(0, x - radius)
            in_bounds = full_rows == 2 * radius + 1 and full_cols == 2 * radius + 1
            out[y, x] = bool(bits[y, x]) and in_bounds and bool(window.all())
    return out


def brute_confusion(pred: np.ndarray, gt: np.ndarray) -> tuple[int, int, int, int]:
    tp = fp = fn = tn = 0
    for p, g in zip(pred.ravel().tolist(), gt.ravel().tolist()):
        if p and g:
            tp += 1
        elif p and not g:
            fp += 1
        elif not p and g:
            fn += 1
        else:
            tn += 1
    return tp, fp, fn, tn


def brute_permutation_p(votes: tuple[int, ...]) -> float:
    """Exact sign-flip p-value by full 2^n enumeration in plain Python."""
    observed = abs(sum(votes))
    hits = 0
    count = 0
    for signs in product((1, -1), repeat=len(votes)):
        count += 1
        if abs(sum(s * v for s, v in zip(signs, votes))) >= observed:
            hits += 1
    return hits / count


def random_mask(rng: np.random.Generator, max_side: int = 64, min_side: int = 1) -> BinaryMask:
    """Random mask with a random density so empty/sparse/dense all occur."""
    width = int(rng.integers(min_side, max_side + 1))
    height = int(rng.integers(min_side, max_side + 1))
    density = float(rng.uniform(0.0, 1.0))
    return BinaryMask(rng.random((height, width)) < density)


def random_image(rng: np.random.Generator, width: int, height: int) -> RgbImage:
    return RgbImage(rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8))
