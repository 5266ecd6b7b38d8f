"""Synthetic test images.

Piecewise-constant ellipse phantoms loosely resembling an axial MR slice, and
a binary blob phantom for phase retrieval. All generators are deterministic
in their seed.
"""

import numpy as np

__all__ = ["ellipse_phantom", "phantom_set", "binary_phantom"]


def _ellipse(shape, cy, cx, ry, rx, angle):
    H, W = shape
    yy, xx = np.mgrid[0:H, 0:W]
    y = (yy + 0.5) / H * 2 - 1 - cy
    x = (xx + 0.5) / W * 2 - 1 - cx
    c, s = np.cos(angle), np.sin(angle)
    u = c * x + s * y
    v = -s * x + c * y
    return (u / rx) ** 2 + (v / ry) ** 2 <= 1.0


def ellipse_phantom(shape=(64, 64), seed=0, peak=255.0):
    """Head-like phantom: skull ring, tissue body and a few random inclusions.

    Values lie in ``[0, peak]`` with a zero background.
    """
    rng = np.random.default_rng(seed)
    img = np.zeros(shape)
    ry, rx = 0.85 + 0.05 * rng.random(), 0.7 + 0.05 * rng.random()
    img[_ellipse(shape, 0, 0, ry, rx, 0)] = 0.9
    img[_ellipse(shape, 0, 0, ry - 0.08, rx - 0.08, 0)] = 0.35
    for _ in range(3 + int(rng.integers(0, 3))):
        cy, cx = rng.uniform(-0.45, 0.45, size=2)
        r1, r2 = rng.uniform(0.08, 0.25, size=2)
        mask = _ellipse(shape, cy, cx, r1, r2, rng.uniform(0, np.pi))
        img[mask] = rng.choice([0.15, 0.55, 0.7, 1.0])
    return peak * img


def phantom_set(n=5, shape=(64, 64), seed=0, peak=255.0):
    """``n`` distinct ellipse phantoms."""
    return [ellipse_phantom(shape, seed + i, peak) for i in range(n)]


def binary_phantom(shape=(16, 16), seed=0):
    """0/1 image made of a few random rectangles and disks."""
    rng = np.random.default_rng(seed)
    H, W = shape
    img = np.zeros(shape)
    yy, xx = np.mgrid[0:H, 0:W]
    for _ in range(3):
        cy, cx = rng.integers(2, H - 2), rng.integers(2, W - 2)
        r = rng.uniform(1.5, min(H, W) / 4)
        img[(yy - cy) ** 2 + (xx - cx) ** 2 <= r * r] = 1.0
    y0, x0 = rng.integers(1, H // 2), rng.integers(1, W // 2)
    img[y0:y0 + H // 4, x0:x0 + W // 3] = 1.0
    return img
