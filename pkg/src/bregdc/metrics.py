"""Image quality metrics: PSNR and Gaussian-window SSIM."""

import math

import numpy as np
from scipy import ndimage

from .errors import InvalidInputError

__all__ = ["psnr", "ssim", "PSNR_CAP", "capped_psnr"]

PSNR_CAP = 999.0


def _pair(x, ref):
    x = np.asarray(x, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if x.shape != ref.shape:
        raise InvalidInputError(f"shape mismatch: {x.shape} vs {ref.shape}")
    return x, ref


def psnr(x, ref, peak=255.0):
    """Peak signal-to-noise ratio in dB; ``inf`` for identical images."""
    x, ref = _pair(x, ref)
    if not peak > 0:
        raise InvalidInputError("peak must be positive")
    mse = float(np.mean((x - ref) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def capped_psnr(value):
    """PSNR as written to CSV/JSON: ``inf`` becomes :data:`PSNR_CAP`."""
    return min(float(value), PSNR_CAP)


def ssim(x, ref, peak=255.0, sigma=1.5, k1=0.01, k2=0.03):
    """Mean structural similarity over an 11x11 Gaussian window.

    Local statistics use a Gaussian of standard deviation ``sigma`` truncated
    at 3.5 sigma (an 11x11 window for the default) with reflect boundary,
    and the map is averaged over every pixel. The raw mean lies in
    ``[-1, 1]``; the returned value is clamped to ``[0, 1]``.
    """
    x, ref = _pair(x, ref)
    if x.ndim != 2 or min(x.shape) < 11:
        raise InvalidInputError(f"ssim needs a 2-D image of at least 11x11, got {x.shape}")

    def blur(a):
        return ndimage.gaussian_filter(a, sigma, mode="reflect", truncate=3.5)

    c1 = (k1 * peak) ** 2
    c2 = (k2 * peak) ** 2
    mx, my = blur(x), blur(ref)
    vx = blur(x * x) - mx * mx
    vy = blur(ref * ref) - my * my
    cxy = blur(x * ref) - mx * my
    s_map = ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
    return float(np.clip(s_map.mean(), 0.0, 1.0))
