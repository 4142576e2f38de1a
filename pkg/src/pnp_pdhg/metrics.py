"""Reference-based image quality metrics on signals normalized to ``[-1, 1]``.

Both metrics first map inputs to ``[0, 1]`` and clamp.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .forward import gaussian_kernel

__all__ = ["QualityReport", "psnr", "ssim", "mse01", "quality", "PSNR_CAP"]

PSNR_CAP = 200.0


def _to01(x) -> np.ndarray:
    return np.clip((np.asarray(x, dtype=np.float64) + 1.0) / 2.0, 0.0, 1.0)


def _pair(x, ref):
    x = np.asarray(x, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if x.shape != ref.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {ref.shape}")
    return _to01(x), _to01(ref)


def mse01(x, ref) -> float:
    a, b = _pair(x, ref)
    return float(np.mean((a - b) ** 2))


def psnr(x, ref) -> float:
    """``10 log10(1 / MSE)`` on the ``[0, 1]`` scale, capped at 200 dB."""
    m = mse01(x, ref)
    if m == 0.0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * math.log10(1.0 / m))


def ssim(x, ref, window: int = 11, sigma: float = 1.5, k1: float = 0.01, k2: float = 0.03) -> float:
    """Single-scale SSIM with a Gaussian window, averaged over valid positions and channels.

    Accepts ``(height, width)`` or ``(channels, height, width)`` arrays.
    """
    a, b = _pair(x, ref)
    if a.ndim == 2:
        a, b = a[None], b[None]
    if a.ndim != 3:
        raise ValueError("ssim expects a 2-D image or a (channels, height, width) stack")
    if min(a.shape[1:]) < window:
        raise ValueError(f"image {a.shape[1:]} is smaller than the {window}x{window} window")
    g = gaussian_kernel(window, sigma)
    c1, c2 = k1**2, k2**2

    def filt(img):
        patches = sliding_window_view(img, (window, window), axis=(1, 2))
        return np.tensordot(patches, g, axes=([3, 4], [0, 1]))

    mu_a, mu_b = filt(a), filt(b)
    saa = filt(a * a) - mu_a**2
    sbb = filt(b * b) - mu_b**2
    sab = filt(a * b) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * sab + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (saa + sbb + c2)
    return float(np.mean(num / den))


@dataclass(frozen=True)
class QualityReport:
    psnr: float
    ssim: float
    mse: float


def quality(x, ref) -> QualityReport:
    x = np.asarray(x)
    img = x if x.ndim >= 2 else None
    s = ssim(x, ref) if img is not None and min(x.shape[-2:]) >= 11 else math.nan
    return QualityReport(psnr(x, ref), s, mse01(x, ref))
