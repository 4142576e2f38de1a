"""Desk-scale image prior: a mixture of smooth random template images."""

from __future__ import annotations

import numpy as np

from .gmm import GmmPrior

__all__ = ["smooth_templates", "template_image_prior"]


def smooth_templates(n: int, height: int, width: int, channels: int = 1, max_freq: int = 3,
                     amplitude: float = 0.8, seed: int = 0) -> np.ndarray:
    """``n`` band-limited random images of shape ``(channels, height, width)``.

    Each template is a random trigonometric polynomial of degree
    ``max_freq`` rescaled to span ``[-amplitude, amplitude]``.
    """
    rng = np.random.default_rng(seed)
    yy, xx = np.meshgrid(np.arange(height) / height, np.arange(width) / width, indexing="ij")
    out = np.empty((n, channels, height, width))
    freqs = [(a, b) for a in range(max_freq + 1) for b in range(-max_freq, max_freq + 1)
             if (a, b) != (0, 0)]
    for i in range(n):
        for c in range(channels):
            img = np.zeros((height, width))
            for a, b in freqs:
                amp = rng.standard_normal() / (a * a + b * b)
                phase = rng.uniform(0, 2 * np.pi)
                img += amp * np.cos(2 * np.pi * (a * yy + b * xx) + phase)
            lo, hi = img.min(), img.max()
            out[i, c] = amplitude * (2.0 * (img - lo) / (hi - lo) - 1.0)
    return out


def template_image_prior(height: int = 32, width: int = 32, channels: int = 1,
                         n_components: int = 8, spread: float = 0.1, seed: int = 0) -> GmmPrior:
    """Equal-weight mixture of ``n_components`` templates with isotropic std ``spread``."""
    tmpl = smooth_templates(n_components, height, width, channels, seed=seed)
    weights = np.full(n_components, 1.0 / n_components)
    weights[-1] = 1.0 - weights[:-1].sum()
    return GmmPrior(weights, tmpl.reshape(n_components, -1), np.full(n_components, spread**2))
