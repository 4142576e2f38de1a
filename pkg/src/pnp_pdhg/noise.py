"""Measurement noise: additive Gaussian, Poisson shot noise and salt-and-pepper.

Signals live on ``[-1, 1]``. Every function is a deterministic function of its
inputs and ``seed``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["NoiseModel", "add_gaussian", "add_poisson", "add_salt_pepper", "NOISE_KINDS"]

NOISE_KINDS = ("gaussian", "poisson", "salt_pepper")


def add_gaussian(clean: np.ndarray, sigma: float, seed: int = 0) -> np.ndarray:
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    clean = np.asarray(clean, dtype=np.float64)
    eps = np.random.default_rng(seed).standard_normal(clean.shape)
    return clean + sigma * eps


def add_poisson(clean: np.ndarray, alpha: float, seed: int = 0) -> np.ndarray:
    """Shot noise ``y = z / alpha``, ``z ~ Poisson(alpha * x01)`` on the ``[0, 1]`` remap.

    ``x01 = max(0, (clean + 1) / 2)``; the result is mapped back to ``[-1, 1]``.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    clean = np.asarray(clean, dtype=np.float64)
    rate = np.maximum(0.0, (clean + 1.0) / 2.0) * alpha
    z = np.random.default_rng(seed).poisson(rate)
    return 2.0 * (z / alpha) - 1.0


def add_salt_pepper(clean: np.ndarray, p: float, seed: int = 0) -> np.ndarray:
    """Set a fraction ``p`` of pixel positions to black (-1) or white (+1).

    Pixels are the trailing two axes for images (all channels of a chosen
    pixel change together) and entries for flat vectors. Exactly
    ``k = round(N p)`` positions are drawn without replacement;
    ``k // 2`` of them become white and the rest black.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    out = np.array(clean, dtype=np.float64)
    if out.ndim >= 2:
        n_pix = out.shape[-2] * out.shape[-1]
        flat = out.reshape(-1, n_pix)
    else:
        n_pix = out.size
        flat = out.reshape(1, n_pix)
    k = int(np.floor(n_pix * p + 0.5))
    idx = np.random.default_rng(seed).choice(n_pix, size=k, replace=False)
    n_white = k // 2
    flat[:, idx[:n_white]] = 1.0
    flat[:, idx[n_white:]] = -1.0
    return flat.reshape(out.shape)


@dataclass(frozen=True)
class NoiseModel:
    """One of ``gaussian(sigma)``, ``poisson(alpha)`` or ``salt_pepper(p)``."""

    kind: str = "gaussian"
    sigma: float = 0.2
    alpha: float = 1.0
    p: float = 0.1

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}; expected one of {NOISE_KINDS}")
        if self.kind == "gaussian" and not self.sigma > 0:
            raise ValueError("gaussian noise requires sigma > 0")
        if self.kind == "poisson" and not self.alpha > 0:
            raise ValueError("poisson noise requires alpha > 0")
        if self.kind == "salt_pepper" and not 0.0 <= self.p <= 1.0:
            raise ValueError("salt_pepper noise requires p in [0, 1]")

    def apply(self, clean: np.ndarray, seed: int) -> np.ndarray:
        if self.kind == "gaussian":
            return add_gaussian(clean, self.sigma, seed)
        if self.kind == "poisson":
            return add_poisson(clean, self.alpha, seed)
        return add_salt_pepper(clean, self.p, seed)

    def label(self) -> str:
        if self.kind == "gaussian":
            return f"gaussian(sigma={self.sigma:g})"
        if self.kind == "poisson":
            return f"poisson(alpha={self.alpha:g})"
        return f"salt_pepper(p={self.p:g})"
