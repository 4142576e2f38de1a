"""Tweedie denoiser for Gaussian diffusion corruptions of a mixture prior.

For ``x_t = alpha_t x_0 + sigma_t eps`` the marginal of a ``GmmPrior`` is again
a mixture with means ``alpha_t mu_i`` and variances ``alpha_t^2 s_i^2 +
sigma_t^2``, so its score is analytic and Tweedie's formula
``E[x_0 | x_t] = (x_t + sigma_t^2 grad log p(x_t)) / alpha_t`` can be
evaluated exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .gmm import GmmPrior

__all__ = ["DiffusionSchedule", "gmm_marginal_score", "tweedie_denoise", "TweedieDenoiser"]


@dataclass(frozen=True)
class DiffusionSchedule:
    """Signal scale ``alpha(t)`` and noise scale ``sigma(t)``.

    ``variance_preserving`` declares ``alpha^2 + sigma^2 = 1``.
    """

    alpha: Callable[[float], float]
    sigma: Callable[[float], float]
    variance_preserving: bool = False
    name: str = "custom"

    def __call__(self, t: float) -> tuple[float, float]:
        return float(self.alpha(t)), float(self.sigma(t))

    @classmethod
    def flow_interpolant(cls) -> "DiffusionSchedule":
        """``alpha = t, sigma = 1 - t``: the flow-matching path itself."""
        return cls(lambda t: t, lambda t: 1.0 - t, False, "flow")

    @classmethod
    def vp_from_flow(cls) -> "DiffusionSchedule":
        """Flow path rescaled by ``1 / sqrt(t^2 + (1 - t)^2)`` to preserve variance."""
        def r(t):
            return math.sqrt(t * t + (1.0 - t) ** 2)
        return cls(lambda t: t / r(t), lambda t: (1.0 - t) / r(t), True, "vp_flow")

    @classmethod
    def vp_cosine(cls) -> "DiffusionSchedule":
        """DDPM-style cosine schedule, ``t = 0`` clean and ``t = 1`` pure noise."""
        return cls(lambda t: math.cos(0.5 * math.pi * t), lambda t: math.sin(0.5 * math.pi * t),
                   True, "vp_cosine")

    def validate(self, grid) -> None:
        """Check monotonicity on ``grid`` and, when declared, the VP constraint."""
        a = np.array([self.alpha(t) for t in grid], dtype=np.float64)
        s = np.array([self.sigma(t) for t in grid], dtype=np.float64)
        if np.any(a <= 0) or np.any(a > 1.0 + 1e-12):
            raise ValueError("alpha must lie in (0, 1] on the grid")
        if np.any(s < 0):
            raise ValueError("sigma must be nonnegative on the grid")
        da, ds = np.diff(a), np.diff(s)
        if not (np.all(da >= 0) or np.all(da <= 0)):
            raise ValueError("alpha is not monotone on the grid")
        if not (np.all(ds >= 0) or np.all(ds <= 0)):
            raise ValueError("sigma is not monotone on the grid")
        if self.variance_preserving and np.max(np.abs(a**2 + s**2 - 1.0)) > 1e-12:
            raise ValueError("schedule declared variance preserving but alpha^2 + sigma^2 != 1")


def gmm_marginal_score(prior: GmmPrior, x: np.ndarray, alpha: float, sigma: float) -> np.ndarray:
    """``grad log p(x_t)`` for the mixture marginal at scales ``(alpha, sigma)``."""
    flat = np.asarray(x, dtype=np.float64).reshape(-1)
    var = alpha**2 * prior.variances + sigma**2
    diff = flat[None, :] - alpha * prior.means
    with np.errstate(divide="ignore"):
        logw = np.log(prior.weights)
    logits = logw - 0.5 * prior.dim * np.log(var) - 0.5 * (diff**2).sum(axis=1) / var
    pi = np.exp(logits - logits.max())
    pi /= pi.sum()
    return -((pi / var) @ diff)


def tweedie_denoise(prior: GmmPrior, sched: DiffusionSchedule, x, t: float) -> np.ndarray:
    alpha, sigma = sched(t)
    if alpha <= 0:
        raise ValueError("Tweedie denoiser needs alpha_t > 0")
    x = np.asarray(x, dtype=np.float64)
    if sigma == 0.0:
        return x / alpha
    score = gmm_marginal_score(prior, x, alpha, sigma)
    return ((x.reshape(-1) + sigma**2 * score) / alpha).reshape(x.shape)


class TweedieDenoiser:
    """Diffusion-model denoiser with the same ``denoise(x, t)`` interface as flows."""

    def __init__(self, prior: GmmPrior, schedule: DiffusionSchedule):
        self.prior = prior
        self.schedule = schedule

    def denoise(self, x, t: float) -> np.ndarray:
        return tweedie_denoise(self.prior, self.schedule, x, t)

    def velocity(self, x, t: float) -> np.ndarray:
        if not t < 1.0:
            raise ValueError("velocity is undefined at t = 1")
        x = np.asarray(x, dtype=np.float64)
        return (self.denoise(x, t) - x) / (1.0 - t)

    __call__ = denoise
