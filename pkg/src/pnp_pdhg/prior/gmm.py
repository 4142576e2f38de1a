"""Isotropic Gaussian-mixture prior and its exact flow-matching denoiser.

With the independent coupling ``X_t = (1 - t) X_0 + t X_1``, ``X_0 ~ N(0, I)``
and ``X_1`` drawn from the mixture, the conditional mean ``E[X_1 | X_t = x]``
is available in closed form because each component stays Gaussian.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

__all__ = [
    "GmmPrior",
    "gmm_posterior_weights",
    "gmm_denoise",
    "gmm_velocity",
    "mc_posterior_mean",
    "mc_conditional_mean_oracle",
    "GmmFlowDenoiser",
    "DegenerateOracleError",
]

FORMAT_TAG = "gmm-prior"


class DegenerateOracleError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class GmmPrior:
    """Mixture ``sum_i w_i N(mu_i, s_i^2 I)`` on ``R^dim``.

    Attributes
    ----------
    weights : (K,) array
    means : (K, dim) array
    variances : (K,) array of per-component isotropic variances ``s_i^2``.
    """

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64).reshape(-1)
        mu = np.array(self.means, dtype=np.float64)
        if mu.ndim == 1:
            mu = mu.reshape(len(w), -1)
        s2 = np.array(self.variances, dtype=np.float64).reshape(-1)
        if mu.ndim != 2 or mu.shape[0] != w.size or s2.size != w.size:
            raise ValueError("weights, means and variances disagree on the number of components")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("mixture weights must be nonnegative and sum to 1")
        if np.any(s2 <= 0):
            raise ValueError("component variances must be positive")
        if not np.all(np.isfinite(mu)):
            raise ValueError("component means must be finite")
        for arr in (w, mu, s2):
            arr.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "variances", s2)

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @property
    def n_components(self) -> int:
        return self.weights.size

    def mean(self) -> np.ndarray:
        return self.weights @ self.means

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw ``n`` samples, shape ``(n, dim)``."""
        comp = rng.choice(self.n_components, size=n, p=self.weights)
        eps = rng.standard_normal((n, self.dim))
        return self.means[comp] + np.sqrt(self.variances[comp])[:, None] * eps

    def log_density(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        return _mixture_logpdf(x, self.weights, self.means, self.variances)

    def to_dict(self) -> dict:
        return {
            "format": FORMAT_TAG,
            "version": 1,
            "dim": self.dim,
            "weights": self.weights.tolist(),
            "means": self.means.tolist(),
            "variances": self.variances.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GmmPrior":
        if data.get("format") != FORMAT_TAG:
            raise ValueError("not a gmm-prior document")
        prior = cls(data["weights"], data["means"], data["variances"])
        if "dim" in data and int(data["dim"]) != prior.dim:
            raise ValueError("declared dim does not match the means")
        return prior

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    @classmethod
    def load(cls, path) -> "GmmPrior":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _mixture_logpdf(x, weights, means, variances):
    """Row-wise log of ``sum_i w_i N(x; means_i, variances_i I)``; x is ``(m, d)``."""
    d = x.shape[1]
    sq = ((x[:, None, :] - means[None, :, :]) ** 2).sum(axis=-1)
    with np.errstate(divide="ignore"):
        logw = np.log(weights)
    comp = logw - 0.5 * d * np.log(2 * np.pi * variances) - 0.5 * sq / variances
    return logsumexp(comp, axis=1)


def _component_logits(prior: GmmPrior, x: np.ndarray, t: float):
    """Unnormalized log posterior weights of the components given ``X_t = x``."""
    var_t = (1.0 - t) ** 2 + t**2 * prior.variances
    sq = ((x[None, :] - t * prior.means) ** 2).sum(axis=1)
    with np.errstate(divide="ignore"):
        logw = np.log(prior.weights)
    return logw - 0.5 * prior.dim * np.log(var_t) - 0.5 * sq / var_t, var_t


def gmm_posterior_weights(prior: GmmPrior, x, t: float) -> np.ndarray:
    """Component responsibilities ``pi_i(x)`` of ``X_t = x`` for ``t < 1``."""
    if not 0.0 <= t < 1.0:
        raise ValueError("posterior weights need 0 <= t < 1")
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    logits, _ = _component_logits(prior, x, t)
    logits = logits - logits.max()
    p = np.exp(logits)
    return p / p.sum()


def gmm_denoise(prior: GmmPrior, x, t: float) -> np.ndarray:
    """Exact ``E[X_1 | X_t = x]``; returns an array shaped like ``x``."""
    x = np.asarray(x, dtype=np.float64)
    if not 0.0 <= t <= 1.0:
        raise ValueError("t must lie in [0, 1]")
    if t == 1.0:
        return x.copy()
    flat = x.reshape(-1)
    if flat.size != prior.dim:
        raise ValueError(f"signal size {flat.size} does not match prior dim {prior.dim}")
    if t == 0.0:
        return prior.mean().reshape(x.shape)
    pi = gmm_posterior_weights(prior, flat, t)
    gain = t * prior.variances / ((1.0 - t) ** 2 + t**2 * prior.variances)
    # sum_i pi_i [mu_i + gain_i (x - t mu_i)]
    coef_mu = pi * (1.0 - t * gain)
    out = coef_mu @ prior.means + float(pi @ gain) * flat
    return out.reshape(x.shape)


def gmm_velocity(prior: GmmPrior, x, t: float) -> np.ndarray:
    """Optimal field ``E[X_1 - X_0 | X_t = x] = (D_t(x) - x) / (1 - t)``."""
    if not t < 1.0:
        raise ValueError("velocity is undefined at t = 1")
    x = np.asarray(x, dtype=np.float64)
    return (gmm_denoise(prior, x, t) - x) / (1.0 - t)


def mc_posterior_mean(prior: GmmPrior, x, alpha: float, sigma: float, n_samples: int,
                      seed: int = 0, samples: np.ndarray | None = None) -> np.ndarray:
    """Self-normalized importance-sampling estimate of ``E[X | alpha X + sigma eps = x]``.

    Draws ``x1 ~ prior`` and weights each draw by ``N(x; alpha x1, sigma^2 I)``.
    Passing precomputed ``samples`` reuses one draw for several probes.

    Raises
    ------
    DegenerateOracleError
        If every weight underflows.
    """
    if not sigma > 0:
        raise ValueError("oracle needs sigma > 0")
    x = np.asarray(x, dtype=np.float64)
    if samples is None:
        samples = prior.sample(n_samples, np.random.default_rng(seed))
    flat = x.reshape(-1)
    with np.errstate(over="ignore"):
        logw = -0.5 * ((flat[None, :] - alpha * samples) ** 2).sum(axis=1) / sigma**2
    m = logw.max()
    if not np.isfinite(m):
        raise DegenerateOracleError("degenerate oracle; increase samples or move x toward support")
    w = np.exp(logw - m)
    total = w.sum()
    if total == 0.0 or not np.isfinite(total):
        raise DegenerateOracleError("degenerate oracle; increase samples or move x toward support")
    return (w @ samples / total).reshape(x.shape)


def mc_conditional_mean_oracle(prior: GmmPrior, x, t: float, n_samples: int, seed: int = 0,
                               samples: np.ndarray | None = None) -> np.ndarray:
    """Monte-Carlo ``E[X_1 | X_t = x]`` for the flow path, ``0 < t < 1``."""
    if not 0.0 < t < 1.0:
        raise ValueError("oracle needs 0 < t < 1")
    return mc_posterior_mean(prior, x, t, 1.0 - t, n_samples, seed, samples)


class GmmFlowDenoiser:
    """Denoiser ``D_t`` induced by the ideal velocity field of a ``GmmPrior``.

    Signals of any shape are accepted as long as their size matches
    ``prior.dim``.
    """

    def __init__(self, prior: GmmPrior):
        self.prior = prior

    def denoise(self, x, t: float) -> np.ndarray:
        return gmm_denoise(self.prior, x, t)

    def velocity(self, x, t: float) -> np.ndarray:
        return gmm_velocity(self.prior, x, t)

    __call__ = denoise
