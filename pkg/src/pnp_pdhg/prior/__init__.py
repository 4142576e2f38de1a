"""Time-dependent denoisers induced by generative priors."""

from .cfm import MlpFlowDenoiser, MlpVelocityField, TrainingDiverged, cfm_loss, cfm_train, mlp_denoise
from .diffusion import DiffusionSchedule, TweedieDenoiser, gmm_marginal_score, tweedie_denoise
from .gmm import (
    DegenerateOracleError,
    GmmFlowDenoiser,
    GmmPrior,
    gmm_denoise,
    gmm_posterior_weights,
    gmm_velocity,
    mc_conditional_mean_oracle,
    mc_posterior_mean,
)
from .templates import template_image_prior

__all__ = [
    "DegenerateOracleError",
    "DiffusionSchedule",
    "GmmFlowDenoiser",
    "GmmPrior",
    "MlpFlowDenoiser",
    "MlpVelocityField",
    "TrainingDiverged",
    "TweedieDenoiser",
    "cfm_loss",
    "cfm_train",
    "gmm_denoise",
    "gmm_marginal_score",
    "gmm_posterior_weights",
    "gmm_velocity",
    "mc_conditional_mean_oracle",
    "mc_posterior_mean",
    "mlp_denoise",
    "template_image_prior",
]
