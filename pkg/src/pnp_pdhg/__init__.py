"""Plug-and-play primal-dual hybrid gradient with flow-matching denoisers.

Subpackages
-----------
prior
    Gaussian-mixture flow denoiser, Tweedie denoiser and a small CFM-trained MLP.
solvers
    PnP-PDHG, a convex PDHG reference, PnP-FBS and PnP-HQS.
harness
    Config-driven experiment runner and the ``pnp-pdhg`` command.
"""

from .fidelity import Fidelity
from .forward import TaskSpec, build_operator
from .linops import LinearOp, adjoint_test, compose, dot, explicit_matrix, power_iteration, scale
from .metrics import psnr, quality, ssim
from .noise import NoiseModel, add_gaussian, add_poisson, add_salt_pepper
from .prior import GmmFlowDenoiser, GmmPrior, gmm_denoise
from .solvers import PdhgSchedule, fbs_pnp, hqs_pnp, pdhg_convex, pdhg_pnp

__version__ = "0.1.0"

__all__ = [
    "Fidelity",
    "GmmFlowDenoiser",
    "GmmPrior",
    "LinearOp",
    "NoiseModel",
    "PdhgSchedule",
    "TaskSpec",
    "add_gaussian",
    "add_poisson",
    "add_salt_pepper",
    "adjoint_test",
    "build_operator",
    "compose",
    "dot",
    "explicit_matrix",
    "fbs_pnp",
    "gmm_denoise",
    "hqs_pnp",
    "pdhg_convex",
    "pdhg_pnp",
    "power_iteration",
    "psnr",
    "quality",
    "scale",
    "ssim",
]
