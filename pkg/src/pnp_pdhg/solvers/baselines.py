"""Plug-and-play forward-backward and half-quadratic splitting baselines.

Both handle only the smooth squared-l2 fidelity.
"""

from __future__ import annotations

import logging
import math
from typing import Optional

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from ..fidelity import Fidelity
from ..linops import LinearOp
from .common import Denoiser, IterRecord, PdhgSchedule, SolverState, check_finite, psnr_or_nan

__all__ = ["fbs_pnp", "hqs_pnp", "solve_normal_cg", "hqs_penalty"]

log = logging.getLogger(__name__)


def _require_sq_l2(f: Fidelity, name: str) -> None:
    if f.kind != "sq_l2":
        raise ValueError(f"{name} needs the smooth sq_l2 fidelity, got {f.kind}")


def fbs_pnp(A: LinearOp, f: Fidelity, d: Denoiser, sched: PdhgSchedule, step_size: float = 1.0,
            seed: int = 0, *, n_avg: int = 1, x_true: Optional[np.ndarray] = None,
            x0: Optional[np.ndarray] = None):
    """PnP forward-backward splitting with a flow denoiser.

    Iteration ``k``: gradient step ``x - gamma_k w A^T (A x - y)`` with
    ``gamma_k = step_size * tau_{k-1}``, reprojection to ``t_k`` and denoising
    at ``t_k``. ``n_avg > 1`` averages the denoiser over independent
    reprojection draws.

    Returns ``(x, state)``.
    """
    _require_sq_l2(f, "fbs_pnp")
    if n_avg < 1:
        raise ValueError("n_avg must be >= 1")
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(A.in_shape) if x0 is None else np.array(x0, dtype=np.float64)
    state = SolverState(x=x, z=None)
    for k in range(1, sched.T + 1):
        t = sched.t(k)
        gamma = step_size * sched.tau(k - 1)
        z = x - gamma * A.adjoint(f.gradient(A.apply(x)))
        check_finite(z, k, "gradient")
        acc = np.zeros(A.in_shape)
        for _ in range(n_avg):
            eps = rng.standard_normal(A.in_shape)
            acc += d.denoise((1.0 - t) * eps + t * z, t)
        x_new = acc / n_avg
        check_finite(x_new, k, "denoising")
        step_norm = float(np.linalg.norm((x_new - x).ravel()))
        x = x_new
        state.history.append(IterRecord(k, t, gamma, math.nan, f.eval(A.apply(x)),
                                        psnr_or_nan(x, x_true), step_norm))
    state.x, state.k = x, sched.T
    return x, state


def solve_normal_cg(A: LinearOp, rhs: np.ndarray, rho: float, x0: np.ndarray,
                    tol: float = 1e-8, maxiter: int = 50):
    """Solve ``(A^T A + rho I) u = rhs`` by conjugate gradients.

    Returns ``(u, info)`` with ``info = {"residual", "converged"}``. Failure to
    reach ``tol`` is reported, not raised.
    """
    shape = A.in_shape
    n = A.in_size

    def matvec(v):
        v = v.reshape(shape)
        return (A.adjoint(A.apply(v)) + rho * v).ravel()

    op = LinearOperator((n, n), matvec=matvec, dtype=np.float64)
    b = rhs.ravel()
    u, code = cg(op, b, x0=x0.ravel(), rtol=0.0, atol=tol, maxiter=maxiter)
    residual = float(np.linalg.norm(b - matvec(u)))
    converged = code == 0 and residual <= tol * (1 + 1e-6)
    return u.reshape(shape), {"residual": residual, "converged": converged}


def hqs_penalty(t: float, rho_penalty: float, law: str = "displayed") -> float:
    """Quadratic-coupling weight ``rho_t`` for the HQS data subproblem.

    ``displayed`` uses ``2 lambda sigma_t^2 / alpha_t^2`` with the flow scales
    ``alpha_t = t``, ``sigma_t = 1 - t``; ``inverse`` uses the reciprocal ratio,
    trusting the denoiser more as the noise level falls.
    """
    if law == "displayed":
        return math.inf if t == 0.0 else 2.0 * rho_penalty * ((1.0 - t) / t) ** 2
    if law == "inverse":
        return math.inf if t == 1.0 else 2.0 * rho_penalty * (t / (1.0 - t)) ** 2
    raise ValueError(f"unknown penalty law {law!r}")


def hqs_pnp(A: LinearOp, f: Fidelity, d: Denoiser, sched: PdhgSchedule, rho_penalty: float = 1.0,
            cg_iters: int = 50, seed: int = 0, *, penalty_law: str = "displayed",
            x_true: Optional[np.ndarray] = None, x0: Optional[np.ndarray] = None):
    """PnP half-quadratic splitting along the flow time grid.

    For ``k = 0..T-1``: denoise ``x`` at ``t_k``, solve
    ``(A^T A + rho_k I) u = A^T y + rho_k x_hat`` by CG, reproject ``u`` to
    ``t_{k+1}``. An infinite penalty returns ``x_hat`` directly.

    Returns ``(x, state)``.
    """
    _require_sq_l2(f, "hqs_pnp")
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(A.in_shape) if x0 is None else np.array(x0, dtype=np.float64)
    aty = A.adjoint(f.y)
    state = SolverState(x=x, z=None)
    for k in range(sched.T):
        t = sched.t(k)
        x_hat = np.asarray(d.denoise(x, t), dtype=np.float64)
        check_finite(x_hat, k + 1, "denoising")
        rho = hqs_penalty(t, rho_penalty, penalty_law)
        if math.isinf(rho):
            u = x_hat
        else:
            u, info = solve_normal_cg(A, aty + rho * x_hat, rho, x_hat, maxiter=cg_iters)
            if not info["converged"]:
                log.warning("CG stopped at residual %.3g in iteration %d", info["residual"], k + 1)
        check_finite(u, k + 1, "data")
        t_next = sched.t(k + 1)
        eps = rng.standard_normal(A.in_shape)
        x_new = (1.0 - t_next) * eps + t_next * u
        step_norm = float(np.linalg.norm((x_new - x).ravel()))
        x = x_new
        state.history.append(IterRecord(k + 1, t_next, rho, math.nan, f.eval(A.apply(x)),
                                        psnr_or_nan(x, x_true), step_norm))
    state.x, state.k = x, sched.T
    return x, state
