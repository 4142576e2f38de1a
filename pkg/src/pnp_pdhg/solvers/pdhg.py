"""Primal-dual hybrid gradient: the plug-and-play variant and a convex reference."""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np

from ..fidelity import Fidelity
from ..linops import LinearOp
from .common import (
    Denoiser,
    IterRecord,
    PdhgSchedule,
    SolverState,
    check_finite,
    checked_eta,
    operator_norm,
    psnr_or_nan,
)

__all__ = ["pdhg_pnp", "pdhg_convex"]


def pdhg_pnp(A: LinearOp, f: Fidelity, d: Denoiser, sched: PdhgSchedule, seed: int = 0, *,
             x_true: Optional[np.ndarray] = None, x0: Optional[np.ndarray] = None,
             reproject: bool = True, strict_steps: bool = False):
    """Plug-and-play PDHG with a time-dependent denoiser as the G-prox.

    Starting from ``x_0 ~ N(0, I)`` and ``z_0 = 0``, each iteration ``k = 1..T``

    1. takes the primal step ``v = x_{k-1} - eta tau_{k-1} A^T z_{k-1}``,
    2. reprojects ``v`` to noise level ``t_k``: ``(1 - t_k) eps + t_k v``,
    3. denoises with ``D_{t_k}``,
    4. updates the dual variable with ``prox_{sigma F*}``, ``sigma = 1 / tau_{k-1}``,
       at the extrapolated point ``2 x_k - x_{k-1}``,

    followed by relaxation with ``sched.rho``. Since ``t_T = 1`` and ``D_1`` is
    the identity, no noise enters at the last iteration.

    Parameters
    ----------
    x_true : array, optional
        Ground truth for the PSNR column of the history.
    x0 : array, optional
        Replaces the random initial primal iterate.
    reproject : bool
        Disable to feed ``v`` to the denoiser unchanged.
    strict_steps : bool
        Rescale ``eta`` so that ``eta ||A||^2 <= 1`` instead of only warning.

    Returns
    -------
    x : array
        Final primal iterate ``x_T``.
    state : SolverState

    Raises
    ------
    SolverDiverged
        When an iterate becomes non-finite.
    """
    eta = checked_eta(A, sched, strict_steps)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(A.in_shape) if x0 is None else np.array(x0, dtype=np.float64)
    z = np.zeros(A.out_shape)
    state = SolverState(x=x, z=z)
    rho = sched.rho
    for k in range(1, sched.T + 1):
        t = sched.t(k)
        tau = sched.tau(k - 1)
        sigma = 1.0 / tau
        v = x - (eta * tau) * A.adjoint(z)
        check_finite(v, k, "primal")
        if reproject:
            eps = rng.standard_normal(A.in_shape)
            v = (1.0 - t) * eps + t * v
        x_bar = np.asarray(d.denoise(v, t), dtype=np.float64)
        check_finite(x_bar, k, "denoising")
        z_bar = f.prox_conjugate(sigma, z + sigma * A.apply(2.0 * x_bar - x))
        check_finite(z_bar, k, "dual")
        if rho == 1.0:
            x_new, z = x_bar, z_bar
        else:
            x_new = x + rho * (x_bar - x)
            z = z + rho * (z_bar - z)
        step_norm = float(np.linalg.norm((x_new - x).ravel()))
        x = x_new
        state.history.append(IterRecord(k, t, tau, sigma, f.eval(A.apply(x)),
                                        psnr_or_nan(x, x_true), step_norm))
    state.x, state.z, state.k = x, z, sched.T
    return x, state


def pdhg_convex(A: LinearOp, f: Fidelity, g_prox: Callable[[np.ndarray, float], np.ndarray],
                tau: float, sigma: float, rho: float = 1.0, iters: int = 500,
                x0: Optional[np.ndarray] = None, z0: Optional[np.ndarray] = None,
                full_output: bool = False):
    """Constant-step PDHG for ``min_x F(A x) + G(x)`` with an explicit ``prox_{tau G}``.

    ``g_prox(v, tau)`` must return ``prox_{tau G}(v)``.

    Raises
    ------
    ValueError
        If ``sigma * tau * ||A||^2 > 1``.
    """
    if not (tau > 0 and sigma > 0):
        raise ValueError("step sizes must be positive")
    if not 0.0 < rho < 2.0:
        raise ValueError("rho must lie in (0, 2)")
    nrm = operator_norm(A)
    if sigma * tau * nrm**2 > 1.0 + 1e-12:
        raise ValueError(f"step condition violated: sigma*tau*||A||^2 = {sigma * tau * nrm**2:.6g} > 1")
    x = np.zeros(A.in_shape) if x0 is None else np.array(x0, dtype=np.float64)
    z = np.zeros(A.out_shape) if z0 is None else np.array(z0, dtype=np.float64)
    for _ in range(iters):
        x_bar = g_prox(x - tau * A.adjoint(z), tau)
        z_bar = f.prox_conjugate(sigma, z + sigma * A.apply(2.0 * x_bar - x))
        if rho == 1.0:
            x, z = x_bar, z_bar
        else:
            x = x + rho * (x_bar - x)
            z = z + rho * (z_bar - z)
    if full_output:
        return x, z
    return x
