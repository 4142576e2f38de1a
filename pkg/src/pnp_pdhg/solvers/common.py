"""Step-size schedules, solver state and the shared denoiser protocol."""

from __future__ import annotations

import csv
import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Protocol

import numpy as np

from ..linops import LinearOp, power_iteration

__all__ = [
    "Denoiser",
    "ProxDenoiser",
    "PdhgSchedule",
    "IterRecord",
    "SolverState",
    "SolverDiverged",
    "HISTORY_COLUMNS",
    "write_history_csv",
    "operator_norm",
    "check_finite",
]

log = logging.getLogger(__name__)

HISTORY_COLUMNS = ("iter", "t", "tau", "fidelity", "psnr", "step_norm")


class Denoiser(Protocol):
    def denoise(self, x: np.ndarray, t: float) -> np.ndarray: ...


class ProxDenoiser:
    """Expose an explicit proximal map ``prox(v, step)`` as a time-independent denoiser."""

    def __init__(self, prox, step: float):
        self.prox = prox
        self.step = float(step)

    def denoise(self, x, t: float) -> np.ndarray:
        return self.prox(x, self.step)


class SolverDiverged(RuntimeError):
    def __init__(self, k: int, stage: str):
        super().__init__(f"non-finite iterate at iteration {k} after the {stage} step")
        self.k = k
        self.stage = stage


@dataclass(frozen=True)
class PdhgSchedule:
    """Uniform time grid ``t_k = k / T`` with time-dependent step sizes.

    The ``power`` law uses ``tau_k = (1 - t_k)^alpha_exp``; the ``t_power``
    law uses ``tau_k = t_k^alpha_exp``. Dual steps are ``sigma_k = 1 / tau_k``
    and the primal step is ``eta * tau_k``, so the step condition reduces to
    ``eta * ||A||^2 <= 1``.
    """

    T: int = 100
    alpha_exp: float = 0.8
    eta: float = 1.0
    rho: float = 1.0
    law: str = "power"
    tau_floor: float = 1e-6

    def __post_init__(self):
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if not 0.0 < self.rho < 2.0:
            raise ValueError("rho must lie in (0, 2)")
        if self.law not in ("power", "t_power"):
            raise ValueError(f"unknown step law {self.law!r}")

    def times(self) -> np.ndarray:
        return np.arange(self.T + 1) / self.T

    def t(self, k: int) -> float:
        return k / self.T

    def tau(self, k: int) -> float:
        t = self.t(k)
        base = (1.0 - t) ** self.alpha_exp if self.law == "power" else t**self.alpha_exp
        return max(base, self.tau_floor)

    def sigma(self, k: int) -> float:
        return 1.0 / self.tau(k)

    def with_eta(self, eta: float) -> "PdhgSchedule":
        return PdhgSchedule(self.T, self.alpha_exp, eta, self.rho, self.law, self.tau_floor)


@dataclass
class IterRecord:
    iter: int
    t: float
    tau: float
    sigma: float
    fidelity: float
    psnr: float
    step_norm: float


@dataclass
class SolverState:
    x: np.ndarray
    z: Optional[np.ndarray]
    k: int = 0
    history: list[IterRecord] = field(default_factory=list)


def write_history_csv(state: SolverState, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HISTORY_COLUMNS)
        for r in state.history:
            w.writerow([r.iter, repr(r.t), repr(r.tau), repr(r.fidelity), repr(r.psnr),
                        repr(r.step_norm)])


def operator_norm(A: LinearOp) -> float:
    if A.norm_bound is not None:
        return A.norm_bound
    return power_iteration(A, max_iters=200, seed=0)


def checked_eta(A: LinearOp, sched: PdhgSchedule, strict: bool) -> float:
    """``eta`` after checking ``eta ||A||^2 <= 1``; only rescaled when ``strict``."""
    nrm2 = operator_norm(A) ** 2
    if sched.eta * nrm2 <= 1.0 + 1e-12:
        return sched.eta
    if strict:
        log.info("rescaling eta from %g to %g to satisfy the step condition", sched.eta, 1.0 / nrm2)
        return 1.0 / nrm2
    warnings.warn(f"step condition violated: eta*||A||^2 = {sched.eta * nrm2:.4g} > 1", stacklevel=3)
    return sched.eta


def check_finite(arr: np.ndarray, k: int, stage: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise SolverDiverged(k, stage)


def psnr_or_nan(x, x_true) -> float:
    if x_true is None:
        return math.nan
    from ..metrics import psnr
    return psnr(x, x_true)
