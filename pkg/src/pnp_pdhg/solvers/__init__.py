"""Plug-and-play PDHG, a convex PDHG reference and PnP baselines."""

from .baselines import fbs_pnp, hqs_penalty, hqs_pnp, solve_normal_cg
from .common import (
    HISTORY_COLUMNS,
    Denoiser,
    IterRecord,
    PdhgSchedule,
    ProxDenoiser,
    SolverDiverged,
    SolverState,
    operator_norm,
    write_history_csv,
)
from .pdhg import pdhg_convex, pdhg_pnp

__all__ = [
    "HISTORY_COLUMNS",
    "Denoiser",
    "IterRecord",
    "PdhgSchedule",
    "ProxDenoiser",
    "SolverDiverged",
    "SolverState",
    "fbs_pnp",
    "hqs_penalty",
    "hqs_pnp",
    "operator_norm",
    "pdhg_convex",
    "pdhg_pnp",
    "solve_normal_cg",
    "write_history_csv",
]
