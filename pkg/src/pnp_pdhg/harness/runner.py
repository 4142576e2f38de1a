"""Run restoration experiments and summarize their results."""

from __future__ import annotations

import csv
import logging
import math
import os
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ..fidelity import Fidelity
from ..forward import build_operator, naive_inverse
from ..metrics import psnr, quality
from ..prior import GmmFlowDenoiser
from ..solvers import fbs_pnp, hqs_pnp, pdhg_convex, pdhg_pnp, write_history_csv
from ..solvers.common import SolverState
from .config import ExperimentConfig
from .io import RunRecord, write_results_csv, write_signal_pgm

__all__ = ["run_experiment", "run_single", "summarize", "SummaryRow", "render_summary",
           "write_summary_csv", "default_threads"]

log = logging.getLogger(__name__)

THREADS_ENV = "PNP_PDHG_THREADS"


def default_threads() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _streams(seed: int) -> tuple[int, int, int]:
    """Independent integer seeds for ground truth, noise and solver."""
    a, b, c = np.random.SeedSequence(seed).generate_state(3)
    return int(a), int(b), int(c)


def _solve(cfg: ExperimentConfig, A, f: Fidelity, x_true, solver_seed):
    m = cfg.method
    d = GmmFlowDenoiser(cfg.prior)
    if m.kind == "pdhg_pnp":
        return pdhg_pnp(A, f, d, cfg.schedule, solver_seed, x_true=x_true,
                        reproject=m.reproject, strict_steps=cfg.strict_steps)
    if m.kind == "fbs_pnp":
        return fbs_pnp(A, f, d, cfg.schedule, m.step_size, solver_seed, n_avg=m.n_avg,
                       x_true=x_true)
    if m.kind == "hqs_pnp":
        return hqs_pnp(A, f, d, cfg.schedule, m.rho_penalty, m.cg_iters, solver_seed,
                       penalty_law=m.penalty_law, x_true=x_true)
    # Convex reference: quadratic pull towards the prior mean as G.
    center = cfg.prior.mean().reshape(A.in_shape)
    gw = m.g_weight

    def g_prox(v, tau):
        return (v + tau * gw * center) / (1.0 + tau * gw)

    nrm = max(A.norm_bound if A.norm_bound is not None else 1.0, 1e-12)
    x = pdhg_convex(A, f, g_prox, 1.0 / nrm, 1.0 / nrm, cfg.schedule.rho, m.iters)
    return x, SolverState(x=x, z=None, k=m.iters)


def run_single(cfg: ExperimentConfig, seed: int, index: int = 0, write_files: bool = True):
    """One seeded run; returns ``(record, arrays)``. Solver failures go into ``status``."""
    truth_seed, noise_seed, solver_seed = _streams(seed)
    shape = cfg.signal_shape
    if cfg.truth is not None:
        x_true = cfg.truth[index % cfg.truth.shape[0]]
    else:
        x_true = cfg.prior.sample(1, np.random.default_rng(truth_seed))[0].reshape(shape)
    A = build_operator(cfg.task, shape)
    y = cfg.noise.apply(A.apply(x_true), noise_seed)
    f = cfg.fidelity.build(y)
    x_in = naive_inverse(cfg.task, A, y)
    run_id = f"{cfg.config_hash}-s{seed}"
    start = time.perf_counter()
    status = "ok"
    state = None
    try:
        x_out, state = _solve(cfg, A, f, x_true, solver_seed)
    except (ArithmeticError, RuntimeError, ValueError) as exc:
        log.warning("run %s failed: %s", run_id, exc)
        status = f"failed:{type(exc).__name__}"
        x_out = np.zeros(shape)
    wall_ms = int(round((time.perf_counter() - start) * 1000)) if cfg.timing else 0
    q_out = quality(x_out, x_true)
    record = RunRecord(
        run_id=run_id, seed=seed, method=cfg.method.kind, fidelity=cfg.fidelity.kind,
        task=cfg.task.kind, noise=cfg.noise.label(), psnr_in=psnr(x_in, x_true),
        psnr_out=q_out.psnr if status == "ok" else math.nan,
        ssim_out=q_out.ssim if status == "ok" else math.nan,
        wall_ms=wall_ms, status=status,
    )
    if write_files:
        out = cfg.output_dir
        write_signal_pgm(out / f"{run_id}_truth", x_true)
        write_signal_pgm(out / f"{run_id}_corrupted", x_in)
        write_signal_pgm(out / f"{run_id}_restored", x_out)
        if state is not None:
            write_history_csv(state, out / f"history_{run_id}.csv")
    return record, {"truth": x_true, "measurement": y, "restored": x_out}


def run_experiment(cfg: ExperimentConfig, write_files: bool = True, write_csv: bool = True,
                   threads: int | None = None) -> list[RunRecord]:
    """Run every seed of ``cfg``; records come back in seed-list order."""
    if write_files or write_csv:
        cfg.output_dir.mkdir(parents=True, exist_ok=True)
    n_threads = threads or cfg.threads or default_threads()
    n_threads = max(1, min(n_threads, len(cfg.seeds)))

    def job(item):
        i, seed = item
        return run_single(cfg, seed, i, write_files)[0]

    items = list(enumerate(cfg.seeds))
    if n_threads == 1:
        records = [job(it) for it in items]
    else:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            records = list(pool.map(job, items))
    if write_csv:
        write_results_csv(records, cfg.output_dir / "results.csv")
    return records


@dataclass(frozen=True)
class SummaryRow:
    group: tuple
    n: int
    psnr_mean: float
    psnr_median: float
    psnr_std: float
    ssim_mean: float
    ssim_median: float
    ssim_std: float


def _stats(values):
    vals = [v for v in values if not math.isnan(v)]
    if not vals:
        return math.nan, math.nan, math.nan
    return statistics.fmean(vals), statistics.median(vals), statistics.pstdev(vals)


def summarize(records: Sequence[RunRecord],
              group_by: Sequence[str] = ("method", "fidelity", "task", "noise")) -> list[SummaryRow]:
    """Mean, median and population std of ``psnr_out`` / ``ssim_out`` per group."""
    if not records:
        raise ValueError("nothing to summarize: no records")
    groups: dict[tuple, list[RunRecord]] = {}
    for r in records:
        groups.setdefault(tuple(getattr(r, g) for g in group_by), []).append(r)
    rows = []
    for key, recs in groups.items():
        pm, pmed, ps = _stats([r.psnr_out for r in recs])
        sm, smed, ss = _stats([r.ssim_out for r in recs])
        rows.append(SummaryRow(key, len(recs), pm, pmed, ps, sm, smed, ss))
    return rows


_SUMMARY_STATS = ("n", "psnr_mean", "psnr_median", "psnr_std", "ssim_mean", "ssim_median",
                  "ssim_std")


def write_summary_csv(rows: Sequence[SummaryRow], group_by: Sequence[str], path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*group_by, *_SUMMARY_STATS])
        for r in rows:
            w.writerow([*r.group, *(getattr(r, s) for s in _SUMMARY_STATS)])


def render_summary(rows: Sequence[SummaryRow], group_by: Sequence[str]) -> str:
    header = [*group_by, *_SUMMARY_STATS]
    body = []
    for r in rows:
        cells = [str(g) for g in r.group] + [str(r.n)]
        cells += [f"{getattr(r, s):.3f}" if "psnr" in s else f"{getattr(r, s):.4f}"
                  for s in _SUMMARY_STATS[1:]]
        body.append(cells)
    widths = [max(len(h), *(len(b[i]) for b in body)) for i, h in enumerate(header)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(c.rjust(w) if i >= len(group_by) else c.ljust(w)
                        for i, (c, w) in enumerate(zip(b, widths))) for b in body]
    return "\n".join(lines)
