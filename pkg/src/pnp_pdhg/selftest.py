"""Quick invariant checks run by ``pnp-pdhg selftest`` (a few seconds, no test runner needed)."""

from __future__ import annotations

import numpy as np

from .fidelity import Fidelity, prox_bruteforce_oracle
from .forward import box_mask, make_avgpool_sr, make_gaussian_blur, make_identity, make_mask, random_mask
from .linops import adjoint_test, explicit_matrix, power_iteration
from .prior import GmmPrior, gmm_denoise
from .solvers import PdhgSchedule, ProxDenoiser, pdhg_convex, pdhg_pnp

__all__ = ["run_selftest", "CHECKS"]


def _operators():
    shape = (1, 16, 16)
    return [
        make_identity(shape),
        make_gaussian_blur(shape, 5, 1.0),
        make_avgpool_sr(shape, 2),
        make_mask(shape, box_mask(16, 16, 6)),
        make_mask(shape, random_mask(16, 16, 0.5, seed=1)),
    ]


def check_adjoints() -> bool:
    return all(adjoint_test(op, 100, seed=0) <= 1e-10 for op in _operators())


def check_norms() -> bool:
    for op in _operators():
        ref = np.linalg.svd(explicit_matrix(op), compute_uv=False)[0]
        if abs(power_iteration(op, 100) - ref) > 1e-4 * max(ref, 1e-12):
            return False
    return True


def check_prox() -> bool:
    rng = np.random.default_rng(0)
    for kind in ("sq_l2", "l1", "l2"):
        for _ in range(50):
            y = rng.normal(size=4)
            f = Fidelity(kind, y, float(rng.uniform(0.1, 3.0)))
            x = rng.normal(size=4) * 2
            step = float(rng.uniform(0.1, 2.0))
            if np.max(np.abs(f.prox(step, x) - prox_bruteforce_oracle(f, step, x))) > 1e-5:
                return False
            s = float(rng.uniform(0.1, 5.0))
            z = rng.normal(size=4) * 3
            if np.max(np.abs(f.prox_conjugate(s, z) + s * f.prox(1 / s, z / s) - z)) > 1e-12:
                return False
    return True


def check_denoiser_boundaries() -> bool:
    prior = GmmPrior([0.3, 0.7], [[1.0, -1.0], [-2.0, 0.5]], [0.2, 0.5])
    x = np.array([0.3, 0.9])
    return (np.array_equal(gmm_denoise(prior, x, 1.0), x)
            and np.allclose(gmm_denoise(prior, x, 0.0), prior.mean(), rtol=0, atol=1e-15))


def check_convex_pdhg() -> bool:
    rng = np.random.default_rng(0)
    y, c, lam = rng.normal(size=8), rng.normal(size=(1, 1, 8)), 0.7
    A = make_identity((1, 1, 8))
    f = Fidelity("sq_l2", y.reshape(1, 1, 8), 1.0)
    x = pdhg_convex(A, f, lambda v, tau: (v + tau * lam * c) / (1 + tau * lam), 1.0, 1.0, iters=500)
    return float(np.max(np.abs(x.ravel() - (y + lam * c.ravel()) / (1 + lam)))) < 1e-8


def check_code_path() -> bool:
    rng = np.random.default_rng(1)
    y, c, lam = rng.normal(size=(1, 1, 6)), rng.normal(size=(1, 1, 6)), 0.5
    A = make_identity((1, 1, 6))
    f = Fidelity("l1", y, 0.3)

    def g_prox(v, tau):
        return (v + tau * lam * c) / (1 + tau * lam)

    x0 = rng.normal(size=(1, 1, 6))
    sched = PdhgSchedule(T=40, alpha_exp=0.0, eta=0.8)
    a, _ = pdhg_pnp(A, f, ProxDenoiser(g_prox, 0.8), sched, x0=x0, reproject=False)
    b = pdhg_convex(A, f, g_prox, 0.8, 1.0, iters=40, x0=x0)
    return float(np.max(np.abs(a - b))) <= 1e-12


def check_determinism() -> bool:
    prior = GmmPrior([0.5, 0.5], [[1.0, 1.0], [-1.0, -1.0]], [0.05, 0.05])
    A = make_identity((1, 1, 2))
    f = Fidelity("l1", np.array([[[0.9, 1.2]]]), 2.0)
    from .prior import GmmFlowDenoiser

    d = GmmFlowDenoiser(prior)
    a, sa = pdhg_pnp(A, f, d, PdhgSchedule(T=20), seed=5)
    b, sb = pdhg_pnp(A, f, d, PdhgSchedule(T=20), seed=5)
    return np.array_equal(a, b) and sa.history == sb.history


CHECKS = [
    ("operator adjoints", check_adjoints),
    ("power iteration vs dense SVD", check_norms),
    ("prox closed forms and Moreau identity", check_prox),
    ("flow denoiser boundary identities", check_denoiser_boundaries),
    ("convex PDHG quadratic minimizer", check_convex_pdhg),
    ("PnP/convex code-path reduction", check_code_path),
    ("seeded determinism", check_determinism),
]


def run_selftest(verbose: bool = True) -> bool:
    ok = True
    for name, check in CHECKS:
        try:
            passed = bool(check())
        except Exception as exc:  # report and keep going
            passed = False
            name = f"{name} ({type(exc).__name__}: {exc})"
        ok &= passed
        if verbose:
            print(f"{'PASS' if passed else 'FAIL'}  {name}")
    return ok
