"""Dense signals, matrix-free linear operators and spectral-norm estimation.

Signals are plain ``float64`` numpy arrays. Images use ``(channels, height,
width)`` layout; toy problems may use flat vectors. Operators are immutable
closures pairing a forward map with its hand-written adjoint.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "LinearOp",
    "as_signal",
    "dot",
    "identity",
    "matrix_op",
    "compose",
    "scale",
    "explicit_matrix",
    "power_iteration",
    "adjoint_test",
]

Shape = tuple[int, ...]

MAX_EXPLICIT_ENTRIES = 2**20


def as_signal(x, shape: Optional[Sequence[int]] = None) -> np.ndarray:
    """Return ``x`` as a finite float64 array, optionally checking its shape."""
    arr = np.asarray(x, dtype=np.float64)
    if shape is not None and arr.shape != tuple(shape):
        raise ValueError(f"expected signal of shape {tuple(shape)}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("signal contains non-finite entries")
    return arr


def dot(a: np.ndarray, b: np.ndarray) -> float:
    """Euclidean inner product of two signals of identical shape."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch in dot: {a.shape} vs {b.shape}")
    return float(np.dot(a.ravel(), b.ravel()))


@dataclass(frozen=True)
class LinearOp:
    """Matrix-free linear map ``A`` together with its adjoint ``A^T``.

    Parameters
    ----------
    apply, adjoint : callable
        Forward and adjoint maps. They receive arrays of ``in_shape`` and
        ``out_shape`` respectively and must not modify their argument.
    in_shape, out_shape : tuple of int
    norm_bound : float, optional
        Known upper bound on the spectral norm.
    name : str
    """

    apply: Callable[[np.ndarray], np.ndarray]
    adjoint: Callable[[np.ndarray], np.ndarray]
    in_shape: Shape
    out_shape: Shape
    norm_bound: Optional[float] = None
    name: str = "op"

    def __post_init__(self):
        object.__setattr__(self, "in_shape", tuple(int(s) for s in self.in_shape))
        object.__setattr__(self, "out_shape", tuple(int(s) for s in self.out_shape))
        if self.norm_bound is not None and self.norm_bound < 0:
            raise ValueError("norm_bound must be nonnegative")

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != self.in_shape:
            raise ValueError(f"{self.name}: expected input {self.in_shape}, got {x.shape}")
        return self.apply(x)

    def T(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=np.float64)
        if z.shape != self.out_shape:
            raise ValueError(f"{self.name}: expected adjoint input {self.out_shape}, got {z.shape}")
        return self.adjoint(z)

    @property
    def in_size(self) -> int:
        return math.prod(self.in_shape)

    @property
    def out_size(self) -> int:
        return math.prod(self.out_shape)


def identity(shape: Sequence[int]) -> LinearOp:
    shape = tuple(shape)
    return LinearOp(
        apply=lambda x: x.copy(),
        adjoint=lambda z: z.copy(),
        in_shape=shape,
        out_shape=shape,
        norm_bound=1.0,
        name="identity",
    )


def matrix_op(matrix: np.ndarray, norm_bound: Optional[float] = None) -> LinearOp:
    """Wrap a dense ``(m, n)`` matrix acting on flat vectors."""
    M = np.array(matrix, dtype=np.float64)
    if M.ndim != 2:
        raise ValueError("matrix_op expects a 2-D array")
    M.setflags(write=False)
    return LinearOp(
        apply=lambda x: M @ x,
        adjoint=lambda z: M.T @ z,
        in_shape=(M.shape[1],),
        out_shape=(M.shape[0],),
        norm_bound=norm_bound,
        name="matrix",
    )


def compose(a: LinearOp, b: LinearOp) -> LinearOp:
    """Return ``a @ b``, i.e. ``x -> a(b(x))``."""
    if b.out_shape != a.in_shape:
        raise ValueError(f"cannot compose: {b.name} outputs {b.out_shape}, {a.name} expects {a.in_shape}")
    bound = None
    if a.norm_bound is not None and b.norm_bound is not None:
        bound = a.norm_bound * b.norm_bound
    return LinearOp(
        apply=lambda x: a.apply(b.apply(x)),
        adjoint=lambda z: b.adjoint(a.adjoint(z)),
        in_shape=b.in_shape,
        out_shape=a.out_shape,
        norm_bound=bound,
        name=f"{a.name}*{b.name}",
    )


def scale(op: LinearOp, c: float) -> LinearOp:
    c = float(c)
    bound = None if op.norm_bound is None else abs(c) * op.norm_bound
    return LinearOp(
        apply=lambda x: c * op.apply(x),
        adjoint=lambda z: c * op.adjoint(z),
        in_shape=op.in_shape,
        out_shape=op.out_shape,
        norm_bound=bound,
        name=f"{c:g}*{op.name}",
    )


def explicit_matrix(op: LinearOp) -> np.ndarray:
    """Materialize ``op`` as an ``(out_size, in_size)`` matrix by probing basis vectors.

    Only intended for small operators used as test oracles.
    """
    n, m = op.in_size, op.out_size
    if n * m > MAX_EXPLICIT_ENTRIES:
        raise ValueError(f"operator too large to materialize ({m}x{n} > 2^20 entries)")
    M = np.empty((m, n))
    e = np.zeros(n)
    for j in range(n):
        e[j] = 1.0
        M[:, j] = op.apply(e.reshape(op.in_shape)).ravel()
        e[j] = 0.0
    return M


def power_iteration(op: LinearOp, max_iters: int = 100, tol: float = 1e-12, seed: int = 0,
                    full_output: bool = False):
    """Estimate the spectral norm ``||A|| = sqrt(lambda_max(A^T A))``.

    Iterates ``v <- A^T A v / ||A^T A v||`` from a seeded uniform random start
    until the relative change of the Rayleigh quotient drops below ``tol``.

    Returns
    -------
    norm : float
    info : dict, only if ``full_output``
        ``{"iterations": int, "converged": bool, "rayleigh": float}``.
        Non-convergence is reported here rather than raised.
    """
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    rng = np.random.default_rng(seed)
    v = rng.uniform(-1.0, 1.0, size=op.in_shape)
    v /= np.linalg.norm(v)
    lam = 0.0
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        w = op.adjoint(op.apply(v))
        lam_new = float(np.dot(v.ravel(), w.ravel()))
        wn = float(np.linalg.norm(w))
        if wn == 0.0:
            lam, converged = 0.0, True
            break
        v = w / wn
        if it > 1 and abs(lam_new - lam) <= tol * abs(lam_new):
            lam, converged = lam_new, True
            break
        lam = lam_new
    norm = math.sqrt(max(lam, 0.0))
    if full_output:
        return norm, {"iterations": it, "converged": converged, "rayleigh": lam}
    return norm


def adjoint_test(op: LinearOp, n_pairs: int = 100, seed: int = 0) -> float:
    """Largest normalized adjoint mismatch ``|<Ax,z> - <x,A^T z>| / (1 + |<Ax,z>|)``."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_pairs):
        x = rng.standard_normal(op.in_shape)
        z = rng.standard_normal(op.out_shape)
        lhs = dot(op.apply(x), z)
        rhs = dot(x, op.adjoint(z))
        worst = max(worst, abs(lhs - rhs) / (1.0 + abs(lhs)))
    return worst
