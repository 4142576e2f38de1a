"""Data-fidelity losses, their proximal maps and conjugate proximal maps.

Three losses are supported, all anchored at the observation ``y``::

    sq_l2 : (w / 2) ||v - y||_2^2
    l1    : lam ||v - y||_1
    l2    : lam ||v - y||_2

The conjugate prox is obtained only through the Moreau identity
``prox_{s F*}(z) = z - s prox_{F/s}(z / s)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "FIDELITY_KINDS",
    "Fidelity",
    "prox_optimality_residual",
    "prox_bruteforce_oracle",
]

FIDELITY_KINDS = ("sq_l2", "l1", "l2")

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True, eq=False)
class Fidelity:
    """Loss variant, observation and strictly positive weight.

    For ``sq_l2`` the weight is ``1 / sigma_y**2``; for ``l1`` and ``l2`` it is
    ``lambda``.
    """

    kind: str
    y: np.ndarray
    weight: float

    def __post_init__(self):
        if self.kind not in FIDELITY_KINDS:
            raise ValueError(f"unknown fidelity {self.kind!r}; expected one of {FIDELITY_KINDS}")
        if not self.weight > 0:
            raise ValueError("fidelity weight must be positive")
        y = np.array(self.y, dtype=np.float64)
        if not np.all(np.isfinite(y)):
            raise ValueError("observation contains non-finite entries")
        y.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "weight", float(self.weight))

    @classmethod
    def sq_l2(cls, y, sigma_y: float = 1.0) -> "Fidelity":
        return cls("sq_l2", y, 1.0 / sigma_y**2)

    @classmethod
    def l1(cls, y, lam: float) -> "Fidelity":
        return cls("l1", y, lam)

    @classmethod
    def l2(cls, y, lam: float) -> "Fidelity":
        return cls("l2", y, lam)

    def _check(self, v):
        v = np.asarray(v, dtype=np.float64)
        if v.shape != self.y.shape:
            raise ValueError(f"shape mismatch: argument {v.shape}, observation {self.y.shape}")
        return v

    def __call__(self, v) -> float:
        return self.eval(v)

    def eval(self, v) -> float:
        r = self._check(v) - self.y
        if self.kind == "sq_l2":
            return 0.5 * self.weight * float(np.dot(r.ravel(), r.ravel()))
        if self.kind == "l1":
            return self.weight * float(np.abs(r).sum())
        return self.weight * float(np.linalg.norm(r.ravel()))

    def gradient(self, v) -> np.ndarray:
        if self.kind != "sq_l2":
            raise ValueError(f"{self.kind} fidelity is not differentiable")
        return self.weight * (self._check(v) - self.y)

    def prox(self, step: float, x) -> np.ndarray:
        """``argmin_p step * F(p) + 0.5 ||p - x||^2`` in closed form."""
        if step <= 0:
            raise ValueError("prox step must be positive")
        x = self._check(x)
        lam = step * self.weight
        d = x - self.y
        if self.kind == "sq_l2":
            return (x + lam * self.y) / (1.0 + lam)
        if self.kind == "l1":
            return self.y + np.sign(d) * np.maximum(np.abs(d) - lam, 0.0)
        nrm = float(np.linalg.norm(d.ravel()))
        return self.y + (1.0 - lam / max(nrm, lam)) * d

    def prox_conjugate(self, sigma: float, z) -> np.ndarray:
        """``prox_{sigma F*}(z)`` via the Moreau identity."""
        if sigma <= 0:
            raise ValueError("sigma must be positive")
        z = self._check(z)
        return z - sigma * self.prox(1.0 / sigma, z / sigma)


def prox_optimality_residual(f: Fidelity, step: float, x, p) -> float:
    """Distance of ``0`` from ``step * dF(p) + (p - x)``.

    At kinks the subdifferential is a set; the residual is the distance from
    zero to that set (zero when the sign conditions hold).
    """
    x = np.asarray(x, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    lam = step * f.weight
    r = p - f.y
    g = p - x
    if f.kind == "sq_l2":
        return float(np.max(np.abs(lam * r + g), initial=0.0))
    if f.kind == "l1":
        # Coordinates with p == y: subgradient lam * [-1, 1], so need |g| <= lam.
        at_kink = r == 0.0
        smooth = np.abs(lam * np.sign(r) + g)
        kink = np.maximum(np.abs(g) - lam, 0.0)
        return float(np.max(np.where(at_kink, kink, smooth), initial=0.0))
    nrm = float(np.linalg.norm(r.ravel()))
    if nrm == 0.0:
        return max(float(np.linalg.norm(g.ravel())) - lam, 0.0)
    return float(np.max(np.abs(lam * r / nrm + g), initial=0.0))


def _golden_section(fun, lo, hi, xtol):
    """Vectorized golden-section minimization of a unimodal ``fun`` on ``[lo, hi]``."""
    a = np.array(lo, dtype=np.float64)
    b = np.array(hi, dtype=np.float64)
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = fun(c), fun(d)
    while np.max(b - a, initial=0.0) > xtol:
        left = fc < fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        c_new = b - _GOLDEN * (b - a)
        d_new = a + _GOLDEN * (b - a)
        c, d = c_new, d_new
        fc, fd = fun(c), fun(d)
    mid = 0.5 * (a + b)
    # Endpoints can beat the interior when the minimum sits on the boundary.
    best = mid
    fbest = fun(mid)
    for cand in (np.asarray(lo, dtype=np.float64), np.asarray(hi, dtype=np.float64)):
        fcand = fun(cand)
        better = fcand < fbest
        best = np.where(better, cand, best)
        fbest = np.where(better, fcand, fbest)
    return best


def prox_bruteforce_oracle(f: Fidelity, step: float, x, xtol: float = 1e-10) -> np.ndarray:
    """Numerical prox by golden-section search, independent of the closed forms.

    ``sq_l2`` and ``l1`` are separable and are minimized per coordinate on the
    segment between ``x`` and ``y``. For ``l2`` the minimizer lies on the ray from
    ``y`` through ``x``; the 1-D problem ``lam |s| + 0.5 (s - ||x - y||)^2`` is
    solved for the offset ``s``.
    """
    x = np.asarray(x, dtype=np.float64)
    y = f.y
    lam = step * f.weight
    if lam == 0:
        return x.copy()
    if f.kind in ("sq_l2", "l1"):
        if f.kind == "sq_l2":
            def obj(p):
                return lam * 0.5 * (p - y) ** 2 + 0.5 * (p - x) ** 2
        else:
            def obj(p):
                return lam * np.abs(p - y) + 0.5 * (p - x) ** 2
        return _golden_section(obj, np.minimum(x, y), np.maximum(x, y), xtol)
    d = x - y
    nrm = float(np.linalg.norm(d.ravel()))
    if nrm == 0.0:
        return y.copy()

    def obj1(s):
        return lam * np.abs(s) + 0.5 * (s - nrm) ** 2

    s = float(_golden_section(obj1, np.array(0.0), np.array(nrm), xtol * max(1.0, nrm)))
    return y + (s / nrm) * d
