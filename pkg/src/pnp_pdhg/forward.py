"""Degradation operators for denoising, deblurring, super-resolution and inpainting.

All operators act on ``(channels, height, width)`` images.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linops import LinearOp, identity

__all__ = [
    "TASK_KINDS",
    "TaskSpec",
    "make_identity",
    "gaussian_kernel",
    "make_gaussian_blur",
    "make_avgpool_sr",
    "make_mask",
    "box_mask",
    "random_mask",
    "build_operator",
    "naive_inverse",
]

TASK_KINDS = ("denoising", "deblur", "superres", "box_inpaint", "random_inpaint")


@dataclass(frozen=True)
class TaskSpec:
    kind: str = "denoising"
    kernel_size: int = 9
    kernel_sigma: float = 1.5
    factor: int = 2
    box_side: int = 8
    keep_prob: float = 0.5
    mask_seed: int = 0

    def __post_init__(self):
        if self.kind not in TASK_KINDS:
            raise ValueError(f"unknown task kind {self.kind!r}; expected one of {TASK_KINDS}")
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ValueError("kernel_size must be a positive odd integer")
        if self.kernel_sigma <= 0:
            raise ValueError("kernel_sigma must be positive")
        if self.factor < 2:
            raise ValueError("factor must be >= 2")
        if self.box_side < 0:
            raise ValueError("box_side must be nonnegative")
        if not 0.0 < self.keep_prob <= 1.0:
            raise ValueError("keep_prob must lie in (0, 1]")


def _check_image_shape(shape) -> tuple[int, int, int]:
    shape = tuple(int(s) for s in shape)
    if len(shape) != 3 or min(shape) < 1:
        raise ValueError(f"image shape must be (channels, height, width), got {shape}")
    return shape


def make_identity(shape) -> LinearOp:
    return identity(shape)


def gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    """Normalized, truncated 2-D Gaussian of odd side ``size``."""
    if size % 2 == 0:
        raise ValueError("kernel size must be odd")
    r = np.arange(size) - size // 2
    g = np.exp(-(r**2) / (2.0 * sigma**2))
    k = np.outer(g, g)
    return k / k.sum()


def make_gaussian_blur(shape, kernel_size: int = 9, kernel_sigma: float = 1.5) -> LinearOp:
    """Per-channel circular convolution with a normalized Gaussian kernel.

    The kernel is symmetric, so convolution and correlation coincide and the
    operator is self-adjoint with spectral norm 1.
    """
    c, h, w = _check_image_shape(shape)
    if kernel_size % 2 == 0:
        raise ValueError("kernel_size must be odd")
    if kernel_size > min(h, w):
        raise ValueError(f"kernel_size {kernel_size} exceeds image size {h}x{w}")
    kernel = gaussian_kernel(kernel_size, kernel_sigma)
    half = kernel_size // 2
    taps = [(kernel[a, b], a - half, b - half)
            for a in range(kernel_size) for b in range(kernel_size)]

    def conv(x):
        out = np.zeros_like(x)
        for k, da, db in taps:
            out += k * np.roll(x, (da, db), axis=(1, 2))
        return out

    def corr(z):
        out = np.zeros_like(z)
        for k, da, db in taps:
            out += k * np.roll(z, (-da, -db), axis=(1, 2))
        return out

    return LinearOp(conv, corr, (c, h, w), (c, h, w), norm_bound=1.0, name="blur")


def make_avgpool_sr(shape, factor: int = 2) -> LinearOp:
    """Average pooling over non-overlapping ``factor x factor`` blocks (norm ``1/factor``)."""
    c, h, w = _check_image_shape(shape)
    if factor < 1 or h % factor or w % factor:
        raise ValueError(f"factor {factor} must divide image size {h}x{w}")
    f = int(factor)
    lo = (c, h // f, w // f)

    def pool(x):
        return x.reshape(c, h // f, f, w // f, f).mean(axis=(2, 4))

    def spread(z):
        up = np.repeat(np.repeat(z, f, axis=1), f, axis=2)
        return up / (f * f)

    return LinearOp(pool, spread, (c, h, w), lo, norm_bound=1.0 / f, name=f"avgpool{f}")


def make_mask(shape, mask: np.ndarray) -> LinearOp:
    """Diagonal projector keeping pixels where ``mask`` is True.

    ``mask`` has shape ``(height, width)`` (shared by all channels) or the full
    image shape.
    """
    c, h, w = _check_image_shape(shape)
    m = np.asarray(mask, dtype=bool)
    if m.shape == (h, w):
        m = np.broadcast_to(m, (c, h, w))
    if m.shape != (c, h, w):
        raise ValueError(f"mask shape {m.shape} does not match image {(c, h, w)}")
    keep = m.astype(np.float64)
    keep.setflags(write=False)
    bound = 1.0 if m.any() else 0.0

    def project(x):
        return x * keep

    return LinearOp(project, project, (c, h, w), (c, h, w), norm_bound=bound, name="mask")


def box_mask(height: int, width: int, side: int) -> np.ndarray:
    """Boolean keep-mask with a centered ``side x side`` hole."""
    if side > min(height, width):
        raise ValueError("box side exceeds image size")
    m = np.ones((height, width), dtype=bool)
    r0 = (height - side) // 2
    c0 = (width - side) // 2
    m[r0:r0 + side, c0:c0 + side] = False
    return m


def random_mask(height: int, width: int, keep_prob: float, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.uniform(size=(height, width)) < keep_prob


def build_operator(task: TaskSpec, shape) -> LinearOp:
    c, h, w = _check_image_shape(shape)
    if task.kind == "denoising":
        return make_identity((c, h, w))
    if task.kind == "deblur":
        return make_gaussian_blur((c, h, w), task.kernel_size, task.kernel_sigma)
    if task.kind == "superres":
        return make_avgpool_sr((c, h, w), task.factor)
    if task.kind == "box_inpaint":
        return make_mask((c, h, w), box_mask(h, w, task.box_side))
    return make_mask((c, h, w), random_mask(h, w, task.keep_prob, task.mask_seed))


def naive_inverse(task: TaskSpec, op: LinearOp, y: np.ndarray) -> np.ndarray:
    """Measurement mapped to image space for reporting input quality.

    Nearest-neighbour upsampling for super-resolution, the measurement itself
    otherwise.
    """
    if task.kind == "superres":
        return op.adjoint(y) * task.factor**2
    return np.array(y, dtype=np.float64)
