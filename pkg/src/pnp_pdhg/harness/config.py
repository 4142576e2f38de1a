"""Experiment configuration: a flat ``key=value`` format with ``[section]`` headers.

Example::

    [prior]    kind=templates components=8 height=32 width=32 spread=0.1
    [task]     kind=denoising
    [noise]    kind=salt_pepper p=0.1
    [fidelity] kind=l1 lambda=0.5
    [schedule] T=100 alpha=0.8 eta=1.0
    [run]      seeds=0..49 out=results/

Several ``key=value`` tokens may share a line. ``#`` starts a comment.
"""

from __future__ import annotations

import copy
import hashlib
import itertools
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ..fidelity import FIDELITY_KINDS, Fidelity
from ..forward import TaskSpec
from ..noise import NoiseModel
from ..prior import GmmPrior, template_image_prior
from ..solvers import PdhgSchedule

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "FidelitySpec",
    "MethodSpec",
    "parse_config_text",
    "load_config",
    "apply_override",
    "expand_sweep",
    "METHODS",
]

METHODS = ("pdhg_pnp", "fbs_pnp", "hqs_pnp", "pdhg_convex")

ALLOWED_KEYS = {
    "prior": {"kind", "file", "weights", "means", "vars", "shape", "components", "height",
              "width", "channels", "spread", "seed"},
    "task": {"kind", "kernel_size", "kernel_sigma", "factor", "box_side", "keep_prob", "mask_seed"},
    "noise": {"kind", "sigma", "alpha", "p"},
    "fidelity": {"kind", "lambda", "sigma_y", "lambda_sq_l2", "lambda_l1", "lambda_l2"},
    "method": {"kind", "step_size", "rho_penalty", "cg_iters", "n_avg", "reproject",
               "penalty_law", "g_weight", "iters"},
    "schedule": {"T", "alpha", "eta", "rho", "law"},
    "run": {"seeds", "out", "timing", "threads", "truth_file", "strict_steps"},
}

# Keys that only locate inputs or outputs and do not change results.
UNHASHED = {("run", "out"), ("run", "seeds"), ("run", "timing"), ("run", "threads")}


class ConfigError(ValueError):
    pass


def parse_config_text(text: str) -> dict[str, dict[str, str]]:
    data: dict[str, dict[str, str]] = {}
    section: Optional[str] = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            end = line.find("]")
            if end < 0:
                raise ConfigError(f"line {lineno}: unterminated section header")
            section = line[1:end].strip()
            if section not in ALLOWED_KEYS:
                raise ConfigError(f"line {lineno}: unknown section [{section}]")
            data.setdefault(section, {})
            line = line[end + 1:].strip()
            if not line:
                continue
        if section is None:
            raise ConfigError(f"line {lineno}: key outside of any section")
        for tok in line.split():
            if "=" not in tok:
                raise ConfigError(f"line {lineno}: expected key=value, got {tok!r}")
            key, value = tok.split("=", 1)
            if key not in ALLOWED_KEYS[section]:
                raise ConfigError(f"line {lineno}: unknown key {section}.{key}")
            data[section][key] = value
    return data


def format_config(data: dict[str, dict[str, str]]) -> str:
    lines = []
    for section in ALLOWED_KEYS:
        if section in data:
            lines.append(f"[{section}]")
            lines += [f"{k}={v}" for k, v in sorted(data[section].items())]
    return "\n".join(lines) + "\n"


def parse_seeds(text: str) -> list[int]:
    seeds: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = part.split("..", 1)
            seeds += list(range(int(lo), int(hi) + 1))
        elif part:
            seeds.append(int(part))
    if not seeds:
        raise ConfigError("run.seeds is empty")
    return seeds


def _parse_bool(value: str, name: str) -> bool:
    v = value.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{name}: expected a boolean, got {value!r}")


def _get(data, section, key, conv, default, name=None):
    raw = data.get(section, {}).get(key)
    if raw is None:
        return default
    try:
        return conv(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name or section + '.' + key}: cannot parse {raw!r} ({exc})") from None


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


@dataclass(frozen=True)
class FidelitySpec:
    kind: str = "sq_l2"
    lam: Optional[float] = None
    sigma_y: Optional[float] = None
    overrides: dict = field(default_factory=dict)

    def weight(self) -> float:
        """Per-kind override, then ``1 / sigma_y^2`` for sq_l2, then the shared ``lambda``."""
        if self.kind in self.overrides:
            return self.overrides[self.kind]
        if self.kind == "sq_l2" and self.sigma_y is not None:
            return 1.0 / self.sigma_y**2
        if self.lam is not None:
            return self.lam
        raise ConfigError(f"fidelity.lambda is required for kind={self.kind}")

    def build(self, y) -> Fidelity:
        return Fidelity(self.kind, y, self.weight())


@dataclass(frozen=True)
class MethodSpec:
    kind: str = "pdhg_pnp"
    step_size: float = 1.0
    rho_penalty: float = 1.0
    cg_iters: int = 50
    n_avg: int = 1
    reproject: bool = True
    penalty_law: str = "displayed"
    g_weight: float = 1.0
    iters: int = 500


@dataclass
class ExperimentConfig:
    prior: GmmPrior
    signal_shape: tuple
    task: TaskSpec
    noise: NoiseModel
    fidelity: FidelitySpec
    method: MethodSpec
    schedule: PdhgSchedule
    seeds: list
    output_dir: Path
    timing: bool = True
    threads: Optional[int] = None
    strict_steps: bool = False
    truth: Optional[np.ndarray] = None
    raw: dict = field(default_factory=dict)

    @property
    def config_hash(self) -> str:
        hashed = {s: {k: v for k, v in kv.items() if (s, k) not in UNHASHED}
                  for s, kv in self.raw.items()}
        return hashlib.sha256(format_config(hashed).encode()).hexdigest()[:12]

    @classmethod
    def from_mapping(cls, data: dict, base_dir: Path = Path(".")) -> "ExperimentConfig":
        prior, shape = _build_prior(data, base_dir)
        task = _build(TaskSpec, "task", data, {
            "kind": str, "kernel_size": int, "kernel_sigma": float, "factor": int,
            "box_side": int, "keep_prob": float, "mask_seed": int})
        noise = _build(NoiseModel, "noise", data, {
            "kind": str, "sigma": float, "alpha": float, "p": float})
        fid = data.get("fidelity", {})
        kind = fid.get("kind", "sq_l2")
        if kind not in FIDELITY_KINDS:
            raise ConfigError(f"fidelity.kind: unknown value {kind!r}")
        overrides = {}
        for k in FIDELITY_KINDS:
            v = _get(data, "fidelity", f"lambda_{k}", float, None)
            if v is not None:
                overrides[k] = v
        sigma_y = _get(data, "fidelity", "sigma_y", float, None)
        lam = _get(data, "fidelity", "lambda", float, None)
        if sigma_y is None and lam is None and noise.kind == "gaussian":
            sigma_y = noise.sigma
        fidelity = FidelitySpec(kind, lam, sigma_y, overrides)
        if fidelity.weight() <= 0:
            raise ConfigError("fidelity.lambda must be positive")
        method = MethodSpec(
            kind=_get(data, "method", "kind", str, "pdhg_pnp"),
            step_size=_get(data, "method", "step_size", float, 1.0),
            rho_penalty=_get(data, "method", "rho_penalty", float, 1.0),
            cg_iters=_get(data, "method", "cg_iters", int, 50),
            n_avg=_get(data, "method", "n_avg", int, 1),
            reproject=_get(data, "method", "reproject", lambda v: _parse_bool(v, "method.reproject"), True),
            penalty_law=_get(data, "method", "penalty_law", str, "displayed"),
            g_weight=_get(data, "method", "g_weight", float, 1.0),
            iters=_get(data, "method", "iters", int, 500),
        )
        if method.kind not in METHODS:
            raise ConfigError(f"method.kind: unknown value {method.kind!r}; expected one of {METHODS}")
        if method.kind in ("fbs_pnp", "hqs_pnp") and kind != "sq_l2":
            raise ConfigError(f"fidelity.kind: {method.kind} requires sq_l2, got {kind}")
        try:
            schedule = PdhgSchedule(
                T=_get(data, "schedule", "T", int, 100),
                alpha_exp=_get(data, "schedule", "alpha", float, 0.8),
                eta=_get(data, "schedule", "eta", float, 1.0),
                rho=_get(data, "schedule", "rho", float, 1.0),
                law=_get(data, "schedule", "law", str, "power"),
            )
        except ValueError as exc:
            raise ConfigError(f"schedule: {exc}") from None
        seeds = _get(data, "run", "seeds", parse_seeds, [0])
        out = Path(data.get("run", {}).get("out", "results"))
        if not out.is_absolute():
            out = base_dir / out
        truth = None
        truth_file = data.get("run", {}).get("truth_file")
        if truth_file:
            path = _resolve(truth_file, base_dir, "run.truth_file")
            truth = np.load(path).astype(np.float64)
            truth = truth.reshape(truth.shape[0], *shape)
        return cls(
            prior=prior, signal_shape=shape, task=task, noise=noise, fidelity=fidelity,
            method=method, schedule=schedule, seeds=seeds, output_dir=out,
            timing=_get(data, "run", "timing", lambda v: _parse_bool(v, "run.timing"), True),
            threads=_get(data, "run", "threads", int, None),
            strict_steps=_get(data, "run", "strict_steps",
                              lambda v: _parse_bool(v, "run.strict_steps"), False),
            truth=truth, raw=copy.deepcopy(data),
        )


def _resolve(path_text: str, base_dir: Path, name: str) -> Path:
    path = Path(path_text)
    if not path.is_absolute():
        path = base_dir / path
    if not path.exists():
        raise ConfigError(f"{name}: file {path} does not exist")
    return path


def _build(cls, section, data, convs):
    kwargs = {}
    for key, conv in convs.items():
        v = _get(data, section, key, conv, None)
        if v is not None:
            kwargs[key] = v
    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"{section}: {exc}") from None


def _build_prior(data, base_dir):
    sec = data.get("prior", {})
    kind = sec.get("kind", "templates" if "file" not in sec and "means" not in sec else
                   ("file" if "file" in sec else "gmm"))
    try:
        if kind == "templates":
            h = _get(data, "prior", "height", int, 32)
            w = _get(data, "prior", "width", int, 32)
            c = _get(data, "prior", "channels", int, 1)
            prior = template_image_prior(
                h, w, c,
                n_components=_get(data, "prior", "components", int, 8),
                spread=_get(data, "prior", "spread", float, 0.1),
                seed=_get(data, "prior", "seed", int, 0),
            )
            return prior, (c, h, w)
        if kind == "file":
            prior = GmmPrior.load(_resolve(sec["file"], base_dir, "prior.file"))
        elif kind == "gmm":
            weights = _get(data, "prior", "weights", _floats, None)
            means_txt = sec.get("means")
            vars_ = _get(data, "prior", "vars", _floats, None)
            if weights is None or means_txt is None or vars_ is None:
                raise ConfigError("prior: inline gmm needs weights=, means= and vars=")
            means = [_floats(m) for m in means_txt.split(";")]
            prior = GmmPrior(weights, means, vars_)
        else:
            raise ConfigError(f"prior.kind: unknown value {kind!r}")
    except ConfigError:
        raise
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"prior: {exc}") from None
    shape = _get(data, "prior", "shape", lambda v: tuple(int(s) for s in v.split(",")),
                 (1, 1, prior.dim))
    if int(np.prod(shape)) != prior.dim:
        raise ConfigError(f"prior.shape: {shape} does not match prior dim {prior.dim}")
    return prior, shape


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return ExperimentConfig.from_mapping(parse_config_text(text), base_dir=path.parent)


def apply_override(data: dict, key: str, value: str) -> dict:
    """Return a copy of ``data`` with ``section.key`` (or bare ``section`` for ``kind``) set."""
    section, _, name = key.partition(".")
    name = name or "kind"
    if section not in ALLOWED_KEYS:
        raise ConfigError(f"--vary: unknown section {section!r}")
    if name not in ALLOWED_KEYS[section]:
        raise ConfigError(f"--vary: unknown key {section}.{name}")
    out = copy.deepcopy(data)
    out.setdefault(section, {})[name] = value
    return out


def expand_sweep(data: dict, varies: list[str]) -> list[dict]:
    """Cartesian product of ``key=v1,v2,...`` overrides applied to ``data``."""
    axes = []
    for spec in varies:
        if "=" not in spec:
            raise ConfigError(f"--vary: expected key=v1,v2,..., got {spec!r}")
        key, values = spec.split("=", 1)
        vals = [v for v in values.split(",") if v]
        if not vals:
            raise ConfigError(f"--vary {key}: no values given")
        axes.append([(key, v) for v in vals])
    out = []
    for combo in itertools.product(*axes):
        d = data
        for key, v in combo:
            d = apply_override(d, key, v)
        out.append(d)
    return out
