"""File formats of the experiment runner: results CSV and binary PGM images."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

__all__ = ["RESULT_COLUMNS", "RunRecord", "write_results_csv", "read_results_csv", "write_pgm",
           "read_pgm", "write_signal_pgm"]

RESULT_COLUMNS = ("run_id", "seed", "method", "fidelity", "task", "noise", "psnr_in", "psnr_out",
                  "ssim_out", "wall_ms", "status")


@dataclass(frozen=True)
class RunRecord:
    run_id: str
    seed: int
    method: str
    fidelity: str
    task: str
    noise: str
    psnr_in: float
    psnr_out: float
    ssim_out: float
    wall_ms: int
    status: str

    def to_row(self) -> list[str]:
        out = []
        for f in fields(self):
            v = getattr(self, f.name)
            out.append(repr(v) if isinstance(v, float) else str(v))
        return out

    @classmethod
    def from_row(cls, row) -> "RunRecord":
        if isinstance(row, dict):
            row = [row[c] for c in RESULT_COLUMNS]
        if len(row) != len(RESULT_COLUMNS):
            raise ValueError(f"expected {len(RESULT_COLUMNS)} columns, got {len(row)}")
        kw = {}
        for f, v in zip(fields(cls), row):
            if f.type in ("int", int):
                kw[f.name] = int(v)
            elif f.type in ("float", float):
                kw[f.name] = float(v)
            else:
                kw[f.name] = v
        return cls(**kw)

    def same_as(self, other: "RunRecord", ignore=("wall_ms",)) -> bool:
        for f in fields(self):
            if f.name in ignore:
                continue
            a, b = getattr(self, f.name), getattr(other, f.name)
            if isinstance(a, float) and math.isnan(a) and math.isnan(b):
                continue
            if a != b:
                return False
        return True


def write_results_csv(records, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_COLUMNS)
        for r in records:
            w.writerow(r.to_row())


def read_results_csv(path) -> list[RunRecord]:
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != RESULT_COLUMNS:
            raise ValueError(f"{path}: unexpected header {header}")
        return [RunRecord.from_row(row) for row in reader if row]


def write_pgm(path, image01: np.ndarray) -> None:
    """Write a 2-D array with values in ``[0, 1]`` as binary PGM (P5, maxval 255)."""
    img = np.asarray(image01, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError("PGM images are 2-D")
    data = np.clip(np.floor(img * 255.0 + 0.5), 0, 255).astype(np.uint8)
    h, w = data.shape
    with Path(path).open("wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def read_pgm(path) -> np.ndarray:
    """Read a P5 PGM written by :func:`write_pgm`; returns uint8 ``(height, width)``."""
    raw = Path(path).read_bytes()
    parts = raw.split(b"\n", 3)
    if parts[0] != b"P5":
        raise ValueError("not a binary PGM")
    w, h = (int(v) for v in parts[1].split())
    if int(parts[2]) != 255:
        raise ValueError("only maxval 255 is supported")
    return np.frombuffer(parts[3], dtype=np.uint8, count=w * h).reshape(h, w)


def write_signal_pgm(stem, x: np.ndarray) -> list[Path]:
    """Write a ``[-1, 1]`` signal as one PGM per channel: ``<stem>.pgm`` or ``<stem>_c<i>.pgm``."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(1, 1, -1)
    elif x.ndim == 2:
        x = x[None]
    stem = Path(stem)
    paths = []
    for c in range(x.shape[0]):
        p = stem.with_name(stem.name + ".pgm") if x.shape[0] == 1 else \
            stem.with_name(f"{stem.name}_c{c}.pgm")
        write_pgm(p, (x[c] + 1.0) / 2.0)
        paths.append(p)
    return paths
