"""Estimated joint densities and their file formats.

A Density2D holds a non-negative (or, for raw correlation estimates, signed)
2D array with explicit axis definitions.  Axis 0 is the Fourier-arm camera
coordinate x_k, axis 1 the imaging-arm coordinate x_p, both in um, unless the
axis names say otherwise.  Files: CSV with the axes in the header row/column
(the exact artifact) plus a 16-bit PGM preview (deterministic bytes, lossy
scaling).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .states import DomainError

__all__ = ["Density2D", "write_density_csv", "read_density_csv", "write_density_pgm"]


@dataclass(frozen=True)
class Density2D:
    values: np.ndarray
    k_origin: float
    k_pitch: float
    p_origin: float
    p_pitch: float
    normalized: bool = False
    k_name: str = "xk"
    p_name: str = "xp"

    def __post_init__(self):
        if self.values.ndim != 2:
            raise DomainError("density values must be a 2D array")
        if not (self.k_pitch > 0.0 and self.p_pitch > 0.0):
            raise DomainError("axis pitches must be positive (axes strictly increasing)")

    @property
    def k_axis(self) -> np.ndarray:
        return self.k_origin + np.arange(self.values.shape[0]) * self.k_pitch

    @property
    def p_axis(self) -> np.ndarray:
        return self.p_origin + np.arange(self.values.shape[1]) * self.p_pitch

    def self_normalized(self) -> "Density2D":
        """Scale to unit sum; the estimator can produce signed values, the sum must be positive."""
        total = float(self.values.sum())
        if not total > 0.0:
            raise DomainError("density sum must be positive to self-normalise")
        return replace(self, values=self.values / total, normalized=True)

    def clamped(self) -> "Density2D":
        return replace(self, values=np.maximum(self.values, 0.0))

    def marginals(self) -> tuple[np.ndarray, np.ndarray]:
        """Sums over the opposite axis: (profile over x_k, profile over x_p)."""
        return self.values.sum(axis=1), self.values.sum(axis=0)


def _fmt(x: float) -> str:
    return repr(float(x))


def write_density_csv(density: Density2D, path, meta: dict | None = None) -> None:
    """CSV with axis coordinates in the first row and column.

    Lines starting with '#' carry key=value metadata; the first data row
    lists the x_p coordinates, each following row starts with its x_k
    coordinate.  Floats are written with repr so a read round-trips exactly.
    """
    lines = ["# purephase-density v1"]
    items = {"normalized": int(density.normalized), "k_name": density.k_name, "p_name": density.p_name}
    if meta:
        items.update(meta)
    for key in items:
        lines.append(f"# {key}={items[key]}")
    lines.append(",".join([f"{density.k_name}\\{density.p_name}"] + [_fmt(v) for v in density.p_axis]))
    for i, row in enumerate(density.values):
        lines.append(",".join([_fmt(density.k_axis[i])] + [_fmt(v) for v in row]))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_density_csv(path) -> Density2D:
    meta = {}
    rows = []
    p_axis = None
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, _, val = body.partition("=")
                    meta[key.strip()] = val.strip()
                continue
            cells = line.split(",")
            if p_axis is None:
                p_axis = np.array([float(c) for c in cells[1:]])
            else:
                rows.append([float(c) for c in cells])
    if p_axis is None or not rows:
        raise DomainError(f"no density data in {path}")
    arr = np.array(rows)
    k_axis = arr[:, 0]
    values = arr[:, 1:]
    k_pitch = float(k_axis[1] - k_axis[0]) if k_axis.size > 1 else 1.0
    p_pitch = float(p_axis[1] - p_axis[0]) if p_axis.size > 1 else 1.0
    return Density2D(
        values,
        float(k_axis[0]),
        k_pitch,
        float(p_axis[0]),
        p_pitch,
        normalized=bool(int(meta.get("normalized", "0"))),
        k_name=meta.get("k_name", "xk"),
        p_name=meta.get("p_name", "xp"),
    )


def write_density_pgm(density: Density2D, path) -> None:
    """16-bit PGM preview: values min-max scaled to 0..65535, big-endian."""
    vals = density.values
    lo, hi = float(vals.min()), float(vals.max())
    span = hi - lo
    if span <= 0.0:
        scaled = np.zeros_like(vals, dtype=np.uint16)
    else:
        scaled = np.round((vals - lo) / span * 65535.0).astype(np.uint16)
    h, w = scaled.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n65535\n".encode())
        fh.write(scaled.astype(">u2").tobytes())
