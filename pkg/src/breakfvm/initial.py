"""Cell-averaged initial data."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .mesh import Mesh


def constant(mesh: Mesh, value: float = 1.0) -> np.ndarray:
    return np.full(mesh.I, float(value))


def exponential(mesh: Mesh, amplitude: float = 1.0, scale: float = 1.0) -> np.ndarray:
    """Exact cell means of ``amplitude * exp(-eps / scale)``."""
    lo, hi = mesh.edges[:-1], mesh.edges[1:]
    return amplitude * scale * (np.exp(-lo / scale) - np.exp(-hi / scale)) / mesh.widths


def from_csv(mesh: Mesh, path: str | Path) -> np.ndarray:
    """Read one ``concentration`` value per cell (header row required)."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or "concentration" not in rows[0]:
        raise ValueError(f"{path}: expected a 'concentration' column")
    c = np.array([float(r["concentration"]) for r in rows])
    if c.size != mesh.I:
        raise ValueError(f"{path}: {c.size} values for a mesh of {mesh.I} cells")
    if np.any(c < 0) or not np.all(np.isfinite(c)):
        raise ValueError(f"{path}: concentrations must be finite and non-negative")
    return c
