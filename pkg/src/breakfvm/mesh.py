"""Truncated volume grid on ]0, R]."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class MeshError(ValueError):
    """Raised when a mesh cannot be built from the given arguments."""


@dataclass(frozen=True, eq=False)
class Mesh:
    """Partition of ]0, R] into ``I`` cells.

    Cells are 0-indexed: cell ``i`` is ``]edges[i], edges[i + 1]]`` with
    midpoint ``midpoints[i]`` and width ``widths[i]``.
    """

    edges: np.ndarray
    midpoints: np.ndarray
    widths: np.ndarray

    @property
    def R(self) -> float:
        return float(self.edges[-1])

    @property
    def I(self) -> int:  # noqa: E743
        return int(self.widths.size)

    @property
    def h(self) -> float:
        return float(self.widths.max())

    def __len__(self) -> int:
        return self.I

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Mesh):
            return NotImplemented
        return bool(np.array_equal(self.edges, other.edges))

    def __hash__(self) -> int:
        return hash(self.edges.tobytes())

    def is_refinement_of(self, coarse: "Mesh") -> bool:
        """True when every edge of ``coarse`` is also an edge of this mesh."""
        if self.I % coarse.I:
            return False
        k = self.I // coarse.I
        return bool(np.array_equal(self.edges[::k], coarse.edges))


def _from_edges(edges: np.ndarray) -> Mesh:
    edges = np.array(edges, dtype=np.float64)
    edges.setflags(write=False)
    mids = 0.5 * (edges[:-1] + edges[1:])
    widths = np.diff(edges)
    mids.setflags(write=False)
    widths.setflags(write=False)
    return Mesh(edges=edges, midpoints=mids, widths=widths)


def _check_R_I(R: float, I: int) -> None:
    if not np.isfinite(R) or R <= 0:
        raise MeshError(f"R must be positive and finite, got {R!r}")
    if int(I) != I or I < 1:
        raise MeshError(f"cell count must be a positive integer, got {I!r}")


def build_uniform(R: float, I: int) -> Mesh:
    _check_R_I(R, I)
    edges = np.arange(I + 1, dtype=np.float64) * R / I
    edges[-1] = R
    return _from_edges(edges)


def build_geometric(R: float, I: int, ratio: float) -> Mesh:
    """Cells whose widths grow by ``ratio`` from left to right.

    The last edge is pinned to ``R``. Extreme ratios give very thin first
    cells; nothing beyond positivity is enforced.
    """
    _check_R_I(R, I)
    if not np.isfinite(ratio) or ratio <= 0:
        raise MeshError(f"ratio must be positive, got {ratio!r}")
    if ratio == 1.0:
        return build_uniform(R, I)
    powers = ratio ** np.arange(I, dtype=np.float64)
    w0 = R * (ratio - 1.0) / (ratio**I - 1.0)
    edges = np.empty(I + 1)
    edges[0] = 0.0
    edges[1:] = w0 * np.cumsum(powers)
    edges[-1] = R
    if np.any(np.diff(edges) <= 0):
        raise MeshError(f"ratio={ratio} with I={I} yields degenerate cells")
    return _from_edges(edges)


def build_custom(edges) -> Mesh:
    edges = np.asarray(edges, dtype=np.float64)
    if edges.ndim != 1 or edges.size < 2:
        raise MeshError("edges must be a 1-D array with at least two entries")
    if not np.all(np.isfinite(edges)):
        raise MeshError("edges must be finite")
    if edges[0] != 0.0:
        raise MeshError(f"first edge must be 0, got {edges[0]}")
    if np.any(np.diff(edges) <= 0):
        raise MeshError("edges must be strictly increasing (non-monotone edges)")
    return _from_edges(edges)
