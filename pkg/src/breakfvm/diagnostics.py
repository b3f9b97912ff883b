"""Moments, the weighted S-norm and the a-priori bounds on the discrete solution."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kernels import BreakageKernel, CollisionKernel, verify_H2
from .mesh import Mesh


@dataclass(frozen=True)
class NormParams:
    """Exponents of the weight ``eps**r + eps**(-2p)``."""

    r: float = 1.0
    p: float = 0.0

    def __post_init__(self):
        if not self.r >= 1.0:
            raise ValueError(f"norm exponent r must be >= 1, got {self.r}")
        if not self.p >= 0.0:
            raise ValueError(f"norm exponent p must be >= 0, got {self.p}")


def _values(s) -> np.ndarray:
    return np.asarray(getattr(s, "c", s), dtype=np.float64)


def moment(s, mesh: Mesh, j: float) -> float:
    """``sum_i eps_i**j * c_i * width_i``; ``s`` is a State or a plain array."""
    c = _values(s)
    w = mesh.widths if j == 0 else mesh.midpoints**j * mesh.widths
    return float(np.dot(w, c))


def weighted_norm(s, mesh: Mesh, norm: NormParams = NormParams()) -> float:
    """``sum_i (eps_i**r + eps_i**(-2p)) * c_i * width_i``, summed as two moments
    so that ``r = 1, p = 0`` reproduces ``M0 + M1`` bit for bit."""
    return moment(s, mesh, norm.r) + moment(s, mesh, -2.0 * norm.p)


def bound_P(t: float, k: CollisionKernel, b: BreakageKernel, norm_S_cin: float, M1in: float) -> float:
    """Upper bound on the total particle number at time ``t``."""
    return norm_S_cin * math.exp(2.0 * k.alpha * b.N * M1in * t)


def breakage_singular_constant(b: BreakageKernel, norm: NormParams) -> float:
    """Q for the weight eps**(-2p) at tau = 1; ``inf`` when that weight is not integrable against b."""
    return verify_H2(b, 1.0, 2.0 * norm.p, rhos=()).Q


def log_bound_Pstar(
    t: float,
    k: CollisionKernel,
    b: BreakageKernel,
    norm_S_cin: float,
    M1in: float,
    R: float,
    T: float,
    q_const: float,
) -> float:
    """Natural log of the weighted-norm bound; stays finite where the bound itself overflows."""
    if norm_S_cin == 0.0:
        return -math.inf
    lam_max = max(b.N, q_const)
    P_T = bound_P(T, k, b, norm_S_cin, M1in)
    if k.alpha == 0.0 or t == 0.0:
        return math.log(norm_S_cin)
    return math.log(norm_S_cin) + 2.0 * R * k.alpha * lam_max * P_T * t


def bound_Pstar(
    t: float,
    k: CollisionKernel,
    b: BreakageKernel,
    norm_S_cin: float,
    M1in: float,
    R: float,
    T: float,
    q_const: float,
) -> float:
    """Upper bound on the weighted norm; ``inf`` on overflow (use :func:`log_bound_Pstar`)."""
    logv = log_bound_Pstar(t, k, b, norm_S_cin, M1in, R, T, q_const)
    try:
        return math.exp(logv)
    except OverflowError:
        return math.inf
