"""Collision kernels K(eps, rho) and power-law breakage distributions b(eps, rho, sigma)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import integrate

from .mesh import Mesh

EVAL_MODES = ("midpoint", "cell_average")
FAMILIES = ("power_conserving", "power_paper")


class KernelError(ValueError):
    """Invalid kernel parameters or arguments outside a kernel's domain."""


@dataclass(frozen=True)
class CollisionKernel:
    """Two-exponent power family ``alpha * (eps**zeta * rho**eta + eps**eta * rho**zeta)``.

    ``zeta = 0`` (constant-kernel limit when ``eta = 0``) lies outside the
    standard hypothesis and must be requested with ``allow_zeta_zero``.
    """

    alpha: float
    zeta: float
    eta: float
    eval_mode: str = "midpoint"
    allow_zeta_zero: bool = False

    def __post_init__(self):
        if not math.isfinite(self.alpha) or self.alpha < 0:
            raise KernelError(f"alpha must be >= 0, got {self.alpha}")
        if not (0.0 <= self.zeta <= self.eta <= 1.0):
            raise KernelError(
                f"exponents must satisfy 0 <= zeta <= eta <= 1, got zeta={self.zeta}, eta={self.eta}"
            )
        if self.zeta == 0.0 and not self.allow_zeta_zero:
            raise KernelError("zeta = 0 violates H1 (0 < zeta); pass allow_zeta_zero=True to use it")
        if self.eval_mode not in EVAL_MODES:
            raise KernelError(f"eval_mode must be one of {EVAL_MODES}, got {self.eval_mode!r}")

    @property
    def satisfies_H1(self) -> bool:
        return self.alpha >= 0 and 0.0 < self.zeta <= self.eta <= 1.0

    def __call__(self, eps, rho):
        return eval_K(self, eps, rho)

    def young_bound_holds(self, R: float) -> bool:
        """Whether ``K(eps, rho) <= alpha * (eps + rho)`` on ]0, R]^2.

        True for ``zeta + eta >= 1`` and ``R <= 1`` (weighted AM-GM); it fails
        near the origin when ``zeta + eta < 1``.
        """
        return self.zeta + self.eta >= 1.0 and R <= 1.0


def eval_K(k: CollisionKernel, eps, rho):
    eps = np.asarray(eps, dtype=np.float64)
    rho = np.asarray(rho, dtype=np.float64)
    if np.any(eps <= 0) or np.any(rho <= 0):
        raise KernelError("collision kernel arguments must be positive")
    # a + b == b + a bitwise, so swapping arguments gives the identical value
    out = k.alpha * (eps**k.zeta * rho**k.eta + eps**k.eta * rho**k.zeta)
    return float(out) if out.ndim == 0 else out


def _cell_power_mean(mesh: Mesh, m: float) -> np.ndarray:
    """Cell averages of eps**m: (e_hi**(m+1) - e_lo**(m+1)) / ((m+1) * width)."""
    lo, hi = mesh.edges[:-1], mesh.edges[1:]
    return (hi ** (m + 1.0) - lo ** (m + 1.0)) / ((m + 1.0) * mesh.widths)


def kernel_factors(k: CollisionKernel, mesh: Mesh) -> tuple[np.ndarray, np.ndarray]:
    """Per-cell factors ``(u_zeta, u_eta)`` with ``K_ij = alpha*(u_zeta[i]*u_eta[j] + u_eta[i]*u_zeta[j])``."""
    if k.eval_mode == "midpoint":
        x = mesh.midpoints
        return x**k.zeta, x**k.eta
    return _cell_power_mean(mesh, k.zeta), _cell_power_mean(mesh, k.eta)


def kernel_matrix(k: CollisionKernel, mesh: Mesh) -> np.ndarray:
    uz, ue = kernel_factors(k, mesh)
    return k.alpha * (np.outer(uz, ue) + np.outer(ue, uz))


def cell_avg_K(k: CollisionKernel, mesh: Mesh, i: int, j: int) -> float:
    """Exact mean of K over cell i x cell j (0-based indices)."""
    if not (0 <= i < mesh.I and 0 <= j < mesh.I):
        raise IndexError(f"cell pair ({i}, {j}) outside mesh of {mesh.I} cells")
    az = _cell_power_mean(mesh, k.zeta)
    ae = _cell_power_mean(mesh, k.eta)
    return float(k.alpha * (az[i] * ae[j] + ae[i] * az[j]))


@dataclass(frozen=True)
class BreakageKernel:
    """Singular power-law fragment distribution ``coef * eps**e / rho**(e+1)`` on ]0, rho].

    ``power_conserving`` uses ``coef = e + 2`` and conserves parent volume.
    ``power_paper`` uses ``coef = e + 1``; it has unit multiplicity and
    returns only ``rho * (e+1)/(e+2)`` of the parent volume.
    Neither family depends on the collision partner ``sigma``.
    """

    family: str = "power_conserving"
    exponent: float = 0.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise KernelError(f"family must be one of {FAMILIES}, got {self.family!r}")
        if not (-1.0 < self.exponent <= 0.0):
            raise KernelError(f"breakage exponent must lie in ]-1, 0], got {self.exponent}")

    @property
    def coef(self) -> float:
        e = self.exponent
        return e + 2.0 if self.family == "power_conserving" else e + 1.0

    @property
    def conserves_volume(self) -> bool:
        return self.family == "power_conserving"

    @property
    def N(self) -> float:
        """Fragment multiplicity; independent of the parent volume for both families."""
        return self.coef / (self.exponent + 1.0)

    def multiplicity(self, rho) -> float:
        return self.N

    def __call__(self, eps, rho, sigma=None):
        eps = np.asarray(eps, dtype=np.float64)
        rho = np.asarray(rho, dtype=np.float64)
        e = self.exponent
        with np.errstate(divide="ignore"):
            val = self.coef * eps**e / rho ** (e + 1.0)
        out = np.where(eps <= rho, val, 0.0)
        return float(out) if out.ndim == 0 else out

    def primitive(self, x, rho):
        """Antiderivative of b in eps, zero at eps = 0."""
        e1 = self.exponent + 1.0
        return self.coef / e1 * (np.asarray(x) / rho) ** e1

    def mass_primitive(self, x, rho):
        """Antiderivative of eps * b in eps, zero at eps = 0."""
        e2 = self.exponent + 2.0
        return self.coef / e2 * rho * (np.asarray(x) / rho) ** e2


def _check_limits(a, c, rho):
    if not rho > 0:
        raise KernelError(f"parent volume must be positive, got {rho}")
    if not (0 <= a <= c <= rho):
        raise KernelError(f"need 0 <= a <= c <= rho, got a={a}, c={c}, rho={rho}")


def partial_breakage_integral(b: BreakageKernel, a: float, c: float, rho: float) -> float:
    """Number of fragments with volume in [a, c] produced by a parent of volume ``rho``."""
    _check_limits(a, c, rho)
    e1 = b.exponent + 1.0
    return float(b.coef / e1 * ((c / rho) ** e1 - (a / rho) ** e1))


def mass_weighted_integral(b: BreakageKernel, a: float, c: float, rho: float) -> float:
    """Fragment volume in [a, c] produced by a parent of volume ``rho``."""
    _check_limits(a, c, rho)
    e2 = b.exponent + 2.0
    return float(b.coef / e2 * rho * ((c / rho) ** e2 - (a / rho) ** e2))


class H2Result(NamedTuple):
    Q: float
    holds: bool
    max_rel_err: float
    diverging: bool


def verify_H2(
    b: BreakageKernel,
    tau: float,
    upsilon_p: float,
    rhos=(0.01, 1.0, 10.0),
    rtol: float = 1e-10,
) -> H2Result:
    """Sharp constant Q with ``int_0^rho eps**(-upsilon_p) * b**tau = Q * rho**(1 - upsilon_p - tau)``.

    The identity is confirmed at each ``rho`` in ``rhos`` by algebraic-weight
    quadrature. When the integrand is not integrable at 0 the result has
    ``Q = inf``, ``holds = False`` and ``diverging = True``.
    """
    if not (1.0 <= tau < 2.0):
        raise KernelError(f"tau must lie in [1, 2), got {tau}")
    if upsilon_p < 0:
        raise KernelError(f"upsilon_p must be >= 0, got {upsilon_p}")
    e = b.exponent
    s = e * tau - upsilon_p + 1.0
    if s <= 0:
        return H2Result(math.inf, False, math.inf, True)
    Q = b.coef**tau / s
    worst = 0.0
    for rho in rhos:
        # f is analytically constant: b**tau * eps**(-upsilon_p) / eps**(s-1)
        def f(x, rho=rho):
            # the powers cancel exactly; the endpoint 0 is replaced by a tiny abscissa
            x = max(x, rho * 1e-100)
            return b(x, rho) ** tau * x ** (-upsilon_p) / x ** (s - 1.0)

        num, _ = integrate.quad(f, 0.0, rho, weight="alg", wvar=(s - 1.0, 0.0), epsabs=0.0, epsrel=1e-13)
        ref = Q * rho ** (1.0 - upsilon_p - tau)
        worst = max(worst, abs(num - ref) / abs(ref))
    return H2Result(Q, worst <= rtol, worst, False)
