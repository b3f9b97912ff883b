"""Independent checks on the scheme: closed-form moment ODEs, a dense-quadrature
right-hand side, the weak-form residual and nested-mesh self-convergence."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .kernels import BreakageKernel, CollisionKernel, eval_K
from .mesh import Mesh, build_custom
from .scheme import Trajectory


class ContractError(ValueError):
    """An oracle was called outside the setting it is valid for."""


def m0_oracle_product(t: float, M0in: float, M1in: float, k: CollisionKernel, b: BreakageKernel) -> float:
    """Particle number for ``K = 2*alpha*eps*rho`` with binary uniform breakage.

    Integrating the equation against 1 gives ``dM0/dt = (N - 1) * 2 * alpha * M1**2``
    with ``N = 2`` and ``M1`` constant, so ``M0`` grows linearly.
    """
    if not (k.zeta == 1.0 and k.eta == 1.0):
        raise ContractError("product oracle needs zeta = eta = 1")
    if not (b.conserves_volume and b.exponent == 0.0):
        raise ContractError("product oracle needs binary conserving breakage (exponent 0)")
    return M0in + 2.0 * k.alpha * M1in**2 * t


def m0_blowup_time(M0in: float, k: CollisionKernel) -> float:
    k0 = 2.0 * k.alpha
    return math.inf if k0 * M0in == 0 else 1.0 / (k0 * M0in)


def m0_oracle_constant(t: float, M0in: float, k: CollisionKernel, b: BreakageKernel | None = None) -> float:
    """Particle number for the constant kernel ``K = 2*alpha``: ``dM0/dt = K * M0**2``."""
    if not (k.zeta == 0.0 and k.eta == 0.0):
        raise ContractError("constant oracle needs zeta = eta = 0")
    if b is not None and not (b.conserves_volume and b.exponent == 0.0):
        raise ContractError("constant oracle needs binary conserving breakage (exponent 0)")
    tb = m0_blowup_time(M0in, k)
    if t >= tb:
        raise ValueError(f"t={t} is at or past the blow-up time {tb}")
    return M0in / (1.0 - 2.0 * k.alpha * M0in * t)


def _refine(mesh: Mesh, factor: int) -> Mesh:
    f = np.linspace(0.0, 1.0, factor + 1)[:-1]
    lo = mesh.edges[:-1, None]
    edges = (lo + f[None, :] * mesh.widths[:, None]).ravel()
    return build_custom(np.append(edges, mesh.R))


def rhs_quadrature_terms(
    c, mesh: Mesh, k: CollisionKernel, b: BreakageKernel, dense_factor: int = 8, weight: str = "volume"
) -> tuple[np.ndarray, np.ndarray]:
    """Birth and death of the continuous equation applied to piecewise-constant ``c``.

    Outer integrals use the midpoint rule on a mesh ``dense_factor`` times
    finer; the fragment integral over each target cell is done in closed form.
    With ``weight="volume"`` each cell reports ``(1/(x_i*w_i)) * int_cell eps*rate``,
    the quantity the mass-conserving scheme tracks; ``"number"`` gives the
    plain cell average.
    """
    if dense_factor < 4:
        raise ContractError("dense_factor must be >= 4")
    if weight not in ("volume", "number"):
        raise ValueError(f"weight must be 'volume' or 'number', got {weight!r}")
    c = np.asarray(c, dtype=np.float64)
    fine = _refine(mesh, dense_factor)
    owner = np.repeat(np.arange(mesh.I), dense_factor)
    cf = c[owner]
    x, dx = fine.midpoints, fine.widths
    # G(rho) = int K(rho, sigma) c(sigma) d sigma
    G = eval_K(k, x[:, None], x[None, :]) @ (cf * dx)
    collide = G * cf * dx
    prim = b.mass_primitive if weight == "volume" else b.primitive
    lo = np.minimum(mesh.edges[:-1, None], x[None, :])
    hi = np.minimum(mesh.edges[1:, None], x[None, :])
    frag = prim(hi, x[None, :]) - prim(lo, x[None, :])  # (I cells, dense parents)
    gain = frag @ collide
    loss_density = collide * (x if weight == "volume" else 1.0)
    loss = np.bincount(owner, weights=loss_density, minlength=mesh.I)
    norm = mesh.midpoints * mesh.widths if weight == "volume" else mesh.widths
    return gain / norm, loss / norm


def rhs_quadrature_oracle(
    c, mesh: Mesh, k: CollisionKernel, b: BreakageKernel, dense_factor: int = 8, weight: str = "volume"
) -> np.ndarray:
    gain, loss = rhs_quadrature_terms(c, mesh, k, b, dense_factor, weight)
    return gain - loss


@dataclass(frozen=True)
class TestFunction:
    """``phi(t, eps) = (1 - t/T_prime)_+**2 * sum_m coeffs[m] * eps**m``."""

    __test__ = False  # not a pytest class

    name: str
    coeffs: dict
    T_prime: float

    def time_factor(self, t):
        return np.maximum(1.0 - np.asarray(t) / self.T_prime, 0.0) ** 2

    def time_derivative(self, t):
        return -2.0 / self.T_prime * np.maximum(1.0 - np.asarray(t) / self.T_prime, 0.0)

    def space(self, eps):
        eps = np.asarray(eps, dtype=np.float64)
        return sum((a * eps**m for m, a in self.coeffs.items()), np.zeros_like(eps))

    def __call__(self, t, eps):
        return self.time_factor(t) * self.space(eps)

    def dt(self, t, eps):
        return self.time_derivative(t) * self.space(eps)

    def fragment_moment(self, b: BreakageKernel, rho):
        """``int_0^rho space(eps) * b(eps, rho) d eps`` in closed form."""
        rho = np.asarray(rho, dtype=np.float64)
        e = b.exponent
        return sum((a * b.coef * rho**m / (m + e + 1.0) for m, a in self.coeffs.items()), np.zeros_like(rho))


def phi_eps2(T_prime: float) -> TestFunction:
    return TestFunction("eps2", {2: 1.0}, T_prime)


def phi_bubble(T_prime: float, R: float) -> TestFunction:
    return TestFunction("bubble", {1: R, 2: -1.0}, T_prime)


def builtin_test_function(name: str, T_prime: float, R: float) -> TestFunction:
    if name == "eps2":
        return phi_eps2(T_prime)
    if name == "bubble":
        return phi_bubble(T_prime, R)
    if name == "zero":
        return TestFunction("zero", {}, T_prime)
    raise ValueError(f"unknown test function {name!r} (choose eps2, bubble, zero)")


def weak_residual(traj: Trajectory, k: CollisionKernel, b: BreakageKernel, phi: TestFunction) -> float:
    """Weak-form identity evaluated on the piecewise-constant discrete solution.

    Sums ``int int c dphi/dt + int int phi*birth - int int phi*death + int c_in phi(0)``
    with midpoint sums in volume and left-endpoint sums over the recorded time
    levels. Every step must be recorded and the run must reach ``T_prime``.
    """
    steps = np.asarray(traj.steps)
    if steps.size == 0 or not np.array_equal(steps, np.arange(steps.size)):
        raise ContractError("weak residual needs every time level recorded (simulate with every_step=True)")
    mesh = traj.mesh
    x, w = mesh.midpoints, mesh.widths
    t_end = traj.times[-1] if steps.size > 1 else 0.0
    if steps.size > 1 and t_end < phi.T_prime * (1 - 1e-12):
        raise ContractError(f"trajectory ends at {t_end}, before the test function support ends at {phi.T_prime}")
    c0 = traj.c[0]
    initial = float(np.dot(c0 * w, phi(0.0, x)))
    if steps.size == 1:
        return initial
    dt = np.diff(traj.times)
    C = traj.c[:-1]  # left endpoints
    t = traj.times[:-1]
    Kxx = eval_K(k, x[:, None], x[None, :])
    cw = C * w  # (n, I)
    G = cw @ Kxx  # G[n, j] = sum_l K(x_j, x_l) c_l w_l
    collide = G * cw
    space = phi.space(x)
    frag = phi.fragment_moment(b, x)
    tf = phi.time_factor(t)
    transport = np.einsum("n,ni,i->", dt * phi.time_derivative(t), cw, space)
    gain = np.einsum("n,ni,i->", dt * tf, collide, frag)
    loss = np.einsum("n,ni,i->", dt * tf, collide, space)
    return float(transport + gain - loss + initial)


@dataclass
class StudyRow:
    I_coarse: int
    I_fine: int
    l1_distance: float
    eoc: float


@dataclass
class StudyResult:
    rows: list[StudyRow] = field(default_factory=list)
    dt: float = math.nan

    @property
    def distances(self) -> list[float]:
        return [r.l1_distance for r in self.rows]


def average_onto(fine_c, fine: Mesh, coarse: Mesh) -> np.ndarray:
    """Mass-preserving average of fine cell values onto a nested coarse mesh."""
    if not fine.is_refinement_of(coarse):
        raise ContractError(f"mesh of {fine.I} cells is not nested in mesh of {coarse.I} cells")
    f = fine.I // coarse.I
    mass = (np.asarray(fine_c) * fine.widths).reshape(coarse.I, f).sum(axis=1)
    return mass / coarse.widths


def l1_distance(c, mesh: Mesh, other, other_mesh: Mesh) -> float:
    avg = average_onto(other, other_mesh, mesh)
    return float(np.dot(np.abs(np.asarray(c) - avg), mesh.widths))


def self_convergence(
    solve: Callable[[int], tuple[Mesh, np.ndarray]],
    I_list: Sequence[int],
) -> StudyResult:
    """Successive L1 distances between final states on nested meshes.

    ``solve(I)`` returns the mesh and final cell values for ``I`` cells. The
    EOC of a row is ``log(d_prev / d) / log(I / I_prev)`` (``log2`` for doubling).
    """
    I_list = [int(i) for i in I_list]
    if len(I_list) < 2:
        raise ContractError("need at least two mesh sizes")
    for a, c in zip(I_list, I_list[1:]):
        if c < a or c % a:
            raise ContractError(f"mesh ladder {I_list} is not nested")
    sols = {I: solve(I) for I in dict.fromkeys(I_list)}
    res = StudyResult()
    prev = None
    for a, c in zip(I_list, I_list[1:]):
        (mc, cc), (mf, cf) = sols[a], sols[c]
        d = l1_distance(cc, mc, cf, mf)
        eoc = math.nan
        if prev is not None and prev[1] > 0 and d > 0 and a > prev[0]:
            eoc = math.log(prev[1] / d) / math.log(a / prev[0])
        res.rows.append(StudyRow(a, c, d, eoc))
        prev = (a, d)
    return res
