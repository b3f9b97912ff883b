"""Mass-conserving finite volume scheme with explicit Euler time stepping.

Per cell ``i`` (0-based) the update is::

    c_i^{n+1} = c_i^n + dt * (birth_i - death_i)
    birth_i   = (1/w_i) * sum_{j>=i} Bpart[i, j] * g_j * c_j * w_j
    death_i   = c_i * Lam_i * g_i
    g_j       = sum_l K[j, l] * c_l * w_l

with ``w`` the cell widths. ``Bpart[i, j]`` counts fragments of a parent at
midpoint ``x_j`` landing in cell ``i`` (the self cell only up to its
midpoint) and ``Lam_j = sum_{l<=j} x_l * Bpart[l, j] / x_j`` is the weight
that makes ``sum_i x_i * c_i * w_i`` invariant.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import diagnostics
from .diagnostics import NormParams
from .kernels import BreakageKernel, CollisionKernel, kernel_factors, kernel_matrix
from .mesh import Mesh

logger = logging.getLogger(__name__)

NEG_TOL = 1e-14


class SchemeError(RuntimeError):
    """Table construction produced a non-finite entry."""


class StabilityError(RuntimeError):
    """A step produced a negative or non-finite concentration."""

    def __init__(self, msg: str, step: int | None = None, cell: int | None = None):
        super().__init__(msg)
        self.step = step
        self.cell = cell


class StepTooLargeError(ValueError):
    """A requested step exceeds the stable step and was not forced."""


class AssertionFailure(RuntimeError):
    """A runtime invariant (conservation or a-priori bound) was breached."""

    def __init__(self, msg: str, step: int | None = None):
        super().__init__(msg)
        self.step = step


@dataclass
class State:
    c: np.ndarray
    time: float = 0.0
    step: int = 0

    def copy(self) -> "State":
        return State(self.c.copy(), self.time, self.step)


@dataclass(frozen=True, eq=False)
class SchemeTables:
    Kmid: np.ndarray
    Bpart: np.ndarray
    Bflux: np.ndarray  # Bpart[i, j] * width_j / width_i
    Lam: np.ndarray
    alpha: float
    u_zeta: np.ndarray
    u_eta: np.ndarray


def build_tables(
    mesh: Mesh, k: CollisionKernel, b: BreakageKernel, allow_nonconserving: bool = False
) -> SchemeTables:
    if not b.conserves_volume and not allow_nonconserving:
        raise SchemeError(
            f"breakage family {b.family!r} does not conserve parent volume; "
            "pass allow_nonconserving=True to run it anyway"
        )
    x = mesh.midpoints
    lo = mesh.edges[:-1]
    I = mesh.I
    # upper limit: own midpoint on the diagonal, right edge above it
    hi = np.broadcast_to(mesh.edges[1:, None], (I, I)).copy()
    np.fill_diagonal(hi, x)
    parent = x[None, :]
    with np.errstate(all="ignore"):
        Bpart = b.primitive(hi, parent) - b.primitive(lo[:, None], parent)
    Bpart = np.triu(Bpart)
    # ratios equal exactly 1 on the diagonal, so a single cell balances bit for bit
    Lam = (x[:, None] / x[None, :] * Bpart).sum(axis=0)
    Bflux = Bpart * (mesh.widths[None, :] / mesh.widths[:, None])
    Kmat = kernel_matrix(k, mesh)
    uz, ue = kernel_factors(k, mesh)
    for name, arr in (("K", Kmat), ("Bpart", Bpart)):
        bad = np.argwhere(~np.isfinite(arr))
        if bad.size:
            i, j = bad[0]
            raise SchemeError(f"non-finite {name} entry at cell pair ({i}, {j})")
    if not np.all(np.isfinite(Lam)):
        raise SchemeError(f"non-finite weight at cell {int(np.argmax(~np.isfinite(Lam)))}")
    for arr in (Kmat, Bpart, Bflux, Lam, uz, ue):
        arr.setflags(write=False)
    return SchemeTables(Kmid=Kmat, Bpart=Bpart, Bflux=Bflux, Lam=Lam, alpha=k.alpha, u_zeta=uz, u_eta=ue)


def _collision_rates(c: np.ndarray, t: SchemeTables, mesh: Mesh, fast: bool, compensated: bool) -> np.ndarray:
    cw = c * mesh.widths
    if compensated:
        if fast:
            sz = math.fsum(t.u_zeta * cw)
            se = math.fsum(t.u_eta * cw)
            return t.alpha * (t.u_zeta * se + t.u_eta * sz)
        return np.array([math.fsum(row) for row in t.Kmid * cw])
    if fast:
        return t.alpha * (t.u_zeta * np.dot(t.u_eta, cw) + t.u_eta * np.dot(t.u_zeta, cw))
    return t.Kmid @ cw


def rates(
    s: State | np.ndarray,
    t: SchemeTables,
    mesh: Mesh,
    fast: bool = True,
    compensated: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """Birth and death rates for every cell.

    ``fast`` uses the separable form of the collision kernel (O(I) for the
    collision sums); the birth sum is an O(I^2) triangular product either way.
    """
    c = np.asarray(getattr(s, "c", s), dtype=np.float64)
    g = _collision_rates(c, t, mesh, fast, compensated)
    gc = g * c
    gain = np.array([math.fsum(row) for row in t.Bflux * gc]) if compensated else t.Bflux @ gc
    return gain, t.Lam * gc


def birth(i: int, s: State, t: SchemeTables, mesh: Mesh) -> float:
    return float(rates(s, t, mesh)[0][i])


def death(i: int, s: State, t: SchemeTables, mesh: Mesh) -> float:
    return float(rates(s, t, mesh)[1][i])


def step(
    s: State,
    dt: float,
    t: SchemeTables,
    mesh: Mesh,
    clamp: bool = False,
    fast: bool = True,
    compensated: bool = False,
    check: bool = True,
) -> State:
    """One explicit Euler step.

    Negative values below ``-1e-14 * max|c|`` raise :class:`StabilityError`
    unless ``clamp`` (set them to zero) or ``check=False`` (return them as is).
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    c = np.asarray(s.c, dtype=np.float64)
    # overflow surfaces as a non-finite entry, reported below with its cell
    with np.errstate(over="ignore", invalid="ignore"):
        g = _collision_rates(c, t, mesh, fast, compensated)
        gc = g * c
        gain = np.array([math.fsum(row) for row in t.Bflux * gc]) if compensated else t.Bflux @ gc
        new = c + dt * (gain - t.Lam * gc)
        # same value in exact arithmetic; this form cannot round below zero when dt*Lam*g <= 1
        neg = new < 0
        if neg.any():
            new[neg] = c[neg] * (1.0 - dt * (t.Lam[neg] * g[neg])) + dt * gain[neg]
    c = new
    n = s.step + 1
    if not check:
        return State(c, s.time + dt, n)
    if not np.all(np.isfinite(c)):
        cell = int(np.argmax(~np.isfinite(c)))
        raise StabilityError(f"non-finite concentration in cell {cell} at step {n}", n, cell)
    floor = -NEG_TOL * float(np.max(np.abs(c), initial=0.0))
    bad = np.flatnonzero(c < floor)
    if bad.size:
        if not clamp:
            cell = int(bad[0])
            raise StabilityError(
                f"negative concentration {c[cell]:.6g} in cell {cell} at step {n} (dt={dt:.6g})", n, cell
            )
        c[bad] = 0.0
    return State(c, s.time + dt, n)


def stability_constant(
    k: CollisionKernel, b: BreakageKernel, R: float, T: float, norm_S_cin: float, M1in: float
) -> float:
    """C(R, T) in the step restriction ``C * dt <= theta``."""
    a, N = k.alpha, b.N
    if a == 0.0 or norm_S_cin == 0.0:
        return 0.0
    try:
        growth = math.exp(2.0 * a * N * M1in * T)
    except OverflowError:
        return math.inf
    return 2.0 * a * N * norm_S_cin * growth * (R + M1in)


def stable_dt(
    k: CollisionKernel,
    b: BreakageKernel,
    R: float,
    T: float,
    norm_S_cin: float,
    M1in: float,
    theta: float = 0.9,
) -> float:
    """Largest step allowed by the stability condition.

    ``inf`` when C(R, T) = 0 (no collisions or empty initial state).
    """
    if not (0.0 < theta < 1.0):
        raise ValueError(f"theta must lie in (0, 1), got {theta}")
    C = stability_constant(k, b, R, T, norm_S_cin, M1in)
    return math.inf if C == 0.0 else theta / C


@dataclass
class Trajectory:
    mesh: Mesh
    times: np.ndarray
    c: np.ndarray  # (n_snapshots, I)
    steps: np.ndarray
    dt: float
    stable_dt: float
    norm_S_cin: float
    M1in: float
    notes: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.times)

    def state(self, k: int) -> State:
        return State(self.c[k].copy(), float(self.times[k]), int(self.steps[k]))

    @property
    def final(self) -> State:
        return self.state(len(self) - 1)


def _snapshot_steps(n_steps: int, count: int) -> set[int]:
    if count <= 0 or n_steps == 0:
        return {0, n_steps}
    return {int(round(v)) for v in np.linspace(0, n_steps, min(count, n_steps) + 1)}


def simulate(
    mesh: Mesh,
    k: CollisionKernel,
    b: BreakageKernel,
    c0,
    T: float,
    *,
    theta: float = 0.9,
    dt: float | None = None,
    force_dt: bool = False,
    norm: NormParams = NormParams(),
    snapshot_count: int = 10,
    every_step: bool = False,
    assertions: bool = True,
    clamp: bool = False,
    allow_nonconserving: bool = False,
    tables: SchemeTables | None = None,
    fast: bool = True,
    compensated: bool = False,
    conservation_rtol: float = 1e-10,
) -> Trajectory:
    """Advance ``c0`` (cell averages) from 0 to ``T`` with a constant step.

    The step is ``T / ceil(T / dt_max)`` where ``dt_max`` is ``dt`` when given
    and the stable step otherwise, so the run ends exactly at ``T`` without
    exceeding ``dt_max``. A ``dt`` above the stable step raises unless
    ``force_dt`` is set.

    With ``assertions`` on, every step checks first-moment conservation and,
    where the kernel hypotheses give it, the particle-number bound; a breach
    raises :class:`AssertionFailure` carrying the step index.
    """
    c = np.array(c0, dtype=np.float64)
    if c.shape != (mesh.I,):
        raise ValueError(f"initial state has shape {c.shape}, mesh has {mesh.I} cells")
    if np.any(c < 0) or not np.all(np.isfinite(c)):
        raise ValueError("initial concentrations must be finite and non-negative")
    if T < 0:
        raise ValueError(f"horizon must be >= 0, got {T}")
    if clamp and assertions:
        raise ValueError("clamping is only allowed with assertions disabled")
    tables = tables or build_tables(mesh, k, b, allow_nonconserving=allow_nonconserving)
    norm_S = diagnostics.weighted_norm(c, mesh, norm)
    M1in = diagnostics.moment(c, mesh, 1)
    dt_stable = stable_dt(k, b, mesh.R, T, norm_S, M1in, theta)
    notes = []
    if dt is None:
        dt_max = dt_stable
    else:
        if not dt > 0:
            raise ValueError(f"dt must be positive, got {dt}")
        if dt > dt_stable:
            if not force_dt:
                raise StepTooLargeError(f"dt={dt:.6g} exceeds the stable step {dt_stable:.6g}")
            notes.append(f"dt={dt:.6g} forced above stable step {dt_stable:.6g}")
        dt_max = dt
    if T == 0:
        n_steps, dt_run = 0, 0.0
    elif math.isinf(dt_max):
        n_steps, dt_run = 1, T
    else:
        n_steps = max(1, math.ceil(T / dt_max * (1 - 1e-12)))
        dt_run = T / n_steps
    keep = set(range(n_steps + 1)) if every_step else _snapshot_steps(n_steps, snapshot_count)

    check_P = assertions and k.satisfies_H1 and k.young_bound_holds(mesh.R)
    if assertions and not check_P:
        notes.append("particle-number bound not asserted: kernel outside the hypotheses of the estimate")

    times, snaps, steps = [0.0], [c.copy()], [0]
    s = State(c, 0.0, 0)
    for n in range(1, n_steps + 1):
        s = step(s, dt_run, tables, mesh, clamp=clamp, fast=fast, compensated=compensated)
        s.time = n * dt_run
        if assertions:
            m1 = diagnostics.moment(s, mesh, 1)
            if abs(m1 - M1in) > conservation_rtol * max(M1in, np.finfo(float).tiny):
                raise AssertionFailure(f"first moment drifted to {m1!r} from {M1in!r} at step {n}", n)
            if check_P:
                m0 = diagnostics.moment(s, mesh, 0)
                P = diagnostics.bound_P(s.time, k, b, norm_S, M1in)
                if m0 > P * (1 + 1e-12):
                    raise AssertionFailure(f"particle number {m0:.6g} exceeds bound {P:.6g} at step {n}", n)
        if n in keep:
            times.append(s.time)
            snaps.append(s.c.copy())
            steps.append(n)
    logger.debug("simulated %d steps of dt=%g on %d cells", n_steps, dt_run, mesh.I)
    return Trajectory(
        mesh=mesh,
        times=np.array(times),
        c=np.array(snaps),
        steps=np.array(steps),
        dt=dt_run,
        stable_dt=dt_stable,
        norm_S_cin=norm_S,
        M1in=M1in,
        notes=notes,
    )
