"""Command line front end.

Subcommands: ``simulate``, ``stable-dt``, ``study``, ``verify`` and
``weak-residual``. Exit codes: 0 success, 1 configuration error, 2 step
larger than the stable step without ``--force-dt``, 3 runtime assertion
failure (negativity, non-finite values, conservation or bound breach).
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import logging
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__, diagnostics, verify
from .config import ConfigError, RunConfig, parse_config
from .kernels import BreakageKernel, CollisionKernel, KernelError
from .mesh import Mesh, MeshError
from .scheme import (
    AssertionFailure,
    SchemeError,
    StabilityError,
    StepTooLargeError,
    Trajectory,
    simulate,
    stability_constant,
    stable_dt,
)

logger = logging.getLogger("breakfvm")

EXIT_OK, EXIT_CONFIG, EXIT_STEP, EXIT_ASSERT = 0, 1, 2, 3


def _fmt(v: float) -> str:
    return f"{v:.17g}"


@dataclass
class Setup:
    cfg: RunConfig
    mesh: Mesh
    k: CollisionKernel
    b: BreakageKernel
    c0: np.ndarray

    @classmethod
    def from_config(cls, cfg: RunConfig) -> "Setup":
        mesh = cfg.build_mesh()
        return cls(cfg, mesh, cfg.collision_kernel(), cfg.breakage_kernel(), cfg.initial_state(mesh))

    @property
    def norm_S(self) -> float:
        return diagnostics.weighted_norm(self.c0, self.mesh, self.cfg.norm_params())

    @property
    def M1in(self) -> float:
        return diagnostics.moment(self.c0, self.mesh, 1)

    def stability(self) -> tuple[float, float]:
        t = self.cfg.time
        C = stability_constant(self.k, self.b, self.mesh.R, t.T, self.norm_S, self.M1in)
        return C, stable_dt(self.k, self.b, self.mesh.R, t.T, self.norm_S, self.M1in, t.theta)

    def run(self, force_dt=False, assertions=None, every_step=False, dt=None) -> Trajectory:
        t = self.cfg.time
        return simulate(
            self.mesh,
            self.k,
            self.b,
            self.c0,
            t.T,
            theta=t.theta,
            dt=dt if dt is not None else t.dt_override,
            force_dt=force_dt,
            norm=self.cfg.norm_params(),
            snapshot_count=t.snapshot_count,
            every_step=every_step,
            assertions=self.cfg.assertions.enabled if assertions is None else assertions,
            allow_nonconserving=self.cfg.breakage.allow_nonconserving,
        )

    def hypothesis_flags(self) -> dict:
        Q = diagnostics.breakage_singular_constant(self.b, self.cfg.norm_params())
        return {
            "H1_satisfied": self.k.satisfies_H1,
            "young_bound_holds": self.k.young_bound_holds(self.mesh.R),
            "volume_conservation_satisfied": self.b.conserves_volume,
            "fragment_multiplicity_N": self.b.N,
            "H2_Q": Q if math.isfinite(Q) else "inf",
        }


def _out_dir(cfg: RunConfig, override: str | None) -> tuple[Path, str]:
    d = Path(override or cfg.output.directory)
    d.mkdir(parents=True, exist_ok=True)
    return d, cfg.output.prefix


def write_manifest(path: Path, setup: Setup, extra: dict) -> None:
    C, dt = setup.stability()
    doc = {
        "version": __version__,
        "config": setup.cfg.to_dict(),
        "stability_constant": C if math.isfinite(C) else "inf",
        "stable_dt": dt if math.isfinite(dt) else "inf",
        "hypotheses": setup.hypothesis_flags(),
        **extra,
    }
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def write_snapshots(path: Path, traj: Trajectory) -> None:
    mesh = traj.mesh
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time", "cell_index", "midpoint", "width", "concentration"])
        for t, c in zip(traj.times, traj.c):
            for i in range(mesh.I):
                w.writerow([_fmt(t), i, _fmt(mesh.midpoints[i]), _fmt(mesh.widths[i]), _fmt(c[i])])


def moment_rows(traj: Trajectory, setup: Setup) -> list[dict]:
    mesh, k, b, cfg = traj.mesh, setup.k, setup.b, setup.cfg
    norm = cfg.norm_params()
    Q = diagnostics.breakage_singular_constant(b, norm)
    rows = []
    for t, c in zip(traj.times, traj.c):
        rows.append(
            {
                "time": float(t),
                "M0": diagnostics.moment(c, mesh, 0),
                "M1": diagnostics.moment(c, mesh, 1),
                "M2": diagnostics.moment(c, mesh, 2),
                "weighted_norm": diagnostics.weighted_norm(c, mesh, norm),
                "bound_P": diagnostics.bound_P(t, k, b, traj.norm_S_cin, traj.M1in),
                "bound_Pstar_log": diagnostics.log_bound_Pstar(
                    t, k, b, traj.norm_S_cin, traj.M1in, mesh.R, cfg.time.T, Q
                ),
            }
        )
    return rows


def write_moments(path: Path, rows: list[dict]) -> None:
    cols = ["time", "M0", "M1", "M2", "weighted_norm", "bound_P", "bound_Pstar_log"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in cols])


def write_study(path: Path, result: verify.StudyResult) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["I_coarse", "I_fine", "l1_distance", "eoc"])
        for r in result.rows:
            w.writerow([r.I_coarse, r.I_fine, _fmt(r.l1_distance), _fmt(r.eoc)])


def cmd_simulate(cfg: RunConfig, args) -> int:
    setup = Setup.from_config(cfg)
    traj = setup.run(force_dt=args.force_dt, assertions=not args.no_assert)
    out, prefix = _out_dir(cfg, args.out)
    write_snapshots(out / f"{prefix}snapshots.csv", traj)
    write_moments(out / f"{prefix}moments.csv", moment_rows(traj, setup))
    write_manifest(
        out / f"{prefix}manifest.json",
        setup,
        {"dt": traj.dt, "n_steps": int(traj.steps[-1]), "notes": traj.notes},
    )
    print(f"simulated {int(traj.steps[-1])} steps of dt={traj.dt:.6g} on {setup.mesh.I} cells -> {out}")
    return EXIT_OK


def cmd_stable_dt(cfg: RunConfig, args) -> int:
    setup = Setup.from_config(cfg)
    C, dt = setup.stability()
    print(f"C(R,T) = {C:.12g}")
    print(f"stable_dt = {dt:.12g}")
    if args.out:
        out, prefix = _out_dir(cfg, args.out)
        write_manifest(out / f"{prefix}manifest.json", setup, {})
    return EXIT_OK


def _ladder_dt(cfg: RunConfig, I_list) -> float:
    if cfg.time.dt_override is not None:
        return cfg.time.dt_override
    return min(Setup.from_config(cfg.with_cells(I)).stability()[1] for I in I_list)


def cmd_study(cfg: RunConfig, args) -> int:
    I_list = args.I
    dt = _ladder_dt(cfg, I_list)

    def solve(I):
        s = Setup.from_config(cfg.with_cells(I))
        traj = s.run(force_dt=args.force_dt, assertions=not args.no_assert, dt=dt if math.isfinite(dt) else None)
        return s.mesh, traj.final.c

    result = verify.self_convergence(solve, I_list)
    out, prefix = _out_dir(cfg, args.out)
    write_study(out / f"{prefix}study.csv", result)
    for r in result.rows:
        print(f"I={r.I_coarse:>5d} -> {r.I_fine:>5d}  L1 = {r.l1_distance:.6e}  EOC = {r.eoc:.3f}")
    return EXIT_OK


def _oracle(setup: Setup, T: float, M0in: float, M1in: float) -> float | None:
    k, b = setup.k, setup.b
    if not (b.conserves_volume and b.exponent == 0.0):
        return None
    if k.zeta == k.eta == 1.0:
        return verify.m0_oracle_product(T, M0in, M1in, k, b)
    if k.zeta == k.eta == 0.0 and T < verify.m0_blowup_time(M0in, k):
        return verify.m0_oracle_constant(T, M0in, k, b)
    return None


def verification_checks(setup: Setup, traj: Trajectory, t_prime: float | None = None) -> list[tuple[str, str, str]]:
    """(name, PASS/FAIL/INFO/SKIP, detail) for every invariant checked on a full run."""
    mesh, cfg = setup.mesh, setup.cfg
    rows = moment_rows(traj, setup)
    checks = []
    M1in = traj.M1in
    steps = max(int(traj.steps[-1]), 1)
    m1 = np.array([r["M1"] for r in rows])
    per_step = np.abs(np.diff(m1)).max(initial=0.0) / M1in if M1in > 0 else 0.0
    checks.append(
        ("first-moment conservation per step <= 1e-12", "PASS" if per_step <= 1e-12 else "FAIL", f"max {per_step:.3e}")
    )
    drift = abs(m1[-1] - M1in) / M1in if M1in > 0 else 0.0
    checks.append(("first-moment drift over run", "PASS" if drift <= 1e-12 * steps else "FAIL", f"{drift:.3e}"))
    cmin = float(traj.c.min())
    checks.append(("non-negativity at every level", "PASS" if cmin >= 0 else "FAIL", f"min c = {cmin:.3e}"))
    fin = bool(np.all(np.isfinite(traj.c)))
    checks.append(("finite concentrations", "PASS" if fin else "FAIL", ""))
    if setup.k.satisfies_H1 and setup.k.young_bound_holds(mesh.R):
        viol = sum(r["M0"] > r["bound_P"] * (1 + 1e-12) for r in rows)
        checks.append(("M0 <= P(t) at every level", "PASS" if viol == 0 else "FAIL", f"{viol} violations"))
        viol = sum(math.log(r["weighted_norm"]) > r["bound_Pstar_log"] + 1e-12 for r in rows if r["weighted_norm"] > 0)
        checks.append(("weighted norm <= P*(t) (log space)", "PASS" if viol == 0 else "FAIL", f"{viol} violations"))
    else:
        checks.append(("a-priori bounds", "SKIP", "kernel outside the hypotheses of the estimates"))
    M0in = rows[0]["M0"]
    expected = _oracle(setup, cfg.time.T, M0in, M1in)
    if expected is not None:
        got = rows[-1]["M0"]
        rel = abs(got - expected) / expected
        checks.append(
            ("M0(T) vs closed-form moment oracle within 5%", "PASS" if rel <= 0.05 else "FAIL",
             f"M0 = {got:.10g}, oracle = {expected:.10g}, rel err = {rel:.3e}")
        )
    if np.array_equal(traj.steps, np.arange(traj.steps.size)) and cfg.time.T > 0:
        tp = t_prime or cfg.time.T
        for name in ("eps2", "bubble"):
            phi = verify.builtin_test_function(name, tp, mesh.R)
            res = verify.weak_residual(traj, setup.k, setup.b, phi)
            checks.append((f"weak residual ({name}, T'={tp:g})", "INFO", f"{res:.6e}"))
    flags = setup.hypothesis_flags()
    checks.append(("H1 satisfied", "INFO", str(flags["H1_satisfied"])))
    checks.append(("volume conservation of b satisfied", "INFO", str(flags["volume_conservation_satisfied"])))
    checks.append(("H2 constant Q (tau=1, weight exponent 2p)", "INFO", str(flags["H2_Q"])))
    return checks


def write_report(path: Path, title: str, checks: list[tuple[str, str, str]]) -> None:
    lines = [title, "=" * len(title)]
    for name, status, detail in checks:
        lines.append(f"[{status}] {name}" + (f": {detail}" if detail else ""))
    n_fail = sum(s == "FAIL" for _, s, _ in checks)
    lines.append("")
    lines.append("OVERALL: " + ("PASS" if n_fail == 0 else f"FAIL ({n_fail} checks)"))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def cmd_verify(cfg: RunConfig, args) -> int:
    setup = Setup.from_config(cfg)
    traj = setup.run(force_dt=args.force_dt, assertions=not args.no_assert, every_step=True)
    checks = verification_checks(setup, traj)
    out, prefix = _out_dir(cfg, args.out)
    write_report(out / f"{prefix}report.txt", f"verification: {setup.mesh.I} cells, T={cfg.time.T:g}", checks)
    write_moments(out / f"{prefix}moments.csv", moment_rows(traj, setup))
    write_manifest(out / f"{prefix}manifest.json", setup, {"dt": traj.dt, "n_steps": int(traj.steps[-1])})
    for name, status, detail in checks:
        print(f"[{status}] {name}" + (f": {detail}" if detail else ""))
    return EXIT_ASSERT if any(s == "FAIL" for _, s, _ in checks) else EXIT_OK


def cmd_weak_residual(cfg: RunConfig, args) -> int:
    setup = Setup.from_config(cfg)
    traj = setup.run(force_dt=args.force_dt, assertions=not args.no_assert, every_step=True)
    tp = args.t_prime if args.t_prime is not None else cfg.time.T
    phi = verify.builtin_test_function(args.phi, tp, setup.mesh.R)
    res = verify.weak_residual(traj, setup.k, setup.b, phi)
    print(f"weak_residual[{args.phi}, T'={tp:g}] = {res:.17g}")
    out, prefix = _out_dir(cfg, args.out)
    write_report(
        out / f"{prefix}report.txt",
        f"weak residual: {setup.mesh.I} cells, dt={traj.dt:.6g}",
        [(f"weak residual ({args.phi}, T'={tp:g})", "INFO", _fmt(res))],
    )
    return EXIT_OK


def _thread_limit():
    raw = os.environ.get("BREAKFVM_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"BREAKFVM_THREADS: expected an integer, got {raw!r}") from None
    if n <= 0:
        return contextlib.nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="breakfvm", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, type=Path, help="JSON run configuration")
        sp.add_argument("--out", help="output directory (overrides output.directory)")
        sp.add_argument("--force-dt", action="store_true", help="accept time.dt_override above the stable step")
        sp.add_argument("--no-assert", action="store_true", help="disable per-step runtime assertions")
        sp.add_argument("--lax", action="store_true", help="ignore unknown configuration keys")
        sp.add_argument("-v", "--verbose", action="store_true")
        return sp

    common(sub.add_parser("simulate", help="run the scheme and write snapshots/moments"))
    common(sub.add_parser("stable-dt", help="print C(R,T) and the stable step"))
    st = common(sub.add_parser("study", help="nested-mesh self-convergence study"))
    st.add_argument("--I", type=int, nargs="+", default=[32, 64, 128, 256], help="cell counts (nested)")
    common(sub.add_parser("verify", help="run all invariant checks and write report.txt"))
    wr = common(sub.add_parser("weak-residual", help="evaluate the weak-form residual"))
    wr.add_argument("--phi", choices=["eps2", "bubble"], default="eps2")
    wr.add_argument("--t-prime", type=float, default=None, help="support end of the test function (default T)")
    return p


COMMANDS = {
    "simulate": cmd_simulate,
    "stable-dt": cmd_stable_dt,
    "study": cmd_study,
    "verify": cmd_verify,
    "weak-residual": cmd_weak_residual,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = parse_config(args.config.read_text(encoding="utf-8"), strict=not args.lax)
        with _thread_limit():
            return COMMANDS[args.command](cfg, args)
    except StepTooLargeError as exc:  # before ValueError, which it subclasses
        print(f"stability violation: {exc} (use --force-dt to override)", file=sys.stderr)
        return EXIT_STEP
    except (ConfigError, MeshError, KernelError, SchemeError, OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (StabilityError, AssertionFailure) as exc:
        level = getattr(exc, "step", None)
        print(f"runtime assertion failed at time level {level}: {exc}", file=sys.stderr)
        return EXIT_ASSERT


if __name__ == "__main__":
    sys.exit(main())
