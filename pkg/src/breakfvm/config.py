"""Run configuration: strict JSON parsing, defaults and object construction."""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field, fields
from typing import Any

import numpy as np

from . import initial
from .diagnostics import NormParams
from .kernels import EVAL_MODES, FAMILIES, BreakageKernel, CollisionKernel
from .mesh import Mesh, build_custom, build_geometric, build_uniform


class ConfigError(ValueError):
    """Invalid configuration document; the message names the offending key."""


@dataclass
class MeshConfig:
    type: str = "uniform"
    R: float = 1.0
    I: int | None = 64  # noqa: E741
    ratio: float | None = None
    edges: list[float] | None = None


@dataclass
class KernelConfig:
    alpha: float = 1.0
    zeta: float = 1.0
    eta: float = 1.0
    eval_mode: str = "midpoint"
    allow_zeta_zero: bool = False


@dataclass
class BreakageConfig:
    family: str = "power_conserving"
    exponent: float = 0.0
    allow_nonconserving: bool = False


@dataclass
class InitialConfig:
    type: str = "constant"
    params: dict = field(default_factory=dict)


@dataclass
class TimeConfig:
    T: float = 1.0
    theta: float = 0.9
    dt_override: float | None = None
    snapshot_count: int = 10


@dataclass
class NormConfig:
    r: float = 1.0
    p: float = 0.0


@dataclass
class AssertionsConfig:
    enabled: bool = True


@dataclass
class OutputConfig:
    directory: str = "out"
    prefix: str = ""


SECTIONS = {
    "mesh": MeshConfig,
    "kernel": KernelConfig,
    "breakage": BreakageConfig,
    "initial": InitialConfig,
    "time": TimeConfig,
    "norm": NormConfig,
    "assertions": AssertionsConfig,
    "output": OutputConfig,
}
REQUIRED_SECTIONS = ("mesh", "kernel", "breakage", "time")
INITIAL_PARAMS = {
    "constant": {"value": 1.0},
    "exponential": {"amplitude": 1.0, "scale": 1.0},
    "custom_csv": {"path": None},
}


@dataclass
class RunConfig:
    mesh: MeshConfig = field(default_factory=MeshConfig)
    kernel: KernelConfig = field(default_factory=KernelConfig)
    breakage: BreakageConfig = field(default_factory=BreakageConfig)
    initial: InitialConfig = field(default_factory=InitialConfig)
    time: TimeConfig = field(default_factory=TimeConfig)
    norm: NormConfig = field(default_factory=NormConfig)
    assertions: AssertionsConfig = field(default_factory=AssertionsConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def emit(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def with_cells(self, I: int) -> "RunConfig":  # noqa: E741
        if self.mesh.type == "custom":
            raise ConfigError("mesh.type: a custom mesh cannot be resized")
        new = dataclasses.replace(self, mesh=dataclasses.replace(self.mesh, I=int(I)))
        validate(new)
        return new

    def build_mesh(self) -> Mesh:
        m = self.mesh
        if m.type == "uniform":
            return build_uniform(m.R, m.I)
        if m.type == "geometric":
            return build_geometric(m.R, m.I, m.ratio)
        return build_custom(m.edges)

    def collision_kernel(self) -> CollisionKernel:
        k = self.kernel
        return CollisionKernel(k.alpha, k.zeta, k.eta, k.eval_mode, k.allow_zeta_zero)

    def breakage_kernel(self) -> BreakageKernel:
        return BreakageKernel(self.breakage.family, self.breakage.exponent)

    def norm_params(self) -> NormParams:
        return NormParams(self.norm.r, self.norm.p)

    def initial_state(self, mesh: Mesh) -> np.ndarray:
        ic = self.initial
        params = {**INITIAL_PARAMS[ic.type], **ic.params}
        if ic.type == "constant":
            return initial.constant(mesh, params["value"])
        if ic.type == "exponential":
            return initial.exponential(mesh, params["amplitude"], params["scale"])
        return initial.from_csv(mesh, params["path"])


def _number(path: str, v: Any, integer: bool = False) -> float | int:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {v!r}")
    if not math.isfinite(v):
        raise ConfigError(f"{path}: must be finite")
    if integer:
        if int(v) != v:
            raise ConfigError(f"{path}: expected an integer, got {v!r}")
        return int(v)
    return float(v)


def _flag(path: str, v: Any) -> bool:
    if not isinstance(v, bool):
        raise ConfigError(f"{path}: expected true/false, got {v!r}")
    return v


def _section(name: str, raw: Any, strict: bool):
    cls = SECTIONS[name]
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        raise ConfigError(f"{name}: expected an object")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(raw) - set(known))
    if unknown and strict:
        raise ConfigError(f"{name}.{unknown[0]}: unknown key")
    return cls(**{k: v for k, v in raw.items() if k in known})


def _coerce(cfg: RunConfig) -> None:
    m, k, b, t, n = cfg.mesh, cfg.kernel, cfg.breakage, cfg.time, cfg.norm
    m.R = _number("mesh.R", m.R)
    if m.I is not None:
        m.I = _number("mesh.I", m.I, integer=True)
    if m.ratio is not None:
        m.ratio = _number("mesh.ratio", m.ratio)
    if m.edges is not None:
        if not isinstance(m.edges, list):
            raise ConfigError("mesh.edges: expected a list of numbers")
        m.edges = [_number(f"mesh.edges[{i}]", e) for i, e in enumerate(m.edges)]
    for key in ("alpha", "zeta", "eta"):
        setattr(k, key, _number(f"kernel.{key}", getattr(k, key)))
    k.allow_zeta_zero = _flag("kernel.allow_zeta_zero", k.allow_zeta_zero)
    b.exponent = _number("breakage.exponent", b.exponent)
    b.allow_nonconserving = _flag("breakage.allow_nonconserving", b.allow_nonconserving)
    t.T = _number("time.T", t.T)
    t.theta = _number("time.theta", t.theta)
    if t.dt_override is not None:
        t.dt_override = _number("time.dt_override", t.dt_override)
    t.snapshot_count = _number("time.snapshot_count", t.snapshot_count, integer=True)
    n.r = _number("norm.r", n.r)
    n.p = _number("norm.p", n.p)
    cfg.assertions.enabled = _flag("assertions.enabled", cfg.assertions.enabled)


def validate(cfg: RunConfig) -> None:
    m, k, b, t, n, ic = cfg.mesh, cfg.kernel, cfg.breakage, cfg.time, cfg.norm, cfg.initial
    if m.type not in ("uniform", "geometric", "custom"):
        raise ConfigError(f"mesh.type: must be uniform, geometric or custom, got {m.type!r}")
    if m.type == "custom":
        if not m.edges:
            raise ConfigError("mesh.edges: required for a custom mesh")
        if m.edges[0] != 0.0:
            raise ConfigError("mesh.edges: first edge must be 0")
        if any(b_ <= a_ for a_, b_ in zip(m.edges, m.edges[1:])):
            raise ConfigError("mesh.edges: must be strictly increasing")
        m.R = m.edges[-1]
        m.I = len(m.edges) - 1
    else:
        if m.I is None or m.I < 1:
            raise ConfigError(f"mesh.I: must be a positive integer, got {m.I!r}")
        if m.R <= 0:
            raise ConfigError(f"mesh.R: must be positive, got {m.R}")
        if m.type == "geometric" and (m.ratio is None or m.ratio <= 0):
            raise ConfigError(f"mesh.ratio: geometric meshes need ratio > 0, got {m.ratio!r}")
    if k.alpha < 0:
        raise ConfigError(f"kernel.alpha: must be >= 0, got {k.alpha}")
    if not (0.0 <= k.zeta <= k.eta <= 1.0):
        raise ConfigError(f"kernel.zeta: need 0 <= zeta <= eta <= 1, got zeta={k.zeta}, eta={k.eta}")
    if k.zeta == 0.0 and not k.allow_zeta_zero:
        raise ConfigError("kernel.zeta: zeta = 0 is outside hypothesis H1 (0 < zeta); set allow_zeta_zero")
    if k.eval_mode not in EVAL_MODES:
        raise ConfigError(f"kernel.eval_mode: must be one of {EVAL_MODES}, got {k.eval_mode!r}")
    if b.family not in FAMILIES:
        raise ConfigError(f"breakage.family: must be one of {FAMILIES}, got {b.family!r}")
    if not (-1.0 < b.exponent <= 0.0):
        raise ConfigError(f"breakage.exponent: must lie in ]-1, 0], got {b.exponent}")
    if b.family != "power_conserving" and not b.allow_nonconserving:
        raise ConfigError(
            "breakage.family: power_paper violates fragment volume conservation "
            "(int eps*b d eps != rho); set allow_nonconserving"
        )
    if ic.type not in INITIAL_PARAMS:
        raise ConfigError(f"initial.type: must be one of {sorted(INITIAL_PARAMS)}, got {ic.type!r}")
    if not isinstance(ic.params, dict):
        raise ConfigError("initial.params: expected an object")
    extra = sorted(set(ic.params) - set(INITIAL_PARAMS[ic.type]))
    if extra:
        raise ConfigError(f"initial.params.{extra[0]}: unknown key for {ic.type} initial data")
    if ic.type == "custom_csv" and not isinstance(ic.params.get("path"), str):
        raise ConfigError("initial.params.path: custom_csv needs a file path")
    for key, v in ic.params.items():
        if key != "path":
            ic.params[key] = _number(f"initial.params.{key}", v)
    if ic.type == "exponential" and ic.params.get("scale", 1.0) <= 0:
        raise ConfigError("initial.params.scale: must be positive")
    if ic.params.get("value", 1.0) < 0 or ic.params.get("amplitude", 1.0) < 0:
        raise ConfigError(f"initial.params: {ic.type} initial data must be non-negative")
    if t.T < 0:
        raise ConfigError(f"time.T: must be >= 0, got {t.T}")
    if not (0.0 < t.theta < 1.0):
        raise ConfigError(f"time.theta: must lie in (0, 1), got {t.theta}")
    if t.dt_override is not None and t.dt_override <= 0:
        raise ConfigError(f"time.dt_override: must be positive, got {t.dt_override}")
    if t.snapshot_count < 1:
        raise ConfigError(f"time.snapshot_count: must be >= 1, got {t.snapshot_count}")
    if n.r < 1:
        raise ConfigError(f"norm.r: must be >= 1, got {n.r}")
    if n.p < 0:
        raise ConfigError(f"norm.p: must be >= 0, got {n.p}")


def from_dict(doc: dict, strict: bool = True) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config: top level must be a JSON object")
    unknown = sorted(set(doc) - set(SECTIONS))
    if unknown and strict:
        raise ConfigError(f"{unknown[0]}: unknown section")
    missing = [s for s in REQUIRED_SECTIONS if s not in doc]
    if missing:
        raise ConfigError(f"{missing[0]}: required section missing")
    try:
        cfg = RunConfig(**{name: _section(name, doc.get(name), strict) for name in SECTIONS})
    except TypeError as exc:  # non-object where an object is expected
        raise ConfigError(str(exc)) from None
    cfg.initial.params = dict(cfg.initial.params or {})
    _coerce(cfg)
    validate(cfg)
    return cfg


def parse_config(text: str, strict: bool = True) -> RunConfig:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: malformed JSON ({exc})") from None
    return from_dict(doc, strict=strict)
