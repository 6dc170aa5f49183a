"""Flat key-value run configuration: ``section.key = value`` lines.

Blank lines and ``#`` comments are ignored; unknown keys are rejected.
Absent keys fall back to the shipped defaults (the values used throughout
the reference experiments).
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields

from .dynamics import PhysicalParams
from .errors import NonPositiveParameter, TypeMismatch, UnknownKey
from .scenario import ScenarioConfig
from .timeloop import TimeConfig


@dataclass
class EikonalParams:
    """Potential-solve knobs; the forcing field itself comes from the scenario."""

    eta: float = 1.0
    psi_floor: float = 1e-12
    f_floor_fraction: float = 1e-3
    grad_tol: float = 1e-10
    tol: float = 1e-10


@dataclass
class OutputConfig:
    dir: str = "out"
    format: str = "csv"      # csv | vtk | both
    figures: bool = True


@dataclass
class Config:
    mesh_path: str = "meshes/city_coarse.msh"
    outer_groups: str = "outer"      # comma-separated glob patterns
    wall_groups: str = "wall*"
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    physics: PhysicalParams = field(default_factory=PhysicalParams)
    eikonal: EikonalParams = field(default_factory=EikonalParams)
    time: TimeConfig = field(default_factory=TimeConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    threads: int = 1

    def outer_patterns(self) -> tuple[str, ...]:
        return tuple(p.strip() for p in self.outer_groups.split(",") if p.strip())

    def wall_patterns(self) -> tuple[str, ...]:
        return tuple(p.strip() for p in self.wall_groups.split(",") if p.strip())


# dotted key -> (section object attribute on Config, field name, type)
_MESH_KEYS = {
    "mesh.path": ("mesh_path", str),
    "mesh.outer_groups": ("outer_groups", str),
    "mesh.wall_groups": ("wall_groups", str),
    "run.threads": ("threads", int),
}

_SECTIONS = {
    "scenario": ScenarioConfig,
    "physics": PhysicalParams,
    "eikonal": EikonalParams,
    "time": TimeConfig,
    "output": OutputConfig,
}

# keys whose value must be strictly positive
_POSITIVE = {
    "scenario.u_max", "scenario.rho_max", "scenario.kappa_max",
    "scenario.eps_width_frac", "scenario.rho0_width_frac",
    "scenario.kappa_width_frac", "scenario.kappa_eps_peak",
    "scenario.q_ring_frac", "scenario.q_width_frac", "scenario.sigma_g",
    "physics.c2", "physics.permeability", "physics.forchheimer",
    "physics.nu", "physics.mu", "physics.tau", "physics.rho_floor",
    "eikonal.eta", "eikonal.psi_floor", "eikonal.f_floor_fraction",
    "eikonal.grad_tol", "eikonal.tol",
    "time.dt", "time.t_end", "time.snapshot_stride", "time.eikonal_every",
    "run.threads",
}
_NONNEGATIVE = {"scenario.q0", "scenario.rho0_center", "scenario.rho0_far"}

# ScenarioConfig.center is exposed as two scalar keys
_VIRTUAL_FLOATS = {"scenario.center_x", "scenario.center_y",
                   "scenario.eps_center"}


def _known_keys() -> dict[str, type]:
    keys: dict[str, type] = {k: t for k, (_, t) in _MESH_KEYS.items()}
    for section, cls in _SECTIONS.items():
        for f in fields(cls):
            key = f"{section}.{f.name}"
            if f.name in ("center", "eps_center"):
                continue  # handled as virtual float keys
            keys[key] = f.type if isinstance(f.type, type) else _annot_type(f.type)
    for key in _VIRTUAL_FLOATS:
        keys[key] = float
    return keys


def _annot_type(annotation: str) -> type:
    return {"float": float, "int": int, "str": str, "bool": bool}[
        annotation.split("|")[0].strip()
    ]


def _convert(key: str, raw: str, typ: type):
    raw = raw.strip()
    try:
        if typ is bool:
            low = raw.lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError(raw)
        if typ is int:
            return int(raw)
        if typ is float:
            return float(raw)
        return raw
    except ValueError:
        raise TypeMismatch(f"{key}: cannot parse '{raw}' as {typ.__name__}") from None


def parse_config(path_or_text, is_text: bool = False) -> Config:
    """Parse a config file (or literal text) into a validated Config."""
    if is_text:
        text = path_or_text
    else:
        with open(path_or_text, "r", encoding="utf-8") as fh:
            text = fh.read()

    known = _known_keys()
    values: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise TypeMismatch(f"line {lineno}: expected 'section.key = value'")
        key, _, val = line.partition("=")
        key = key.strip()
        if key not in known:
            raise UnknownKey(f"line {lineno}: unknown key '{key}'")
        values[key] = _convert(key, val, known[key])

    for key, v in values.items():
        if key in _POSITIVE and not (isinstance(v, (int, float)) and v > 0):
            raise NonPositiveParameter(f"{key} must be positive, got {v!r}")
        if key in _NONNEGATIVE and v < 0:
            raise NonPositiveParameter(f"{key} must be nonnegative, got {v!r}")

    cfg = Config()
    for key, (attr, _) in _MESH_KEYS.items():
        if key in values:
            setattr(cfg, attr, values[key])
    for section, cls in _SECTIONS.items():
        target = getattr(cfg, {"scenario": "scenario", "physics": "physics",
                               "eikonal": "eikonal", "time": "time",
                               "output": "output"}[section])
        for f in fields(cls):
            key = f"{section}.{f.name}"
            if key in values:
                setattr(target, f.name, values[key])
    if "scenario.eps_center" in values:
        cfg.scenario.eps_center = values["scenario.eps_center"]
    cx = values.get("scenario.center_x")
    cy = values.get("scenario.center_y")
    if (cx is None) != (cy is None):
        raise TypeMismatch("scenario.center_x and scenario.center_y go together")
    if cx is not None:
        cfg.scenario.center = (cx, cy)

    # re-run the dataclass validators on the overridden values
    try:
        PhysicalParams(**{f.name: getattr(cfg.physics, f.name)
                          for f in fields(PhysicalParams)})
        TimeConfig(**{f.name: getattr(cfg.time, f.name)
                      for f in fields(TimeConfig)})
    except ValueError as exc:
        raise NonPositiveParameter(str(exc)) from None
    if cfg.output.format not in ("csv", "vtk", "both"):
        raise TypeMismatch(
            f"output.format must be csv | vtk | both, got '{cfg.output.format}'"
        )
    cfg.threads = int(os.environ.get("TRAFFIC_THREADS", cfg.threads))
    return cfg


def dump_config(cfg: Config) -> str:
    """Serialize a Config back to the flat key-value grammar (full precision)."""
    lines = []

    def fmt(v) -> str:
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, float):
            return f"{v:.17g}"
        return str(v)

    lines.append(f"mesh.path = {cfg.mesh_path}")
    lines.append(f"mesh.outer_groups = {cfg.outer_groups}")
    lines.append(f"mesh.wall_groups = {cfg.wall_groups}")
    for section, cls in _SECTIONS.items():
        target = getattr(cfg, section)
        for f in fields(cls):
            if f.name == "center":
                if target.center is not None:
                    lines.append(f"scenario.center_x = {fmt(target.center[0])}")
                    lines.append(f"scenario.center_y = {fmt(target.center[1])}")
                continue
            val = getattr(target, f.name)
            if val is None:
                continue
            lines.append(f"{section}.{f.name} = {fmt(val)}")
    lines.append(f"run.threads = {cfg.threads}")
    return "\n".join(lines) + "\n"
