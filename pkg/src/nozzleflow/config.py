"""Run configuration: dotted-key text files, overrides, typed validation.

Format: one ``key = value`` per line, ``#`` starts a comment, keys are
dotted (``gas.gamma``).  Every error names the offending key and line.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

from .nozzle import Cylinder, GaussianThroat, Profile, TanhExpansion
from .solver import NewtonConfig

__all__ = ["RunConfig", "ConfigError", "load_config", "parse_config_text"]

MODES = ("solve", "sweep", "critical-flux", "uniqueness", "validate-cylinder", "far-field")

_KNOWN_KEYS = {
    "mode",
    "gas.gamma",
    "gas.delta0",
    "nozzle.kind",
    "nozzle.dim",
    "nozzle.r0",
    "nozzle.r_minus",
    "nozzle.r_plus",
    "nozzle.length",
    "nozzle.depth",
    "nozzle.width",
    "domain.L",
    "domain.L_schedule",
    "mesh.N_t",
    "mesh.N_a",
    "flux.m0",
    "flux.sweep",
    "solver.rtol",
    "solver.atol",
    "solver.max_iter",
    "solver.linear",
    "solver.cg_rtol",
    "solver.dense_limit",
    "probes.offsets",
    "critical.delta0_schedule",
    "critical.bisections",
    "output.dir",
}


class ConfigError(ValueError):
    """Invalid configuration; carries the offending key and source line."""

    def __init__(self, key: str, message: str, line: int | None = None):
        self.key = key
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"config key '{key}'{where}: {message}")


def parse_config_text(text: str) -> dict[str, tuple[str, int]]:
    """Raw key -> (value, line) mapping; duplicate keys keep the last one."""
    out: dict[str, tuple[str, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(line.split()[0], "expected 'key = value'", lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _KNOWN_KEYS:
            raise ConfigError(key, "unknown key", lineno)
        if not value:
            raise ConfigError(key, "missing value", lineno)
        out[key] = (value, lineno)
    return out


def _get_float(raw, key, required=False, default=None):
    if key not in raw:
        if required:
            raise ConfigError(key, "required key is missing")
        return default
    value, line = raw[key]
    try:
        return float(value)
    except ValueError:
        raise ConfigError(key, f"expected a number, got {value!r}", line) from None


def _get_int(raw, key, required=False, default=None):
    if key not in raw:
        if required:
            raise ConfigError(key, "required key is missing")
        return default
    value, line = raw[key]
    try:
        return int(value)
    except ValueError:
        raise ConfigError(key, f"expected an integer, got {value!r}", line) from None


def _get_str(raw, key, required=False, default=None):
    if key not in raw:
        if required:
            raise ConfigError(key, "required key is missing")
        return default
    return raw[key][0]


def _get_float_list(raw, key, default=None):
    if key not in raw:
        return default
    value, line = raw[key]
    try:
        items = [float(v) for v in value.replace(";", ",").split(",") if v.strip()]
    except ValueError:
        raise ConfigError(key, f"expected comma-separated numbers, got {value!r}", line) from None
    if not items:
        raise ConfigError(key, "empty list", line)
    return items


@dataclass
class RunConfig:
    mode: str
    gamma: float
    delta0: float
    nozzle_kind: str
    dim: int
    nozzle_params: dict
    L: float | None
    L_schedule: list[float] | None
    N_t: int
    N_a: int
    m0: float | None
    m0_values: list[float] | None
    solver: NewtonConfig
    probe_offsets: list[float] | None
    delta0_schedule: list[float]
    bisections: int
    output_dir: str
    resolved: dict = field(default_factory=dict)

    def profile(self) -> Profile:
        kind = self.nozzle_kind
        p = self.nozzle_params
        if kind == "cylinder":
            return Cylinder(r0=p["r0"], dim=self.dim)
        if kind == "tanh":
            return TanhExpansion(
                r_in=p["r_minus"], r_out=p["r_plus"], length=p["length"], dim=self.dim
            )
        if kind == "gaussian-throat":
            return GaussianThroat(
                r0=p["r0"], depth=p["depth"], width=p["width"], dim=self.dim
            )
        raise ConfigError("nozzle.kind", f"unknown nozzle kind {kind!r}")

    def config_hash(self) -> str:
        canon = "\n".join(f"{k} = {v}" for k, v in sorted(self.resolved.items()))
        return hashlib.sha256(canon.encode()).hexdigest()


_VALIDATE_DEFAULTS = {
    "nozzle.kind": "cylinder",
    "nozzle.r0": "0.5",
    "domain.L": "4",
    "mesh.N_t": "16",
    "mesh.N_a": "128",
}


def _build(raw: dict[str, tuple[str, int]]) -> RunConfig:
    mode = _get_str(raw, "mode", required=True)
    if mode not in MODES:
        raise ConfigError("mode", f"expected one of {MODES}, got {mode!r}",
                          raw["mode"][1])
    if mode == "validate-cylinder":
        for key, value in _VALIDATE_DEFAULTS.items():
            raw.setdefault(key, (value, 0))

    gamma = _get_float(raw, "gas.gamma", required=True)
    if not gamma > 1.0:
        raise ConfigError("gas.gamma", f"must exceed 1, got {gamma}", raw["gas.gamma"][1])
    delta0 = _get_float(raw, "gas.delta0", default=0.05)
    if not 0.0 < delta0 < 0.25:
        raise ConfigError("gas.delta0", f"must lie in (0, 1/4), got {delta0}",
                          raw["gas.delta0"][1])

    kind = _get_str(raw, "nozzle.kind", required=True)
    kind = kind.replace("_", "-")
    if kind == "tanh-expansion":
        kind = "tanh"
    dim = _get_int(raw, "nozzle.dim", default=2)
    if dim not in (2, 3):
        raise ConfigError("nozzle.dim", f"must be 2 or 3, got {dim}", raw["nozzle.dim"][1])
    params: dict = {}
    if kind == "cylinder":
        params["r0"] = _get_float(raw, "nozzle.r0", required=True)
    elif kind == "tanh":
        params["r_minus"] = _get_float(raw, "nozzle.r_minus", required=True)
        params["r_plus"] = _get_float(raw, "nozzle.r_plus", required=True)
        params["length"] = _get_float(raw, "nozzle.length", required=True)
    elif kind == "gaussian-throat":
        params["r0"] = _get_float(raw, "nozzle.r0", required=True)
        params["depth"] = _get_float(raw, "nozzle.depth", required=True)
        params["width"] = _get_float(raw, "nozzle.width", required=True)
    else:
        raise ConfigError("nozzle.kind", f"unknown nozzle kind {kind!r}", raw["nozzle.kind"][1])

    L_schedule = _get_float_list(raw, "domain.L_schedule")
    if L_schedule is not None and mode != "solve":
        raise ConfigError("domain.L_schedule",
                          f"length continuation is only supported for mode 'solve', not {mode!r}",
                          raw["domain.L_schedule"][1])
    L = _get_float(raw, "domain.L", required=L_schedule is None)
    N_t = _get_int(raw, "mesh.N_t", required=True)
    N_a = _get_int(raw, "mesh.N_a", required=True)

    m0 = _get_float(raw, "flux.m0")
    m0_values = _get_float_list(raw, "flux.sweep")
    needs_m0 = mode in ("solve", "far-field", "uniqueness")
    if needs_m0 and m0 is None:
        raise ConfigError("flux.m0", f"required for mode {mode!r}")
    if mode == "sweep" and m0_values is None:
        raise ConfigError("flux.sweep", "required for mode 'sweep'")

    solver = NewtonConfig(
        rtol=_get_float(raw, "solver.rtol", default=1e-10),
        atol=_get_float(raw, "solver.atol", default=1e-12),
        max_iter=_get_int(raw, "solver.max_iter", default=50),
        linear_solver=_get_str(raw, "solver.linear", default="auto"),
        cg_rtol=_get_float(raw, "solver.cg_rtol", default=1e-12),
        dense_limit=_get_int(raw, "solver.dense_limit", default=2000),
    )
    if solver.linear_solver not in ("auto", "cg", "dense", "lu"):
        raise ConfigError("solver.linear",
                          f"expected auto|cg|dense|lu, got {solver.linear_solver!r}",
                          raw["solver.linear"][1])

    cfg = RunConfig(
        mode=mode,
        gamma=gamma,
        delta0=delta0,
        nozzle_kind=kind,
        dim=dim,
        nozzle_params=params,
        L=L,
        L_schedule=L_schedule,
        N_t=N_t,
        N_a=N_a,
        m0=m0,
        m0_values=m0_values,
        solver=solver,
        probe_offsets=_get_float_list(raw, "probes.offsets"),
        delta0_schedule=_get_float_list(raw, "critical.delta0_schedule",
                                        default=[0.10, 0.05, 0.025]),
        bisections=_get_int(raw, "critical.bisections", default=12),
        output_dir=_get_str(raw, "output.dir", default="out"),
        resolved={k: v for k, (v, _) in sorted(raw.items())},
    )
    return cfg


def load_config(path: str, overrides=()) -> RunConfig:
    """Parse a config file and apply ``key=value`` override strings."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = parse_config_text(fh.read())
    for item in overrides:
        if "=" not in item:
            raise ConfigError(item, "override must look like key=value")
        key, value = (part.strip() for part in item.split("=", 1))
        if key not in _KNOWN_KEYS:
            raise ConfigError(key, "unknown key in override")
        raw[key] = (value, 0)
    return _build(raw)
