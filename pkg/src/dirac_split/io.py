"""Run configuration, diagnostics serialization, and field checkpoints.

All formats are plain text with newline-only line endings.  Checkpoints use
17-significant-digit decimals, which round-trip binary64 exactly; diagnostics
NDJSON and CSV use the shortest round-trip float representation.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .field import (FieldError, InitialProfile, Mesh, OdeOptions,
                    SchemeParams, SpinorField)
from .scheme import History


class ConfigError(ValueError):
    pass


class FormatError(ValueError):
    pass


@dataclass(frozen=True)
class OutputSpec:
    history_path: str | None = None
    diagnostics_path: str | None = None
    checkpoint_every: int = 0

    def __post_init__(self):
        if self.checkpoint_every < 0:
            raise ConfigError("checkpoint_every must be >= 0")


@dataclass(frozen=True)
class RunSpec:
    params: SchemeParams
    ode: OdeOptions
    profile: InitialProfile
    tau: float
    T: float
    outputs: OutputSpec = OutputSpec()

    def __post_init__(self):
        if not self.tau > 0:
            raise ConfigError("tau must be positive")
        if self.T < 0:
            raise ConfigError("T must be nonnegative")

    @property
    def n_steps(self) -> int:
        return round(self.T / self.tau)


def _need(obj: dict, key: str, where: str):
    if key not in obj:
        raise ConfigError(f"missing key {key!r} in {where}")
    return obj[key]


def _reject_unknown(obj: dict, allowed, where: str):
    unknown = set(obj) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in {where}")


def _as_float(val, key: str) -> float:
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"{key} must be a number, got {val!r}")
    return float(val)


def _as_complex(val, key: str) -> complex:
    if (not isinstance(val, (list, tuple)) or len(val) != 2):
        raise ConfigError(f"{key} must be a [re, im] pair, got {val!r}")
    return complex(_as_float(val[0], key), _as_float(val[1], key))


def _parse_params(obj: dict) -> SchemeParams:
    _reject_unknown(obj, ("m", "alpha", "beta"), "params")
    m = _as_float(_need(obj, "m", "params"), "m")
    if m < 0:
        raise ConfigError(f"mass m must be nonnegative, got {m}")
    return SchemeParams(m, _as_float(_need(obj, "alpha", "params"), "alpha"),
                        _as_float(_need(obj, "beta", "params"), "beta"))


def _parse_ode(obj: dict) -> OdeOptions:
    _reject_unknown(obj, ("substeps_per_tau", "project_norm",
                          "closed_form_if_available"), "ode")
    return OdeOptions(
        substeps_per_tau=int(obj.get("substeps_per_tau", 16)),
        project_norm=bool(obj.get("project_norm", True)),
        closed_form_if_available=bool(obj.get("closed_form_if_available", True)))


def _parse_profile(obj: dict) -> InitialProfile:
    kind = _need(obj, "kind", "profile")
    if kind == "gaussian_packet":
        _reject_unknown(obj, ("kind", "center", "width", "amplitude_u",
                              "amplitude_v", "radius"), "profile")
        return InitialProfile(
            kind=kind,
            center=_as_float(obj.get("center", 0.0), "center"),
            width=_as_float(_need(obj, "width", "profile"), "width"),
            amplitude_u=_as_complex(obj.get("amplitude_u", [1.0, 0.0]),
                                    "amplitude_u"),
            amplitude_v=_as_complex(obj.get("amplitude_v", [0.0, 0.0]),
                                    "amplitude_v"),
            radius=(None if "radius" not in obj
                    else _as_float(obj["radius"], "radius")))
    if kind == "homogeneous":
        _reject_unknown(obj, ("kind", "u", "v", "x_lo", "x_hi"), "profile")
        return InitialProfile(
            kind=kind,
            amplitude_u=_as_complex(_need(obj, "u", "profile"), "u"),
            amplitude_v=_as_complex(_need(obj, "v", "profile"), "v"),
            x_lo=_as_float(obj.get("x_lo", -1.0), "x_lo"),
            x_hi=_as_float(obj.get("x_hi", 1.0), "x_hi"))
    if kind == "delta_cell":
        _reject_unknown(obj, ("kind", "j", "u", "v"), "profile")
        return InitialProfile(
            kind=kind, j0=int(_need(obj, "j", "profile")),
            amplitude_u=_as_complex(_need(obj, "u", "profile"), "u"),
            amplitude_v=_as_complex(_need(obj, "v", "profile"), "v"))
    if kind == "table":
        _reject_unknown(obj, ("kind", "j0", "u", "v"), "profile")
        tu = tuple(_as_complex(z, "u") for z in _need(obj, "u", "profile"))
        tv = tuple(_as_complex(z, "v") for z in _need(obj, "v", "profile"))
        return InitialProfile(kind=kind, j0=int(obj.get("j0", 0)),
                              table_u=tu, table_v=tv)
    raise ConfigError(f"unknown profile kind {kind!r}")


def _parse_outputs(obj: dict) -> OutputSpec:
    _reject_unknown(obj, ("history_path", "diagnostics_path",
                          "checkpoint_every"), "outputs")
    return OutputSpec(history_path=obj.get("history_path"),
                      diagnostics_path=obj.get("diagnostics_path"),
                      checkpoint_every=int(obj.get("checkpoint_every", 0)))


def parse_config(text: str) -> RunSpec:
    """Strict JSON config parser: unknown keys are fatal, defaults are
    filled for ode and outputs."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}") from e
    if not isinstance(obj, dict):
        raise ConfigError("config must be a JSON object")
    _reject_unknown(obj, ("params", "ode", "profile", "tau", "T", "outputs"),
                    "config")
    try:
        return RunSpec(
            params=_parse_params(_need(obj, "params", "config")),
            ode=_parse_ode(obj.get("ode", {})),
            profile=_parse_profile(_need(obj, "profile", "config")),
            tau=_as_float(_need(obj, "tau", "config"), "tau"),
            T=_as_float(_need(obj, "T", "config"), "T"),
            outputs=_parse_outputs(obj.get("outputs", {})))
    except FieldError as e:
        raise ConfigError(str(e)) from e


def _profile_obj(p: InitialProfile) -> dict:
    if p.kind == "gaussian_packet":
        obj = {"kind": p.kind, "center": p.center, "width": p.width,
               "amplitude_u": [p.amplitude_u.real, p.amplitude_u.imag],
               "amplitude_v": [p.amplitude_v.real, p.amplitude_v.imag]}
        if p.radius is not None:
            obj["radius"] = p.radius
        return obj
    if p.kind == "homogeneous":
        return {"kind": p.kind,
                "u": [p.amplitude_u.real, p.amplitude_u.imag],
                "v": [p.amplitude_v.real, p.amplitude_v.imag],
                "x_lo": p.x_lo, "x_hi": p.x_hi}
    if p.kind == "delta_cell":
        return {"kind": p.kind, "j": p.j0,
                "u": [p.amplitude_u.real, p.amplitude_u.imag],
                "v": [p.amplitude_v.real, p.amplitude_v.imag]}
    return {"kind": p.kind, "j0": p.j0,
            "u": [[z.real, z.imag] for z in p.table_u],
            "v": [[z.real, z.imag] for z in p.table_v]}


def serialize_config(spec: RunSpec) -> str:
    obj = {
        "params": {"m": spec.params.m, "alpha": spec.params.alpha,
                   "beta": spec.params.beta},
        "ode": {"substeps_per_tau": spec.ode.substeps_per_tau,
                "project_norm": spec.ode.project_norm,
                "closed_form_if_available": spec.ode.closed_form_if_available},
        "profile": _profile_obj(spec.profile),
        "tau": spec.tau,
        "T": spec.T,
        "outputs": {"checkpoint_every": spec.outputs.checkpoint_every},
    }
    if spec.outputs.history_path is not None:
        obj["outputs"]["history_path"] = spec.outputs.history_path
    if spec.outputs.diagnostics_path is not None:
        obj["outputs"]["diagnostics_path"] = spec.outputs.diagnostics_path
    return json.dumps(obj, indent=2) + "\n"


# ---------------------------------------------------------------------------
# field checkpoints


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def format_field(f: SpinorField) -> str:
    lines = [f"tau={_fmt(f.tau)} jmin={f.mesh.j_min} jmax={f.mesh.j_max} "
             f"n={f.step_index}"]
    for i, j in enumerate(range(f.mesh.j_min, f.mesh.j_max + 1)):
        u, v = f.u[i], f.v[i]
        lines.append(f"{j} {_fmt(u.real)} {_fmt(u.imag)} "
                     f"{_fmt(v.real)} {_fmt(v.imag)}")
    return "\n".join(lines) + "\n"


def _parse_header(line: str, lineno: int) -> tuple[float, int, int, int]:
    try:
        kv = dict(part.split("=", 1) for part in line.split())
        return (float(kv["tau"]), int(kv["jmin"]), int(kv["jmax"]),
                int(kv["n"]))
    except (ValueError, KeyError) as e:
        raise FormatError(f"malformed frame header at line {lineno}: "
                          f"{line!r}") from e


def parse_field(lines: list[str], lineno0: int = 1) -> SpinorField:
    tau, jmin, jmax, n = _parse_header(lines[0], lineno0)
    mesh = Mesh(tau, jmin, jmax)
    ncells = mesh.n_cells
    if len(lines) - 1 != ncells:
        raise FormatError(f"frame starting at line {lineno0} declares "
                          f"{ncells} cells but has {len(lines) - 1} rows")
    u = np.zeros(ncells, np.complex128)
    v = np.zeros(ncells, np.complex128)
    for k, line in enumerate(lines[1:]):
        parts = line.split()
        if len(parts) != 5:
            raise FormatError(f"malformed cell row at line {lineno0 + 1 + k}")
        j = int(parts[0])
        if j != jmin + k:
            raise FormatError(f"out-of-order cell index at line "
                              f"{lineno0 + 1 + k}: expected {jmin + k}, got {j}")
        u[k] = complex(float(parts[1]), float(parts[2]))
        v[k] = complex(float(parts[3]), float(parts[4]))
    return SpinorField(mesh, u, v, n)


def write_field(f: SpinorField, path):
    with open(path, "w") as fh:
        fh.write(format_field(f))


def read_field(path) -> SpinorField:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise FormatError("empty checkpoint file")
    return parse_field(lines)


def write_history(history: History, path):
    """Frames concatenated in the checkpoint format, separated by `---`."""
    with open(path, "w") as fh:
        for i, f in enumerate(history.frames):
            if i:
                fh.write("---\n")
            fh.write(format_field(f))


def read_history(path, params: SchemeParams | None = None,
                 ode: OdeOptions | None = None) -> History:
    with open(path) as fh:
        lines = fh.read().splitlines()
    frames = []
    block: list[str] = []
    start = 1
    for lineno, line in enumerate(lines + ["---"], start=1):
        if line.strip() == "---":
            if not block:
                raise FormatError(f"empty frame (index {len(frames)}) before "
                                  f"line {lineno}")
            try:
                frames.append(parse_field(block, start))
            except (FormatError, IndexError) as e:
                raise FormatError(f"frame {len(frames)}: {e}") from e
            block = []
            start = lineno + 1
        else:
            block.append(line)
    if not frames:
        raise FormatError("history file contains no frames")
    return History(params=params or SchemeParams(0.0, 0.0, 0.0),
                   ode=ode or OdeOptions(), frames=frames)


class DiagnosticsWriter:
    """NDJSON sink: one {n, t, l2, interaction} object per line, strictly
    increasing n."""

    def __init__(self, path):
        self._fh = open(path, "w")
        self._last_n = None

    def __call__(self, record: dict):
        n = record["n"]
        if self._last_n is not None and n != self._last_n + 1:
            raise FormatError(f"diagnostics out of order: {self._last_n} -> {n}")
        self._last_n = n
        self._fh.write(json.dumps({"n": record["n"], "t": record["t"],
                                   "l2": record["l2"],
                                   "interaction": record["interaction"]}) + "\n")

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
