"""Field files, trace CSVs, run configs and manifests."""
from __future__ import annotations

import csv
import json
import re
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ParseError, ValidationError
from .flow import FlowConfig, FlowTrace, SCHEMES
from .functionals import TwistForm
from .grid import Field, GridSpec, random_kahler_potential
from .iteration import TRACE_COLUMNS, IterationConfig, IterationTrace
from .solver import SolverConfig

__all__ = [
    "save_field",
    "load_field",
    "emit_trace",
    "emit_flow_trace",
    "read_config",
    "write_config",
    "parse_config",
    "RunManifest",
    "checkpoint_name",
]


# -- fields -------------------------------------------------------------------

def save_field(field_, path) -> Path:
    """Write a field as ``{"n", "N", "values"}`` (row-major float64)."""
    if not isinstance(field_, Field):
        field_ = Field.from_array(np.asarray(field_, dtype=np.float64))
    values = np.asarray(field_.values, dtype=np.float64).ravel(order="C")
    doc = {"n": field_.grid.n, "N": field_.grid.N, "values": values.tolist()}
    path = Path(path)
    try:
        path.write_text(json.dumps(doc))
    except OSError as exc:
        raise OSError(f"cannot write field to {path}: {exc}") from exc
    return path


def load_field(path, grid: GridSpec | None = None) -> Field:
    """Read a field file; with ``grid`` the stored grid must match."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise OSError(f"cannot read field from {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON: {exc.msg}", line=exc.lineno) from exc
    for key in ("n", "N", "values"):
        if key not in doc:
            raise ParseError(f"{path}: missing {key!r}", key=key)
    try:
        stored = GridSpec(int(doc["n"]), int(doc["N"]))
    except ValueError as exc:
        raise ValidationError("grid", f"{path}: {exc}") from exc
    if grid is not None and stored != grid:
        raise ValidationError("grid", f"{path} holds n={stored.n}, N={stored.N}; expected n={grid.n}, N={grid.N}")
    values = np.asarray(doc["values"], dtype=np.float64)
    if values.size != stored.N**stored.n:
        raise ValidationError("values", f"{path}: expected {stored.N**stored.n} values, got {values.size}")
    try:
        return Field(values.reshape(stored.shape), stored)
    except ValueError as exc:
        raise ValidationError("values", f"{path}: {exc}") from exc


def checkpoint_name(step: int) -> str:
    return f"u_{step:06}.json"


# -- traces -------------------------------------------------------------------

def _cell(x):
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def emit_trace(trace: IterationTrace | None, path) -> Path:
    """Write the iteration trace CSV; ``None`` or an empty trace gives a header only."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        for rec in [] if trace is None else trace.records:
            writer.writerow([_cell(rec.row()[c]) for c in TRACE_COLUMNS])
    return path


FLOW_COLUMNS = ("step", "t", "K", "supR", "mass")


def emit_flow_trace(trace: FlowTrace, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(FLOW_COLUMNS)
        for row in zip(trace.steps, trace.times, trace.K, trace.supR, trace.mass):
            writer.writerow([_cell(v) for v in row])
    return path


# -- configs ------------------------------------------------------------------

_TOP = {
    "kind": "iterate",
    "n": None,
    "N": None,
    "initial": None,
    "seed": 0,
    "tau": None,
    "max_steps": 200,
    "stop_R_sup": 1e-8,
    "record_every": 1,
    "t_end": None,
    "dt": None,
    "scheme": "imex",
}
_SECTIONS = {
    "solver": {f.name: f.default for f in fields(SolverConfig)},
    "chi0": {"a": None, "psi": None},
    "random": {"strength": 0.3, "n_modes": 4, "kmax": 3},
}
_REQUIRED = {"iterate": ("n", "N", "initial", "tau"), "flow": ("n", "N", "initial", "t_end", "dt")}


def _line_of(text, key):
    pat = re.compile(rf"^\s*{re.escape(key)}\s*=", re.M)
    m = pat.search(text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _fill(doc, defaults, text, prefix=""):
    out = {}
    for key, value in doc.items():
        if key not in defaults:
            raise ParseError("unknown key", key=prefix + key, line=_line_of(text, key))
        out[key] = value
    for key, value in defaults.items():
        out.setdefault(key, value)
    return out


def read_config(path) -> dict:
    """Load a TOML run config, reject unknown keys and fill in defaults.

    The returned dict is the echo written into the run manifest. Relative
    paths inside it are resolved against the config's directory.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        line = getattr(exc, "lineno", None)
        if line is None:
            m = re.search(r"line (\d+)", str(exc))
            line = int(m.group(1)) if m else None
        raise ParseError(f"{path}: {exc}", line=line) from exc

    top = {k: v for k, v in doc.items() if not isinstance(v, dict)}
    echo = _fill(top, _TOP, text)
    for name, defaults in _SECTIONS.items():
        section = doc.get(name)
        if section is None:
            echo[name] = None if name != "solver" else dict(defaults)
            continue
        echo[name] = _fill(section, defaults, text, prefix=f"{name}.")
    for name, value in doc.items():
        if isinstance(value, dict) and name not in _SECTIONS:
            raise ParseError("unknown section", key=name, line=_line_of(text, f"[{name}]"))

    kind = echo["kind"]
    if kind not in _REQUIRED:
        raise ValidationError("kind", f"must be one of {sorted(_REQUIRED)}, got {kind!r}")
    for key in _REQUIRED[kind]:
        if echo[key] is None:
            raise ValidationError(key, "is required")
    base = path.parent
    for key, holder in (("initial", echo), ("psi", echo["chi0"] or {})):
        value = holder.get(key)
        if isinstance(value, str) and value not in ("zero", "random"):
            holder[key] = str((base / value).resolve())
    return echo


def write_config(echo: dict, path) -> Path:
    """Write a config echo back as TOML; unset (None) entries are omitted."""
    doc = {}
    for key, value in echo.items():
        if value is None:
            continue
        if isinstance(value, dict):
            section = {k: v for k, v in value.items() if v is not None}
            if section:
                doc[key] = section
        else:
            doc[key] = value
    path = Path(path)
    path.write_text(tomli_w.dumps(doc))
    return path


def _initial_field(echo, grid: GridSpec, seed):
    source = echo["initial"]
    if source == "zero":
        return grid.zeros()
    if source == "random":
        opts = echo["random"] or _SECTIONS["random"]
        rng = np.random.default_rng(seed)
        return random_kahler_potential(grid, rng, n_modes=opts["n_modes"], kmax=opts["kmax"], strength=opts["strength"])
    return load_field(source, grid).values


def parse_config(path, seed: int | None = None) -> IterationConfig | FlowConfig:
    """Validated :class:`IterationConfig` (``kind = "iterate"``) or :class:`FlowConfig`."""
    return build_config(read_config(path), seed)


def build_config(echo: dict, seed: int | None = None) -> IterationConfig | FlowConfig:
    try:
        grid = GridSpec(int(echo["n"]), int(echo["N"]))
    except ValueError as exc:
        raise ValidationError("N", str(exc)) from exc
    seed = echo["seed"] if seed is None else seed
    initial = _initial_field(echo, grid, seed)

    if echo["kind"] == "flow":
        if not echo["dt"] > 0:
            raise ValidationError("dt", f"must be positive, got {echo['dt']}")
        if not echo["t_end"] >= echo["dt"]:
            raise ValidationError("t_end", "must be at least dt")
        if echo["scheme"] not in SCHEMES:
            raise ValidationError("scheme", f"must be one of {SCHEMES}")
        if echo["record_every"] < 1:
            raise ValidationError("record_every", "must be at least 1")
        return FlowConfig(initial=initial, t_end=float(echo["t_end"]), dt=float(echo["dt"]),
                          scheme=echo["scheme"], record_every=int(echo["record_every"]))

    if not echo["tau"] > 0:
        raise ValidationError("tau", f"must be positive, got {echo['tau']}")
    if echo["max_steps"] < 1:
        raise ValidationError("max_steps", "must be at least 1")
    if echo["record_every"] < 1:
        raise ValidationError("record_every", "must be at least 1")
    if not echo["stop_R_sup"] >= 0:
        raise ValidationError("stop_R_sup", "must be non-negative")
    try:
        solver = SolverConfig(**echo["solver"])
    except (TypeError, ValueError) as exc:
        raise ValidationError("solver", str(exc)) from exc

    chi0 = None
    if echo["chi0"] is not None:
        a = echo["chi0"]["a"]
        if a is None:
            raise ValidationError("chi0.a", "is required when [chi0] is given")
        psi = None if echo["chi0"]["psi"] is None else load_field(echo["chi0"]["psi"], grid).values
        chi0 = TwistForm(float(a), psi)
        lam = chi0.min_eigenvalue(grid.n, grid.N)
        if lam < -1e-10:
            raise ValidationError(
                "chi0",
                f"the twist form must be semipositive, but a*I + Hess(psi) has eigenvalue {lam:.4g}",
            )
    return IterationConfig(
        tau=float(echo["tau"]), initial=initial, max_steps=int(echo["max_steps"]),
        stop_R_sup=float(echo["stop_R_sup"]), chi0=chi0, solver=solver,
        record_every=int(echo["record_every"]),
    )


# -- manifests ----------------------------------------------------------------

@dataclass
class RunManifest:
    command: str
    config: dict
    version: str
    grid: dict
    timings: dict = field(default_factory=dict)
    outcome: str = "pending"
    paths: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    def write(self, path) -> Path:
        path = Path(path)
        self.paths = {k: v for k, v in self.paths.items() if _exists(v)}
        path.write_text(json.dumps(asdict(self), indent=2, default=_jsonable))
        return path


def _exists(v):
    if isinstance(v, list):
        return all(Path(p).exists() for p in v)
    return Path(v).exists()


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    return str(x)
