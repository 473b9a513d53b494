"""Run configuration, field CSV files and JSON metadata.

Field files are plain CSV with the header ``x1,x2,value`` and one row per
cell, row-major over ``(i, j)`` (x1 outer, x2 inner), cell-centre
coordinates and 17 significant digits so that a save/load round trip is
bit-exact.  Everything that is not gridded goes into a JSON sidecar.
"""

from __future__ import annotations

import configparser
import hashlib
import io as _io
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .grid import ConfigurationError, Field, Grid, Multipliers, Params, SolutionRecord, make_grid
from .solver import SolverConfig

HEADER = "x1,x2,value"

PathLike = Union[str, Path]


class FormatError(ValueError):
    """A file does not follow the expected schema."""


def software_version() -> str:
    from . import __version__

    return __version__


# -- run configuration ------------------------------------------------------------------

_REQUIRED = object()

# section -> key -> (type, default)
SCHEMA: dict[str, dict[str, tuple]] = {
    "params": {
        "s": (float, _REQUIRED),
        "mu": (float, _REQUIRED),
        "lam": (float, 1.0),
        "nu": (float, 1.0),
        "cap": (float, None),
    },
    "grid": {
        "L": (float, 6.0),
        "H": (float, 6.0),
        "nx": (int, 256),
        "ny": (int, 128),
    },
    "solver": {
        "max_iter": (int, 2000),
        "tol_residual": (float, 1e-9),
        "tol_multiplier": (float, 1e-9),
        "damping": (float, 1.0),
        "init": (str, "half-disk"),
        "seed": (int, 0),
        "margin_cells": (int, 10),
        "init_radius": (float, None),
    },
    "evolution": {
        "n": (int, 512),
        "box_factor": (float, 8.0),
        "turnovers": (float, 2.0),
        "cfl_fraction": (float, 0.9),
        "sample_every": (int, 20),
        "delta": (float, 0.0),
    },
}


@dataclass(frozen=True)
class RunConfig:
    s: float
    mu: float
    lam: float = 1.0
    nu: float = 1.0
    cap: Optional[float] = None
    L: float = 6.0
    H: float = 6.0
    nx: int = 256
    ny: int = 128
    max_iter: int = 2000
    tol_residual: float = 1e-9
    tol_multiplier: float = 1e-9
    damping: float = 1.0
    init: str = "half-disk"
    seed: int = 0
    margin_cells: int = 10
    init_radius: Optional[float] = None
    n: int = 512
    box_factor: float = 8.0
    turnovers: float = 2.0
    cfl_fraction: float = 0.9
    sample_every: int = 20
    delta: float = 0.0

    def __post_init__(self):
        # build everything once so that a bad value fails at parse time
        self.params()
        self.grid()
        self.solver_config()
        if self.n < 16 or self.n % 2:
            raise ConfigurationError("evolution n must be an even count >= 16")
        if self.box_factor <= 0 or self.turnovers <= 0 or self.sample_every < 1:
            raise ConfigurationError("evolution box_factor, turnovers and sample_every must be positive")
        if not 0.0 < self.cfl_fraction <= 1.0:
            raise ConfigurationError("cfl_fraction must lie in (0, 1]")
        if self.delta < 0:
            raise ConfigurationError("delta must be nonnegative")

    def params(self) -> Params:
        return Params(s=self.s, mu=self.mu, lam=self.lam, nu=self.nu, cap=self.cap)

    def grid(self) -> Grid:
        return make_grid(self.L, self.H, self.nx, self.ny)

    def solver_config(self, **override) -> SolverConfig:
        kw = dict(
            max_iter=self.max_iter,
            tol_residual=self.tol_residual,
            tol_multiplier=self.tol_multiplier,
            damping=self.damping,
            init=self.init,
            seed=self.seed,
            margin_cells=self.margin_cells,
            init_radius=self.init_radius,
        )
        kw.update(override)
        return SolverConfig(**kw)

    def to_text(self) -> str:
        values = asdict(self)
        out = []
        for section, keys in SCHEMA.items():
            out.append(f"[{section}]")
            for key in keys:
                out.append(f"{key} = {_format_value(values[key])}")
            out.append("")
        return "\n".join(out)

    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()


def _format_value(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _convert(section: str, key: str, raw: str, typ):
    raw = raw.strip()
    if raw.lower() in ("none", ""):
        if SCHEMA[section][key][1] is None:
            return None
        raise ConfigurationError(f"[{section}] {key} needs a value")
    try:
        if typ is int:
            return int(raw)
        if typ is float:
            return float(raw)
    except ValueError as exc:
        raise ConfigurationError(f"[{section}] {key}: cannot parse {raw!r} as {typ.__name__}") from exc
    return raw


def parse_config(text: str) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, default_section="__none__")
    cp.optionxform = str  # keep L / H case
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(f"malformed config: {exc}") from exc
    kw = {}
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigurationError(f"unknown section [{section}]")
        for key, raw in cp.items(section):
            if key not in SCHEMA[section]:
                raise ConfigurationError(f"unknown key {key!r} in [{section}]")
            kw[key] = _convert(section, key, raw, SCHEMA[section][key][0])
    missing = [k for sec in SCHEMA.values() for k, (_, d) in sec.items() if d is _REQUIRED and k not in kw]
    if missing:
        raise ConfigurationError(f"missing required key(s): {', '.join(missing)}")
    return RunConfig(**kw)


def load_config(path: PathLike) -> RunConfig:
    return parse_config(Path(path).read_text())


# -- fields -------------------------------------------------------------------------------

def save_field(f: Field, path: PathLike) -> Path:
    path = Path(path)
    g = f.grid
    X1, X2 = g.mesh()
    table = np.column_stack([X1.ravel(), X2.ravel(), f.values.ravel()])
    buf = _io.StringIO()
    np.savetxt(buf, table, fmt="%.17g", delimiter=",", header=HEADER, comments="")
    path.write_text(buf.getvalue())
    return path


def _axis(coords: np.ndarray, name: str) -> np.ndarray:
    if coords.size < 2 or np.any(np.diff(coords) <= 0):
        raise FormatError(f"{name} coordinates are not strictly increasing")
    return coords


def load_field(path: PathLike, kind: str = "vorticity", grid: Optional[Grid] = None) -> Field:
    """Read a field CSV.  ``grid`` pins the result to a known grid (coordinates are checked)."""
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines or lines[0].strip() != HEADER:
        raise FormatError(f"{path}: expected header {HEADER!r}")
    try:
        table = np.loadtxt(lines[1:], delimiter=",", ndmin=2)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    if table.shape[0] == 0 or table.shape[1] != 3:
        raise FormatError(f"{path}: expected three columns of data")
    x1_col, x2_col, vals = table.T
    # x2 runs fastest: the first block of rows shares one x1
    ny = int(np.argmax(x2_col[1:] <= x2_col[:-1]) + 1) if np.any(x2_col[1:] <= x2_col[:-1]) else x2_col.size
    if table.shape[0] % ny:
        raise FormatError(f"{path}: {table.shape[0]} rows do not form a grid with {ny} rows per column")
    nx = table.shape[0] // ny
    x1 = _axis(x1_col[::ny], "x1")
    x2 = _axis(x2_col[:ny], "x2")
    if not (np.all(x1_col.reshape(nx, ny) == x1[:, None]) and np.all(x2_col.reshape(nx, ny) == x2[None, :])):
        raise FormatError(f"{path}: rows are not in row-major cell order")
    h = (x1[-1] - x1[0]) / (nx - 1)
    if grid is None:
        L = float(x1[-1] + 0.5 * h)
        H = float(x2[-1] + 0.5 * h)
        grid = Grid(L, H, nx, ny)
    elif grid.shape != (nx, ny):
        raise FormatError(f"{path}: shape {(nx, ny)} does not match the expected grid {grid.shape}")
    tol = 1e-9 * grid.h
    if not (np.allclose(x1, grid.x1, atol=tol, rtol=0) and np.allclose(x2, grid.x2, atol=tol, rtol=0)):
        raise FormatError(f"{path}: coordinates are not a uniform cell-centred grid")
    return Field(grid, vals.reshape(nx, ny), kind)


# -- records, metadata and traces --------------------------------------------------------

def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def record_metadata(record: SolutionRecord, config: Optional[RunConfig] = None, **extra) -> dict:
    g = record.grid
    meta = {
        "software_version": software_version(),
        "config_hash": config.digest() if config is not None else None,
        "grid": {"L": g.L, "H": g.H, "nx": g.nx, "ny": g.ny},
        "params": asdict(record.params),
        "s": record.params.s,
        "multipliers": {"W": record.mult.W, "gamma": record.mult.gamma},
        "energy": record.energy,
        "kinetic": record.kinetic,
        "mass": record.mass,
        "impulse": record.impulse,
        "residual": record.residual,
        "iterations": record.iterations,
        "diagnostics": record.diagnostics,
    }
    meta.update(extra)
    return _jsonable(meta)


def write_json(meta: dict, path: PathLike) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_jsonable(meta), indent=2, sort_keys=True) + "\n")
    return path


def sibling(prefix: PathLike, ext: str) -> Path:
    """``<prefix><ext>``, tolerating a prefix that already ends in .csv or .json."""
    prefix = Path(prefix)
    if prefix.suffix in (".csv", ".json"):
        prefix = prefix.with_suffix("")
    return prefix.parent / (prefix.name + ext)


def save_record(record: SolutionRecord, prefix: PathLike, config: Optional[RunConfig] = None, **extra):
    """Write ``<prefix>.csv`` (vorticity) and ``<prefix>.json``; returns both paths."""
    csv_path = save_field(record.omega, sibling(prefix, ".csv"))
    json_path = write_json(record_metadata(record, config, **extra), sibling(prefix, ".json"))
    return csv_path, json_path


def load_metadata(prefix: PathLike) -> dict:
    path = sibling(prefix, ".json")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def load_record(prefix: PathLike) -> SolutionRecord:
    """Rebuild a record from its two files; the stream function is recomputed."""
    from .kernel import apply_Gs, build_kernel_tensor

    meta = load_metadata(prefix)
    try:
        g = meta["grid"]
        grid = make_grid(g["L"], g["H"], g["nx"], g["ny"])
        params = Params(**meta["params"])
        mult = Multipliers(meta["multipliers"]["W"], meta["multipliers"]["gamma"])
    except (KeyError, TypeError) as exc:
        raise FormatError(f"metadata for {prefix} is incomplete: {exc}") from exc
    omega = load_field(sibling(prefix, ".csv"), "vorticity", grid)
    psi = apply_Gs(omega, build_kernel_tensor(grid, params.s))
    return SolutionRecord(
        omega=omega,
        psi=psi,
        mult=mult,
        energy=meta.get("energy", math.nan),
        kinetic=meta.get("kinetic", math.nan),
        mass=meta.get("mass", math.nan),
        impulse=meta.get("impulse", math.nan),
        residual=meta["residual"] if meta.get("residual") is not None else math.nan,
        iterations=meta.get("iterations", 0),
        params=params,
        grid=grid,
        diagnostics=meta.get("diagnostics", {}),
    )


def save_trace(trace, path: PathLike, **extra) -> tuple[Path, Path]:
    """StabilityTrace as CSV plus a JSON sidecar with drifts and run metadata."""
    path = Path(path)
    rows = np.array(list(trace.rows()), dtype=float)
    buf = _io.StringIO()
    np.savetxt(buf, rows.reshape(-1, len(trace.COLUMNS)), fmt="%.17g", delimiter=",",
               header=",".join(trace.COLUMNS), comments="")
    path.write_text(buf.getvalue())
    meta = {
        "software_version": software_version(),
        "drifts": trace.drifts(),
        "conserved_drifts": trace.conserved_drifts(),
        "meta": trace.meta,
    }
    meta.update(extra)
    side = write_json(meta, path.with_suffix(".json"))
    return path, side


def load_trace(path: PathLike):
    from .evolution import StabilityTrace

    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines or lines[0].strip() != ",".join(StabilityTrace.COLUMNS):
        raise FormatError(f"{path}: not a stability trace")
    table = np.loadtxt(lines[1:], delimiter=",", ndmin=2).reshape(-1, len(StabilityTrace.COLUMNS))
    tr = StabilityTrace()
    names = ("times",) + StabilityTrace.COLUMNS[1:]
    for name, col in zip(names, table.T):
        setattr(tr, name, col.tolist())
    return tr


__all__ = [
    "FormatError",
    "RunConfig",
    "parse_config",
    "load_config",
    "save_field",
    "load_field",
    "save_record",
    "load_record",
    "record_metadata",
    "save_trace",
    "load_trace",
    "write_json",
]
