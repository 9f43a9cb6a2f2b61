"""JSON run configuration: schema, loading and construction of the run inputs."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from .condition_a import KatoIndices, validate
from .field import GridSpec, ScalarField, VectorField, gradient
from .fieldio import read_field
from .measures import RadonMeasureSpec, TestFunctionSpec, measure_from_dict

__all__ = ["ConfigError", "RunConfig", "load_config", "config_hash", "SCHEMA", "gaussian_mixture"]

_num = {"type": "number"}
_point = {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}
_rational = {"oneOf": [{"type": "number"}, {"type": "string", "pattern": r"^\s*(inf|[0-9.]+(/[0-9.]+)?)\s*$"}]}

_gaussian = {
    "type": "object",
    "properties": {"center": _point, "variance": {"type": "number", "exclusiveMinimum": 0}, "mass": _num, "amplitude": _num},
    "required": ["variance"],
    "additionalProperties": False,
}
_mixture = {
    "type": "object",
    "properties": {"gaussians": {"type": "array", "items": _gaussian}, "file": {"type": "string"}, "smooth": {"type": "boolean"}},
    "additionalProperties": False,
}
_measure = {
    "type": "object",
    "properties": {
        "atoms": {
            "type": "array",
            "items": {"type": "object", "properties": {"x": _point, "w": _num}, "required": ["x", "w"], "additionalProperties": False},
        },
        "filaments": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {"vertices": {"type": "array", "items": _point, "minItems": 2}, "density": _num},
                "required": ["vertices", "density"],
                "additionalProperties": False,
            },
        },
        "density_file": {"type": "string"},
        "gaussians": {"type": "array", "items": _gaussian},
    },
    "additionalProperties": False,
}

SCHEMA = {
    "type": "object",
    "properties": {
        "grid": {
            "type": "object",
            "properties": {"L": {"type": "number", "exclusiveMinimum": 0}, "N": {"type": "integer", "minimum": 16}},
            "required": ["L", "N"],
            "additionalProperties": False,
        },
        "indices": {"type": "array", "items": _rational, "minItems": 6, "maxItems": 6},
        "T": {"type": "number", "exclusiveMinimum": 0},
        "M": {"type": "integer", "minimum": 8},
        "solver": {"enum": ["picard", "oracle", "both"]},
        "dt": {"type": "number", "exclusiveMinimum": 0},
        "mollification_level": {"type": ["number", "null"], "exclusiveMinimum": 0},
        "data": {
            "type": "object",
            "properties": {"n0": _measure, "c0": _mixture, "zeta0": _measure, "phi": {"oneOf": [_mixture, {"type": "null"}]}},
            "required": ["n0", "c0", "zeta0"],
            "additionalProperties": False,
        },
        "tolerances": {
            "type": "object",
            "properties": {
                k: {"type": "number", "exclusiveMinimum": 0}
                for k in ("picard_tol", "mass", "sign", "cinf", "compare", "scaling")
            }
            | {"max_iter": {"type": "integer", "minimum": 1}},
            "additionalProperties": False,
        },
        "diagnostics": {
            "type": "object",
            "properties": {
                "zeta_p": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 1}},
                "psi": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "properties": {"center": _point, "width": {"type": "number", "exclusiveMinimum": 0}},
                        "additionalProperties": False,
                    },
                },
                "scale_lambda": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
        "output": {"type": "string"},
        "seed": {"type": "integer"},
    },
    "required": ["grid", "indices", "T", "data"],
    "additionalProperties": False,
}

DEFAULT_TOL = {"picard_tol": 1e-6, "max_iter": 40, "mass": 1e-4, "sign": 1e-6, "cinf": 1e-8, "compare": 1e-4, "scaling": 1e-3}


class ConfigError(ValueError):
    def __init__(self, path: str, msg: str):
        super().__init__(f"{path}: {msg}")
        self.path = path


def gaussian_mixture(grid: GridSpec, specs) -> ScalarField:
    """``sum a exp(-|x - x0|^2 / v)``; ``mass`` m sets ``a = m / (pi v)``."""
    X1, X2 = grid.coords()
    out = np.zeros((grid.N, grid.N))
    for g in specs:
        v = float(g["variance"])
        x0, y0 = g.get("center", (0.0, 0.0))
        a = g["mass"] / (math.pi * v) if "mass" in g else g.get("amplitude", 1.0)
        out += a * np.exp(-((X1 - x0) ** 2 + (X2 - y0) ** 2) / v)
    return ScalarField(grid, out)


def _field_spec(grid, spec, base, where):
    if spec.get("file"):
        p = Path(spec["file"])
        f, _ = read_field(p if p.is_absolute() else base / p)
        if f.grid != grid:
            raise ConfigError(where + ".file", f"field is on {f.grid}, expected {grid}")
        return f
    return gaussian_mixture(grid, spec.get("gaussians", []))


def _measure_spec(grid, spec, base, where) -> RadonMeasureSpec:
    d = {k: v for k, v in spec.items() if k != "gaussians"}
    try:
        mu = measure_from_dict(d, grid, base)
    except ValueError as e:
        raise ConfigError(where, str(e)) from e
    if spec.get("gaussians"):
        dens = gaussian_mixture(grid, spec["gaussians"])
        mu = RadonMeasureSpec(mu.atoms, mu.filaments, dens if mu.density is None else mu.density + dens)
    try:
        mu.check_support(grid)
    except ValueError as e:
        raise ConfigError(where, str(e)) from e
    return mu


@dataclass(frozen=True, eq=False)
class RunConfig:
    raw: dict
    grid: GridSpec
    indices: KatoIndices
    T: float
    M: int
    solver: str
    dt: float
    mu_n: RadonMeasureSpec
    c0: ScalarField
    mu_zeta: RadonMeasureSpec
    grad_phi: VectorField | None
    j: float | None
    tol: dict
    zeta_p: tuple = (4.0, 1.5)
    psi: tuple = field(default_factory=tuple)
    scale_lambda: float = 2.0
    output: Path = Path("runs/out")
    seed: int = 0

    @property
    def data(self):
        return self.mu_n, self.c0, self.mu_zeta

    @property
    def hash(self) -> str:
        return config_hash(self.raw)


def config_hash(raw: dict) -> str:
    return hashlib.sha256(json.dumps(raw, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def _parse(raw: dict, base: Path) -> RunConfig:
    v = jsonschema.Draft202012Validator(SCHEMA)
    errs = sorted(v.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errs:
        e = errs[0]
        path = "$" + "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in e.absolute_path)
        raise ConfigError(path, e.message)
    try:
        grid = GridSpec(float(raw["grid"]["L"]), int(raw["grid"]["N"]))
    except ValueError as e:
        raise ConfigError("$.grid", str(e)) from e
    try:
        idx = KatoIndices(*raw["indices"])
    except (ValueError, ZeroDivisionError) as e:
        raise ConfigError("$.indices", str(e)) from e
    rep = validate(idx)
    if not rep.passed:
        raise ConfigError("$.indices", f"indices fail {rep.failures()}")
    d = raw["data"]
    phi = d.get("phi")
    grad_phi = None
    if phi:
        if phi.get("file") and not phi.get("smooth", False):
            raise ConfigError("$.data.phi.smooth", "raw potential files must declare smooth: true")
        grad_phi = gradient(_field_spec(grid, phi, base, "$.data.phi"))
    c0 = _field_spec(grid, d["c0"], base, "$.data.c0")
    diag = raw.get("diagnostics", {})
    psi = tuple(TestFunctionSpec(tuple(p.get("center", (0.0, 0.0))), p.get("width", 0.5)) for p in diag.get("psi", []))
    return RunConfig(
        raw=raw,
        grid=grid,
        indices=idx,
        T=float(raw["T"]),
        M=int(raw.get("M", 16)),
        solver=raw.get("solver", "picard"),
        dt=float(raw.get("dt", 1e-3)),
        mu_n=_measure_spec(grid, d["n0"], base, "$.data.n0"),
        c0=c0,
        mu_zeta=_measure_spec(grid, d["zeta0"], base, "$.data.zeta0"),
        grad_phi=grad_phi,
        j=raw.get("mollification_level"),
        tol={**DEFAULT_TOL, **raw.get("tolerances", {})},
        zeta_p=tuple(diag.get("zeta_p", (4.0, 1.5))),
        psi=psi,
        scale_lambda=float(diag.get("scale_lambda", 2.0)),
        output=Path(raw.get("output", "runs/out")),
        seed=int(raw.get("seed", 0)),
    )


def load_config(path_or_dict) -> RunConfig:
    if isinstance(path_or_dict, dict):
        return _parse(path_or_dict, Path.cwd())
    p = Path(path_or_dict)
    try:
        raw = json.loads(p.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError("$", f"invalid JSON: {e}") from e
    return _parse(raw, p.parent)
