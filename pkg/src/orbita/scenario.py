"""Scenario files: parsing, validation, hashing and report serialization.

A scenario is one JSON object. Complex numbers are written as ``{"re": .., "im": ..}``
(bare real numbers are accepted as well). Generators are jet records, or
``{"terms": [...], "constant": [...]}`` for maps with a constant term, or
``{"matrix": [[...]], "constant": [...]}`` for affine maps.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import SchemaError
from .group import GroupSpec
from .jets import PolyMap, from_records

SCHEMA_VERSION = 1
REPORT_SCHEMA = "orbita.report/1"
COMMANDS = ("normal-form", "dominance", "linearize", "orbit", "minimality", "density")

DEFAULT_TOLERANCES = {
    "rank": 1e-9,
    "linearization": 1e-8,
    "eig": None,
    "comm": 1e-9,
    "inv": 1e-12,
    "solve": 1e-9,
}

_KNOWN_KEYS = {
    "schema_version", "name", "n", "degree", "generators", "inverses", "fixed_point", "budget",
    "base_points", "probes", "random_probes", "candidates", "perturbations", "tolerances", "region",
    "grid_step", "density_budgets", "minimality_budgets", "invariance_words", "commands", "output_dir",
}


def parse_complex(value) -> complex:
    if isinstance(value, dict):
        try:
            return complex(float(value.get("re", 0.0)), float(value.get("im", 0.0)))
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"bad complex value {value!r}") from exc
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return complex(value)
    raise SchemaError(f"bad complex value {value!r}")


def parse_vector(values, n: int, what: str) -> np.ndarray:
    if not isinstance(values, list) or len(values) != n:
        raise SchemaError(f"{what} must be a list of {n} complex numbers")
    return np.array([parse_complex(v) for v in values], dtype=np.complex128)


def parse_matrix(rows, n: int, what: str) -> np.ndarray:
    if not isinstance(rows, list) or len(rows) != n:
        raise SchemaError(f"{what} must have {n} rows")
    return np.stack([parse_vector(r, n, f"{what} row") for r in rows])


def _parse_generator(obj, n, d, what) -> PolyMap:
    if isinstance(obj, list):
        return from_records(n, d, obj)
    if not isinstance(obj, dict):
        raise SchemaError(f"{what} must be a record list or an object")
    constant = parse_vector(obj["constant"], n, f"{what} constant") if "constant" in obj else np.zeros(n)
    if "matrix" in obj:
        base = PolyMap.affine(parse_matrix(obj["matrix"], n, f"{what} matrix"), constant, d=d)
        if "terms" in obj:
            raise SchemaError(f"{what}: give either matrix or terms")
        return base
    if "terms" not in obj:
        raise SchemaError(f"{what} needs 'terms' or 'matrix'")
    coeffs = np.array(from_records(n, d, obj["terms"], allow_constant=False).coeffs)
    coeffs[:, 0] += constant
    return PolyMap(n, d, coeffs)


def _positive_int(raw, key, default=None):
    value = raw.get(key, default)
    if not isinstance(value, int) or isinstance(value, bool) or value < 1:
        raise SchemaError(f"'{key}' must be a positive integer")
    return value


def _budget_list(raw, key, default):
    values = raw.get(key, default)
    if not isinstance(values, list) or not values or \
            any(not isinstance(v, int) or isinstance(v, bool) or v < 1 for v in values):
        raise SchemaError(f"'{key}' must be a nonempty list of positive integers")
    return tuple(values)


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def scenario_hash(raw: dict) -> str:
    return hashlib.sha256(canonical_json(raw).encode()).hexdigest()


@dataclass
class Scenario:
    raw: dict
    name: str
    n: int
    degree: int
    generators: list
    inverses: list | None
    fixed_point: np.ndarray | None
    budget: int | None
    base_points: list
    probes: list
    random_probes: int
    candidates: list
    perturbations: int
    tolerances: dict
    region_radius: float
    region_center: np.ndarray | None
    grid_step: float
    density_budgets: tuple
    minimality_budgets: tuple
    invariance_words: int
    commands: tuple
    output_dir: str | None
    hash: str = field(default="")

    def group(self, budget: int | None = None) -> GroupSpec:
        tol = self.tolerances
        return GroupSpec(self.generators, inverses=self.inverses, fixed_point=self.fixed_point,
                         budget=self.budget if budget is None else budget,
                         tau_comm=tol["comm"], tau_inv=tol["inv"])


def parse_scenario(raw) -> Scenario:
    if not isinstance(raw, dict):
        raise SchemaError("scenario must be a JSON object")
    unknown = set(raw) - _KNOWN_KEYS
    if unknown:
        raise SchemaError(f"unknown scenario keys: {sorted(unknown)}")
    if raw.get("schema_version", SCHEMA_VERSION) != SCHEMA_VERSION:
        raise SchemaError(f"unsupported schema_version {raw.get('schema_version')!r}")
    n = _positive_int(raw, "n")
    d = _positive_int(raw, "degree", 8)
    gens = raw.get("generators")
    if not isinstance(gens, list) or not gens:
        raise SchemaError("'generators' must be a nonempty list")
    generators = [_parse_generator(g, n, d, f"generator {i}") for i, g in enumerate(gens)]
    inverses = None
    if raw.get("inverses") is not None:
        if not isinstance(raw["inverses"], list) or len(raw["inverses"]) != len(gens):
            raise SchemaError("'inverses' must match 'generators' in length")
        inverses = [_parse_generator(g, n, d, f"inverse {i}") for i, g in enumerate(raw["inverses"])]
    fixed_point = None if raw.get("fixed_point") is None else parse_vector(raw["fixed_point"], n, "fixed_point")
    budget = None if raw.get("budget") is None else _positive_int(raw, "budget")

    points = raw.get("base_points", [[1.0] * n])
    if not isinstance(points, list) or not points:
        raise SchemaError("'base_points' must be a nonempty list")
    base_points = [parse_vector(p, n, "base point") for p in points]
    probes = [parse_vector(p, n, "probe") for p in raw.get("probes", [])]
    candidates = [parse_vector(p, n, "candidate") for p in raw.get("candidates", [])]

    tolerances = dict(DEFAULT_TOLERANCES)
    extra = raw.get("tolerances", {})
    if not isinstance(extra, dict) or set(extra) - set(DEFAULT_TOLERANCES):
        raise SchemaError(f"'tolerances' keys must be among {sorted(DEFAULT_TOLERANCES)}")
    tolerances.update(extra)

    region = raw.get("region", {})
    if not isinstance(region, dict):
        raise SchemaError("'region' must be an object")
    radius = float(region.get("radius", 1.0))
    center = None if region.get("center") is None else parse_vector(region["center"], n, "region center")
    grid_step = float(raw.get("grid_step", 0.25))
    if radius <= 0 or grid_step <= 0:
        raise SchemaError("region radius and grid_step must be positive")

    commands = tuple(raw.get("commands", COMMANDS))
    bad = [c for c in commands if c not in COMMANDS]
    if bad:
        raise SchemaError(f"unknown commands {bad}")

    for key in ("random_probes", "perturbations"):
        v = raw.get(key, 0)
        if not isinstance(v, int) or isinstance(v, bool) or v < 0:
            raise SchemaError(f"'{key}' must be a nonnegative integer")

    return Scenario(
        raw=raw, name=str(raw.get("name", "scenario")), n=n, degree=d, generators=generators,
        inverses=inverses, fixed_point=fixed_point, budget=budget, base_points=base_points, probes=probes,
        random_probes=raw.get("random_probes", 0), candidates=candidates,
        perturbations=raw.get("perturbations", 0), tolerances=tolerances, region_radius=radius,
        region_center=center, grid_step=grid_step,
        density_budgets=_budget_list(raw, "density_budgets", [3, 4, 5, 6]),
        minimality_budgets=_budget_list(raw, "minimality_budgets", [4, 5, 6]),
        invariance_words=_positive_int(raw, "invariance_words", 50),
        commands=commands, output_dir=raw.get("output_dir"), hash=scenario_hash(raw),
    )


def load_scenario(path) -> Scenario:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON ({exc})") from exc
    return parse_scenario(raw)


# -- serialization -------------------------------------------------------------

def to_jsonable(obj):
    """Recursively convert numpy data and complex numbers; complex becomes ``{re, im}``."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def write_json(path, obj):
    Path(path).write_text(json.dumps(to_jsonable(obj), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def write_cloud_csv(path, words, points):
    """Word tag, then re/im interleaved coordinates."""
    points = np.atleast_2d(np.asarray(points, dtype=np.complex128))
    n = points.shape[1] if points.size else 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["word"] + [f"{p}{i}" for i in range(1, n + 1) for p in ("re", "im")])
        for word, p in zip(words, points):
            w.writerow([" ".join(str(e) for e in word)] + [repr(float(v)) for z in p for v in (z.real, z.imag)])


def write_triples_csv(path, words, orbit_points, mapped, linear_points):
    """Rows of ``w(x)``, ``M w(x)`` and ``D_0 w x``, each re/im interleaved."""
    n = orbit_points.shape[0]
    header = ["word"]
    for tag in ("wx", "Mwx", "Dwx"):
        header += [f"{tag}_{p}{i}" for i in range(1, n + 1) for p in ("re", "im")]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for j, word in enumerate(words):
            row = [" ".join(str(e) for e in word)]
            for block in (orbit_points, mapped, linear_points):
                row += [repr(float(v)) for z in block[:, j] for v in (z.real, z.imag)]
            w.writerow(row)
