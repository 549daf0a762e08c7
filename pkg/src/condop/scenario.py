"""Scenario files, validation, and canonical (byte-reproducible) reports.

Scenarios and reports are JSON: UTF-8, sorted keys, two-space indent, one
trailing newline.  Floats rely on the shortest round-trip representation;
non-finite values are written as the strings "inf", "-inf", "nan" (JSON has
no tokens for them).  Report files carry a deterministic ``body`` (what the
reproducibility guarantee covers) and a ``header`` holding timestamps and
wall-clock data.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .condexp import FunctionOnSpace, constant, function_on
from .errors import DomainError, ResourceError, ValidationError
from .measure_core import (
    MeasureSpace,
    PartitionAlgebra,
    RefinementFamily,
    dyadic_family,
    make_partition,
    make_space,
    singleton_partition,
    trivial_partition,
)
from .weighted_ops import CondOperator, ExponentPair

SCHEMA_VERSION = 1

ANALYSIS_NAMES = (
    "check_same_exponent",
    "classify_cross_exponent",
    "takagi_quantities",
    "ameasurable_equivalences",
    "surjectivity_necessary",
    "range_analysis",
    "is_invertible",
    "kernel_basis",
    "numeric_rank",
    "min_modulus",
    "opnorm",
    "reduction_check",
    "recognize",
)

EXPONENT_MIN, EXPONENT_MAX = 1.01, 64.0


def _sanitize(obj: Any) -> Any:
    """Make obj JSON-serializable and canonical."""
    if isinstance(obj, dict):
        return {str(k): _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):  # before int: bool subclasses int
        return bool(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if np.isnan(x):
            return "nan"
        if np.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, complex):
        return [_sanitize(obj.real), _sanitize(obj.imag)]
    if isinstance(obj, np.ndarray):
        return [_sanitize(v) for v in obj.tolist()]
    return obj


def canonical_bytes(obj: Any) -> bytes:
    """Canonical serialization: sorted keys, 2-space indent, trailing newline."""
    text = json.dumps(_sanitize(obj), sort_keys=True, indent=2, ensure_ascii=True, allow_nan=False)
    return (text + "\n").encode("utf-8")


def load_json(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ValidationError("<file>", f"scenario file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ValidationError("<file>", f"not valid JSON: {exc}")


@dataclass
class Scenario:
    """Validated scenario: the operator instance plus requested analyses."""

    raw: dict
    seed: int
    space: MeasureSpace | None
    partition: PartitionAlgebra | None
    family: RefinementFamily | None
    u: FunctionOnSpace | None
    w: FunctionOnSpace | None
    exponents: ExponentPair
    codomain: str
    analyses: list[str]
    oracle_overrides: dict
    strict_oracle: bool
    sweep_levels: tuple[int, int] | None
    u_rule_name: str | None
    u_rule_params: dict
    audit_overrides: dict = field(default_factory=dict)
    matrix: np.ndarray | None = None

    def operator(self) -> CondOperator:
        if self.space is None or self.u is None:
            raise ValidationError("space", "scenario does not define a single-space operator")
        return CondOperator(self.space, self.partition, self.u, self.w, self.exponents, self.codomain)


def _require(mapping: dict, key: str, path: str) -> Any:
    if key not in mapping:
        raise ValidationError(f"{path}.{key}" if path else key, "missing required field")
    return mapping[key]


def _as_complex_list(values: Any, path: str, n: int | None = None) -> np.ndarray:
    if not isinstance(values, list):
        raise ValidationError(path, "expected a list of numbers or [re, im] pairs")
    out = np.zeros(len(values), dtype=complex)
    for i, v in enumerate(values):
        if isinstance(v, (int, float)):
            out[i] = complex(v)
        elif isinstance(v, list) and len(v) == 2 and all(isinstance(c, (int, float)) for c in v):
            out[i] = complex(v[0], v[1])
        else:
            raise ValidationError(f"{path}[{i}]", f"not a number or [re, im] pair: {v!r}")
    if n is not None and len(out) != n:
        raise ValidationError(path, f"expected {n} entries, got {len(out)}")
    return out


_RULES = {
    "indicator": lambda t, prm: ((t >= prm.get("lo", 0.0)) & (t < prm.get("hi", 0.5))).astype(complex),
    "linear": lambda t, prm: (prm.get("a", 0.0) + prm.get("b", 1.0) * t).astype(complex),
    "exp": lambda t, prm: (prm.get("a", 1.0) * np.exp(prm.get("b", 1.0) * t)).astype(complex),
    "ones": lambda t, prm: np.ones(len(t), dtype=complex),
}


def rule_values(name: str, params: dict, coords: np.ndarray, path: str) -> np.ndarray:
    if name not in _RULES:
        raise ValidationError(path, f"unknown rule {name!r}; available: {sorted(_RULES)}")
    return _RULES[name](np.asarray(coords, dtype=float), params)


def _default_coords(n: int) -> np.ndarray:
    """Rule coordinate for explicit spaces: midpoint positions in [0, 1]."""
    return (np.arange(n) + 0.5) / n


def _parse_function(spec: Any, space: MeasureSpace, coords: np.ndarray, path: str) -> FunctionOnSpace:
    if spec is None:
        return constant(space)
    if not isinstance(spec, dict):
        raise ValidationError(path, "expected an object with 'values' or 'rule'")
    if "values" in spec:
        return function_on(space, _as_complex_list(spec["values"], f"{path}.values", space.n_points))
    if "rule" in spec:
        params = spec.get("params", {})
        if not isinstance(params, dict):
            raise ValidationError(f"{path}.params", "expected an object")
        return function_on(space, rule_values(spec["rule"], params, coords, f"{path}.rule"))
    raise ValidationError(path, "needs either 'values' or 'rule'")


def parse_scenario(doc: dict, seed_override: int | None = None, default_seed: int = 0) -> Scenario:
    """Validate a scenario document; every violation names its field path."""
    if not isinstance(doc, dict):
        raise ValidationError("<root>", "scenario must be a JSON object")
    version = _require(doc, "schema_version", "")
    if version != SCHEMA_VERSION:
        raise ValidationError("schema_version", f"expected {SCHEMA_VERSION}, got {version!r}")

    seed = doc.get("seed", default_seed)
    if not isinstance(seed, int):
        raise ValidationError("seed", "must be an integer")
    if seed_override is not None:
        seed = seed_override

    p = doc.get("p", 2.0)
    q = doc.get("q", p)
    for name, e in (("p", p), ("q", q)):
        if not isinstance(e, (int, float)):
            raise ValidationError(name, "must be a number")
        if not (EXPONENT_MIN <= float(e) <= EXPONENT_MAX):
            raise ValidationError(name, f"must lie in [{EXPONENT_MIN}, {EXPONENT_MAX}]")
    exponents = ExponentPair(float(p), float(q))

    space_spec = _require(doc, "space", "")
    family = None
    space = None
    partition = None
    coords = None
    if not isinstance(space_spec, dict):
        raise ValidationError("space", "must be an object")
    if "dyadic" in space_spec:
        dy = space_spec["dyadic"]
        if not isinstance(dy, dict):
            raise ValidationError("space.dyadic", "must be an object")
        depth = _require(dy, "depth", "space.dyadic")
        if not isinstance(depth, int) or depth < 1:
            raise ValidationError("space.dyadic.depth", "must be a positive integer")
        mass = dy.get("mass", 1.0)
        if not isinstance(mass, (int, float)) or mass <= 0:
            raise ValidationError("space.dyadic.mass", "must be a positive number")
        blocks = dy.get("blocks", "pairs")
        if blocks not in ("pairs", "singletons"):
            raise ValidationError("space.dyadic.blocks", "must be 'pairs' or 'singletons'")
        try:
            family = dyadic_family(depth, float(mass), blocks)
        except ResourceError as exc:
            raise ValidationError("space.dyadic.depth", str(exc))
        top = family.levels[-1]
        space, partition, coords = top.space, top.partition, top.centers
    elif "weights" in space_spec:
        weights = space_spec["weights"]
        if not isinstance(weights, list) or not weights:
            raise ValidationError("space.weights", "must be a nonempty list")
        for i, wv in enumerate(weights):
            if not isinstance(wv, (int, float)) or not np.isfinite(wv) or wv <= 0:
                raise ValidationError(f"space.weights[{i}]", f"must be a positive finite number, got {wv!r}")
        kinds = space_spec.get("kinds")
        if kinds is not None:
            if not isinstance(kinds, list) or len(kinds) != len(weights):
                raise ValidationError("space.kinds", "must match weights in length")
            for i, kv in enumerate(kinds):
                if kv not in ("atom", "cell"):
                    raise ValidationError(f"space.kinds[{i}]", f"must be 'atom' or 'cell', got {kv!r}")
        space = make_space(weights, kinds)
        coords = _default_coords(space.n_points)
        part_spec = doc.get("partition", {"rule": "singletons"})
        if not isinstance(part_spec, dict):
            raise ValidationError("partition", "must be an object")
        if "assignment" in part_spec:
            assignment = part_spec["assignment"]
            if not isinstance(assignment, list) or len(assignment) != space.n_points:
                raise ValidationError("partition.assignment", f"must list {space.n_points} block indices")
            try:
                partition = make_partition(space, assignment)
            except DomainError as exc:
                raise ValidationError("partition.assignment", str(exc))
        else:
            rule = part_spec.get("rule", "singletons")
            if rule == "singletons":
                partition = singleton_partition(space)
            elif rule == "trivial":
                partition = trivial_partition(space)
            elif rule == "pairs":
                if space.n_points % 2:
                    raise ValidationError("partition.rule", "'pairs' needs an even point count")
                partition = make_partition(space, np.repeat(np.arange(space.n_points // 2), 2))
            else:
                raise ValidationError("partition.rule", f"unknown rule {rule!r}")
    else:
        raise ValidationError("space", "needs 'weights' or 'dyadic'")

    u_spec = doc.get("u")
    u_rule_name = None
    u_rule_params: dict = {}
    if isinstance(u_spec, dict) and "rule" in u_spec:
        u_rule_name = u_spec["rule"]
        u_rule_params = u_spec.get("params", {})
    u = _parse_function(u_spec, space, coords, "u") if u_spec is not None else constant(space)
    w = _parse_function(doc.get("w"), space, coords, "w")

    codomain = doc.get("codomain", "algebra" if bool(np.all(w.values == 1.0)) else "sigma")
    if codomain not in ("sigma", "algebra"):
        raise ValidationError("codomain", "must be 'sigma' or 'algebra'")

    analyses = doc.get("analyses", [])
    if not isinstance(analyses, list):
        raise ValidationError("analyses", "must be a list of analysis names")
    for i, name in enumerate(analyses):
        if name not in ANALYSIS_NAMES:
            raise ValidationError(
                f"analyses[{i}]", f"unknown analysis {name!r}; available: {sorted(ANALYSIS_NAMES)}"
            )

    oracle_overrides = dict(doc.get("oracle", {}))
    if not isinstance(doc.get("oracle", {}), dict):
        raise ValidationError("oracle", "must be an object of OracleConfig overrides")
    strict = bool(oracle_overrides.pop("strict", False))

    sweep_levels = None
    if "sweep" in doc:
        sw = doc["sweep"]
        if not isinstance(sw, dict) or "levels" not in sw:
            raise ValidationError("sweep", "must be an object with 'levels': [lo, hi]")
        lv = sw["levels"]
        if (not isinstance(lv, list) or len(lv) != 2
                or not all(isinstance(x, int) for x in lv) or lv[0] > lv[1]):
            raise ValidationError("sweep.levels", "must be [lo, hi] with lo <= hi")
        sweep_levels = (lv[0], lv[1])

    matrix = None
    if "matrix" in doc:
        rows = doc["matrix"]
        if not isinstance(rows, list) or len(rows) != space.n_points:
            raise ValidationError("matrix", f"must list {space.n_points} rows")
        parsed = [_as_complex_list(r, f"matrix[{i}]", space.n_points) for i, r in enumerate(rows)]
        matrix = np.vstack(parsed)

    audit_overrides = doc.get("audit_overrides", {})
    if not isinstance(audit_overrides, dict):
        raise ValidationError("audit_overrides", "must be an object")

    return Scenario(
        raw=doc,
        seed=seed,
        space=space,
        partition=partition,
        family=family,
        u=u,
        w=w,
        exponents=exponents,
        codomain=codomain,
        analyses=list(analyses),
        oracle_overrides=oracle_overrides,
        strict_oracle=strict,
        sweep_levels=sweep_levels,
        u_rule_name=u_rule_name,
        u_rule_params=u_rule_params,
        audit_overrides=audit_overrides,
        matrix=matrix,
    )


def format_csv_value(x: Any) -> str:
    """RFC-4180 field: '.' decimal point, 17 significant digits for floats."""
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if np.isnan(x):
            return "nan"
        if np.isinf(x):
            return "inf" if x > 0 else "-inf"
        return format(x, ".17g")
    text = str(x)
    if any(c in text for c in ",\"\n"):
        return '"' + text.replace('"', '""') + '"'
    return text


def csv_line(values: list) -> str:
    return ",".join(format_csv_value(v) for v in values)
