"""Instance file schema (load/save) for protocols, targets, distributions,
and AM branch families.

Files are strict JSON: schema-tagged, unknown fields rejected, and saving is
byte-deterministic (sorted keys, floats printed with 17 significant digits,
which round-trips binary64 exactly).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .core import Box, Cover, DomainShape, Protocol, TranscriptSelector, validate_cover
from .errors import SchemaError
from .functions import (
    AMProtocol,
    ColoredFunction,
    ErrorProtocol,
    Relation,
    approx_xor_relation,
    constant_function,
    eq_function,
    matvec_function,
    random_function,
    relation_from_table,
    xor_function,
)
from .info import JointDistribution

INSTANCE_SCHEMA = "commlab-instance-v1"
AM_SCHEMA = "commlab-am-v1"


@dataclass
class InstanceBundle:
    """Runtime form of one instance file."""

    protocol: Protocol
    function: ColoredFunction | None = None
    relation: Relation | None = None
    distribution: JointDistribution | None = None
    error: ErrorProtocol | None = None

    @property
    def shape(self) -> DomainShape:
        return self.protocol.shape


@dataclass
class AMBundle:
    am: AMProtocol
    function: ColoredFunction | None = None
    relation: Relation | None = None

    @property
    def target(self):
        return self.function if self.function is not None else self.relation


# ---------------------------------------------------------------------------
# Canonical JSON


def _format_float(x: float) -> str:
    if not math.isfinite(x):
        raise SchemaError("cannot serialize non-finite float")
    return format(float(x), ".17g")


def canonical_json(value, indent: int = 0) -> str:
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [
            f"{inner}{json.dumps(str(k))}: {canonical_json(v, indent + 1)}"
            for k, v in sorted(value.items())
        ]
        return "{\n" + ",\n".join(items) + f"\n{pad}}}"
    if isinstance(value, (list, tuple)):
        if not value:
            return "[]"
        parts = [canonical_json(v, indent + 1) for v in value]
        if all(not isinstance(v, (dict, list, tuple)) for v in value) and sum(
            len(p) for p in parts
        ) < 100:
            return "[" + ", ".join(parts) + "]"
        return "[\n" + ",\n".join(inner + p for p in parts) + f"\n{pad}]"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return _format_float(float(value))
    if isinstance(value, str):
        return json.dumps(value)
    if value is None:
        return "null"
    raise SchemaError(f"cannot serialize value of type {type(value)!r}")


def _require_keys(obj: dict, required: set, optional: set, where: str) -> None:
    keys = set(obj)
    missing = required - keys
    if missing:
        raise SchemaError(f"{where}: missing fields {sorted(missing)}")
    unknown = keys - required - optional
    if unknown:
        raise SchemaError(f"{where}: unknown fields {sorted(unknown)}")


def _as_int(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise SchemaError(f"{where}: expected an exact integer, got {value!r}")
    return value


# ---------------------------------------------------------------------------
# Object <-> schema dicts


def _selector_to_obj(sel: TranscriptSelector) -> dict:
    if sel.kind == "min-index":
        return {"kind": "min-index"}
    if sel.kind == "seeded-random":
        return {"kind": "seeded-random", "seed": sel.seed}
    return {"kind": "explicit", "table": list(sel.table)}


def _selector_from_obj(obj: dict, where: str) -> TranscriptSelector:
    if not isinstance(obj, dict) or "kind" not in obj:
        raise SchemaError(f"{where}: selector needs a kind")
    kind = obj["kind"]
    if kind == "min-index":
        _require_keys(obj, {"kind"}, set(), where)
        return TranscriptSelector.min_index()
    if kind == "seeded-random":
        _require_keys(obj, {"kind", "seed"}, set(), where)
        return TranscriptSelector.seeded(_as_int(obj["seed"], where))
    if kind == "explicit":
        _require_keys(obj, {"kind", "table"}, set(), where)
        return TranscriptSelector.explicit(
            [_as_int(t, where) for t in obj["table"]]
        )
    raise SchemaError(f"{where}: unknown selector kind {kind!r}")


def _function_to_obj(fn: ColoredFunction) -> dict:
    return {"kind": "explicit", "colors": fn.flat().tolist()}


def _function_from_obj(obj: dict, shape: DomainShape, where: str) -> ColoredFunction:
    if not isinstance(obj, dict) or "kind" not in obj:
        raise SchemaError(f"{where}: function needs a kind")
    kind = obj["kind"]
    if kind == "explicit":
        _require_keys(obj, {"kind", "colors"}, set(), where)
        colors = np.array([_as_int(c, where) for c in obj["colors"]], dtype=np.int64)
        if colors.size != shape.num_cells:
            raise SchemaError(f"{where}: color table length does not match sizes")
        return ColoredFunction(shape, colors.reshape(shape.sizes))
    if kind == "xor":
        _require_keys(obj, {"kind", "n"}, set(), where)
        fn = xor_function(_as_int(obj["n"], where))
    elif kind == "eq":
        _require_keys(obj, {"kind", "n"}, set(), where)
        fn = eq_function(_as_int(obj["n"], where))
    elif kind == "matvec":
        _require_keys(obj, {"kind", "arity", "n"}, set(), where)
        fn = matvec_function(_as_int(obj["arity"], where), _as_int(obj["n"], where))
    elif kind == "constant":
        _require_keys(obj, {"kind"}, set(), where)
        fn = constant_function(shape)
    elif kind == "random":
        _require_keys(obj, {"kind", "num_colors", "seed"}, set(), where)
        fn = random_function(
            shape, _as_int(obj["num_colors"], where), _as_int(obj["seed"], where)
        )
    else:
        raise SchemaError(f"{where}: unknown function kind {kind!r}")
    if fn.shape.sizes != shape.sizes:
        raise SchemaError(f"{where}: function domain {fn.shape.sizes} does not match sizes")
    return fn


def _relation_to_obj(rel: Relation) -> dict:
    return {
        "kind": "explicit",
        "num_colors": rel.num_colors,
        "admissible": [list(rel.admissible_ids(rel.shape.cell_of_linear(i)))
                       for i in range(rel.shape.num_cells)],
    }


def _relation_from_obj(obj: dict, shape: DomainShape, where: str) -> Relation:
    if not isinstance(obj, dict) or "kind" not in obj:
        raise SchemaError(f"{where}: relation needs a kind")
    kind = obj["kind"]
    if kind == "approx-xor":
        _require_keys(obj, {"kind", "n", "delta"}, set(), where)
        rel = approx_xor_relation(_as_int(obj["n"], where), float(obj["delta"]))
        if rel.shape.sizes != shape.sizes:
            raise SchemaError(f"{where}: relation domain does not match sizes")
        return rel
    if kind == "explicit":
        _require_keys(obj, {"kind", "num_colors", "admissible"}, set(), where)
        lists = obj["admissible"]
        if len(lists) != shape.num_cells:
            raise SchemaError(f"{where}: admissible table length does not match sizes")
        return relation_from_table(
            shape,
            [[_as_int(z, where) for z in ids] for ids in lists],
            _as_int(obj["num_colors"], where),
        )
    raise SchemaError(f"{where}: unknown relation kind {kind!r}")


def _distribution_to_obj(dist: JointDistribution) -> dict:
    return {"kind": "explicit", "p": dist.p.tolist()}


def _distribution_from_obj(obj: dict, shape: DomainShape, where: str) -> JointDistribution:
    if not isinstance(obj, dict) or "kind" not in obj:
        raise SchemaError(f"{where}: distribution needs a kind")
    kind = obj["kind"]
    if kind == "uniform":
        _require_keys(obj, {"kind"}, set(), where)
        return JointDistribution.uniform(shape)
    if kind == "explicit":
        _require_keys(obj, {"kind", "p"}, set(), where)
        p = np.asarray([float(v) for v in obj["p"]], dtype=np.float64)
        if p.size != shape.num_cells:
            raise SchemaError(f"{where}: probability table length does not match sizes")
        return JointDistribution(shape, p)
    raise SchemaError(f"{where}: unknown distribution kind {kind!r}")


def _instance_body(bundle: InstanceBundle) -> dict:
    protocol = bundle.protocol
    shape = protocol.shape
    obj: dict = {
        "arity": shape.arity,
        "sizes": list(shape.sizes),
        "rectangles": [[list(f) for f in b.factors()] for b in protocol.cover.boxes],
        "selector": _selector_to_obj(protocol.selector),
    }
    if bundle.function is not None:
        obj["function"] = _function_to_obj(bundle.function)
    if bundle.relation is not None:
        obj["relation"] = _relation_to_obj(bundle.relation)
    if bundle.distribution is not None:
        obj["distribution"] = _distribution_to_obj(bundle.distribution)
    if bundle.error is not None:
        obj["g_a"] = bundle.error.g_a.tolist()
        obj["g_b"] = bundle.error.g_b.tolist()
    return obj


_BODY_REQUIRED = {"arity", "sizes", "rectangles", "selector"}
_BODY_OPTIONAL = {"function", "relation", "distribution", "g_a", "g_b"}


def _instance_from_body(obj: dict, where: str) -> InstanceBundle:
    _require_keys(obj, _BODY_REQUIRED, _BODY_OPTIONAL, where)
    arity = _as_int(obj["arity"], where)
    sizes = tuple(_as_int(s, f"{where}.sizes") for s in obj["sizes"])
    if len(sizes) != arity:
        raise SchemaError(f"{where}: arity {arity} does not match sizes {sizes}")
    shape = DomainShape(sizes)
    boxes = []
    for k, factors in enumerate(obj["rectangles"]):
        if len(factors) != arity:
            raise SchemaError(f"{where}.rectangles[{k}]: wrong number of factors")
        boxes.append(
            Box.from_factors(
                [[_as_int(i, f"{where}.rectangles[{k}]") for i in f] for f in factors],
                shape,
            )
        )
    cover = Cover(shape, tuple(boxes))
    report = validate_cover(cover)
    if not report.covers_domain:
        raise SchemaError(
            f"{where}: boxes do not cover the domain, first uncovered cell "
            f"{report.uncovered[0]}"
        )
    selector = _selector_from_obj(obj["selector"], f"{where}.selector")
    protocol = Protocol(cover, selector)

    function = relation = distribution = error = None
    if "function" in obj:
        function = _function_from_obj(obj["function"], shape, f"{where}.function")
    if "relation" in obj:
        relation = _relation_from_obj(obj["relation"], shape, f"{where}.relation")
    if "distribution" in obj:
        distribution = _distribution_from_obj(
            obj["distribution"], shape, f"{where}.distribution"
        )
    if ("g_a" in obj) != ("g_b" in obj):
        raise SchemaError(f"{where}: g_a and g_b must be given together")
    if "g_a" in obj:
        g_a = np.array(
            [[_as_int(v, f"{where}.g_a") for v in row] for row in obj["g_a"]],
            dtype=np.int64,
        )
        g_b = np.array(
            [[_as_int(v, f"{where}.g_b") for v in row] for row in obj["g_b"]],
            dtype=np.int64,
        )
        error = ErrorProtocol(protocol, g_a, g_b)
    return InstanceBundle(
        protocol=protocol,
        function=function,
        relation=relation,
        distribution=distribution,
        error=error,
    )


def instance_to_text(bundle: InstanceBundle) -> str:
    obj = {"schema": INSTANCE_SCHEMA}
    obj.update(_instance_body(bundle))
    return canonical_json(obj) + "\n"


def instance_from_text(text: str, where: str = "instance") -> InstanceBundle:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{where}: not valid JSON ({exc})") from exc
    if not isinstance(obj, dict) or obj.get("schema") != INSTANCE_SCHEMA:
        raise SchemaError(f"{where}: expected schema tag {INSTANCE_SCHEMA!r}")
    body = {k: v for k, v in obj.items() if k != "schema"}
    return _instance_from_body(body, where)


def save_instance(bundle: InstanceBundle, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(instance_to_text(bundle))


def load_instance(path: str) -> InstanceBundle:
    with open(path, "r", encoding="utf-8") as fh:
        return instance_from_text(fh.read(), where=str(path))


def am_to_text(bundle: AMBundle) -> str:
    obj: dict = {"schema": AM_SCHEMA, "branches": []}
    if bundle.function is not None:
        obj["function"] = _function_to_obj(bundle.function)
    if bundle.relation is not None:
        obj["relation"] = _relation_to_obj(bundle.relation)
    for branch in bundle.am.branches:
        body = _instance_body(
            InstanceBundle(protocol=branch.protocol, error=branch)
        )
        obj["branches"].append(body)
    return canonical_json(obj) + "\n"


def am_from_text(text: str, where: str = "am") -> AMBundle:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{where}: not valid JSON ({exc})") from exc
    if not isinstance(obj, dict) or obj.get("schema") != AM_SCHEMA:
        raise SchemaError(f"{where}: expected schema tag {AM_SCHEMA!r}")
    _require_keys(obj, {"schema", "branches"}, {"function", "relation"}, where)
    if not obj["branches"]:
        raise SchemaError(f"{where}: AM file needs at least one branch")
    branches = []
    shape = None
    for k, body in enumerate(obj["branches"]):
        inner = _instance_from_body(body, f"{where}.branches[{k}]")
        if inner.error is None:
            raise SchemaError(f"{where}.branches[{k}]: branch needs g_a and g_b tables")
        if shape is None:
            shape = inner.shape
        branches.append(inner.error)
    function = relation = None
    if "function" in obj:
        function = _function_from_obj(obj["function"], shape, f"{where}.function")
    if "relation" in obj:
        relation = _relation_from_obj(obj["relation"], shape, f"{where}.relation")
    return AMBundle(am=AMProtocol(tuple(branches)), function=function, relation=relation)


def save_am(bundle: AMBundle, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(am_to_text(bundle))


def load_am(path: str) -> AMBundle:
    with open(path, "r", encoding="utf-8") as fh:
        return am_from_text(fh.read(), where=str(path))
