"""JSON files for theories, circuits, rules, adaptive programs and oracles.

Theory::

    {"name": "...", "types": [{"label": "A", "dim": 2}],
     "gates": [{"name": "g", "inputs": ["A"], "outputs": [],
                "outcomes": [[row-major floats], ...]}]}

Circuit::

    {"theory": "builtin:qubits2" | "path/to/theory.json",
     "nodes": [{"id": "n1", "gate": "g"}],
     "wires": [{"from": ["n1", 0], "to": ["n2", 0]}]}

Relative theory paths resolve against the referring file's directory.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path

import jsonschema
import numpy as np

from .circuit import Circuit, Node, Wire
from .oracle import AdaptiveProgram, ClassicalOracle, program_from_json
from .rules import AcceptanceRule, RuleError
from .theory import Gate, SystemType, Theory, builtin, certify


class ParseError(ValueError):
    pass


_NAME = {"type": "string", "minLength": 1}
_ID = {"type": ["string", "integer"]}

THEORY_SCHEMA = {
    "type": "object",
    "required": ["types", "gates"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "types": {"type": "array", "items": {
            "type": "object", "required": ["label", "dim"], "additionalProperties": False,
            "properties": {"label": _NAME, "dim": {"type": "integer", "minimum": 1}}}},
        "gates": {"type": "array", "items": {
            "type": "object", "required": ["name", "outcomes"], "additionalProperties": False,
            "properties": {
                "name": _NAME,
                "inputs": {"type": "array", "items": _NAME},
                "outputs": {"type": "array", "items": _NAME},
                "outcomes": {"type": "array", "minItems": 1,
                             "items": {"type": "array", "minItems": 1,
                                       "items": {"type": "number"}}}}}},
    },
}

CIRCUIT_SCHEMA = {
    "type": "object",
    "required": ["theory", "nodes", "wires"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "theory": _NAME,
        "nodes": {"type": "array", "items": {
            "type": "object", "required": ["id", "gate"], "additionalProperties": False,
            "properties": {"id": _ID, "gate": _NAME}}},
        "wires": {"type": "array", "items": {
            "type": "object", "required": ["from", "to"], "additionalProperties": False,
            "properties": {
                "from": {"type": "array", "prefixItems": [_ID, {"type": "integer"}],
                         "minItems": 2, "maxItems": 2},
                "to": {"type": "array", "prefixItems": [_ID, {"type": "integer"}],
                       "minItems": 2, "maxItems": 2}}}},
    },
}

_WIRES = {"type": "array", "items": _NAME}
PROGRAM_SCHEMA = {
    "type": "object",
    "required": ["theory", "steps"],
    "additionalProperties": False,
    "properties": {
        "theory": _NAME,
        "accept": {"type": "object"},
        "steps": {"type": "array", "items": {"oneOf": [
            {"type": "object", "required": ["gate"], "additionalProperties": False,
             "properties": {"gate": {
                 "type": "object", "required": ["id", "name"], "additionalProperties": False,
                 "properties": {"id": _ID, "name": _NAME, "inputs": _WIRES,
                                "outputs": _WIRES}}}},
            {"type": "object", "required": ["query"], "additionalProperties": False,
             "properties": {"query": {
                 "type": "object", "required": ["id", "fn"], "additionalProperties": False,
                 "properties": {"id": _ID,
                                "fn": {"enum": ["concat", "parity", "select", "const"]},
                                "args": {"type": "array", "items": _ID},
                                "value": {"type": "string"}, "oracle": {"type": "string"}}}}},
            {"type": "object", "required": ["branch"], "additionalProperties": False,
             "properties": {"branch": {
                 "type": "object", "required": ["on", "cases"], "additionalProperties": False,
                 "properties": {"on": _ID,
                                "cases": {"type": "object",
                                          "additionalProperties": {"type": "integer"}},
                                "default": {"type": "integer"}}}}},
            {"type": "object", "required": ["halt"], "additionalProperties": False,
             "properties": {"halt": {"type": "object"}}},
        ]}},
    },
}

ORACLE_SCHEMA = {"oneOf": [
    {"type": "object", "required": ["table"], "additionalProperties": False,
     "properties": {"table": {"type": "object",
                              "additionalProperties": {"enum": [0, 1]}}}},
    {"type": "object", "required": ["named"], "additionalProperties": False,
     "properties": {"named": {"enum": list(ClassicalOracle.NAMED)},
                    "set": {"type": "array", "items": {"type": "string"}}}},
]}


def digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def read_json(path):
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as e:
        raise ParseError(f"{path}: cannot read: {e.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}:{e.lineno}:{e.colno}: {e.msg}") from None


def _validate(obj, schema, where: str):
    v = jsonschema.Draft202012Validator(schema)
    err = jsonschema.exceptions.best_match(v.iter_errors(obj))
    if err is not None:
        raise ParseError(f"{where}: at {err.json_path}: {err.message}")


def theory_from_json(obj, where: str = "<theory>") -> Theory:
    _validate(obj, THEORY_SCHEMA, where)
    types = [SystemType(t["label"], t["dim"]) for t in obj["types"]]
    dims = {t.label: t.dim for t in types}
    gates = []
    for k, g in enumerate(obj["gates"]):
        ins, outs = g.get("inputs", []), g.get("outputs", [])
        unknown = [lb for lb in ins + outs if lb not in dims]
        if unknown:
            raise ParseError(f"{where}: at $.gates[{k}]: undeclared types {unknown}")
        rows = int(np.prod([dims[lb] for lb in outs])) if outs else 1
        cols = int(np.prod([dims[lb] for lb in ins])) if ins else 1
        mats = []
        for r, flat in enumerate(g["outcomes"]):
            if len(flat) != rows * cols:
                raise ParseError(f"{where}: at $.gates[{k}].outcomes[{r}]: {len(flat)} entries, "
                                 f"expected {rows}x{cols} = {rows * cols}")
            mats.append(np.array(flat, dtype=float).reshape(rows, cols))
        gates.append(Gate(g["name"], ins, outs, mats))
    return certify(Theory(types, gates, obj.get("name", "theory")))


def theory_to_json(t: Theory) -> dict:
    return {"name": t.name,
            "types": [{"label": s.label, "dim": s.dim} for s in t.types],
            "gates": [{"name": g.name, "inputs": list(g.inputs), "outputs": list(g.outputs),
                       "outcomes": [m.ravel().tolist() for m in g.outcomes]} for g in t.gates]}


def load_theory(ref: str, base: Path | None = None) -> Theory:
    if ref.startswith("builtin:"):
        try:
            return builtin(ref)
        except KeyError as e:
            raise ParseError(str(e.args[0])) from None
    path = Path(ref)
    if base is not None and not path.is_absolute():
        path = base / path
    return theory_from_json(read_json(path), str(path))


def circuit_from_json(obj, where: str = "<circuit>", base: Path | None = None,
                      theory: Theory | None = None) -> Circuit:
    _validate(obj, CIRCUIT_SCHEMA, where)
    t = theory or load_theory(obj["theory"], base)
    nodes = [Node(str(n["id"]), n["gate"]) for n in obj["nodes"]]
    wires = [Wire((str(w["from"][0]), w["from"][1]), (str(w["to"][0]), w["to"][1]))
             for w in obj["wires"]]
    return Circuit(t, nodes, wires, obj.get("name"))


def circuit_to_json(c: Circuit, theory_ref: str) -> dict:
    return {"theory": theory_ref,
            "nodes": [{"id": n.id, "gate": n.gate} for n in c.nodes],
            "wires": [{"from": list(w.src), "to": list(w.dst)} for w in c.wires]}


def load_circuit(path) -> Circuit:
    path = Path(path)
    return circuit_from_json(read_json(path), str(path), path.parent)


def rule_from_json(obj, where: str = "<rule>") -> AcceptanceRule:
    try:
        return AcceptanceRule.from_json(obj)
    except (RuleError, KeyError, TypeError, ValueError) as e:
        raise ParseError(f"{where}: {e}") from None


def load_rule(ref: str) -> AcceptanceRule:
    """A rule from a file path, or inline JSON if ``ref`` starts with ``{``."""
    if ref.lstrip().startswith("{"):
        try:
            obj = json.loads(ref)
        except json.JSONDecodeError as e:
            raise ParseError(f"<inline rule>:{e.lineno}:{e.colno}: {e.msg}") from None
        return rule_from_json(obj, "<inline rule>")
    return rule_from_json(read_json(ref), ref)


def load_program(path) -> AdaptiveProgram:
    path = Path(path)
    obj = read_json(path)
    _validate(obj, PROGRAM_SCHEMA, str(path))
    t = load_theory(obj["theory"], path.parent)
    try:
        return program_from_json(obj, t)
    except (RuleError, ValueError) as e:
        raise ParseError(f"{path}: {e}") from None


def load_oracle(path) -> ClassicalOracle:
    obj = read_json(path)
    _validate(obj, ORACLE_SCHEMA, str(path))
    return ClassicalOracle.from_json(obj)
