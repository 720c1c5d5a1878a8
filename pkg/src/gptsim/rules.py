"""Acceptance rules: predicates over outcome strings.

A rule is *satisfied* by the outcome strings it accepts. (The underlying
convention that a computation accepts when ``a(z) = 0`` is just a polarity
flip; rules carry the accepting side directly.)

JSON forms::

    {"all": true} | {"none": true}
    {"bit": {"node": "m1", "value": 0}}
    {"subset": [[0, 1], [1, 0]]}
    {"expr": <formula>}

where a formula is ``true``/``false``, ``{"eq": [node, value]}``,
``{"same": [node, node]}``, ``{"not": f}``, ``{"and": [f, ...]}`` or
``{"or": [f, ...]}``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Mapping, Sequence


class RuleError(ValueError):
    pass


@dataclass(frozen=True)
class AcceptanceRule:
    kind: str  # "expr" | "subset"
    formula: Any = True
    strings: frozenset = frozenset()

    @classmethod
    def always(cls) -> AcceptanceRule:
        return cls("expr", True)

    @classmethod
    def never(cls) -> AcceptanceRule:
        return cls("expr", False)

    @classmethod
    def bit(cls, node: str, value: int = 0) -> AcceptanceRule:
        return cls.expr({"eq": [node, int(value)]})

    @classmethod
    def subset(cls, strings) -> AcceptanceRule:
        return cls("subset", strings=frozenset(tuple(int(r) for r in s) for s in strings))

    @classmethod
    def expr(cls, formula) -> AcceptanceRule:
        _check_formula(formula, "$")
        return cls("expr", _freeze(formula))

    @classmethod
    def from_json(cls, obj) -> AcceptanceRule:
        if not isinstance(obj, dict) or len(obj) != 1:
            raise RuleError("a rule is an object with exactly one key")
        (key, val), = obj.items()
        if key == "all":
            return cls.always()
        if key == "none":
            return cls.never()
        if key == "bit":
            return cls.bit(str(val["node"]), int(val.get("value", 0)))
        if key == "subset":
            return cls.subset(val)
        if key == "expr":
            return cls.expr(val)
        raise RuleError(f"unknown rule kind {key!r}")

    def to_json(self):
        if self.kind == "subset":
            return {"subset": [list(s) for s in sorted(self.strings)]}
        return {"expr": _thaw(self.formula)}

    def accepts(self, z: Sequence[int], names: Sequence[str]) -> bool:
        """Evaluate on an outcome string whose positions are labelled by ``names``."""
        if self.kind == "subset":
            return tuple(z) in self.strings
        return self.holds(dict(zip(names, z)))

    def holds(self, values: Mapping[str, int]) -> bool:
        """Evaluate an expression rule on named values."""
        if self.kind == "subset":
            raise RuleError("subset rules need a positional outcome string")
        return _eval(self.formula, values)

    def referenced(self) -> set[str]:
        return _names(self.formula) if self.kind == "expr" else set()


def _freeze(f):
    if isinstance(f, dict):
        return tuple(sorted((k, _freeze(v)) for k, v in f.items()))
    if isinstance(f, list):
        return tuple(_freeze(v) for v in f)
    return f


def _thaw(f):
    if isinstance(f, tuple) and f and isinstance(f[0], tuple) and len(f) == 1 \
            and isinstance(f[0][0], str) and f[0][0] in _OPS:
        k, v = f[0]
        return {k: _thaw(v)}
    if isinstance(f, tuple):
        return [_thaw(v) for v in f]
    return f


_OPS = {"eq", "same", "not", "and", "or"}


def _check_formula(f, path):
    if isinstance(f, bool):
        return
    if not isinstance(f, dict) or len(f) != 1:
        raise RuleError(f"{path}: expected true, false or a one-key operator object")
    (op, arg), = f.items()
    if op not in _OPS:
        raise RuleError(f"{path}: unknown operator {op!r}")
    if op in ("eq", "same"):
        if not (isinstance(arg, list) and len(arg) == 2):
            raise RuleError(f"{path}.{op}: expected a pair")
    elif op == "not":
        _check_formula(arg, f"{path}.not")
    else:
        if not isinstance(arg, list):
            raise RuleError(f"{path}.{op}: expected a list")
        for i, sub in enumerate(arg):
            _check_formula(sub, f"{path}.{op}[{i}]")


def _lookup(values, name):
    try:
        return values[str(name)]
    except KeyError:
        raise RuleError(f"rule refers to unknown name {name!r}") from None


def _eval(f, values) -> bool:
    if isinstance(f, bool):
        return f
    (op, arg), = f
    if op == "eq":
        return _lookup(values, arg[0]) == int(arg[1])
    if op == "same":
        return _lookup(values, arg[0]) == _lookup(values, arg[1])
    if op == "not":
        return not _eval(arg, values)
    if op == "and":
        return all(_eval(s, values) for s in arg)
    return any(_eval(s, values) for s in arg)


def _names(f) -> set[str]:
    if isinstance(f, bool):
        return set()
    (op, arg), = f
    if op == "eq":
        return {str(arg[0])}
    if op == "same":
        return {str(arg[0]), str(arg[1])}
    if op == "not":
        return _names(arg)
    return set().union(*(_names(s) for s in arg)) if arg else set()
