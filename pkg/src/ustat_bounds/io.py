"""JSON files for instances and empirical classes.

Instance document::

    {"m": 2, "n": 3, "mode": "decoupled", "flags": [...], "name": "...",
     "variables": [[{"atoms": [...], "probs": [...]}, ...], ...],   # variables[j][i]
     "kernels": [{"index": [1, 2], "table": [[...], ...]}, ...]}     # 1-based indices

Empirical-class document::

    {"kind": "class", "variables": [{"atoms": [...], "probs": [...]}, ...],
     "functions": [[[...], ...], ...]}                                # functions[f][i]
"""
from __future__ import annotations

import json

import numpy as np

from .model import (FLAGS, MODES, DiscreteDistribution, EmpiricalClass, InvalidInstance,
                    UStatInstance, make_instance)


class SchemaError(ValueError):
    """Malformed document; ``path`` locates the offending field."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


def _require(doc: dict, key: str, path: str):
    if not isinstance(doc, dict):
        raise SchemaError(path, "expected an object")
    if key not in doc:
        raise SchemaError(f"{path}.{key}" if path else key, "missing field")
    return doc[key]


def _int(value, path: str, low: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < low:
        raise SchemaError(path, f"expected an integer >= {low}")
    return value


def _numbers(value, path: str) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise SchemaError(path, "expected numbers") from None
    if arr.dtype == object:
        raise SchemaError(path, "ragged array")
    return arr


def _law(doc, path: str) -> DiscreteDistribution:
    atoms = _numbers(_require(doc, "atoms", path), f"{path}.atoms")
    probs = _numbers(_require(doc, "probs", path), f"{path}.probs")
    if atoms.ndim != 1 or probs.ndim != 1:
        raise SchemaError(path, "atoms and probs must be flat lists")
    if atoms.size != probs.size:
        raise SchemaError(path, f"{atoms.size} atoms but {probs.size} probs")
    law = DiscreteDistribution(atoms, probs)
    problems = law.validate(path)
    if problems:
        where, message = problems[0].split(": ", 1)
        raise SchemaError(where, message)
    if probs.size != law.probs.size:
        raise SchemaError(f"{path}.probs", "zero-mass atoms are not allowed")
    return law


def _law_dict(law: DiscreteDistribution) -> dict:
    return {"atoms": law.atoms.tolist(), "probs": law.probs.tolist()}


def instance_from_dict(doc: dict) -> UStatInstance:
    m = _int(_require(doc, "m", ""), "m")
    n = _int(_require(doc, "n", ""), "n")
    mode = _require(doc, "mode", "")
    if mode not in MODES:
        raise SchemaError("mode", f"expected one of {list(MODES)}")
    flags = doc.get("flags", [])
    if not isinstance(flags, list) or any(f not in FLAGS for f in flags):
        raise SchemaError("flags", f"expected a list drawn from {list(FLAGS)}")
    variables = _require(doc, "variables", "")
    if not isinstance(variables, list) or len(variables) != m:
        raise SchemaError("variables", f"expected {m} rows")
    laws = []
    for j, row in enumerate(variables):
        if not isinstance(row, list) or len(row) != n:
            raise SchemaError(f"variables[{j}]", f"expected {n} entries")
        laws.append([_law(entry, f"variables[{j}][{i}]") for i, entry in enumerate(row)])
    kernels = _require(doc, "kernels", "")
    if not isinstance(kernels, list):
        raise SchemaError("kernels", "expected a list")
    tables = {}
    for k, entry in enumerate(kernels):
        path = f"kernels[{k}]"
        index = _require(entry, "index", path)
        if not isinstance(index, list) or len(index) != m:
            raise SchemaError(f"{path}.index", f"expected {m} indices")
        idx = tuple(_int(a, f"{path}.index", 1) - 1 for a in index)
        if any(a >= n for a in idx):
            raise SchemaError(f"{path}.index", f"index out of range 1..{n}")
        if idx in tables:
            raise SchemaError(f"{path}.index", f"duplicate kernel index {tuple(index)}")
        table = _numbers(_require(entry, "table", path), f"{path}.table")
        want = tuple(len(laws[j][i]) for j, i in enumerate(idx))
        if table.shape != want:
            raise SchemaError(f"{path}.table", f"shape {table.shape} != atom counts {want}")
        tables[idx] = table
    try:
        return make_instance(laws, tables, mode=mode, flags=flags, name=doc.get("name", ""))
    except InvalidInstance:
        raise
    except (ValueError, IndexError, StopIteration) as exc:
        raise SchemaError("kernels", str(exc)) from None


def instance_to_dict(inst: UStatInstance) -> dict:
    return {
        "m": inst.m, "n": inst.n, "mode": inst.mode,
        "flags": sorted(inst.flags), "name": inst.name,
        "variables": [[_law_dict(law) for law in row] for row in inst.grid.laws],
        "kernels": [{"index": [a + 1 for a in idx], "table": inst.table(idx).tolist()}
                    for idx in inst.indices()],
    }


def class_from_dict(doc: dict) -> EmpiricalClass:
    variables = _require(doc, "variables", "")
    if not isinstance(variables, list) or not variables:
        raise SchemaError("variables", "expected a non-empty list")
    laws = [_law(v, f"variables[{i}]") for i, v in enumerate(variables)]
    functions = _require(doc, "functions", "")
    if not isinstance(functions, list) or not functions:
        raise SchemaError("functions", "expected a non-empty list")
    funcs = []
    for a, f in enumerate(functions):
        if not isinstance(f, list) or len(f) != len(laws):
            raise SchemaError(f"functions[{a}]", f"expected {len(laws)} tables")
        cols = []
        for i, col in enumerate(f):
            arr = _numbers(col, f"functions[{a}][{i}]")
            if arr.shape != laws[i].atoms.shape:
                raise SchemaError(f"functions[{a}][{i}]", f"expected {len(laws[i])} values")
            cols.append(arr)
        funcs.append(cols)
    cls = EmpiricalClass(laws, funcs, name=doc.get("name", ""))
    problems = cls.validate()
    if problems:
        raise InvalidInstance(problems)
    return cls


def class_to_dict(cls: EmpiricalClass) -> dict:
    return {"kind": "class", "name": cls.name,
            "variables": [_law_dict(v) for v in cls.variables],
            "functions": [[col.tolist() for col in f] for f in cls.functions]}


def from_dict(doc: dict):
    if isinstance(doc, dict) and (doc.get("kind") == "class" or "functions" in doc):
        return class_from_dict(doc)
    return instance_from_dict(doc)


def to_dict(subject) -> dict:
    if isinstance(subject, EmpiricalClass):
        return class_to_dict(subject)
    return instance_to_dict(subject)


def dumps(subject) -> str:
    return json.dumps(to_dict(subject), indent=1, allow_nan=False)


def loads(text: str):
    try:
        doc = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise SchemaError("", f"not valid JSON ({exc})") from None
    return from_dict(doc)


def _reject_constant(name):
    raise SchemaError("", f"non-finite number {name}")


def read(path):
    with open(path) as fh:
        return loads(fh.read())


def write(subject, path):
    with open(path, "w") as fh:
        fh.write(dumps(subject) + "\n")


def parse_instance_file(path) -> UStatInstance:
    subject = read(path)
    if not isinstance(subject, UStatInstance):
        raise SchemaError("kind", "expected an instance document, found an empirical class")
    return subject


__all__ = ["SchemaError", "instance_from_dict", "instance_to_dict", "class_from_dict",
           "class_to_dict", "from_dict", "to_dict", "dumps", "loads", "read", "write",
           "parse_instance_file"]
