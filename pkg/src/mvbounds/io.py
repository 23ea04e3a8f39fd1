"""JSON file formats: schemas, validation with JSON-pointer error paths, loaders and writers.

Formats
-------
learning record
    ``{"n", "layer_id", "generator_support": [labels], "fidelities": [{"pauli", "f_meas",
    "stderr"}], "degenerate_pairs": [[a, b]], "curves": [raw decay data]}``.  Either
    ``fidelities`` or ``curves`` must be present; ``curves`` entries hold ``pauli``,
    ``depths``, ``expectations``, ``shots``, ``randomizations`` and optionally ``counts``
    (one row of +1 outcome counts per depth).
model
    ``{"n", "layer_id", "terms": [{"pauli", "rate"}], "rate_covariance": [[...]]}`` with an
    optional covariance.
channel
    ``{"n", "fidelities": {label: value}}``; unlisted Paulis have fidelity 1.

Any of the three may instead be wrapped as ``{"layers": [...]}`` for multi-layer inputs.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any

import numpy as np
from jsonschema import Draft202012Validator

from .channels import PauliLindbladModel, PauliStochastishChannel
from .learning import DecayCurve, LearningRecord
from .pauli import MAX_QUBITS, PauliString

_LABEL = {"type": "string", "pattern": "^[IXYZ]+$"}
_N = {"type": "integer", "minimum": 1, "maximum": MAX_QUBITS}
_NUMBER_LIST = {"type": "array", "items": {"type": "number"}}

CURVE_SCHEMA = {
    "type": "object",
    "required": ["pauli", "depths", "expectations", "shots", "randomizations"],
    "properties": {
        "pauli": _LABEL,
        "depths": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 2},
        "expectations": {"type": "array", "items": {"type": "number", "minimum": -1, "maximum": 1}},
        "shots": {"type": "integer", "minimum": 0},
        "randomizations": {"type": "integer", "minimum": 0},
        "counts": {"type": "array", "items": {"type": "array", "items": {"type": "integer", "minimum": 0}}},
    },
    "additionalProperties": False,
}

RECORD_SCHEMA = {
    "type": "object",
    "required": ["n", "generator_support"],
    "anyOf": [{"required": ["fidelities"]}, {"required": ["curves"]}],
    "properties": {
        "n": _N,
        "layer_id": {"type": "string"},
        "generator_support": {"type": "array", "items": _LABEL},
        "fidelities": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["pauli", "f_meas"],
                "properties": {
                    "pauli": _LABEL,
                    "f_meas": {"type": "number"},
                    "stderr": {"type": "number", "minimum": 0},
                },
                "additionalProperties": False,
            },
        },
        "degenerate_pairs": {"type": "array", "items": {"type": "array", "items": _LABEL,
                                                        "minItems": 2, "maxItems": 2}},
        "curves": {"type": "array", "items": CURVE_SCHEMA},
    },
    "additionalProperties": False,
}

MODEL_SCHEMA = {
    "type": "object",
    "required": ["n", "terms"],
    "properties": {
        "n": _N,
        "layer_id": {"type": "string"},
        "terms": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["pauli", "rate"],
                "properties": {"pauli": _LABEL, "rate": {"type": "number", "minimum": 0}},
                "additionalProperties": False,
            },
        },
        "rate_covariance": {"type": "array", "items": _NUMBER_LIST},
    },
    "additionalProperties": False,
}

CHANNEL_SCHEMA = {
    "type": "object",
    "required": ["n", "fidelities"],
    "properties": {
        "n": _N,
        "fidelities": {"type": "object", "additionalProperties": {"type": "number"},
                       "propertyNames": _LABEL},
    },
    "additionalProperties": False,
}


def _layered(schema: dict) -> dict:
    return {"oneOf": [schema, {"type": "object", "required": ["layers"],
                               "properties": {"layers": {"type": "array", "items": schema, "minItems": 1}},
                               "additionalProperties": False}]}


class ValidationError(ValueError):
    """Input that does not satisfy a file format; ``errors`` holds ``(pointer, message)``."""

    def __init__(self, source: str, errors: list[tuple[str, str]]):
        self.source = source
        self.errors = errors
        lines = [f"{source}: {ptr or '/'}: {msg}" for ptr, msg in errors]
        super().__init__("\n".join(lines))


def json_pointer(path) -> str:
    parts = [str(p).replace("~", "~0").replace("/", "~1") for p in path]
    return "".join("/" + p for p in parts)


def _leaf_errors(error) -> list:
    # oneOf/anyOf failures are reported through the branch that got furthest
    if error.context:
        best = max(error.context, key=lambda e: len(e.absolute_path))
        return _leaf_errors(best)
    return [error]


def validate(data: Any, schema: dict, source: str = "<input>") -> None:
    validator = Draft202012Validator(schema)
    errors = []
    for err in sorted(validator.iter_errors(data), key=lambda e: (list(map(str, e.absolute_path)), e.message)):
        for leaf in _leaf_errors(err):
            errors.append((json_pointer(leaf.absolute_path), leaf.message))
    if errors:
        raise ValidationError(source, sorted(set(errors)))


def read_json(path: str | Path) -> Any:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValidationError(str(path), [("", f"invalid JSON: {exc.msg} at line {exc.lineno}")]) from None
    except OSError as exc:
        raise ValidationError(str(path), [("", f"cannot read file: {exc.strerror}")]) from None


def dumps(data: Any) -> str:
    """Canonical JSON text: sorted keys, two-space indent, trailing newline."""
    return json.dumps(data, indent=2, sort_keys=True, allow_nan=False) + "\n"


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def _layers_of(data: dict, source: str) -> list[tuple[dict, str]]:
    """Per-layer documents, each with an error source naming its position in the file."""
    if "layers" in data:
        return [(d, f"{source}#/layers/{i}") for i, d in enumerate(data["layers"])]
    return [(data, source)]


def _check_n(source: str, pointer: str, label: str, n: int):
    if len(label) != n:
        raise ValidationError(source, [(pointer, f"Pauli {label!r} does not act on {n} qubits")])


def record_from_json(data: dict, source: str = "<record>") -> LearningRecord:
    n = data["n"]
    for i, p in enumerate(data["generator_support"]):
        _check_n(source, f"/generator_support/{i}", p, n)
    fids = {}
    for i, entry in enumerate(data.get("fidelities", [])):
        _check_n(source, f"/fidelities/{i}/pauli", entry["pauli"], n)
        fids[PauliString.from_label(entry["pauli"])] = (entry["f_meas"], entry.get("stderr", 0.0))
    curves = None
    if "curves" in data:
        curves = []
        for i, c in enumerate(data["curves"]):
            _check_n(source, f"/curves/{i}/pauli", c["pauli"], n)
            try:
                curves.append(DecayCurve(PauliString.from_label(c["pauli"]), c["depths"], c["expectations"],
                                         c["shots"], c["randomizations"],
                                         np.array(c["counts"]) if "counts" in c else None))
            except ValueError as exc:
                raise ValidationError(source, [(f"/curves/{i}", str(exc))]) from None
    pairs = [tuple(map(PauliString.from_label, p)) for p in data.get("degenerate_pairs", [])]
    try:
        return LearningRecord(n, data.get("layer_id", "layer"), fids, pairs,
                              [PauliString.from_label(p) for p in data["generator_support"]], curves)
    except ValueError as exc:
        raise ValidationError(source, [("", str(exc))]) from None


def record_to_json(record: LearningRecord) -> dict:
    out = {
        "n": record.n,
        "layer_id": record.layer_id,
        "generator_support": [p.label for p in record.generator_support],
        "fidelities": [{"pauli": p.label, "f_meas": f, "stderr": s} for p, (f, s) in record.fidelities.items()],
    }
    if record.degenerate_pairs:
        out["degenerate_pairs"] = [[a.label, b.label] for a, b in record.degenerate_pairs]
    if record.curves:
        out["curves"] = [curve_to_json(c) for c in record.curves]
    return out


def curve_to_json(c: DecayCurve) -> dict:
    out = {"pauli": c.pauli.label, "depths": c.depths.tolist(), "expectations": c.expectations.tolist(),
           "shots": int(c.shots[0]), "randomizations": int(c.randomizations[0])}
    if c.counts is not None:
        out["counts"] = c.counts.tolist()
    return out


def load_records(path: str | Path) -> list[LearningRecord]:
    data = read_json(path)
    validate(data, _layered(RECORD_SCHEMA), str(path))
    return [record_from_json(d, src) for d, src in _layers_of(data, str(path))]


def model_from_json(data: dict, source: str = "<model>") -> tuple[PauliLindbladModel, np.ndarray | None]:
    n = data["n"]
    for i, t in enumerate(data["terms"]):
        _check_n(source, f"/terms/{i}/pauli", t["pauli"], n)
    try:
        model = PauliLindbladModel(n, tuple((PauliString.from_label(t["pauli"]), t["rate"]) for t in data["terms"]),
                                   data.get("layer_id", "layer"))
    except ValueError as exc:
        raise ValidationError(source, [("/terms", str(exc))]) from None
    cov = None
    if "rate_covariance" in data:
        cov = np.array(data["rate_covariance"], dtype=float)
        k = len(model.terms)
        if cov.shape != (k, k):
            raise ValidationError(source, [("/rate_covariance", f"expected a {k}x{k} matrix")])
    return model, cov


def model_to_json(model: PauliLindbladModel, cov: np.ndarray | None = None) -> dict:
    out = model.to_dict()
    if cov is not None:
        out["rate_covariance"] = np.asarray(cov).tolist()
    return out


def load_models(path: str | Path) -> list[tuple[PauliLindbladModel, np.ndarray | None]]:
    data = read_json(path)
    validate(data, _layered(MODEL_SCHEMA), str(path))
    return [model_from_json(d, src) for d, src in _layers_of(data, str(path))]


def load_channels(path: str | Path) -> list[PauliStochastishChannel]:
    data = read_json(path)
    validate(data, _layered(CHANNEL_SCHEMA), str(path))
    out = []
    for d, src in _layers_of(data, str(path)):
        for label in d["fidelities"]:
            _check_n(src, f"/fidelities/{label}", label, d["n"])
        try:
            out.append(PauliStochastishChannel.from_dict(d))
        except ValueError as exc:
            raise ValidationError(src, [("/fidelities", str(exc))]) from None
    return out
