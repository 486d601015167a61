# -*- coding: utf-8 -*-
# chuk_metastable/formats.py
"""
Reading and writing chain, measure, flow and report files.

Chain files are JSON, TOML or YAML documents of the form::

    {"states": ["a", "b"],
     "edges": [{"from": "a", "to": "b", "coeff": 1.0, "exponent": 0}]}

A fixed chain is a family whose exponents are all 0; ``"rate"`` is
accepted in place of ``"coeff"``. Exponents are integers or ``"p/q"``
strings. Measures are a state → weight mapping or a list aligned with
the declared states; flows are lists of ``{"from", "to", "value"}``
records. Infinite values are written as the string ``"inf"``.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Union

import numpy as np
import yaml
from pydantic import BaseModel, ValidationError

from .chain_core import instantiate
from .exceptions import ChainValidationError
from .models import ChainSpec, Flow, ParamChainSpec, ProbabilityVector, SignedMeasure
from .types import INF_TOKEN, FileFormat

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

_SUFFIXES = {
    ".json": FileFormat.JSON,
    ".toml": FileFormat.TOML,
    ".yaml": FileFormat.YAML,
    ".yml": FileFormat.YAML,
}


# ─────────────────────────────────────────────────────────────────────
# Documents
# ─────────────────────────────────────────────────────────────────────


def detect_format(path: PathLike) -> FileFormat:
    fmt = _SUFFIXES.get(Path(path).suffix.lower())
    if fmt is None:
        raise ChainValidationError(f"unsupported file type {Path(path).suffix!r} for {path}")
    return fmt


def read_document(path: PathLike) -> Any:
    """
    Parse a JSON, TOML or YAML file.

    Raises:
        ChainValidationError: unreadable file or malformed document
    """
    p = Path(path)
    fmt = detect_format(p)
    try:
        if fmt == FileFormat.TOML:
            with p.open("rb") as fh:
                return tomllib.load(fh)
        text = p.read_text(encoding="utf-8")
        if fmt == FileFormat.JSON:
            return json.loads(text)
        return yaml.safe_load(text)
    except OSError as e:
        raise ChainValidationError(f"cannot read {p}: {e}") from e
    except (json.JSONDecodeError, tomllib.TOMLDecodeError, yaml.YAMLError) as e:
        raise ChainValidationError(f"malformed {fmt.value} document {p}: {e}") from e


def parse_value(value: Any) -> float:
    """A finite float or the ``"inf"`` sentinel."""
    if isinstance(value, str) and value.strip().lower() in (INF_TOKEN, "+inf", "infinity"):
        return math.inf
    try:
        return float(value)
    except (TypeError, ValueError) as e:
        raise ChainValidationError(f"not a number: {value!r}") from e


def to_jsonable(value: Any) -> Any:
    """Replace ±inf with the ``"inf"`` sentinel and unwrap models and arrays."""
    if value is None or isinstance(value, (bool, int, str)):
        return value
    if isinstance(value, BaseModel):
        return to_jsonable(value.model_dump(mode="python", by_alias=True))
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (np.floating, np.integer)):
        return to_jsonable(value.item())
    if isinstance(value, float):
        if math.isinf(value):
            return INF_TOKEN if value > 0 else "-" + INF_TOKEN
        return value
    if isinstance(value, Mapping):
        return {_key(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, Fraction):
        return value.numerator if value.denominator == 1 else f"{value.numerator}/{value.denominator}"
    return value


def _key(k: Any) -> str:
    if isinstance(k, tuple):
        return "->".join(str(part) for part in k)
    return str(k)


def dumps(document: Any) -> str:
    """JSON text; floats keep their shortest round-trip repr."""
    return json.dumps(to_jsonable(document), indent=2, ensure_ascii=False)


def write_text(text: str, path: Optional[PathLike]) -> None:
    """Write to ``path``, or to stdout when ``path`` is None."""
    if path is None:
        print(text)
        return
    Path(path).write_text(text + ("" if text.endswith("\n") else "\n"), encoding="utf-8")
    logger.info("Wrote artifact", extra={"path": str(path)})


def csv_text(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_csv_cell(v) for v in row])
    return buffer.getvalue()


def _csv_cell(value: Any) -> Any:
    if isinstance(value, float):
        if math.isinf(value):
            return INF_TOKEN if value > 0 else "-" + INF_TOKEN
        return repr(value)
    return value


# ─────────────────────────────────────────────────────────────────────
# Chains
# ─────────────────────────────────────────────────────────────────────


def family_from_document(document: Any) -> ParamChainSpec:
    """
    Build a family from a parsed chain document.

    Raises:
        ChainValidationError: missing fields, bad rates or exponents
    """
    if not isinstance(document, Mapping):
        raise ChainValidationError("chain document must be a mapping with states and edges")
    edges = []
    for raw in document.get("edges", []) or []:
        if not isinstance(raw, Mapping):
            raise ChainValidationError(f"edge entry must be a mapping, got {raw!r}")
        edge = dict(raw)
        if "coeff" not in edge and "rate" in edge:
            edge["coeff"] = edge.pop("rate")
        edge.setdefault("exponent", 0)
        if "from" in edge:
            edge["from"] = str(edge["from"])
        if "to" in edge:
            edge["to"] = str(edge["to"])
        edges.append(edge)
    states = [str(s) for s in document.get("states", []) or []]
    try:
        return ParamChainSpec(states=states, edges=edges)
    except ValidationError as e:
        raise ChainValidationError(f"invalid chain specification: {e}") from e


def chain_from_family(family: ParamChainSpec, n: Optional[float] = None) -> ChainSpec:
    """The fixed chain of a family: its coefficients, or its instance at ``n``."""
    if n is not None:
        return instantiate(family, n)
    scaled = [e for e in family.edges if e.exponent != 0]
    if scaled:
        raise ChainValidationError(
            f"{len(scaled)} edges depend on n; pass a scale parameter to instantiate the family"
        )
    return ChainSpec.from_rates(family.states, {(e.source, e.target): e.coeff for e in family.edges})


def load_family(path: PathLike) -> ParamChainSpec:
    return family_from_document(read_document(path))


def load_chain(path: PathLike, n: Optional[float] = None) -> ChainSpec:
    return chain_from_family(load_family(path), n)


def family_to_document(family: Union[ParamChainSpec, ChainSpec]) -> Dict[str, Any]:
    if isinstance(family, ChainSpec):
        edges = [
            {"from": e.source, "to": e.target, "coeff": e.rate, "exponent": 0}
            for e in family.edges
        ]
    else:
        edges = [e.model_dump(mode="python", by_alias=True) for e in family.edges]
    return {"states": list(family.states), "edges": to_jsonable(edges)}


# ─────────────────────────────────────────────────────────────────────
# Measures, directions and flows
# ─────────────────────────────────────────────────────────────────────


def _weights(document: Any, states: Sequence[str], what: str) -> List[float]:
    if isinstance(document, Mapping) and "weights" in document:
        document = document["weights"]
    if isinstance(document, Mapping):
        unknown = [k for k in document if str(k) not in states]
        if unknown:
            raise ChainValidationError(f"{what} names undeclared states {unknown}")
        lookup = {str(k): v for k, v in document.items()}
        return [parse_value(lookup.get(s, 0.0)) for s in states]
    if isinstance(document, (list, tuple)):
        if len(document) != len(states):
            raise ChainValidationError(
                f"{what} has {len(document)} entries for {len(states)} states"
            )
        return [parse_value(v) for v in document]
    raise ChainValidationError(f"{what} must be a mapping or a list")


def measure_from_values(values: Sequence[float], states: Sequence[str]) -> ProbabilityVector:
    try:
        return ProbabilityVector.from_array(states, values)
    except ValidationError as e:
        raise ChainValidationError(f"invalid measure: {e}") from e


def direction_from_values(values: Sequence[float], states: Sequence[str]) -> SignedMeasure:
    try:
        return SignedMeasure.from_array(states, values)
    except ValidationError as e:
        raise ChainValidationError(f"invalid direction: {e}") from e


def load_measure(path: PathLike, states: Sequence[str]) -> ProbabilityVector:
    return measure_from_values(_weights(read_document(path), states, "measure"), states)


def load_direction(path: PathLike, states: Sequence[str]) -> SignedMeasure:
    return direction_from_values(_weights(read_document(path), states, "direction"), states)


def flow_from_document(document: Any) -> Flow:
    if isinstance(document, Mapping):
        document = document.get("flow", document.get("edges"))
    if not isinstance(document, list):
        raise ChainValidationError("flow document must be a list of {from, to, value} records")
    try:
        return Flow.from_records(
            {"from": r["from"], "to": r["to"], "value": parse_value(r.get("value", 0.0))}
            for r in document
        )
    except (KeyError, TypeError) as e:
        raise ChainValidationError(f"malformed flow record: {e}") from e
    except ValidationError as e:
        raise ChainValidationError(f"invalid flow: {e}") from e


def load_flow(path: PathLike) -> Flow:
    return flow_from_document(read_document(path))
