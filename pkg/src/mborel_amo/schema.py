"""Tabular row models and the Arrow schemas derived from them."""

from __future__ import annotations

from enum import Enum
from types import UnionType
from typing import Any, Literal, Union, get_args, get_origin

import pyarrow as pa
from pydantic import BaseModel, ConfigDict

ROW_MODEL_METADATA_KEY = b"mborel.row_model"


class AtomRow(BaseModel):
    """One atom of a discrete measure; measures are written in ascending position order."""

    model_config = ConfigDict(frozen=True)

    position: float
    weight: float


class EigenRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    energy: float
    psi0: float
    psi1: float


class MBorelRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    x: float
    eps: float
    m: float
    value: float


class ConvergentRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    n: int
    partial_quotient: str
    p: str
    q: str
    log_ratio: float | None


class ScaleRow(BaseModel):
    """One scale of an exponent trace."""

    model_config = ConfigDict(frozen=True)

    estimator: str
    x: float | None
    log_eps: float
    log_value: float
    ratio: float


class CheckRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    kind: str
    status: str
    measured: float | None
    relation: str
    bound: float | None
    slack: float
    tolerance: float
    bound_source: str
    note: str


def schema_from_model(model_type: type[BaseModel]) -> pa.Schema:
    """Create an Arrow schema with one column per field of ``model_type``."""

    fields = []
    for name, field in model_type.model_fields.items():
        arrow_type, nullable = _annotation_to_arrow(field.annotation)
        fields.append(pa.field(name, arrow_type, nullable=nullable))
    return pa.schema(fields, metadata={ROW_MODEL_METADATA_KEY: model_type.__qualname__.encode()})


def _annotation_to_arrow(annotation: Any) -> tuple[pa.DataType, bool]:
    origin = get_origin(annotation)
    args = get_args(annotation)

    if origin is None:
        return _simple_type_to_arrow(annotation), False

    if origin is Literal:
        value_types = {type(value) for value in args}
        if len(value_types) != 1:
            raise TypeError(f"Literal with mixed value types: {annotation!r}")
        return _simple_type_to_arrow(value_types.pop()), False

    if origin in (list, tuple):
        if not args:
            raise TypeError("Container annotations must declare an inner type")
        item_type, _ = _annotation_to_arrow(args[0])
        return pa.list_(item_type), False

    if origin in (Union, UnionType):
        non_none = [arg for arg in args if arg is not type(None)]  # noqa: E721
        if len(non_none) != 1:
            raise TypeError("Only Optional[T] unions are supported")
        child_type, _ = _annotation_to_arrow(non_none[0])
        return child_type, len(non_none) != len(args)

    raise TypeError(f"Unsupported type annotation: {annotation!r}")


def _simple_type_to_arrow(annotation: Any) -> pa.DataType:
    if isinstance(annotation, type) and issubclass(annotation, Enum):
        value_types = {type(member.value) for member in annotation}
        if len(value_types) != 1:
            raise TypeError("Enums with mixed value types are not supported")
        return _simple_type_to_arrow(value_types.pop())

    if annotation is bool:
        return pa.bool_()
    if annotation is int:
        return pa.int64()
    if annotation is float:
        return pa.float64()
    if annotation is str:
        return pa.string()

    raise TypeError(f"Unsupported type annotation: {annotation!r}")
