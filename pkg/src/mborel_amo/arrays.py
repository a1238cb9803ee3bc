"""Pydantic field types for read-only numpy arrays."""

from __future__ import annotations

from typing import Annotated, Any

import numpy as np
from pydantic import PlainSerializer, PlainValidator, WithJsonSchema


def _frozen_array(value: Any, dtype: type) -> np.ndarray:
    array = np.array(value, dtype=dtype, copy=True)
    array.flags.writeable = False
    return array


def _to_list(array: np.ndarray) -> list[Any]:
    return array.tolist()


FloatArray = Annotated[
    np.ndarray,
    PlainValidator(lambda value: _frozen_array(value, float)),
    PlainSerializer(_to_list, when_used="json"),
    WithJsonSchema({"type": "array", "items": {"type": ["number", "array"]}}),
]

IntArray = Annotated[
    np.ndarray,
    PlainValidator(lambda value: _frozen_array(value, np.int64)),
    PlainSerializer(_to_list, when_used="json"),
    WithJsonSchema({"type": "array", "items": {"type": "integer"}}),
]


def _to_complex(value: Any) -> complex:
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    return complex(value)


def _complex_pair(value: complex) -> list[float]:
    return [value.real, value.imag]


# JSON form is ``[real, imag]``.
Complex = Annotated[
    complex,
    PlainValidator(_to_complex),
    PlainSerializer(_complex_pair, when_used="json"),
    WithJsonSchema({"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}),
]
