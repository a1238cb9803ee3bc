"""Conversion of results into Arrow tables, CSV and JSON files."""

from __future__ import annotations

import hashlib
import json
import logging
import math
from collections.abc import Sequence
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path
from typing import Any, Literal, TypeVar

import pyarrow as pa
import pyarrow.csv as pa_csv
from pydantic import BaseModel, TypeAdapter, ValidationError

from .arith import Frequency
from .config import ExperimentConfig
from .exceptions import ExportError
from .measure import DimensionReport, DiscreteMeasure, ScalingTrace
from .report import VerificationReport
from .schema import AtomRow, CheckRow, ConvergentRow, EigenRow, ScaleRow, schema_from_model
from .spectral import SpectralData

LOGGER = logging.getLogger(__name__)

ExportFormat = Literal["csv", "json"]
R = TypeVar("R", bound=BaseModel)


def to_rows(obj: Any) -> tuple[type[BaseModel], list[BaseModel]]:
    """Flatten a result object into homogeneous row models."""

    if isinstance(obj, DiscreteMeasure):
        return AtomRow, [AtomRow(position=x, weight=w) for x, w in zip(obj.positions.tolist(), obj.weights.tolist())]

    if isinstance(obj, SpectralData):
        psi0, psi1 = obj.amplitudes(0), obj.amplitudes(1)
        return EigenRow, [
            EigenRow(energy=e, psi0=a, psi1=b)
            for e, a, b in zip(obj.eigenvalues.tolist(), psi0.tolist(), psi1.tolist())
        ]

    if isinstance(obj, Frequency):
        denominators = obj.denominators
        rows = []
        for n, (a, (p, q)) in enumerate(zip(obj.partial_quotients, obj.convergents[1:]), start=1):
            q_next = denominators[n + 1] if n + 1 < len(denominators) else None
            ratio = math.log(q_next) / q if q_next is not None else None
            rows.append(ConvergentRow(n=n, partial_quotient=str(a), p=str(p), q=str(q), log_ratio=ratio))
        return ConvergentRow, rows

    if isinstance(obj, DimensionReport):
        rows = []
        for estimate in obj.gamma_summary:
            rows.extend(_trace_rows("concentration", estimate.x, estimate.per_scale))
        for estimate in obj.sigma_summary:
            rows.extend(_trace_rows(f"m_borel_m{estimate.m:g}", estimate.x, estimate.trace))
        for estimate in obj.renyi:
            rows.extend(_trace_rows(f"renyi_q{estimate.q:g}", None, estimate.trace))
        return ScaleRow, rows

    if isinstance(obj, VerificationReport):
        return CheckRow, [
            CheckRow(
                name=check.name,
                kind=check.kind,
                status=check.status,
                measured=check.measured,
                relation=check.relation,
                bound=check.bound,
                slack=check.slack,
                tolerance=check.tolerance,
                bound_source=check.bound_source,
                note=check.note,
            )
            for check in obj.checks
        ]

    if isinstance(obj, Sequence) and obj and all(isinstance(item, BaseModel) for item in obj):
        row_type = type(obj[0])
        if any(type(item) is not row_type for item in obj):
            raise TypeError("All rows must share the same model type")
        return row_type, list(obj)

    raise TypeError(f"No tabular form for {type(obj)!r}")


def _trace_rows(estimator: str, x: float | None, trace: ScalingTrace) -> list[ScaleRow]:
    return [
        ScaleRow(estimator=estimator, x=x, log_eps=le, log_value=lv, ratio=r)
        for le, lv, r in zip(trace.log_eps.tolist(), trace.log_values.tolist(), trace.ratios.tolist())
    ]


def to_table(obj: Any) -> pa.Table:
    row_type, rows = to_rows(obj)
    schema = schema_from_model(row_type)
    return pa.Table.from_pylist([row.model_dump(mode="python") for row in rows], schema=schema)


def from_table(table: pa.Table, row_type: type[R]) -> list[R]:
    """Validate every row of ``table`` as ``row_type``."""

    expected = set(row_type.model_fields)
    missing = expected - set(table.column_names)
    if missing:
        raise ValueError(f"table lacks columns {sorted(missing)} for {row_type.__name__}")
    try:
        return [row_type.model_validate(row) for row in table.select(list(row_type.model_fields)).to_pylist()]
    except ValidationError as exc:
        raise ValueError(f"rows do not validate as {row_type.__name__}: {exc}") from exc


def export(obj: Any, fmt: ExportFormat, path: str | Path, *, force: bool = False) -> Path:
    """Write ``obj`` as CSV rows or as its JSON model dump; refuses to overwrite unless ``force``."""

    path = Path(path)
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown export format {fmt!r}")
    if path.exists() and not force:
        raise ExportError(f"{path} exists; pass force to overwrite")
    path.parent.mkdir(parents=True, exist_ok=True)

    if fmt == "csv":
        path.write_text(csv_text(obj), encoding="utf-8")
    elif isinstance(obj, BaseModel):
        path.write_text(obj.model_dump_json(indent=2) + "\n", encoding="utf-8")
    else:
        row_type, rows = to_rows(obj)
        payload = TypeAdapter(list[row_type]).dump_json(rows, indent=2)
        path.write_bytes(payload + b"\n")
    LOGGER.info("wrote %s (%s)", path, fmt)
    return path


def csv_text(obj: Any) -> str:
    """The CSV form of ``obj`` with a header row, as written by :func:`export`."""

    sink = pa.BufferOutputStream()
    pa_csv.write_csv(to_table(obj), sink)
    return sink.getvalue().to_pybytes().decode("utf-8")


def read_rows(path: str | Path, row_type: type[R]) -> list[R]:
    schema = schema_from_model(row_type)
    options = pa_csv.ConvertOptions(column_types={field.name: field.type for field in schema})
    return from_table(pa_csv.read_csv(str(path), convert_options=options), row_type)


def read_measure_csv(path: str | Path) -> DiscreteMeasure:
    """Read a ``position,weight`` CSV written by :func:`export`."""

    rows = read_rows(path, AtomRow)
    return DiscreteMeasure(positions=[row.position for row in rows], weights=[row.weight for row in rows])


def code_version() -> str:
    try:
        return version("mborel-amo")
    except PackageNotFoundError:
        return "0+unknown"


def experiment_id(config: ExperimentConfig) -> str:
    """sha256 over the canonical config JSON and the installed package version.

    A run id changes when either the inputs or the code that produced the numbers change.
    """

    payload = {"config": config.model_dump(mode="json"), "code_version": code_version()}
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()
