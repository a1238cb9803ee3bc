import json
from pathlib import Path

import numpy as np
import pyarrow as pa
import pytest
from pydantic import BaseModel, ConfigDict

from mborel_amo import conversion
from mborel_amo.arith import cf_expand
from mborel_amo.config import ExperimentConfig
from mborel_amo.conversion import (
    csv_text,
    experiment_id,
    export,
    from_table,
    read_measure_csv,
    read_rows,
    to_table,
)
from mborel_amo.exceptions import ExportError
from mborel_amo.measure import ScaleGrid, cantor_measure, dimension_report
from mborel_amo.operator import AlmostMathieu
from mborel_amo.report import VerificationReport, make_check, skipped_check
from mborel_amo.schema import (
    ROW_MODEL_METADATA_KEY,
    AtomRow,
    CheckRow,
    ConvergentRow,
    EigenRow,
    MBorelRow,
    ScaleRow,
    schema_from_model,
)
from mborel_amo.spectral import TruncatedOperator, eigensolve


class NestedModel(BaseModel):
    model_config = ConfigDict(frozen=True)

    values: dict[str, float]


def _report() -> VerificationReport:
    config = ExperimentConfig()
    return VerificationReport(
        experiment_id=experiment_id(config),
        pipeline="verify-mborel",
        inputs=config,
        checks=(
            make_check("identity", 1e-15, "<=", 0.0, hard=True, tolerance=1e-12),
            make_check("estimate", 0.7, "==", 0.63, hard=False, slack=0.15, bound_source="closed-form"),
            skipped_check("unavailable", "nothing to compare"),
        ),
        derived={"beta_hat": 1.03},
    )


def test_schema_from_model_maps_fields() -> None:
    schema = schema_from_model(CheckRow)

    assert schema.field("name").type == pa.string()
    assert schema.field("measured").type == pa.float64()
    assert schema.field("measured").nullable
    assert not schema.field("slack").nullable
    assert schema.metadata[ROW_MODEL_METADATA_KEY] == b"CheckRow"


def test_schema_from_model_rejects_unsupported_fields() -> None:
    with pytest.raises(TypeError):
        schema_from_model(NestedModel)


def test_measure_csv_roundtrip(tmp_path: Path) -> None:
    mu = cantor_measure(6, left_weight=0.3)

    path = export(mu, "csv", tmp_path / "cantor.csv")
    restored = read_measure_csv(path)

    np.testing.assert_array_equal(restored.positions, mu.positions)
    np.testing.assert_array_equal(restored.weights, mu.weights)


def test_export_refuses_to_overwrite(tmp_path: Path) -> None:
    mu = cantor_measure(2)
    path = export(mu, "csv", tmp_path / "nested" / "mu.csv")

    with pytest.raises(ExportError):
        export(mu, "csv", path)
    export(mu, "json", path, force=True)
    assert json.loads(path.read_text())["weights"] == mu.weights.tolist()


def test_export_rejects_unknown_format(tmp_path: Path) -> None:
    with pytest.raises(ValueError):
        export(cantor_measure(2), "parquet", tmp_path / "mu.parquet")


def test_spectral_data_rows() -> None:
    op = AlmostMathieu(coupling_lambda=2.0, freq=cf_expand("golden", 30))
    data = eigensolve(TruncatedOperator.centered(op, 20), (0, 1))

    table = to_table(data)

    assert table.column_names == ["energy", "psi0", "psi1"]
    assert table.num_rows == 41
    rows = from_table(table, EigenRow)
    np.testing.assert_allclose([row.energy for row in rows], data.eigenvalues)


def test_frequency_rows_keep_big_integers() -> None:
    freq = cf_expand("pi", 6)

    rows = from_table(to_table(freq), ConvergentRow)

    assert [row.partial_quotient for row in rows] == ["7", "15", "1", "292", "1", "1"]
    assert rows[3].q == "33102"
    assert rows[-1].log_ratio is None


def test_dimension_report_trace_rows() -> None:
    report = dimension_report(cantor_measure(6), ScaleGrid.triadic(1, 5), (2.0,), 2.0, 3, seed=0)

    rows = from_table(to_table(report), ScaleRow)

    estimators = {row.estimator for row in rows}
    assert estimators == {"concentration", "m_borel_m2", "renyi_q2"}
    assert all(row.x is None for row in rows if row.estimator == "renyi_q2")


def test_report_json_roundtrip(tmp_path: Path) -> None:
    report = _report()

    path = export(report, "json", tmp_path / "report.json")

    restored = VerificationReport.model_validate_json(path.read_text())
    assert restored == report
    assert restored.passed
    assert [c.status for c in restored.checks] == ["pass", "soft-pass", "skipped"]


def test_report_csv_has_one_row_per_check(tmp_path: Path) -> None:
    path = export(_report(), "csv", tmp_path / "checks.csv")

    rows = read_rows(path, CheckRow)

    assert [row.name for row in rows] == ["identity", "estimate", "unavailable"]
    assert rows[2].measured is None


def test_row_lists_export_as_json(tmp_path: Path) -> None:
    rows = [MBorelRow(x=0.0, eps=0.1, m=2.0, value=0.5), MBorelRow(x=0.0, eps=0.01, m=2.0, value=0.25)]

    path = export(rows, "json", tmp_path / "rows.json")

    assert json.loads(path.read_text())[1] == {"x": 0.0, "eps": 0.01, "m": 2.0, "value": 0.25}


def test_mixed_rows_are_rejected() -> None:
    with pytest.raises(TypeError):
        to_table([AtomRow(position=0.0, weight=1.0), MBorelRow(x=0.0, eps=0.1, m=2.0, value=0.5)])


def test_from_table_reports_missing_columns() -> None:
    table = pa.table({"position": [0.1]})

    with pytest.raises(ValueError):
        from_table(table, AtomRow)


def test_experiment_id_tracks_the_config() -> None:
    base = ExperimentConfig()

    assert experiment_id(base) == experiment_id(ExperimentConfig())
    assert experiment_id(base) != experiment_id(base.model_copy(update={"seed": 1}))
    assert len(experiment_id(base)) == 64


def test_experiment_id_tracks_the_code_version(monkeypatch: pytest.MonkeyPatch) -> None:
    config = ExperimentConfig()
    before = experiment_id(config)

    monkeypatch.setattr(conversion, "code_version", lambda: "9.9.9")

    assert experiment_id(config) != before


def test_csv_text_matches_exported_file(tmp_path: Path) -> None:
    mu = cantor_measure(3)

    path = export(mu, "csv", tmp_path / "mu.csv")

    assert path.read_text(encoding="utf-8") == csv_text(mu)
