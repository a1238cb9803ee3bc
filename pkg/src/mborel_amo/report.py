"""Check results and verification reports emitted by the harness."""

from __future__ import annotations

import logging
import math
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field

from .config import ExperimentConfig
from .measure import DimensionReport
from .operator import DecayWindowReport

LOGGER = logging.getLogger(__name__)

Relation = Literal["<=", ">=", "=="]
Status = Literal["pass", "fail", "soft-pass", "soft-fail", "skipped"]


class CheckResult(BaseModel):
    """One asserted number with its bound, slack and where the bound came from."""

    model_config = ConfigDict(frozen=True)

    name: str
    kind: Literal["hard", "soft"]
    status: Status
    measured: float | None
    relation: Relation
    bound: float | None
    slack: float = 0.0
    tolerance: float = 0.0
    bound_source: Literal["config", "computed", "closed-form"] = "computed"
    scale_window: tuple[float, float] | None = None
    note: str = ""

    @property
    def failed(self) -> bool:
        return self.status in ("fail", "soft-fail")


def _holds(measured: float, relation: Relation, bound: float, allowance: float) -> bool:
    if math.isnan(measured):
        return False
    if relation == "<=":
        return measured <= bound + allowance
    if relation == ">=":
        return measured >= bound - allowance
    return abs(measured - bound) <= allowance


def make_check(
    name: str,
    measured: float,
    relation: Relation,
    bound: float,
    *,
    hard: bool,
    slack: float = 0.0,
    tolerance: float = 0.0,
    bound_source: Literal["config", "computed", "closed-form"] = "computed",
    scale_window: tuple[float, float] | None = None,
    note: str = "",
) -> CheckResult:
    """Evaluate ``measured relation bound`` allowing ``slack + tolerance``."""

    ok = _holds(float(measured), relation, float(bound), slack + tolerance)
    if hard:
        status: Status = "pass" if ok else "fail"
    else:
        status = "soft-pass" if ok else "soft-fail"
    if not ok:
        level = logging.ERROR if hard else logging.WARNING
        LOGGER.log(level, "%s check %s: %.6g %s %.6g (slack %.3g)", status, name, measured, relation, bound, slack)
    return CheckResult(
        name=name,
        kind="hard" if hard else "soft",
        status=status,
        measured=float(measured),
        relation=relation,
        bound=float(bound),
        slack=slack,
        tolerance=tolerance,
        bound_source=bound_source,
        scale_window=scale_window,
        note=note,
    )


def skipped_check(name: str, note: str, *, hard: bool = False) -> CheckResult:
    LOGGER.info("check %s skipped: %s", name, note)
    return CheckResult(
        name=name,
        kind="hard" if hard else "soft",
        status="skipped",
        measured=None,
        relation="<=",
        bound=None,
        note=note,
    )


class VerificationReport(BaseModel):
    """Outcome of one harness pipeline; everything except ``timings`` is reproducible from the config."""

    model_config = ConfigDict(frozen=True)

    experiment_id: str
    pipeline: Literal["verify-mborel", "verify-transition", "localization"]
    inputs: ExperimentConfig
    checks: tuple[CheckResult, ...]
    dimension_reports: dict[str, DimensionReport] = Field(default_factory=dict)
    decay_reports: tuple[DecayWindowReport, ...] = ()
    derived: dict[str, float] = Field(default_factory=dict)
    notes: tuple[str, ...] = ()
    timings: dict[str, float] = Field(default_factory=dict)

    @property
    def hard_failures(self) -> tuple[CheckResult, ...]:
        return tuple(c for c in self.checks if c.kind == "hard" and c.status == "fail")

    @property
    def soft_failures(self) -> tuple[CheckResult, ...]:
        return tuple(c for c in self.checks if c.status == "soft-fail")

    @property
    def passed(self) -> bool:
        return not self.hard_failures
