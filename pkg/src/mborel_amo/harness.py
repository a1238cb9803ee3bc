"""Desk-scale verification pipelines for the dimension bounds and the localization window."""

from __future__ import annotations

import logging
import math
import time
from collections.abc import Callable, Iterator
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from typing import TypeVar

import numpy as np

from .arith import Frequency, beta_estimate, cf_expand, cf_synthesize, diophantine_check
from .config import ExperimentConfig, MBorelSuiteSpec, NumericsConfig
from .conversion import experiment_id
from .exceptions import (
    ConfigError,
    EpsilonTooLargeError,
    HypothesisError,
    RegimeError,
    TruncationError,
    WindowError,
)
from .measure import (
    DimensionReport,
    DiscreteMeasure,
    ScaleGrid,
    bound_thm11_packing,
    bound_thm12_multifractal,
    bound_thm_gamma_plus,
    cantor_measure,
    concentration,
    dimension_report,
    lebesgue_measure,
    m_borel,
    point_mass,
    renyi_sum,
)
from .operator import (
    AlmostMathieu,
    DecayWindowReport,
    SolutionProfile,
    block_identity_residual,
    classify_resonance,
    decay_window_check,
    lyapunov,
    regularity_check,
)
from .report import CheckResult, VerificationReport, make_check, skipped_check
from .spectral import (
    TruncatedOperator,
    borel_transform,
    boundary_scaling_check,
    eigenfunction_profile,
    eigensolve,
    eigenvalues,
    find_L_of_eps,
    jl_lower_bound_check,
    norm_growth_check,
    schnol_phase,
    spectral_measure,
)

LOGGER = logging.getLogger(__name__)

T = TypeVar("T")

_IDENTITY_TOL = 1e-12
_EIGEN_TOL = 1e-8
_LYAPUNOV_SLACK = 0.05
_L_EPS_VALUES = (1e-2, 1e-3, 1e-4)
_NORM_GROWTH_LENGTHS = (1e2, 1e3, 1e4)
_NORM_GROWTH_ENERGIES = 3
_JL_TRUNCATION = 2000
_JL_EPS_VALUES = (0.1, 0.05, 0.02)
_SCHNOL_LENGTH = 200.0
_CANDIDATE_FACTOR = 20
_REGULARITY_WINDOW = 40
_REGULARITY_SITES = 10
_BLOCK_HALF_WIDTH = 20
_BLOCK_TOL = 1e-6


def frequency_from_config(config: ExperimentConfig) -> Frequency:
    spec = config.frequency
    try:
        if spec.mode == "synthesize":
            return cf_synthesize(spec.beta_target, spec.q_cap, dps=spec.dps)
        return cf_expand(spec.alpha, spec.n_max, dps=spec.dps)
    except ValueError as exc:
        raise ConfigError(f"cannot build the frequency: {exc}") from exc


def default_t1(beta: float, log_lambda: float, sigma: float) -> float:
    """``max((beta - ln lambda)/beta, 0) + sigma``."""

    return max((beta - log_lambda) / beta, 0.0) + sigma


def default_t2(beta: float, log_lambda: float) -> float:
    """Midpoint between ``(9 beta - ln lambda)/(9 beta)`` and 1."""

    floor = max((9.0 * beta - log_lambda) / (9.0 * beta), 0.0)
    return floor + 0.5 * (1.0 - floor)


@contextmanager
def _timed(timings: dict[str, float], stage: str) -> Iterator[None]:
    LOGGER.info("stage %s started", stage)
    start = time.perf_counter()
    try:
        yield
    finally:
        timings[stage] = time.perf_counter() - start
        LOGGER.info("stage %s finished in %.2fs", stage, timings[stage])


def _ordered_map(fn: Callable[..., T], items: list, workers: int) -> list[T]:
    if workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


# ---------------------------------------------------------------------------
# m-Borel suite
# ---------------------------------------------------------------------------


def synthetic_suite(spec: MBorelSuiteSpec) -> dict[str, DiscreteMeasure]:
    return {
        "cantor": cantor_measure(spec.cantor_depth),
        "biased_cantor": cantor_measure(spec.cantor_depth, spec.biased_left_weight),
        "lebesgue": lebesgue_measure(spec.lebesgue_atoms),
        "single_atom": point_mass(0.5),
    }


def _closed_form_dims(name: str, spec: MBorelSuiteSpec, q_list: tuple[float, ...]) -> dict[str, float]:
    cantor = math.log(2.0) / math.log(3.0)
    if name == "cantor":
        dims = dict.fromkeys(("dimH_minus_hat", "dimH_plus_hat", "dimP_minus_hat", "dimP_plus_hat"), cantor)
        dims.update({f"D_plus({q:g})": cantor for q in q_list})
        return dims
    if name == "biased_cantor":
        w = spec.biased_left_weight
        return {f"D_plus({q:g})": math.log(w**q + (1 - w) ** q) / ((1 - q) * math.log(3.0)) for q in q_list}
    if name in ("lebesgue", "single_atom"):
        value = 1.0 if name == "lebesgue" else 0.0
        dims = dict.fromkeys(("dimH_minus_hat", "dimH_plus_hat", "dimP_minus_hat", "dimP_plus_hat"), value)
        dims.update({f"D_plus({q:g})": value for q in q_list})
        return dims
    return {}


def _estimated_dims(report: DimensionReport) -> dict[str, float]:
    dims = {
        "dimH_minus_hat": report.dimH_minus_hat,
        "dimH_plus_hat": report.dimH_plus_hat,
        "dimP_minus_hat": report.dimP_minus_hat,
        "dimP_plus_hat": report.dimP_plus_hat,
    }
    dims.update({f"D_plus({r.q:g})": r.d_plus_hat for r in report.renyi})
    return dims


def _identity_checks(
    name: str, mu: DiscreteMeasure, report: DimensionReport, cfg: NumericsConfig
) -> list[CheckResult]:
    points = report.sample_points.tolist()
    eps_values = report.eps_values.tolist()
    mass = mu.total_mass

    borel_error = 0.0
    concentration_excess = -math.inf
    max_decrease = 0.0
    for x in points:
        j2 = []
        for eps in eps_values:
            value = m_borel(mu, 2.0, x, eps, config=cfg)
            imag = eps * borel_transform(mu, complex(x, eps)).imag
            borel_error = max(borel_error, abs(value - imag) / value)
            concentration_excess = max(concentration_excess, concentration(mu, x, eps) - 2.0 * value)
            j2.append(value)
        order = np.argsort(eps_values)
        steps = np.diff(np.asarray(j2)[order])
        max_decrease = max(max_decrease, float(-steps.min()) if steps.size else 0.0)
    partition_error = max(abs(renyi_sum(mu, 1.0, eps, config=cfg) - mass) / mass for eps in eps_values)

    return [
        make_check(f"{name}.borel_identity", borel_error, "<=", 0.0, hard=True, tolerance=_IDENTITY_TOL),
        make_check(
            f"{name}.concentration_vs_j2",
            concentration_excess,
            "<=",
            0.0,
            hard=True,
            tolerance=_IDENTITY_TOL * mass,
            note="mu([x-eps, x+eps]) <= 2 J_2(x, eps)",
        ),
        make_check(f"{name}.j_monotone_in_eps", max_decrease, "<=", 0.0, hard=True, tolerance=_IDENTITY_TOL * mass),
        make_check(f"{name}.renyi_partition", partition_error, "<=", 0.0, hard=True, tolerance=_IDENTITY_TOL),
    ]


def _inequality_checks(name: str, report: DimensionReport, slack: float) -> list[CheckResult]:
    m = report.m
    window = (float(report.eps_values.min()), float(report.eps_values.max()))
    checks = []

    excesses = []
    for gamma, sigma in zip(report.gamma_summary, report.sigma_summary):
        try:
            bound = bound_thm_gamma_plus(m, sigma.sigma_liminf_hat, min(max(gamma.gamma_minus_hat, 0.0), m))
        except HypothesisError:
            continue
        excesses.append(gamma.gamma_plus_hat - bound)
    if excesses:
        checks.append(
            make_check(
                f"{name}.gamma_plus_bound",
                max(excesses),
                "<=",
                0.0,
                hard=False,
                slack=slack,
                bound_source="config",
                scale_window=window,
                note="max over sampled x of gamma_plus_hat - sigma(m - gamma_minus)/(m - sigma)",
            )
        )
    else:
        checks.append(skipped_check(f"{name}.gamma_plus_bound", "m <= sigma at every sampled point"))

    worst = max(g.gamma_minus_hat - s.sigma_limsup_hat for g, s in zip(report.gamma_summary, report.sigma_summary))
    checks.append(
        make_check(
            f"{name}.gamma_minus_vs_sigma_limsup",
            worst,
            "<=",
            0.0,
            hard=False,
            slack=slack,
            bound_source="config",
            scale_window=window,
        )
    )

    for estimate in report.renyi:
        if estimate.q < 1.0 + 1.0 / m:
            continue
        checks.append(
            make_check(
                f"{name}.renyi_vs_sigma({estimate.q:g})",
                estimate.d_plus_hat,
                "<=",
                report.sigma_hat.liminf_median,
                hard=False,
                slack=slack,
                scale_window=window,
            )
        )
    checks.append(
        make_check(f"{name}.renyi_monotone", float(report.renyi_monotone), "==", 1.0, hard=False)
    )
    return checks


def run_verify_mborel(config: ExperimentConfig) -> VerificationReport:
    """Identity, inequality and closed-form checks of the estimators on the synthetic suite."""

    cfg = config.numerics()
    spec = config.mborel_suite
    grid = ScaleGrid.geometric(spec.grid.base, spec.grid.k_min, spec.grid.k_max)
    timings: dict[str, float] = {}
    suite = synthetic_suite(spec)

    def report_for(name: str) -> DimensionReport:
        return dimension_report(suite[name], grid, config.q_list, config.m, config.n_samples, config.seed, config=cfg)

    with _timed(timings, "dimension_reports"):
        names = list(suite)
        reports = dict(zip(names, _ordered_map(report_for, names, config.workers)))

    checks: list[CheckResult] = []
    with _timed(timings, "checks"):
        for name, report in reports.items():
            mu = suite[name]
            checks.extend(_identity_checks(name, mu, report, cfg))
            checks.extend(_inequality_checks(name, report, config.slack.inequality))
            estimated = _estimated_dims(report)
            for quantity, expected in _closed_form_dims(name, spec, config.q_list).items():
                checks.append(
                    make_check(
                        f"{name}.{quantity}",
                        estimated[quantity],
                        "==",
                        expected,
                        hard=False,
                        slack=config.slack.dimension,
                        bound_source="closed-form",
                    )
                )

    return VerificationReport(
        experiment_id=experiment_id(config),
        pipeline="verify-mborel",
        inputs=config,
        checks=tuple(checks),
        dimension_reports=reports,
        timings=timings,
    )


# ---------------------------------------------------------------------------
# Transition pipeline
# ---------------------------------------------------------------------------


def _checked_regime(config: ExperimentConfig, freq: Frequency) -> tuple[float, float]:
    beta = beta_estimate(freq, config.frequency.tail_start).value
    if config.coupling_lambda <= 1.0:
        raise RegimeError(f"lambda={config.coupling_lambda:g} <= 1: the dimension bounds need lambda > 1")
    log_lambda = math.log(config.coupling_lambda)
    if log_lambda > beta * (1.0 + 1e-9):
        raise RegimeError(
            f"ln(lambda)={log_lambda:.4g} exceeds beta_hat={beta:.4g}: pure point regime, "
            "where the spectral measures have no fractal part to bound"
        )
    verdict = diophantine_check(config.theta, freq, config.diophantine)
    if not verdict.holds:
        raise RegimeError(
            f"theta={config.theta:g} fails the Diophantine condition at k={verdict.worst_k} "
            f"(margin {verdict.worst_margin:.3g})"
        )
    return beta, log_lambda


def _sample_energies(mu: DiscreteMeasure, n: int, seed: int) -> np.ndarray:
    indices, _ = mu.sample_atoms(n, np.random.default_rng(seed))
    return mu.positions[indices]


def run_verify_transition(config: ExperimentConfig) -> VerificationReport:
    """Compare the dimension estimates of ``mu_{delta_0} + mu_{delta_1}`` with the transition bounds."""

    cfg = config.numerics()
    timings: dict[str, float] = {}
    notes: list[str] = []
    freq = frequency_from_config(config)
    beta, log_lambda = _checked_regime(config, freq)
    op = AlmostMathieu(coupling_lambda=config.coupling_lambda, freq=freq, theta=config.theta)
    slack = config.slack
    spec = config.transition

    with _timed(timings, "eigensolve"):
        truncation = TruncatedOperator.centered(op, config.truncation_n)
        data = eigensolve(truncation, (0, 1), config=cfg)
    mu0, mu1 = spectral_measure(data, 0), spectral_measure(data, 1)
    mu = mu0 + mu1

    checks = [
        make_check("mass_delta0", mu0.total_mass, "==", 1.0, hard=True, tolerance=_EIGEN_TOL),
        make_check("mass_delta1", mu1.total_mass, "==", 1.0, hard=True, tolerance=_EIGEN_TOL),
        make_check(
            "first_moment_delta0",
            float(np.dot(mu0.positions, mu0.weights)),
            "==",
            float(truncation.diagonal[truncation.index(0)]),
            hard=True,
            tolerance=_EIGEN_TOL,
        ),
        make_check(
            "spectral_range",
            float(np.max(np.abs(data.eigenvalues))),
            "<=",
            op.spectrum_bound,
            hard=True,
            tolerance=_EIGEN_TOL,
            bound_source="closed-form",
        ),
        make_check(
            "eigen_residual",
            data.max_residual,
            "<=",
            0.0,
            hard=True,
            tolerance=_EIGEN_TOL * truncation.norm_bound(),
        ),
        make_check("orthonormality", data.orthonormality_residual, "<=", 0.0, hard=True, tolerance=_EIGEN_TOL),
    ]
    if data.clustered:
        notes.append(f"{data.n_clusters} eigenvalue cluster(s) re-orthogonalised")

    with _timed(timings, "dimension_report"):
        grid = ScaleGrid.geometric(config.scale_grid.base, config.scale_grid.k_min, config.scale_grid.k_max)
        report = dimension_report(mu, grid, config.q_list, config.m, config.n_samples, config.seed, config=cfg)
    window = (float(grid.eps_values.min()), float(grid.eps_values.max()))

    packing_bound = bound_thm11_packing(beta, log_lambda)
    checks.append(
        make_check(
            "dimP_plus_vs_transition_bound",
            report.dimP_plus_hat,
            "<=",
            packing_bound,
            hard=False,
            slack=slack.dimension,
            scale_window=window,
        )
    )
    corollary = report.bound_values.get("packing_corollary")
    if corollary is not None:
        checks.append(
            make_check(
                "dimP_plus_vs_sigma_bound",
                report.dimP_plus_hat,
                "<=",
                corollary,
                hard=False,
                slack=slack.dimension,
                scale_window=window,
            )
        )
    else:
        checks.append(skipped_check("dimP_plus_vs_sigma_bound", "sigma estimate not below m"))
    renyi_bound = bound_thm12_multifractal(beta, log_lambda)
    for estimate in report.renyi:
        if estimate.q < 1.5:
            continue
        checks.append(
            make_check(
                f"D_plus({estimate.q:g})_vs_multifractal_bound",
                estimate.d_plus_hat,
                "<=",
                renyi_bound,
                hard=False,
                slack=slack.dimension,
                scale_window=window,
            )
        )

    energies = _sample_energies(mu0, spec.boundary_energies, config.seed)
    with _timed(timings, "lyapunov"):
        e_center = float(data.eigenvalues[np.argmin(np.abs(data.eigenvalues))])
        estimate = lyapunov(op, e_center, spec.lyapunov_steps, config=cfg)
        checks.append(
            make_check(
                "lyapunov_on_spectrum",
                estimate.value,
                "==",
                log_lambda,
                hard=False,
                slack=_LYAPUNOV_SLACK,
                bound_source="closed-form",
                note=f"E={e_center:.6g}",
            )
        )

    t = spec.boundary_t_fraction * log_lambda / (2.0 * beta - log_lambda)
    with _timed(timings, "boundary_scaling"):
        scaling = boundary_scaling_check(mu0, energies, spec.boundary_eps, t, slack=slack.inequality)
        checks.append(
            make_check(
                "boundary_scaling",
                scaling.pass_fraction,
                ">=",
                spec.boundary_min_pass_fraction,
                hard=False,
                bound_source="config",
                note=f"Im M_1(E + i eps) eps^t >= 1 - slack with t={t:.4g}",
            )
        )
        control = boundary_scaling_check(mu0, [op.spectrum_bound + 1.0], spec.boundary_eps, t, slack=slack.inequality)
        checks.append(
            make_check("boundary_scaling_negative_control", control.pass_fraction, "==", 0.0, hard=True)
        )

    t1 = config.localization.t1 or default_t1(beta, log_lambda, config.localization.sigma)
    growth = log_lambda / (2.0 * t1 * beta) - slack.decay
    with _timed(timings, "subordinacy"):
        e_probe = float(energies[0])
        exponents = []
        for eps in _L_EPS_VALUES:
            try:
                exponents.append(math.log(find_L_of_eps(op, e_probe, 0.0, eps, config=cfg)) / -math.log(eps))
            except (EpsilonTooLargeError, TruncationError) as exc:
                notes.append(f"L(eps={eps:g}) skipped: {exc}")
        if exponents:
            checks.append(
                make_check(
                    "L_of_eps_power_bound",
                    max(exponents),
                    "<=",
                    1.0 / (1.0 + growth),
                    hard=False,
                    slack=slack.inequality,
                    note=f"max over eps of ln L(eps)/ln(1/eps) at E={e_probe:.6g}",
                )
            )
        norms = norm_growth_check(
            op, energies[:_NORM_GROWTH_ENERGIES], _NORM_GROWTH_LENGTHS, t1, beta, slack=slack.decay
        )
        checks.append(
            make_check(
                "norm_growth",
                norms.pass_fraction,
                ">=",
                spec.boundary_min_pass_fraction,
                hard=False,
                bound_source="config",
                note=f"omega(L) >= L^{norms.exponent:.4g}",
            )
        )

    with _timed(timings, "m_functions"):
        x0 = schnol_phase(op, e_probe, _SCHNOL_LENGTH)
        ratios = []
        for eps in _JL_EPS_VALUES:
            try:
                jl = jl_lower_bound_check(
                    op, e_probe, x0, eps, n_truncation=_JL_TRUNCATION, c_cal=config.c_cal, config=cfg
                )
            except (EpsilonTooLargeError, TruncationError) as exc:
                notes.append(f"m-function bound at eps={eps:g} skipped: {exc}")
                continue
            ratios.append(jl.ratio)
        if ratios:
            checks.append(
                make_check(
                    "jl_lower_bound",
                    min(ratios),
                    ">=",
                    1.0 / config.c_cal,
                    hard=False,
                    bound_source="config",
                    note=f"Schnol-phase proxy x0={x0:.6g}",
                )
            )

    return VerificationReport(
        experiment_id=experiment_id(config),
        pipeline="verify-transition",
        inputs=config,
        checks=tuple(checks),
        dimension_reports={"mu_delta0_plus_delta1": report},
        derived={
            "beta_hat": beta,
            "log_lambda": log_lambda,
            "packing_bound": packing_bound,
            "multifractal_bound": renyi_bound,
            "boundary_t": t,
            "t1": t1,
        },
        notes=tuple(notes),
        timings=timings,
    )


# ---------------------------------------------------------------------------
# Localization window
# ---------------------------------------------------------------------------


def _localized_near_origin(
    truncation: TruncatedOperator, n_vectors: int, cfg: NumericsConfig
) -> list[tuple[float, SolutionProfile]]:
    band = min(truncation.size, _CANDIDATE_FACTOR * n_vectors)
    first = (truncation.size - band) // 2
    candidates = []
    for energy in eigenvalues(truncation, index_range=(first, first + band), config=cfg).tolist():
        profile = eigenfunction_profile(truncation, energy)
        center = int(profile.sites[np.argmax(profile.log_abs_values())])
        candidates.append((abs(center), energy, profile))
    candidates.sort(key=lambda item: item[0])
    return [(energy, profile) for _, energy, profile in candidates[:n_vectors]]


def _regularity_fraction(
    op: AlmostMathieu, energy: float, decay: DecayWindowReport, t2: float, rate: float, limit: int, cfg: NumericsConfig
) -> float | None:
    lo = math.floor(decay.window_lo) + 1
    hi = min(math.ceil(decay.window_hi) - 1 if math.isfinite(decay.window_hi) else limit, limit)
    if hi <= lo:
        return None
    sites = np.unique(np.linspace(lo, hi, _REGULARITY_SITES).astype(int)).tolist()
    sites = [y for y in sites if not classify_resonance(op.freq, t2, decay.n, y).is_resonant]
    if not sites:
        return None
    regular = [regularity_check(op, energy, y, rate, _REGULARITY_WINDOW, config=cfg).regular for y in sites]
    return sum(regular) / len(regular)


def run_localization_window(config: ExperimentConfig) -> VerificationReport:
    """Decay of mid-spectrum eigenvectors on resonant sites inside the nonempty windows."""

    cfg = config.numerics()
    spec = config.localization
    timings: dict[str, float] = {}
    notes: list[str] = []
    freq = frequency_from_config(config)
    beta = beta_estimate(freq, config.frequency.tail_start).value
    log_lambda = math.log(spec.coupling_lambda)
    t1 = spec.t1 or default_t1(beta, log_lambda, spec.sigma)
    t2 = spec.t2 or default_t2(beta, log_lambda)
    rate = log_lambda - (1.0 - t1) * beta
    if rate <= 0:
        raise RegimeError(f"nonpositive decay rate ln(lambda) - (1 - t1) beta = {rate:.4g}")
    if not 0 < t1 < t2 < 1:
        raise RegimeError(f"need 0 < t1 < t2 < 1, got t1={t1:.4g}, t2={t2:.4g}")

    op = AlmostMathieu(coupling_lambda=spec.coupling_lambda, freq=freq, theta=config.theta)
    truncation = TruncatedOperator.centered(op, config.truncation_n)
    with _timed(timings, "eigenvectors"):
        selected = _localized_near_origin(truncation, spec.n_eigenvectors, cfg)

    reports: list[DecayWindowReport] = []
    checks: list[CheckResult] = []
    regularity: list[float] = []
    limit = config.truncation_n - _REGULARITY_WINDOW
    with _timed(timings, "decay_windows"):
        for energy, profile in selected:
            for n in range(len(freq.denominators) - 1):
                decay = decay_window_check(op, energy, profile, t1, t2, n, beta=beta, slack=config.slack.decay)
                reports.append(decay)
                if decay.status == "empty_window":
                    notes.append(f"E={energy:.6g} n={n}: empty window skipped")
                    continue
                fraction = _regularity_fraction(op, energy, decay, t2, rate, limit, cfg)
                if fraction is not None:
                    regularity.append(fraction)
            try:
                residual = block_identity_residual(op, profile, -_BLOCK_HALF_WIDTH, _BLOCK_HALF_WIDTH, 0)
            except WindowError as exc:
                notes.append(f"E={energy:.6g}: block identity skipped: {exc}")
            else:
                checks.append(
                    make_check(f"block_identity(E={energy:.6g})", residual, "<=", 0.0, hard=True, tolerance=_BLOCK_TOL)
                )

    checked = [r for r in reports if r.status == "checked"]
    if checked:
        fraction = sum(r.n_passed for r in checked) / sum(r.n_checked for r in checked)
        checks.append(
            make_check(
                "resonant_decay",
                fraction,
                ">=",
                spec.min_pass_fraction,
                hard=False,
                bound_source="config",
                note=f"ln|phi(k)| <= -({rate:.4g} - slack)|k| on resonant k",
            )
        )
    else:
        checks.append(skipped_check("resonant_decay", "no resonant sites inside any nonempty window"))
    if regularity:
        checks.append(
            make_check(
                "nonresonant_regularity",
                float(np.mean(regularity)),
                ">=",
                spec.min_pass_fraction,
                hard=False,
                bound_source="config",
            )
        )

    return VerificationReport(
        experiment_id=experiment_id(config),
        pipeline="localization",
        inputs=config,
        checks=tuple(checks),
        decay_reports=tuple(reports),
        derived={"beta_hat": beta, "log_lambda": log_lambda, "t1": t1, "t2": t2, "rate": rate},
        notes=tuple(notes),
        timings=timings,
    )


PIPELINES: dict[str, Callable[[ExperimentConfig], VerificationReport]] = {
    "verify-mborel": run_verify_mborel,
    "verify-transition": run_verify_transition,
    "localization": run_localization_window,
}
