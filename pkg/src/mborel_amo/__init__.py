"""Public API for the mborel-amo package."""

from .arith import Frequency, beta_estimate, cf_expand, cf_synthesize, diophantine_check, named_alpha
from .config import ExperimentConfig, NumericsConfig, load_config
from .conversion import experiment_id, export, read_measure_csv
from .harness import run_localization_window, run_verify_mborel, run_verify_transition
from .measure import (
    DimensionReport,
    DiscreteMeasure,
    ScaleGrid,
    cantor_measure,
    concentration,
    dimension_report,
    gamma_exponents,
    j_scaling_exponent,
    m_borel,
    multifractal_dims,
    renyi_sum,
)
from .operator import AlmostMathieu, TransferProduct, lyapunov, transfer_product
from .report import CheckResult, VerificationReport
from .spectral import (
    MFunctionPair,
    SpectralData,
    SubordinacyData,
    TruncatedOperator,
    borel_transform,
    eigensolve,
    find_L_of_eps,
    half_line_m,
    jl_lower_bound_check,
    spectral_measure,
    subordinacy_quantities,
)

__all__ = [
    "AlmostMathieu",
    "CheckResult",
    "DimensionReport",
    "DiscreteMeasure",
    "ExperimentConfig",
    "Frequency",
    "MFunctionPair",
    "NumericsConfig",
    "ScaleGrid",
    "SpectralData",
    "SubordinacyData",
    "TransferProduct",
    "TruncatedOperator",
    "VerificationReport",
    "beta_estimate",
    "borel_transform",
    "cantor_measure",
    "cf_expand",
    "cf_synthesize",
    "concentration",
    "dimension_report",
    "diophantine_check",
    "eigensolve",
    "experiment_id",
    "export",
    "find_L_of_eps",
    "gamma_exponents",
    "half_line_m",
    "j_scaling_exponent",
    "jl_lower_bound_check",
    "load_config",
    "lyapunov",
    "m_borel",
    "multifractal_dims",
    "named_alpha",
    "read_measure_csv",
    "renyi_sum",
    "run_localization_window",
    "run_verify_mborel",
    "run_verify_transition",
    "spectral_measure",
    "subordinacy_quantities",
    "transfer_product",
]


def main() -> int:
    """Entry-point used by the console script."""

    from .cli import main as cli_main

    return cli_main()
