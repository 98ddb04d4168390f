"""Exact and Monte Carlo laboratory for progressive filtration enlargements.

Two engines share one vocabulary. The exact engine works on finite filtered
spaces (rational or float arithmetic) where every identity can be checked
node by node: drift operators under progressive enlargement, drift-multiplier
factors, default times matching a prescribed survival process, deflator
existence via linear programming, and the recursion that assembles factors
across several defaults. The Monte Carlo engine discretizes the continuous
picture on a grid, where the same identities are verified statistically.
"""

from .errors import (
    ConfigError,
    EngineError,
    EnlargeLabError,
    GenerationFailed,
    Infeasible,
    InsufficientPaths,
    InvalidZ,
    MissingReport,
    NegativeMass,
    NonPositive,
    NoRepresentation,
    NotMartingale,
    NotPredictable,
    RecursionMismatch,
)
from .space import FilteredSpace, Process, binary_tree, uniform_tree
from .enlarge import (
    AzemaPair,
    Condition1finReport,
    DriftFactors,
    Enlargement,
    RandomTimeExtension,
    TransformReport,
    azema,
    compensator_transform_check,
    condition_1fin_check,
    drift,
    fit_drift_factors,
    progressive_enlarge,
)
from .natural import (
    DiesReport,
    InterceptReport,
    NaturalModelSpec,
    construct_tau_proportional,
    dies_template_check,
    intercept_check,
)
from .calculus import (
    DoobParts,
    bracket,
    compensator,
    condexp,
    doob_decompose,
    indicator_basis,
    spanning_driver,
    jump_constraint,
    martingale_check,
    orthogonalize,
    pred_bracket,
    represent,
    stoch_exponential,
    stoch_integral,
)
from .viability import (
    ConditionsReport,
    DeflatorCandidate,
    DeflatorReport,
    HonestTimeReport,
    LPOracleResult,
    MarketModel,
    RecursiveFactors,
    TransmissionReport,
    build_exponential_deflator,
    deflator_check,
    fullviability_conditions,
    honest_time_control,
    lp_deflator_oracle,
    recursive_factors,
    stopped,
    transmission_check,
)

__version__ = "0.1.0"

__all__ = [
    "FilteredSpace",
    "Process",
    "binary_tree",
    "uniform_tree",
    "RandomTimeExtension",
    "Enlargement",
    "progressive_enlarge",
    "azema",
    "AzemaPair",
    "drift",
    "DriftFactors",
    "fit_drift_factors",
    "compensator_transform_check",
    "TransformReport",
    "condition_1fin_check",
    "Condition1finReport",
    "NaturalModelSpec",
    "construct_tau_proportional",
    "intercept_check",
    "InterceptReport",
    "dies_template_check",
    "DiesReport",
    "MarketModel",
    "DeflatorCandidate",
    "DeflatorReport",
    "deflator_check",
    "lp_deflator_oracle",
    "LPOracleResult",
    "build_exponential_deflator",
    "fullviability_conditions",
    "ConditionsReport",
    "recursive_factors",
    "RecursiveFactors",
    "transmission_check",
    "TransmissionReport",
    "honest_time_control",
    "HonestTimeReport",
    "stopped",
    "DoobParts",
    "bracket",
    "compensator",
    "condexp",
    "doob_decompose",
    "indicator_basis",
    "spanning_driver",
    "jump_constraint",
    "martingale_check",
    "orthogonalize",
    "pred_bracket",
    "represent",
    "stoch_exponential",
    "stoch_integral",
    "EnlargeLabError",
    "NotPredictable",
    "NotMartingale",
    "NoRepresentation",
    "Infeasible",
    "InvalidZ",
    "NegativeMass",
    "NonPositive",
    "RecursionMismatch",
    "InsufficientPaths",
    "ConfigError",
    "EngineError",
    "MissingReport",
    "GenerationFailed",
]
