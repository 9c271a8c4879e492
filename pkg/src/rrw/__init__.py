"""Urn-driven reinforced random walks on the integers: simulation, exact
finite-horizon laws, drift estimation, couplings, recurrence/transience
classification, and phase-transition location."""

__version__ = "0.1.0"

from .funcs import (ReinforcementFunction, FixedPointReport, analyze,
                    builtin, make_family, parse_function)
from .streams import Stream, as_stream
from .urn import (ExactUrnLaw, UrnState, UrnTrajectory, exact_urn_dp,
                  simulate_urn, simulate_urn_batch, urn_step)
from .drift import (CltReport, DriftConfig, DriftEstimate, DriftProfile,
                    DriftSeries, clt_check, drift_parts_profile, drift_series,
                    estimate_delta_inf)
from .coupling import (CoupledRun, couple_function_order, couple_mass_order,
                       couple_off_center, run_coupling_batch)
from .walk import (EnvironmentSpec, OracleResult, RegimeConfig, RegimeReport,
                   WalkRecord, WalkStop, empirical_regime, exact_walk_oracle,
                   simulate_walk, walk_functionals)
from .criteria import (ClassicalWeights, ClassificationVerdict, ClassifyConfig,
                       SolomonReport, classify, map_classical_weights,
                       solomon_check)
from .transition import (SweepCurve, ThresholdBudget, ThresholdResult,
                         find_threshold, sweep)

__all__ = [
    "__version__",
    "ReinforcementFunction", "FixedPointReport", "analyze", "builtin",
    "make_family", "parse_function",
    "Stream", "as_stream",
    "ExactUrnLaw", "UrnState", "UrnTrajectory", "exact_urn_dp", "simulate_urn",
    "simulate_urn_batch", "urn_step",
    "CltReport", "DriftConfig", "DriftEstimate", "DriftProfile", "DriftSeries",
    "clt_check", "drift_parts_profile", "drift_series", "estimate_delta_inf",
    "CoupledRun", "couple_function_order", "couple_mass_order",
    "couple_off_center", "run_coupling_batch",
    "EnvironmentSpec", "OracleResult", "RegimeConfig", "RegimeReport",
    "WalkRecord", "WalkStop", "empirical_regime", "exact_walk_oracle",
    "simulate_walk", "walk_functionals",
    "ClassicalWeights", "ClassificationVerdict", "ClassifyConfig",
    "SolomonReport", "classify", "map_classical_weights", "solomon_check",
    "SweepCurve", "ThresholdBudget", "ThresholdResult", "find_threshold", "sweep",
]
