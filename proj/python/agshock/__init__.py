"""Commodity price shock analysis: outlier detection, relations and forecasting."""

try:
    from . import _agshock as _core
except ImportError:
    import _agshock as _core

AgshockError = _core.AgshockError
average_path_length = _core.average_path_length
causation_score = _core.causation_score
contamination_from_iqr = _core.contamination_from_iqr
double_rolling_aggregate = _core.double_rolling_aggregate
isolation_scores = _core.isolation_scores
pearson = _core.pearson
r2 = _core.r2
rmse = _core.rmse
run_all = _core.run_all
run_stage = _core.run_stage
stages = _core.stages

__all__ = [
    "AgshockError",
    "average_path_length",
    "causation_score",
    "contamination_from_iqr",
    "double_rolling_aggregate",
    "isolation_scores",
    "pearson",
    "r2",
    "rmse",
    "run_all",
    "run_stage",
    "stages",
]
