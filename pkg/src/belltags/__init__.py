"""Coincidence analysis for time-tagged Bell-test data.

Three ways to decide which detections form a pair: the conventional moving
window, fixed local time slots, and per-combination windows whose fourth
window is the sum of the other three.  The latter two make the count-form
inequality J >= 0 hold for every local realist model regardless of how the
model plays with detection times; the toolkit ships simulators (quantum and
local-hidden-variable) and an exact enumeration oracle to demonstrate both
the loophole and its two fixes.
"""

from .coincidence import (METHOD_MOVING, METHOD_SLOTS, METHOD_WINSUM, AnalysisConfig,
                          CoincidenceCounts, count_coincidences, fixed_slot_count,
                          moving_window_count, slot_index, window_sum_count)
from .estimator import (JStatistic, SweepResult, InsufficientDataError, j_statistic,
                        sigma_estimate, sweep_tau)
from .events import (COMBINATIONS, SITE_A, SITE_B, DetectionEvent, SettingSchedule,
                     TagStream, ValidationReport, validate_stream)
from .lhv import (LhvModel, RandomModelFamily, build_exploit_model, lhv_trial_schedule,
                  shipped_models, simulate_lhv)
from .quantum import (SWEEP_DEMO_GRID, QuantumProbabilities, SpdcConfig, cycled_schedule,
                      demo_config, quantum_probabilities, simulate_spdc, sweep_demo_config)
from .tagio import TagFormatError, read_tags, schedule_path, write_tags
from .verify import (ExactTable, SearchReport, check_theorem, exact_counts,
                     random_model_search)

__version__ = "0.1.0"

__all__ = [
    "AnalysisConfig", "CoincidenceCounts", "DetectionEvent", "ExactTable",
    "InsufficientDataError", "JStatistic", "LhvModel", "METHOD_MOVING", "METHOD_SLOTS",
    "METHOD_WINSUM", "QuantumProbabilities", "RandomModelFamily", "SearchReport",
    "SettingSchedule", "SpdcConfig", "SweepResult", "TagFormatError", "TagStream",
    "ValidationReport", "COMBINATIONS", "SITE_A", "SITE_B", "build_exploit_model",
    "check_theorem", "count_coincidences", "cycled_schedule", "demo_config",
    "exact_counts", "fixed_slot_count", "j_statistic", "lhv_trial_schedule",
    "moving_window_count", "quantum_probabilities", "random_model_search", "read_tags",
    "schedule_path", "shipped_models", "sigma_estimate", "simulate_lhv", "simulate_spdc",
    "slot_index", "sweep_demo_config", "sweep_tau", "validate_stream", "window_sum_count",
    "write_tags", "SWEEP_DEMO_GRID",
]
