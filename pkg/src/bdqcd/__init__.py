"""Byzantine distributed quickest change detection.

Local matrix CUSUM detectors, fusion stopping rules, attack strategies, a
reproducible Monte Carlo engine and the matching asymptotic theory.
"""

from .asymptotics import (
    TheoryReport, achievability_slope, calibrate_h_multishot, calibrate_h_simultaneous,
    converse_slope, delay_expansion, false_bound_multishot, false_bound_simultaneous,
    leader_cost_empirical, stackelberg_cost, theory_report, xi_d,
)
from .attacks import AttackState, attack_step, build_reverse_assignment
from .cusum import CusumMatrix, ScalarCusum, acceptance_time_check, matrix_update, row_min
from .distributions import (
    DensityModel, HypothesisSet, bernoulli, closest_alternatives, exponential, gaussian,
    kl_divergence, llr_second_moment, log_likelihood_ratio,
)
from .errors import (
    BDQCDError, ConfigurationError, DomainError, EstimationError, InvalidArgumentError,
    NumericError, ProtocolError,
)
from .fusion import FusionState, fusion_step, run_epochal, stopping_time_for_type
from .montecarlo import (
    MetricsEstimate, acceptance_time, estimate_delay, estimate_false_metric,
    estimate_worst_delay, run_trial, run_trials, sweep,
)
from .scenario import AlarmEvent, AttackStrategy, FusionRule, Scenario, TrialOutcome
from .sensors import SensorState, honest_observation, sensor_step

__version__ = "0.1.0"
