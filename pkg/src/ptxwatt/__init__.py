"""ptxwatt: static PTX analysis for GPU kernel time, power, and energy
prediction, with Pareto-optimal launch-configuration search."""

from .alignment import analyze_memory_alignment
from .calibration import (
    ArchitectureSpec,
    CalibrationProfile,
    MeasurementSet,
    default_architecture,
    default_calibration,
    fit_shape_coefficients,
    fit_sm_power_law,
    load_measurements,
    load_profile,
    save_profile,
    transient_ratio,
    unit_power_coefficient,
)
from .cfg import ControlFlowGraph, Loop, build_cfg, estimate_trip_counts
from .explorer import (
    ParetoSet,
    Prediction,
    adaptive_power_cap,
    generate_valid_configs,
    pareto_explore,
    pareto_front,
    pareto_front_bruteforce,
    predict_energy,
)
from .features import KernelFeatures, coalescing_efficiency, extract_features
from .launch import InputResources, LaunchConfig, compute_input_resources
from .metrics import (
    MetricReport,
    PowerTrace,
    crr,
    delta_energy_pct,
    delta_throughput_pct,
    greenup_speedup_powerup,
    joules_per_token,
    spearman_rho,
)
from .power_model import (
    PowerBreakdown,
    activity_rate,
    compute_intensity,
    dvfs_frequency,
    dynamic_power,
    estimate_active_sms,
    memory_power,
    shape_power,
    sm_concurrency_power,
    transient_correction,
)
from .ptx import Instruction, PtxModule, parse_ptx
from .time_model import TimeBreakdown, cwp, execution_time, mwp

__version__ = "0.1.0"
