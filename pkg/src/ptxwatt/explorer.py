"""Configuration-space exploration: enumerate valid launch configs, predict
energy for each, and retain the Pareto front under a performance floor."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .calibration import ArchitectureSpec, CalibrationProfile
from .cfg import ControlFlowGraph
from .errors import NoFeasibleConfig
from .features import KernelFeatures, extract_features
from .launch import InputResources, LaunchConfig, compute_input_resources
from .power_model import PowerBreakdown, dynamic_power
from .ptx import PtxModule
from .time_model import TimeBreakdown, execution_time

__all__ = [
    "LaunchConfig",
    "InputResources",
    "compute_input_resources",
    "Prediction",
    "ParetoSet",
    "generate_valid_configs",
    "predict_energy",
    "pareto_front",
    "pareto_front_bruteforce",
    "pareto_explore",
    "adaptive_power_cap",
]


@dataclass(frozen=True)
class Prediction:
    """Full model output for one configuration."""

    config: LaunchConfig
    time: TimeBreakdown
    power: PowerBreakdown
    e_pred: float


@dataclass(frozen=True)
class ParetoSet:
    """Non-dominated predictions, sorted by energy then time then config."""

    entries: tuple[Prediction, ...]
    rho: float
    t_peak: float


def _config_key(config: LaunchConfig) -> tuple:
    return (config.threads, config.block_x, config.block_y, config.p_cap)


def generate_valid_configs(
    arch: ArchitectureSpec,
    resources: InputResources,
    dim_candidates: list[int],
    cap_candidates: list[float] | None = None,
) -> list[LaunchConfig]:
    """Cartesian candidate product filtered by hardware and input constraints.

    A shape survives when block_x*block_y lies in [32, max_threads_per_block],
    is a multiple of 32, and at least one block fits on an SM given its shared
    memory demand. Caps must lie in [p_cap_min, p_tdp]; an empty cap list
    evaluates each shape at the TDP. Output order is canonical:
    (total threads, block_x, block_y, p_cap).
    """
    caps = sorted(set(cap_candidates)) if cap_candidates else [arch.p_tdp]
    shared = resources.shared_mem_bytes
    configs = []
    for bx in dim_candidates:
        for by in dim_candidates:
            threads = bx * by
            if threads < 32 or threads > arch.max_threads_per_block:
                continue
            if threads % 32 != 0:
                continue
            warps = threads // 32
            blocks_per_sm = arch.max_warps_per_sm / warps
            if shared > 0:
                blocks_per_sm = min(blocks_per_sm, arch.max_shared_per_sm / shared)
            if blocks_per_sm < 1.0:
                continue
            for cap in caps:
                if not arch.p_cap_min <= cap <= arch.p_tdp:
                    continue
                configs.append(LaunchConfig(block_x=bx, block_y=by, p_cap=float(cap)))
    configs.sort(key=_config_key)
    return configs


def predict_energy(
    features: KernelFeatures,
    arch: ArchitectureSpec,
    profile: CalibrationProfile,
    config: LaunchConfig,
    resources: InputResources,
) -> Prediction:
    """Compose the time and power models; e = t_exec*(p_dyn + p_static) + overhead."""
    time = execution_time(features, profile, arch, resources)
    power = dynamic_power(features, profile, arch, config, resources, time.t_exec)
    e_pred = time.t_exec * (power.p_dyn + arch.p_static) + profile.e_overhead
    return Prediction(config=config, time=time, power=power, e_pred=e_pred)


def _sorted_entries(predictions: list[Prediction]) -> list[Prediction]:
    # ties break by time, then block shape, then cap
    return sorted(
        predictions,
        key=lambda p: (
            p.e_pred, p.time.t_exec,
            p.config.block_x, p.config.block_y, p.config.p_cap,
        ),
    )


def pareto_front(predictions: list[Prediction]) -> list[Prediction]:
    """Non-dominated subset under strict dominance in (e_pred, t_exec).

    Sort by energy and sweep: a point is dominated only when some point with
    strictly lower energy also has strictly lower time. Ties survive.
    """
    ordered = _sorted_entries(predictions)
    kept: list[Prediction] = []
    best_t = math.inf
    i = 0
    while i < len(ordered):
        j = i
        while j < len(ordered) and ordered[j].e_pred == ordered[i].e_pred:
            j += 1
        group = ordered[i:j]
        kept.extend(p for p in group if p.time.t_exec <= best_t)
        best_t = min(best_t, min(p.time.t_exec for p in group))
        i = j
    return kept


def pareto_front_bruteforce(predictions: list[Prediction]) -> ParetoSet:
    """Ground-truth front by O(n^2) pairwise dominance checks."""
    if not predictions:
        raise NoFeasibleConfig("no predictions to rank")
    e = np.asarray([p.e_pred for p in predictions])
    t = np.asarray([p.time.t_exec for p in predictions])
    kept = []
    for i, p in enumerate(predictions):
        dominated = bool(np.any((e < e[i]) & (t < t[i])))
        if not dominated:
            kept.append(p)
    return ParetoSet(
        entries=tuple(_sorted_entries(kept)),
        rho=0.0,
        t_peak=float(t.min()),
    )


def evaluate_configs(
    module: PtxModule,
    cfg: ControlFlowGraph,
    arch: ArchitectureSpec,
    profile: CalibrationProfile,
    resources: InputResources,
    configs: list[LaunchConfig],
    jobs: int = 1,
) -> list[Prediction]:
    """Predict every config; evaluations are independent, so they may fan out
    over threads, and results are returned in canonical config order."""

    def one(config: LaunchConfig) -> Prediction:
        features = extract_features(module, cfg, config, resources, arch)
        return predict_energy(features, arch, profile, config, resources)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            predictions = list(pool.map(one, configs))
    else:
        predictions = [one(c) for c in configs]
    predictions.sort(key=lambda p: _config_key(p.config))
    return predictions


def pareto_explore(
    module: PtxModule,
    cfg: ControlFlowGraph,
    arch: ArchitectureSpec,
    profile: CalibrationProfile,
    resources: InputResources,
    dim_candidates: list[int],
    cap_candidates: list[float] | None = None,
    rho: float = 0.95,
    jobs: int = 1,
) -> ParetoSet:
    """Evaluate the whole valid config space and keep the Pareto front.

    Configurations whose predicted throughput falls below rho times the best
    predicted throughput are dropped before the dominance pass (the floor
    keeps t_exec <= t_peak/rho, where t_peak is the minimum predicted time).
    """
    if not 0 < rho <= 1:
        raise ValueError(f"rho must be in (0, 1], got {rho}")
    configs = generate_valid_configs(arch, resources, dim_candidates, cap_candidates)
    if not configs:
        raise NoFeasibleConfig("no candidate configuration passed the hardware filters")
    predictions = evaluate_configs(module, cfg, arch, profile, resources, configs, jobs=jobs)
    t_peak = min(p.time.t_exec for p in predictions)
    eligible = [p for p in predictions if p.time.t_exec <= t_peak / rho]
    front = pareto_front(eligible)
    return ParetoSet(entries=tuple(_sorted_entries(front)), rho=rho, t_peak=t_peak)


def adaptive_power_cap(
    p_hat: float,
    dp_history: float,
    a_coef: float,
    b_coef: float,
    p_tdp: float,
    p_cap_min: float = 0.0,
) -> float:
    """Feedback power cap: min(TDP, a*p_hat + b*dp_history), floored at the
    architecture's minimum settable cap."""
    if p_hat < 0:
        raise ValueError(f"predicted power must be >= 0, got {p_hat}")
    return max(p_cap_min, min(p_tdp, a_coef * p_hat + b_coef * dp_history))
