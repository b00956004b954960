"""Dynamic power prediction: unit activity, block-shape and coalescing
corrections, SM concurrency scaling, transient correction, and the DVFS
frequency adjustment for a power cap."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .calibration import ArchitectureSpec, CalibrationProfile, UNIT_CLASSES
from .errors import CapAboveTdp, EmptyGrid, ZeroCycles
from .features import KernelFeatures
from .launch import InputResources, LaunchConfig


@dataclass(frozen=True)
class PowerBreakdown:
    """Predicted dynamic power and its components."""

    p_units: float
    p_shape: float
    p_mem: float
    p_sm: float
    p_dyn: float
    f_adj: float
    ci: float
    active_sms: int
    cap_limited: bool


def activity_rate(
    inst_count: float, warps_per_sm: float, exec_cycles: float, issue_cycles: float
) -> float:
    """AR_u = inst_count * warps_per_sm / (exec_cycles / issue_cycles)."""
    if exec_cycles <= 0 or issue_cycles <= 0:
        raise ZeroCycles(
            f"exec/issue cycles must be positive, got {exec_cycles}/{issue_cycles}"
        )
    return inst_count * warps_per_sm / (exec_cycles / issue_cycles)


def compute_intensity(n_comp: float, n_mem: float) -> float:
    """CI = n_comp / n_mem, with +inf when there is no memory work at all."""
    if n_mem == 0:
        return math.inf
    return n_comp / n_mem


def shape_power(
    p_base: float, kappa: float, block_x: int, block_y: int, ci: float
) -> float:
    """Block-geometry correction: p_base * (1 + kappa*|ln(x/y)|/(1 + ci)).

    Symmetric in x and y; vanishes for square blocks and for pure-compute
    kernels (ci = inf).
    """
    if block_x < 1 or block_y < 1:
        raise ValueError(f"block dimensions must be >= 1, got {block_x}x{block_y}")
    if math.isinf(ci):
        return p_base
    penalty = kappa * abs(math.log(block_x / block_y)) / (1.0 + ci)
    return p_base * (1.0 + penalty)


def memory_power(p_mem_base: float, lambda_: float, eta: float) -> float:
    """Coalescing-aware DRAM power: p_mem_base * (1 + lambda*(1 - eta))."""
    return p_mem_base * (1.0 + lambda_ * (1.0 - eta))


def sm_concurrency_power(n_active: int, alpha: float, beta: float, delta: float) -> float:
    """Power-law concurrency scaling alpha*n^beta + delta; exactly delta at n = 0."""
    if n_active < 0:
        raise ValueError(f"active SM count must be >= 0, got {n_active}")
    if n_active == 0:
        return delta
    return alpha * n_active ** beta + delta


def estimate_active_sms(
    config: LaunchConfig, resources: InputResources, arch: ArchitectureSpec
) -> int:
    """min(sm_count, total blocks); a nonempty grid keeps at least one SM busy."""
    total_blocks = resources.total_blocks
    if total_blocks <= 0:
        raise EmptyGrid("grid has zero blocks")
    return min(arch.sm_count, total_blocks)


def transient_correction(
    p_dyn: float, t_exec: float, tau_short: float, r: float
) -> float:
    """Scale power by r for kernels shorter than tau_short; never increases it."""
    if t_exec < tau_short:
        return p_dyn * r
    return p_dyn


def dvfs_frequency(f_base: float, p_cap: float, p_tdp: float, k: int) -> float:
    """f_adj = f_base * (p_cap / p_tdp)^(1/k)."""
    if p_cap <= 0:
        raise CapAboveTdp(f"power cap must be positive, got {p_cap}")
    if p_tdp <= 0:
        raise CapAboveTdp(f"TDP must be positive, got {p_tdp}")
    if p_cap > p_tdp:
        raise CapAboveTdp(f"power cap {p_cap} W above TDP {p_tdp} W")
    return f_base * (p_cap / p_tdp) ** (1.0 / k)


def dynamic_power(
    features: KernelFeatures,
    profile: CalibrationProfile,
    arch: ArchitectureSpec,
    config: LaunchConfig,
    resources: InputResources,
    t_exec: float,
) -> PowerBreakdown:
    """Compose the power terms for one configuration.

    p_dyn = sum(beta_u * AR_u) + p_shape + p_mem + p_sm, transient-corrected,
    then scaled by f_adj/f_base for the configured cap. After scaling, the cap
    is enforced as a ceiling on total draw (p_dyn + p_static), mirroring the
    hardware limiter; the report flags when it engages.
    """
    warps_per_sm = min(features.warps * features.blocks_per_sm, float(arch.max_warps_per_sm))

    p_units = 0.0
    for unit in UNIT_CLASSES:
        if unit == "Mem":
            count = features.n_mem
            exec_cycles = profile.l_mem_coal  # measured, not a spec constant
        else:
            count = features.n_comp_by_unit.get(unit, 0.0)
            exec_cycles = arch.exec_cycles[unit]
        if exec_cycles <= 0:
            continue  # a zero-latency unit contributes no modelled activity
        rate = activity_rate(count, warps_per_sm, exec_cycles, arch.issue_cycles[unit])
        p_units += profile.beta_u[unit] * rate

    ci = compute_intensity(features.n_comp, features.n_mem)
    p_shape = shape_power(
        profile.p_base_shape, profile.kappa, config.block_x, config.block_y, ci
    )
    p_mem = memory_power(profile.p_mem_base, profile.lambda_, features.eta_coal)
    active = estimate_active_sms(config, resources, arch)
    p_sm = sm_concurrency_power(
        active, profile.sm_power_alpha, profile.sm_power_beta, profile.sm_power_delta
    )

    p_dyn = p_units + p_shape + p_mem + p_sm
    p_dyn = transient_correction(p_dyn, t_exec, arch.tau_short, profile.transient_ratio_r)

    f_adj = dvfs_frequency(arch.f_base, config.p_cap, arch.p_tdp, arch.dvfs_exponent_k)
    p_dyn *= f_adj / arch.f_base

    cap_limited = False
    if p_dyn + arch.p_static > config.p_cap:
        p_dyn = max(0.0, config.p_cap - arch.p_static)
        cap_limited = True

    return PowerBreakdown(
        p_units=p_units,
        p_shape=p_shape,
        p_mem=p_mem,
        p_sm=p_sm,
        p_dyn=p_dyn,
        f_adj=f_adj,
        ci=ci,
        active_sms=active,
        cap_limited=cap_limited,
    )
