"""Execution-time prediction from kernel features and calibration data.

Warp-parallelism accounting: MWP is how many warps overlap one coalesced
memory latency given the departure delay; CWP is how many instruction issue
windows fit inside that latency. Both are per-window quantities, so the
predicted time responds monotonically to every instruction count and to the
coalescing efficiency.
"""

from __future__ import annotations

from dataclasses import dataclass

from .calibration import ArchitectureSpec, CalibrationProfile
from .errors import EmptyGrid, ZeroBandwidth, ZeroComputeCycles, ZeroDelay
from .features import COMPUTE_UNITS, KernelFeatures
from .launch import InputResources


@dataclass(frozen=True)
class TimeBreakdown:
    """Predicted execution time and the quantities behind it."""

    mwp: float
    cwp: float
    bw_eff: float
    t_mem: float
    t_comp: float
    t_sync: float
    t_exec: float


def mwp(l_mem_coal: float, departure_delay: float) -> float:
    """Memory warp parallelism: coalesced latency over departure delay, floored at 1."""
    if departure_delay <= 0:
        raise ZeroDelay(f"departure delay must be positive, got {departure_delay}")
    return max(1.0, l_mem_coal / departure_delay)


def cwp(cycles_mem: float, cycles_comp: float) -> float:
    """Compute warp parallelism: (cycles_mem + cycles_comp) / cycles_comp, >= 1."""
    if cycles_comp <= 0:
        raise ZeroComputeCycles(f"compute cycles must be positive, got {cycles_comp}")
    return max(1.0, (cycles_mem + cycles_comp) / cycles_comp)


def _issue_window(features: KernelFeatures, arch: ArchitectureSpec) -> float:
    """Count-weighted exec/issue ratio over the compute units present.

    Per-window rather than per-total-count: scaling the mix by total counts
    would make CWP grow with memory work and shrink t_comp as n_mem rises,
    inverting the expected response.
    """
    weighted = 0.0
    total = 0.0
    for unit in COMPUTE_UNITS:
        if unit == "ALU":
            continue  # address/move traffic is excluded from the compute-time count
        count = features.n_comp_by_unit.get(unit, 0.0)
        weighted += count * (arch.exec_cycles[unit] / arch.issue_cycles[unit])
        total += count
    if total <= 0:
        return arch.exec_cycles["ALU"] / arch.issue_cycles["ALU"]
    return weighted / total


def wave_count(
    features: KernelFeatures, arch: ArchitectureSpec, resources: InputResources
) -> float:
    """How many full-occupancy waves the grid needs, floored at one.

    Total threads over concurrently resident lanes across the device; a grid
    that fits in a single wave runs at the per-warp cost.
    """
    total_blocks = resources.total_blocks
    if total_blocks <= 0:
        raise EmptyGrid("grid has zero blocks")
    resident_warps = min(features.blocks_per_sm * features.warps, arch.max_warps_per_sm)
    active_lanes = arch.sm_count * resident_warps * 32.0
    total_threads = total_blocks * features.warps * 32.0
    return max(1.0, total_threads / active_lanes)


def execution_time(
    features: KernelFeatures,
    profile: CalibrationProfile,
    arch: ArchitectureSpec,
    grid: InputResources,
) -> TimeBreakdown:
    """Weighted sum of memory, compute, and synchronisation time plus launch cost.

    t_mem divides the dynamic memory bytes by MWP times the effective
    bandwidth bw_max * eta; below eta = l_coal/l_uncoal the bandwidth floors
    at the fully serialised transaction rate, so eta = 0 stays finite.
    t_comp divides the compute count by CWP * IPC * f_base, t_sync charges
    one barrier latency per sync, and all work scales with the wave count.
    """
    waves = wave_count(features, arch, grid)
    mwp_value = mwp(profile.l_mem_coal, arch.departure_delay)
    window = _issue_window(features, arch)
    cwp_value = cwp(profile.l_mem_coal, window)

    serial_floor = (
        profile.l_mem_coal / profile.l_mem_uncoal if profile.l_mem_uncoal > 0 else 0.0
    )
    bw_eff = arch.bw_max * max(features.eta_coal, serial_floor)

    mem_bytes = features.mem_bytes * waves
    if mem_bytes > 0 and bw_eff <= 0:
        raise ZeroBandwidth(
            "effective bandwidth is zero with memory work pending; "
            "profile latencies cannot express the serial fallback"
        )
    t_mem = mem_bytes / (mwp_value * bw_eff) if mem_bytes > 0 else 0.0
    n_comp = features.n_comp * waves
    t_comp = n_comp / (cwp_value * arch.ipc * arch.f_base) if n_comp > 0 else 0.0
    t_sync = features.n_sync * waves * arch.t_barrier

    alpha_t, beta_t, gamma_t = profile.time_weights
    t_exec = alpha_t * t_mem + beta_t * t_comp + gamma_t * t_sync + profile.t_base
    return TimeBreakdown(
        mwp=mwp_value,
        cwp=cwp_value,
        bw_eff=bw_eff,
        t_mem=t_mem,
        t_comp=t_comp,
        t_sync=t_sync,
        t_exec=t_exec,
    )
