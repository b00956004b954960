"""Dynamic kernel features: trip-weighted instruction counts, coalescing
efficiency, and launch-dependent occupancy inputs."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .alignment import analyze_memory_alignment
from .calibration import ArchitectureSpec
from .cfg import ControlFlowGraph
from .errors import InvalidConfig
from .launch import InputResources, LaunchConfig
from .ptx import PtxModule

COMPUTE_UNITS = ("FP32", "INT", "SFU", "ALU")

# state spaces whose loads/stores count as data traffic; param loads are
# kernel-argument setup and stay out of the memory-work totals
_TRAFFIC_SPACES = ("global", "shared", "local", "none")


@dataclass(frozen=True)
class KernelFeatures:
    """Per-thread dynamic counts plus the occupancy quantities of one launch."""

    n_mem: float
    n_comp_by_unit: dict[str, float]
    n_comp: float
    n_sync: float
    aligned_fraction: float
    eta_coal: float
    warps: int
    blocks_per_sm: float
    registers_per_thread: int
    shared_bytes: int
    mem_bytes: float

    def as_report_dict(self) -> dict:
        return {
            "n_mem": self.n_mem,
            "n_comp_by_unit": dict(self.n_comp_by_unit),
            "n_comp": self.n_comp,
            "n_sync": self.n_sync,
            "aligned_fraction": self.aligned_fraction,
            "eta_coal": self.eta_coal,
            "warps": self.warps,
            "blocks_per_sm": self.blocks_per_sm,
            "registers_per_thread": self.registers_per_thread,
            "shared_bytes": self.shared_bytes,
            "mem_bytes": self.mem_bytes,
        }


def coalescing_efficiency(block_x: int, aligned_fraction: float) -> float:
    """eta = min(1, block_x/32) * aligned_fraction."""
    if block_x < 1:
        raise InvalidConfig(f"block_x must be >= 1, got {block_x}")
    return min(1.0, block_x / 32.0) * aligned_fraction


def dynamic_instruction_counts(
    module: PtxModule, cfg: ControlFlowGraph
) -> tuple[float, float, dict[str, float], float]:
    """Trip-weighted per-thread counts: (n_mem, mem_bytes, n_comp_by_unit, n_sync)."""
    weights = cfg.block_weights()
    n_mem = 0.0
    mem_bytes = 0.0
    by_unit = {u: 0.0 for u in COMPUTE_UNITS}
    n_sync = 0.0
    for idx, ins in enumerate(module.instructions):
        w = weights[cfg.block_of(idx)]
        if ins.is_memory:
            if ins.state_space in _TRAFFIC_SPACES:
                n_mem += w
                mem_bytes += w * ins.access_bytes
        elif ins.opcode_class in by_unit:
            by_unit[ins.opcode_class] += w
        elif ins.opcode_class == "Sync":
            n_sync += w
    return n_mem, mem_bytes, by_unit, n_sync


def extract_features(
    module: PtxModule,
    cfg: ControlFlowGraph,
    config: LaunchConfig,
    resources: InputResources,
    arch: ArchitectureSpec,
) -> KernelFeatures:
    """Combine static analysis with one launch configuration.

    blocks_per_sm = min(MAX_WARPS/warps, MAX_SHARED/shared_bytes), the shared
    term dropping out when the kernel uses no shared memory.
    """
    threads = config.block_x * config.block_y
    if threads % 32 != 0:
        raise InvalidConfig(
            f"block {config.block_x}x{config.block_y}: {threads} threads not a multiple of 32"
        )
    if not 32 <= threads <= arch.max_threads_per_block:
        raise InvalidConfig(
            f"block {config.block_x}x{config.block_y}: {threads} threads outside "
            f"[32, {arch.max_threads_per_block}]"
        )

    n_mem, mem_bytes, by_unit, n_sync = dynamic_instruction_counts(module, cfg)
    n_comp = by_unit["FP32"] + by_unit["INT"] + by_unit["SFU"]

    warps = threads // 32
    shared_total = module.static_shared_bytes + resources.shared_mem_bytes
    warp_limit = arch.max_warps_per_sm / warps
    shared_limit = arch.max_shared_per_sm / shared_total if shared_total > 0 else math.inf
    blocks_per_sm = min(warp_limit, shared_limit)

    aligned = analyze_memory_alignment(module, cfg)
    return KernelFeatures(
        n_mem=n_mem,
        n_comp_by_unit=by_unit,
        n_comp=n_comp,
        n_sync=n_sync,
        aligned_fraction=aligned,
        eta_coal=coalescing_efficiency(config.block_x, aligned),
        warps=warps,
        blocks_per_sm=blocks_per_sm,
        registers_per_thread=sum(module.registers_declared.values()),
        shared_bytes=shared_total,
        mem_bytes=mem_bytes,
    )
