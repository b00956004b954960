"""Launch configurations and input-derived resources."""

from __future__ import annotations

from dataclasses import dataclass

from .calibration import ArchitectureSpec
from .errors import SharedMemOverflow


@dataclass(frozen=True, order=True)
class LaunchConfig:
    """One candidate operating point: block shape plus power cap."""

    block_x: int
    block_y: int
    p_cap: float

    @property
    def threads(self) -> int:
        return self.block_x * self.block_y


@dataclass(frozen=True)
class InputResources:
    """Workload-derived launch resources: dynamic shared memory and grid dims."""

    shared_mem_bytes: int
    grid_x: int = 1
    grid_y: int = 1
    grid_z: int = 1
    seq_len: int = 1
    batch: int = 1
    heads: int = 1

    @property
    def total_blocks(self) -> int:
        return self.grid_x * self.grid_y * self.grid_z


RESOURCE_RULES = ("mha", "generic")


def compute_input_resources(
    seq_len: int,
    batch: int,
    heads: int,
    head_dim: int,
    bytes_per_elem: int,
    arch: ArchitectureSpec,
    rule: str = "mha",
) -> InputResources:
    """Derive per-block shared memory and grid dimensions from workload dims.

    The "mha" rule models an attention kernel: one block per (head, batch)
    pair, with a shared tile of one head vector plus one score row, so
    shared = bytes_per_elem * (head_dim + seq_len). The "generic" rule keeps
    the same grid partitioning but claims no input-scaled shared memory.
    """
    if min(seq_len, batch, heads, head_dim, bytes_per_elem) < 1:
        raise ValueError("all workload dimensions must be >= 1")
    if rule not in RESOURCE_RULES:
        raise ValueError(f"unknown resource rule {rule!r}; expected one of {RESOURCE_RULES}")

    if rule == "mha":
        shared = bytes_per_elem * (head_dim + seq_len)
    else:
        shared = 0
    if shared > arch.max_shared_per_sm:
        raise SharedMemOverflow(
            f"workload needs {shared} B shared per block; "
            f"architecture provides {arch.max_shared_per_sm} B per SM"
        )
    return InputResources(
        shared_mem_bytes=shared,
        grid_x=heads,
        grid_y=batch,
        grid_z=1,
        seq_len=seq_len,
        batch=batch,
        heads=heads,
    )
