"""Coalescing classification of global accesses via thread-index dataflow.

Registers are tracked through a single forward pass as affine functions of
%tid.x: each register carries a scale (0 means uniform across the block's
x-dimension) or is unknown. A global access is aligned when its address scale
equals the access byte width, i.e. consecutive x-threads touch consecutive
elements. Anything the pass cannot prove counts as unaligned.
"""

from __future__ import annotations

import re

from .cfg import ControlFlowGraph
from .ptx import PtxModule

_UNIFORM_SPECIALS = re.compile(
    r"%(ctaid|nctaid|ntid)\.[xyz]$|%gridid$|WARP_SZ$"
)

_ADDR_RE = re.compile(r"^\[\s*([^\]+]+?)\s*(?:\+\s*-?\d+)?\s*\]$")


def _int_literal(text: str) -> int | None:
    try:
        return int(text, 0)
    except ValueError:
        return None


def _operand_scale(op: str, scales: dict[str, int | None]) -> int | None:
    """Scale of an operand value: 0 for uniforms, 1 for %tid.x, None if unknown."""
    if op == "%tid.x":
        return 1
    if op.startswith("%tid.") or op in ("%laneid", "%warpid"):
        return None
    if _UNIFORM_SPECIALS.search(op):
        return 0
    if op.startswith("%"):
        return scales.get(op, None)
    if op.startswith(("0f", "0F", "0d", "0D")):
        return 0  # float immediate: uniform constant
    if _int_literal(op) is not None:
        return 0
    # bare identifier, e.g. a shared-variable symbol: same address for all threads
    return 0


def _combine_mul(a: str, b: str, scales: dict[str, int | None]) -> int | None:
    sa, sb = _operand_scale(a, scales), _operand_scale(b, scales)
    ia, ib = _int_literal(a), _int_literal(b)
    if sa == 0 and sb == 0:
        return 0
    if ib is not None and sa is not None:
        return sa * ib
    if ia is not None and sb is not None:
        return ia * sb
    return None


def trace_affine_scales(module: PtxModule) -> dict[int, int | None]:
    """Forward pass over the instruction stream; returns, per memory-instruction
    index, the affine scale of its address register (None when unknown).

    A single pass in program order: loop-carried redefinitions see the state
    from the previous textual occurrence, which is exact for uniform-stride
    pointer advances and conservative otherwise.
    """
    scales: dict[str, int | None] = {}
    address_scale: dict[int, int | None] = {}

    for idx, ins in enumerate(module.instructions):
        if ins.is_memory:
            addr = ins.address_operand
            if addr is not None:
                m = _ADDR_RE.match(addr)
                base = m.group(1).strip() if m else None
                if base is not None and base.startswith("%"):
                    address_scale[idx] = scales.get(base, None)
                elif base is not None:
                    address_scale[idx] = 0  # direct symbol address: uniform
                else:
                    address_scale[idx] = None
            if ins.opcode_class == "MemLoad" and ins.operands:
                dst = ins.operands[0]
                if dst.startswith("%"):
                    scales[dst] = 0 if ins.state_space == "param" else None
            continue

        if not ins.operands:
            continue
        dst = ins.operands[0]
        if not dst.startswith("%"):
            continue
        base = ins.base
        ops = ins.operands

        if base == "mov" and len(ops) == 2:
            scales[dst] = _operand_scale(ops[1], scales)
        elif base in ("cvt", "cvta") and len(ops) >= 2:
            scales[dst] = _operand_scale(ops[-1], scales)
        elif base == "add" and len(ops) == 3:
            sa, sb = _operand_scale(ops[1], scales), _operand_scale(ops[2], scales)
            scales[dst] = sa + sb if sa is not None and sb is not None else None
        elif base == "sub" and len(ops) == 3:
            sa, sb = _operand_scale(ops[1], scales), _operand_scale(ops[2], scales)
            scales[dst] = sa - sb if sa is not None and sb is not None else None
        elif base == "mul" and len(ops) == 3:
            scales[dst] = _combine_mul(ops[1], ops[2], scales)
        elif base in ("mad", "fma") and len(ops) == 4:
            prod = _combine_mul(ops[1], ops[2], scales)
            sc = _operand_scale(ops[3], scales)
            scales[dst] = prod + sc if prod is not None and sc is not None else None
        elif base == "shl" and len(ops) == 3:
            sa = _operand_scale(ops[1], scales)
            imm = _int_literal(ops[2])
            scales[dst] = sa * (1 << imm) if sa is not None and imm is not None else None
        elif base == "setp":
            pass  # writes a predicate, not a value register
        else:
            # unmodelled producer: uniform only if every register input is uniform
            srcs = [_operand_scale(o, scales) for o in ops[1:]]
            scales[dst] = 0 if srcs and all(s == 0 for s in srcs) else None

    return address_scale


def analyze_memory_alignment(module: PtxModule, cfg: ControlFlowGraph) -> float:
    """Trip-weighted fraction of global accesses with unit-element stride in
    %tid.x. Shared/local/param accesses are excluded; kernels with no global
    accesses report 1.0 (nothing to penalise)."""
    address_scale = trace_affine_scales(module)
    weights = cfg.block_weights()

    aligned = 0.0
    total = 0.0
    for idx, ins in enumerate(module.instructions):
        if not ins.is_memory or ins.state_space != "global":
            continue
        w = weights[cfg.block_of(idx)]
        total += w
        scale = address_scale.get(idx)
        if scale is not None and abs(scale) == ins.access_bytes:
            aligned += w
    if total == 0.0:
        return 1.0
    return aligned / total
