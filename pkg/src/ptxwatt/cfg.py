"""Control-flow reconstruction: basic blocks, edges, natural loops, trip counts."""

from __future__ import annotations

from dataclasses import dataclass, replace

from .errors import AnnotationForUnknownLoop
from .ptx import PtxModule

_TERMINATORS = ("ret", "exit")

_CMP_INVERSE = {"lt": "ge", "ge": "lt", "le": "gt", "gt": "le", "eq": "ne", "ne": "eq"}


@dataclass(frozen=True)
class Loop:
    """A natural loop: header block index, body block indices, trip estimate."""

    header: int
    body: frozenset[int]
    trip: float | None = None
    header_label: str | None = None


@dataclass(frozen=True)
class ControlFlowGraph:
    """Basic blocks over a PtxModule's instruction list.

    Blocks are (start, end) index pairs with ``end`` exclusive; concatenated in
    order they reproduce the instruction list exactly.
    """

    blocks: tuple[tuple[int, int], ...]
    edges: tuple[tuple[int, int], ...]
    loops: tuple[Loop, ...]

    def block_of(self, instr_index: int) -> int:
        for b, (start, end) in enumerate(self.blocks):
            if start <= instr_index < end:
                return b
        raise IndexError(f"instruction index {instr_index} outside all blocks")

    def block_weights(self) -> list[float]:
        """Per-block dynamic multiplier: product of trips of enclosing loops.

        Requires estimate_trip_counts to have run (every loop carries a trip).
        """
        weights = [1.0] * len(self.blocks)
        for loop in self.loops:
            if loop.trip is None:
                raise ValueError("trip counts not estimated; run estimate_trip_counts first")
            for b in loop.body:
                weights[b] *= loop.trip
        return weights


def build_cfg(module: PtxModule) -> ControlFlowGraph:
    """Split the instruction list into basic blocks and discover natural loops.

    Blocks break at labels and after branches/terminators; back edges whose
    target dominates their source identify loops.
    """
    n = len(module.instructions)
    leaders = {0}
    for idx in module.labels.values():
        if idx < n:
            leaders.add(idx)
    for i, ins in enumerate(module.instructions):
        if ins.opcode_class == "Branch" or ins.base in _TERMINATORS:
            if i + 1 < n:
                leaders.add(i + 1)

    starts = sorted(leaders)
    blocks = tuple(
        (start, starts[k + 1] if k + 1 < len(starts) else n)
        for k, start in enumerate(starts)
    )
    start_to_block = {start: k for k, (start, _) in enumerate(blocks)}

    edges: list[tuple[int, int]] = []
    for b, (start, end) in enumerate(blocks):
        last = module.instructions[end - 1]
        if last.opcode_class == "Branch":
            target_idx = module.labels[last.operands[-1]]
            if target_idx < n:
                edges.append((b, start_to_block[target_idx]))
            if last.predicate is not None and b + 1 < len(blocks):
                edges.append((b, b + 1))
        elif last.base in _TERMINATORS:
            pass
        elif b + 1 < len(blocks):
            edges.append((b, b + 1))

    loops = _find_loops(blocks, edges, module)
    return ControlFlowGraph(blocks=blocks, edges=tuple(edges), loops=loops)


def _find_loops(
    blocks: tuple[tuple[int, int], ...],
    edges: list[tuple[int, int]],
    module: PtxModule,
) -> tuple[Loop, ...]:
    nblocks = len(blocks)
    preds: list[list[int]] = [[] for _ in range(nblocks)]
    for u, v in edges:
        preds[v].append(u)

    # iterative dominator sets; CFGs here are tiny
    full = set(range(nblocks))
    doms = [full.copy() for _ in range(nblocks)]
    doms[0] = {0}
    changed = True
    while changed:
        changed = False
        for b in range(1, nblocks):
            new = full.copy()
            for p in preds[b]:
                new &= doms[p]
            new |= {b}
            if new != doms[b]:
                doms[b] = new
                changed = True

    bodies: dict[int, set[int]] = {}
    for u, h in edges:
        if h not in doms[u]:
            continue
        body = {h, u}
        stack = [u]
        while stack:
            node = stack.pop()
            if node == h:
                continue
            for p in preds[node]:
                if p not in body:
                    body.add(p)
                    stack.append(p)
        bodies.setdefault(h, set()).update(body)

    label_at = {idx: name for name, idx in module.labels.items()}
    loops = []
    for header in sorted(bodies):
        loops.append(
            Loop(
                header=header,
                body=frozenset(bodies[header]),
                trip=None,
                header_label=label_at.get(blocks[header][0]),
            )
        )
    return tuple(loops)


def estimate_trip_counts(
    cfg: ControlFlowGraph,
    module: PtxModule,
    default_trip: float = 32.0,
    annotations: dict[str, float] | None = None,
) -> ControlFlowGraph:
    """Attach a trip estimate to every loop.

    Precedence: annotation override (keyed by header label), then detected
    constant-bound counted loop, then ``default_trip``.
    """
    annotations = dict(annotations or {})
    known = {loop.header_label for loop in cfg.loops if loop.header_label}
    for key in annotations:
        if key not in known:
            raise AnnotationForUnknownLoop(
                f"annotation {key!r} does not name a loop header (known: {sorted(known)})"
            )

    new_loops = []
    for loop in cfg.loops:
        if loop.header_label in annotations:
            trip = float(annotations[loop.header_label])
        else:
            detected = _detect_counted_trip(loop, cfg, module)
            trip = detected if detected is not None else float(default_trip)
        new_loops.append(replace(loop, trip=max(1.0, trip)))
    return replace(cfg, loops=tuple(new_loops))


def _int_literal(text: str) -> int | None:
    try:
        return int(text, 0)
    except ValueError:
        return None


def _detect_counted_trip(loop: Loop, cfg: ControlFlowGraph, module: PtxModule) -> float | None:
    """Recognise the counted do-while nvcc emits: one induction register stepped
    by an immediate, compared against an immediate bound by the latch setp."""
    header_start = cfg.blocks[loop.header][0]
    body_range = [
        i
        for b in sorted(loop.body)
        for i in range(cfg.blocks[b][0], cfg.blocks[b][1])
    ]

    latch = None
    for i in body_range:
        ins = module.instructions[i]
        if ins.opcode_class == "Branch" and ins.predicate is not None:
            target = module.labels.get(ins.operands[-1])
            if target is not None and target == header_start:
                latch = ins
    if latch is None:
        return None
    negated = latch.predicate.startswith("!")
    pred_reg = latch.predicate.lstrip("!")

    compare = None
    for i in body_range:
        ins = module.instructions[i]
        if ins.base == "setp" and ins.operands and ins.operands[0] == pred_reg:
            compare = ins
    if compare is None or len(compare.operands) < 3:
        return None
    counter = compare.operands[1]
    bound = _int_literal(compare.operands[2])
    if bound is None or not counter.startswith("%"):
        return None
    cmp = next((t for t in compare.opcode.split(".") if t in _CMP_INVERSE), None)
    if cmp is None:
        return None
    if negated:
        cmp = _CMP_INVERSE[cmp]

    stride = None
    for i in body_range:
        ins = module.instructions[i]
        if ins.base in ("add", "sub") and len(ins.operands) == 3:
            if ins.operands[0] == counter and ins.operands[1] == counter:
                imm = _int_literal(ins.operands[2])
                if imm is None:
                    return None
                step = -imm if ins.base == "sub" else imm
                if stride is not None:
                    return None  # multiple updates: not a simple counter
                stride = step
    if not stride:
        return None

    init = None
    for i in range(header_start):
        ins = module.instructions[i]
        if ins.operands and ins.operands[0] == counter:
            if ins.base == "mov" and len(ins.operands) == 2:
                init = _int_literal(ins.operands[1])
            else:
                init = None
    if init is None:
        return None

    return _do_while_trip(init, stride, bound, cmp)


def _do_while_trip(init: int, stride: int, bound: int, cmp: str) -> float | None:
    """Body executions of: x = init; do {...; x += stride} while (x cmp bound)."""
    import math

    if cmp == "lt" and stride > 0:
        trips = math.ceil((bound - init) / stride)
    elif cmp == "le" and stride > 0:
        trips = math.floor((bound - init) / stride) + 1
    elif cmp == "gt" and stride < 0:
        trips = math.ceil((init - bound) / -stride)
    elif cmp == "ge" and stride < 0:
        trips = math.floor((init - bound) / -stride) + 1
    elif cmp == "ne":
        span = bound - init
        if stride != 0 and span % stride == 0 and span // stride > 0:
            trips = span // stride
        else:
            return None
    else:
        return None
    return float(max(1, trips))
