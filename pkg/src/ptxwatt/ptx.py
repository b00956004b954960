"""PTX text parsing: kernel selection, declarations, instruction classification.

The parser covers the instruction families emitted by nvcc for the kernels this
tool targets. Opcodes outside those families are kept (class ``Other``) so the
instruction stream stays complete, but they do not feed the models.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import MalformedPtx, NoKernelFound

OPCODE_CLASSES = ("MemLoad", "MemStore", "FP32", "INT", "SFU", "ALU", "Sync", "Branch", "Other")
STATE_SPACES = ("global", "shared", "local", "param", "reg", "none")

_ARITH_BASES = {"add", "sub", "mul", "mad", "fma", "div"}
_FLOAT_TYPES = {"f32", "f64"}
_INT_TYPES = {"s32", "u32", "s64", "u64"}
_SFU_BASES = {"sin", "cos", "ex2", "lg2", "rcp", "rsqrt"}
_ALU_BASES = {"mov", "setp", "and", "or", "shl", "shr", "cvt", "selp"}
_MEM_SPACES = ("global", "shared", "local", "param", "const")

_TYPE_BYTES = {
    "b8": 1, "s8": 1, "u8": 1,
    "b16": 2, "s16": 2, "u16": 2, "f16": 2, "bf16": 2,
    "b32": 4, "s32": 4, "u32": 4, "f32": 4,
    "b64": 8, "s64": 8, "u64": 8, "f64": 8,
}
_VECTOR_WIDTHS = {"v2": 2, "v4": 4}

_ENTRY_RE = re.compile(r"(?:\.visible\s+|\.weak\s+)?\.entry\s+([A-Za-z_$][\w$]*)")
_PARAM_RE = re.compile(
    r"\.param\s+(?:\.align\s+\d+\s+)?\.(\w+)\s+([\w$]+)(?:\[(\d+)\])?"
)
_REG_DECL_RE = re.compile(r"^\.reg\s+\.(\w+)\s+%[A-Za-z_]+<(\d+)>\s*;?$")
_SHARED_DECL_RE = re.compile(
    r"^\.shared\s+(?:\.align\s+\d+\s+)?\.(\w+)\s+[\w$]+(?:\[(\d+)\])?\s*;?$"
)
_LABEL_RE = re.compile(r"^([\w$.]+):\s*")
_PRED_RE = re.compile(r"^@(!?%[\w$]+)\s+")


@dataclass(frozen=True)
class Instruction:
    """One PTX statement with its model-facing classification."""

    opcode: str
    opcode_class: str
    state_space: str
    operands: tuple[str, ...]
    predicate: str | None
    source_line: int

    @property
    def base(self) -> str:
        return self.opcode.split(".", 1)[0]

    @property
    def is_memory(self) -> bool:
        return self.opcode_class in ("MemLoad", "MemStore")

    @property
    def access_bytes(self) -> int:
        """Byte width of one access for memory instructions (element size x vector width)."""
        tokens = self.opcode.split(".")
        width = 4
        for tok in tokens[1:]:
            if tok in _TYPE_BYTES:
                width = _TYPE_BYTES[tok]
        vec = 1
        for tok in tokens[1:]:
            if tok in _VECTOR_WIDTHS:
                vec = _VECTOR_WIDTHS[tok]
        return width * vec

    @property
    def address_operand(self) -> str | None:
        """The bracketed operand of a memory instruction, e.g. ``[%rd4+8]``."""
        for op in self.operands:
            if op.startswith("["):
                return op
        return None


@dataclass(frozen=True)
class PtxModule:
    """A parsed kernel: declarations plus the ordered instruction stream."""

    kernel_name: str
    parameters: tuple[tuple[str, str, int], ...]
    registers_declared: dict[str, int]
    static_shared_bytes: int
    instructions: tuple[Instruction, ...]
    labels: dict[str, int]


def classify_opcode(opcode: str) -> tuple[str, str]:
    """Map an opcode to (opcode_class, state_space).

    Sync covers barriers and any opcode whose final suffix is ``.sync``; the
    arithmetic families split into FP32/INT by their type suffix; address-space
    casts (cvta) and everything unlisted land in Other.
    """
    tokens = opcode.split(".")
    base = tokens[0]
    if base in ("bar", "barrier") or opcode.endswith(".sync"):
        return "Sync", "none"
    if base in ("ld", "ldu"):
        return "MemLoad", _memory_space(tokens)
    if base == "st":
        return "MemStore", _memory_space(tokens)
    if base == "bra":
        return "Branch", "none"
    if base in _ARITH_BASES:
        if any(t in _FLOAT_TYPES for t in tokens[1:]):
            return "FP32", "none"
        if any(t in _INT_TYPES for t in tokens[1:]):
            return "INT", "none"
        return "Other", "none"
    if base in _SFU_BASES:
        return "SFU", "none"
    if base == "sqrt" and "approx" in tokens:
        return "SFU", "none"
    if base in _ALU_BASES:
        return "ALU", "none"
    return "Other", "none"


def _memory_space(tokens: list[str]) -> str:
    for tok in tokens[1:]:
        if tok in _MEM_SPACES:
            # const behaves like param for our purposes: uniform, read-only
            return "param" if tok == "const" else tok
    return "none"


def _strip_comments(source: str) -> str:
    source = re.sub(r"/\*.*?\*/", lambda m: re.sub(r"[^\n]", " ", m.group(0)), source, flags=re.S)
    return re.sub(r"//[^\n]*", "", source)


def _split_operands(text: str) -> tuple[str, ...]:
    """Split an operand list on top-level commas, keeping [..] and {..} intact."""
    parts: list[str] = []
    depth = 0
    cur: list[str] = []
    for ch in text:
        if ch in "[{(":
            depth += 1
        elif ch in "]})":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(cur).strip())
            cur = []
        else:
            cur.append(ch)
    tail = "".join(cur).strip()
    if tail:
        parts.append(tail)
    return tuple(p for p in parts if p)


def _find_kernel(source: str, kernel_name: str | None) -> tuple[str, int, int]:
    """Locate the requested (or first) kernel; returns (name, body_start, body_end)."""
    found: list[str] = []
    for match in _ENTRY_RE.finditer(source):
        name = match.group(1)
        found.append(name)
        if kernel_name is not None and name != kernel_name:
            continue
        brace = source.find("{", match.end())
        if brace < 0:
            raise MalformedPtx(f"kernel {name!r} has no body")
        depth = 0
        for i in range(brace, len(source)):
            if source[i] == "{":
                depth += 1
            elif source[i] == "}":
                depth -= 1
                if depth == 0:
                    return name, brace + 1, i
        raise MalformedPtx(f"unbalanced braces in kernel {name!r}")
    if kernel_name is not None and found:
        raise NoKernelFound(f"kernel {kernel_name!r} not found; module has {found}")
    raise NoKernelFound("no .entry kernel in source")


def _parse_parameters(source: str, name: str, body_start: int) -> tuple[tuple[str, str, int], ...]:
    header_start = source.rfind(".entry", 0, body_start)
    header = source[header_start:body_start]
    open_paren = header.find("(")
    if open_paren < 0:
        return ()
    close_paren = header.find(")", open_paren)
    if close_paren < 0:
        raise MalformedPtx(f"kernel {name!r}: unterminated parameter list")
    params = []
    for ptype, pname, arr in _PARAM_RE.findall(header[open_paren:close_paren]):
        elem = _TYPE_BYTES.get(ptype, 0)
        size = int(arr) * elem if arr else elem
        params.append((pname, "param", size))
    return tuple(params)


def parse_ptx(source: str, kernel_name: str | None = None) -> PtxModule:
    """Parse PTX text into a PtxModule for one kernel.

    The first ``.entry`` kernel is selected unless ``kernel_name`` is given.
    Raises MalformedPtx for unbalanced braces, branches to undefined labels,
    or an empty kernel body, and NoKernelFound when no kernel matches.
    """
    clean = _strip_comments(source)
    name, body_start, body_end = _find_kernel(clean, kernel_name)
    parameters = _parse_parameters(clean, name, body_start)
    body = clean[body_start:body_end]
    first_line = clean.count("\n", 0, body_start) + 1

    registers: dict[str, int] = {}
    shared_bytes = 0
    instructions: list[Instruction] = []
    labels: dict[str, int] = {}
    pending = ""
    pending_line = first_line

    for offset, raw in enumerate(body.split("\n")):
        lineno = first_line + offset
        line = raw.strip()
        while line:
            if not pending:
                m = _LABEL_RE.match(line)
                if m:
                    labels[m.group(1).rstrip(":").rstrip()] = len(instructions)
                    line = line[m.end():].strip()
                    continue
                if line in ("{", "}"):
                    line = ""
                    continue
                if line.startswith("."):
                    stmt, _, line = line.partition(";")
                    stmt = stmt.strip()
                    line = line.strip()
                    m = _REG_DECL_RE.match(stmt + ";")
                    if m:
                        cls, count = m.group(1), int(m.group(2))
                        registers[cls] = registers.get(cls, 0) + count
                        continue
                    m = _SHARED_DECL_RE.match(stmt + ";")
                    if m:
                        elem = _TYPE_BYTES.get(m.group(1), 1)
                        count = int(m.group(2)) if m.group(2) else 1
                        shared_bytes += elem * count
                        continue
                    # other directives (.local, .maxntid, .loc, ...) are ignored
                    continue
            if ";" not in line:
                if not pending:
                    pending_line = lineno
                pending += " " + line
                line = ""
                continue
            stmt, _, line = line.partition(";")
            line = line.strip()
            full = (pending + " " + stmt).strip()
            start_line = pending_line if pending else lineno
            pending = ""
            if not full:
                continue
            instructions.append(_parse_instruction(full, start_line))

    if pending.strip():
        raise MalformedPtx(f"kernel {name!r}: unterminated statement {pending.strip()!r}")
    if not instructions:
        raise MalformedPtx(f"kernel {name!r} has an empty body")

    for ins in instructions:
        if ins.opcode_class == "Branch":
            target = ins.operands[-1] if ins.operands else ""
            if target not in labels:
                raise MalformedPtx(
                    f"kernel {name!r}: branch to undefined label {target!r} "
                    f"(line {ins.source_line})"
                )

    return PtxModule(
        kernel_name=name,
        parameters=parameters,
        registers_declared=registers,
        static_shared_bytes=shared_bytes,
        instructions=tuple(instructions),
        labels=labels,
    )


def _parse_instruction(text: str, lineno: int) -> Instruction:
    predicate = None
    m = _PRED_RE.match(text)
    if m:
        predicate = m.group(1)
        text = text[m.end():].strip()
    parts = text.split(None, 1)
    opcode = parts[0]
    operands = _split_operands(parts[1]) if len(parts) > 1 else ()
    opcode_class, state_space = classify_opcode(opcode)
    return Instruction(
        opcode=opcode,
        opcode_class=opcode_class,
        state_space=state_space,
        operands=operands,
        predicate=predicate,
        source_line=lineno,
    )
