"""Hardware constants, fitted coefficients, and the fitting routines that
produce them from measurement files.

Measurements arrive as CSVs (see ``load_measurements``); nothing here touches
a GPU. The power-law fit uses a log-space seed refined by a damped
Gauss-Newton iteration and is fully deterministic.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    FitDiverged,
    InsufficientSamples,
    InsufficientVariation,
    NegativeDelta,
    SchemaViolation,
    ZeroRate,
    ZeroSustained,
)

UNIT_CLASSES = ("FP32", "INT", "SFU", "ALU", "Mem")

MEASUREMENT_KINDS = ("unit_saturation", "latency_sweep", "sm_sweep", "transient_pair", "shape_sweep")

_MEASUREMENT_COLUMNS = {
    "sm_sweep": ("n", "p_watts"),
    "unit_saturation": ("unit", "p_idle", "p_saturated", "max_ops_per_s"),
    "transient_pair": ("p_short", "p_sustained"),
    "shape_sweep": ("block_x", "block_y", "ci", "eta", "p_watts"),
    "latency_sweep": ("stride", "cycles"),
}


@dataclass(frozen=True)
class ArchitectureSpec:
    """Fixed hardware constants of one GPU model."""

    name: str
    sm_count: int
    max_warps_per_sm: int
    max_shared_per_sm: int
    max_threads_per_block: int
    bw_max: float
    ipc: float
    f_base: float
    p_tdp: float
    p_static: float
    p_cap_min: float
    dvfs_exponent_k: int
    tau_short: float
    departure_delay: float
    t_barrier: float
    exec_cycles: dict[str, float]
    issue_cycles: dict[str, float]


@dataclass(frozen=True)
class CalibrationProfile:
    """Fitted per-device coefficients consumed by the time and power models."""

    beta_u: dict[str, float]
    l_mem_coal: float
    l_mem_uncoal: float
    sm_power_alpha: float
    sm_power_beta: float
    sm_power_delta: float
    transient_ratio_r: float
    kappa: float
    lambda_: float
    p_base_shape: float
    p_mem_base: float
    time_weights: tuple[float, float, float] = (1.0, 1.0, 1.0)
    t_base: float = 0.0
    e_overhead: float = 0.0


@dataclass(frozen=True)
class MeasurementSet:
    """Rows from one microbenchmark CSV, labelled by what they measured."""

    kind: str
    rows: tuple[dict[str, float | str], ...]


def default_architecture() -> ArchitectureSpec:
    """A synthetic mid-range part; stands in until a real spec file exists."""
    return ArchitectureSpec(
        name="synthetic-48sm",
        sm_count=48,
        max_warps_per_sm=48,
        max_shared_per_sm=49152,
        max_threads_per_block=1024,
        bw_max=448e9,
        ipc=4.0,
        f_base=1.5e9,
        p_tdp=250.0,
        p_static=40.0,
        p_cap_min=100.0,
        dvfs_exponent_k=3,
        tau_short=1e-5,
        departure_delay=40.0,
        t_barrier=1e-7,
        exec_cycles={"FP32": 4.0, "INT": 4.0, "SFU": 16.0, "ALU": 2.0, "Mem": 400.0},
        issue_cycles={"FP32": 1.0, "INT": 1.0, "SFU": 4.0, "ALU": 1.0, "Mem": 4.0},
    )


def default_calibration() -> CalibrationProfile:
    """Plausible placeholder coefficients matching the synthetic architecture."""
    return CalibrationProfile(
        beta_u={"FP32": 2e-3, "INT": 1.5e-3, "SFU": 4e-3, "ALU": 1e-3, "Mem": 6e-3},
        l_mem_coal=400.0,
        l_mem_uncoal=800.0,
        sm_power_alpha=2.2,
        sm_power_beta=0.75,
        sm_power_delta=32.0,
        transient_ratio_r=0.833,
        kappa=0.12,
        lambda_=0.3,
        p_base_shape=12.0,
        p_mem_base=18.0,
        time_weights=(1.0, 1.0, 1.0),
        t_base=2e-6,
        e_overhead=1e-4,
    )


# --- fitting ----------------------------------------------------------------

def unit_power_coefficient(p_saturated: float, p_idle: float, max_ops_per_s: float) -> float:
    """beta_u = (P_saturated - P_idle) / peak ops/s for one functional unit."""
    if max_ops_per_s <= 0:
        raise ZeroRate(f"max_ops_per_s must be positive, got {max_ops_per_s}")
    if p_saturated < p_idle:
        raise NegativeDelta(
            f"saturated power {p_saturated} W below idle power {p_idle} W"
        )
    return (p_saturated - p_idle) / max_ops_per_s


def transient_ratio(p_short: float, p_sustained: float) -> float:
    """r = P_short / P_sustained, clamped to (0, 1]."""
    if p_sustained <= 0:
        raise ZeroSustained(f"sustained power must be positive, got {p_sustained}")
    if p_short <= 0:
        raise ZeroSustained(f"short-kernel power must be positive, got {p_short}")
    r = p_short / p_sustained
    if r > 1.0:
        warnings.warn(
            f"transient ratio {r:.3f} > 1; clamping to 1.0", stacklevel=2
        )
        return 1.0
    return r


def sm_power_model(n: np.ndarray | float, alpha: float, beta: float, delta: float):
    return alpha * np.power(n, beta) + delta


def fit_sm_power_law(samples: list[tuple[float, float]]) -> tuple[float, float, float]:
    """Least-squares fit of P(n) = alpha*n^beta + delta to (n, watts) samples.

    Seed: delta0 = 0.9*min(p), then a log-space line for (alpha, beta).
    Refinement: Gauss-Newton with step halving, at most 200 iterations,
    stopping when the relative residual change drops below 1e-12. A flat
    curve (beta ~ 0) is canonicalised to alpha = 0, delta = level.
    """
    distinct = {n for n, _ in samples}
    if len(distinct) < 4:
        raise InsufficientSamples(
            f"need >= 4 samples with distinct n, got {len(distinct)}"
        )
    if min(distinct) < 1:
        raise InsufficientSamples("sample n values must be >= 1")
    n = np.asarray([s[0] for s in samples], dtype=float)
    p = np.asarray([s[1] for s in samples], dtype=float)

    delta0 = 0.9 * float(p.min())
    z = np.maximum(p - delta0, 1e-12)
    beta0, log_alpha0 = np.polyfit(np.log(n), np.log(z), 1)
    theta = np.array([math.exp(log_alpha0), beta0, delta0])

    def residuals(t: np.ndarray) -> np.ndarray:
        return p - (t[0] * np.power(n, t[1]) + t[2])

    ssr = float(np.sum(residuals(theta) ** 2))
    for _ in range(200):
        r = residuals(theta)
        nb = np.power(n, theta[1])
        jac = np.column_stack([-nb, -theta[0] * nb * np.log(n), -np.ones_like(n)])
        step, *_ = np.linalg.lstsq(jac, -r, rcond=None)
        scale = 1.0
        improved = False
        for _ in range(40):
            trial = theta + scale * step
            if np.all(np.isfinite(trial)):
                trial_ssr = float(np.sum(residuals(trial) ** 2))
                if math.isfinite(trial_ssr) and trial_ssr <= ssr:
                    improved = True
                    break
            scale *= 0.5
        if not improved:
            break
        theta = trial
        prev, ssr = ssr, trial_ssr
        if abs(prev - ssr) <= 1e-12 * max(prev, 1e-300):
            break

    if not np.all(np.isfinite(theta)):
        raise FitDiverged(f"power-law fit produced non-finite parameters {theta}")
    alpha, beta, delta = (float(v) for v in theta)
    if abs(beta) < 1e-9:
        # alpha*n^0 is indistinguishable from the offset; fold it in
        alpha, beta, delta = 0.0, 0.0, delta + alpha
    return alpha, beta, delta


def fit_shape_coefficients(
    shape_sweep: MeasurementSet,
    profile: CalibrationProfile,
) -> tuple[float, float]:
    """Fit the aspect-ratio coefficient kappa, then the coalescing-penalty
    coefficient lambda, against measured block-shape power.

    Rows are (block_x, block_y, ci, eta, p_watts). kappa is the closed-form
    least-squares slope of the shape term with the lambda term held at the
    profile's current value; lambda is then fit with the new kappa fixed.
    Both are clamped at zero. A well-designed sweep decouples the two:
    aspect-ratio rows at eta = 1 and stride rows at square shapes.
    """
    if shape_sweep.kind != "shape_sweep":
        raise ValueError(f"expected a shape_sweep, got {shape_sweep.kind!r}")
    rows = shape_sweep.rows
    ratios = {float(r["block_x"]) / float(r["block_y"]) for r in rows}
    etas = {float(r["eta"]) for r in rows}
    if len(ratios) < 2:
        raise InsufficientVariation(
            "shape sweep has a single aspect ratio; kappa is unidentifiable"
        )
    if len(etas) < 2:
        raise InsufficientVariation(
            "shape sweep has a single eta value; lambda is unidentifiable"
        )

    bx = np.asarray([float(r["block_x"]) for r in rows])
    by = np.asarray([float(r["block_y"]) for r in rows])
    ci = np.asarray([float(r["ci"]) for r in rows])
    eta = np.asarray([float(r["eta"]) for r in rows])
    watts = np.asarray([float(r["p_watts"]) for r in rows])

    pb, pm = profile.p_base_shape, profile.p_mem_base
    g = np.abs(np.log(bx / by)) / (1.0 + ci)
    h = 1.0 - eta

    mem_now = pm * (1.0 + profile.lambda_ * h)
    num = float(np.sum((watts - pb - mem_now) * pb * g))
    den = float(np.sum((pb * g) ** 2))
    kappa = max(0.0, num / den) if den > 0 else 0.0

    shape_now = pb * (1.0 + kappa * g)
    num = float(np.sum((watts - shape_now - pm) * pm * h))
    den = float(np.sum((pm * h) ** 2))
    lam = max(0.0, num / den) if den > 0 else 0.0
    return kappa, lam


def latency_pair(latency: MeasurementSet) -> tuple[float, float]:
    """Coalesced/uncoalesced memory latency from a stride sweep: the unit-stride
    row is the coalesced latency, the largest stride the uncoalesced one."""
    if latency.kind != "latency_sweep":
        raise ValueError(f"expected a latency_sweep, got {latency.kind!r}")
    rows = sorted(latency.rows, key=lambda r: float(r["stride"]))
    return float(rows[0]["cycles"]), float(rows[-1]["cycles"])


# --- measurement files ------------------------------------------------------

def load_measurements(path: str | Path, kind: str) -> MeasurementSet:
    """Read one measurement CSV, checking its header and that values are finite."""
    if kind not in MEASUREMENT_KINDS:
        raise ValueError(f"unknown measurement kind {kind!r}")
    columns = _MEASUREMENT_COLUMNS[kind]
    rows: list[dict[str, float | str]] = []
    with open(path, newline="") as handle:
        reader = csv.DictReader(handle)
        header = reader.fieldnames or []
        for col in columns:
            if col not in header:
                raise SchemaViolation(f"{path}: missing column {col!r} for {kind}")
        for i, raw in enumerate(reader, start=2):
            row: dict[str, float | str] = {}
            for col in columns:
                value = raw[col]
                if col == "unit":
                    if value not in UNIT_CLASSES:
                        raise SchemaViolation(
                            f"{path}:{i}: unknown unit {value!r}; expected one of {UNIT_CLASSES}"
                        )
                    row[col] = value
                    continue
                try:
                    num = float(value)
                except (TypeError, ValueError):
                    raise SchemaViolation(f"{path}:{i}: column {col!r} is not numeric: {value!r}")
                if not math.isfinite(num):
                    raise SchemaViolation(f"{path}:{i}: column {col!r} must be finite")
                row[col] = num
            rows.append(row)
    if not rows:
        raise SchemaViolation(f"{path}: no data rows")
    return MeasurementSet(kind=kind, rows=tuple(rows))


# --- profile (de)serialisation ----------------------------------------------

_ARCH_NUMERIC = (
    "sm_count", "max_warps_per_sm", "max_shared_per_sm", "max_threads_per_block",
    "bw_max", "ipc", "f_base", "p_tdp", "p_static", "dvfs_exponent_K",
    "tau_short", "departure_delay", "t_barrier",
)


def _need(obj: dict, key: str, path: str):
    if key not in obj:
        raise SchemaViolation(f"{path}.{key}: missing")
    return obj[key]


def _number(obj: dict, key: str, path: str) -> float:
    value = _need(obj, key, path)
    if not isinstance(value, (int, float)) or isinstance(value, bool) or not math.isfinite(value):
        raise SchemaViolation(f"{path}.{key}: must be a finite number")
    return float(value)


def _cycles_map(obj: dict, key: str, path: str) -> dict[str, float]:
    raw = _need(obj, key, path)
    if not isinstance(raw, dict):
        raise SchemaViolation(f"{path}.{key}: must be a mapping of unit class to cycles")
    out = {}
    for unit in UNIT_CLASSES:
        value = _number(raw, unit, f"{path}.{key}")
        if value <= 0:
            raise SchemaViolation(f"{path}.{key}.{unit}: must be > 0")
        out[unit] = value
    return out


def architecture_from_dict(obj: dict, path: str = "architecture") -> ArchitectureSpec:
    if not isinstance(obj, dict):
        raise SchemaViolation(f"{path}: must be an object")
    name = _need(obj, "name", path)
    if not isinstance(name, str) or not name:
        raise SchemaViolation(f"{path}.name: must be a non-empty string")
    values = {key: _number(obj, key, path) for key in _ARCH_NUMERIC}
    for key, value in values.items():
        if value <= 0:
            raise SchemaViolation(f"{path}.{key}: must be > 0")
    p_cap_min = _number(obj, "p_cap_min", path)
    if p_cap_min < 0 or p_cap_min > values["p_tdp"]:
        raise SchemaViolation(f"{path}.p_cap_min: must be in [0, p_tdp]")
    k = values["dvfs_exponent_K"]
    if k != int(k) or int(k) < 1:
        raise SchemaViolation(f"{path}.dvfs_exponent_K: must be a positive integer")
    return ArchitectureSpec(
        name=name,
        sm_count=int(values["sm_count"]),
        max_warps_per_sm=int(values["max_warps_per_sm"]),
        max_shared_per_sm=int(values["max_shared_per_sm"]),
        max_threads_per_block=int(values["max_threads_per_block"]),
        bw_max=values["bw_max"],
        ipc=values["ipc"],
        f_base=values["f_base"],
        p_tdp=values["p_tdp"],
        p_static=values["p_static"],
        p_cap_min=p_cap_min,
        dvfs_exponent_k=int(k),
        tau_short=values["tau_short"],
        departure_delay=values["departure_delay"],
        t_barrier=values["t_barrier"],
        exec_cycles=_cycles_map(obj, "exec_cycles", path),
        issue_cycles=_cycles_map(obj, "issue_cycles", path),
    )


def architecture_to_dict(arch: ArchitectureSpec) -> dict:
    return {
        "name": arch.name,
        "sm_count": arch.sm_count,
        "max_warps_per_sm": arch.max_warps_per_sm,
        "max_shared_per_sm": arch.max_shared_per_sm,
        "max_threads_per_block": arch.max_threads_per_block,
        "bw_max": arch.bw_max,
        "ipc": arch.ipc,
        "f_base": arch.f_base,
        "p_tdp": arch.p_tdp,
        "p_static": arch.p_static,
        "p_cap_min": arch.p_cap_min,
        "dvfs_exponent_K": arch.dvfs_exponent_k,
        "tau_short": arch.tau_short,
        "departure_delay": arch.departure_delay,
        "t_barrier": arch.t_barrier,
        "exec_cycles": dict(arch.exec_cycles),
        "issue_cycles": dict(arch.issue_cycles),
    }


def calibration_from_dict(obj: dict, path: str = "calibration") -> CalibrationProfile:
    if not isinstance(obj, dict):
        raise SchemaViolation(f"{path}: must be an object")
    raw_beta = _need(obj, "beta_u", path)
    if not isinstance(raw_beta, dict):
        raise SchemaViolation(f"{path}.beta_u: must be a mapping of unit class to W/(op/s)")
    beta_u = {}
    for unit in UNIT_CLASSES:
        value = _number(raw_beta, unit, f"{path}.beta_u")
        if value < 0:
            raise SchemaViolation(f"{path}.beta_u.{unit}: must be >= 0")
        beta_u[unit] = value

    l_coal = _number(obj, "l_mem_coal", path)
    l_uncoal = _number(obj, "l_mem_uncoal", path)
    if l_coal < 0:
        raise SchemaViolation(f"{path}.l_mem_coal: must be >= 0")
    if l_uncoal < l_coal:
        raise SchemaViolation(f"{path}.l_mem_uncoal: must be >= l_mem_coal")

    r = _number(obj, "transient_ratio_r", path)
    if not 0 < r <= 1:
        raise SchemaViolation(f"{path}.transient_ratio_r: must be in (0, 1]")

    kappa = _number(obj, "kappa", path)
    lam = _number(obj, "lambda", path)
    if kappa < 0:
        raise SchemaViolation(f"{path}.kappa: must be >= 0")
    if lam < 0:
        raise SchemaViolation(f"{path}.lambda: must be >= 0")

    nonneg = {}
    for key in ("sm_power_alpha", "sm_power_delta", "p_base_shape", "p_mem_base",
                "t_base", "e_overhead"):
        value = _number(obj, key, path)
        if value < 0:
            raise SchemaViolation(f"{path}.{key}: must be >= 0")
        nonneg[key] = value
    sm_beta = _number(obj, "sm_power_beta", path)

    weights = _need(obj, "time_weights", path)
    if (not isinstance(weights, (list, tuple)) or len(weights) != 3
            or any(not isinstance(w, (int, float)) or isinstance(w, bool)
                   or not math.isfinite(w) or w < 0 for w in weights)):
        raise SchemaViolation(f"{path}.time_weights: must be three numbers >= 0")

    return CalibrationProfile(
        beta_u=beta_u,
        l_mem_coal=l_coal,
        l_mem_uncoal=l_uncoal,
        sm_power_alpha=nonneg["sm_power_alpha"],
        sm_power_beta=sm_beta,
        sm_power_delta=nonneg["sm_power_delta"],
        transient_ratio_r=r,
        kappa=kappa,
        lambda_=lam,
        p_base_shape=nonneg["p_base_shape"],
        p_mem_base=nonneg["p_mem_base"],
        time_weights=tuple(float(w) for w in weights),
        t_base=nonneg["t_base"],
        e_overhead=nonneg["e_overhead"],
    )


def calibration_to_dict(profile: CalibrationProfile) -> dict:
    return {
        "beta_u": dict(profile.beta_u),
        "l_mem_coal": profile.l_mem_coal,
        "l_mem_uncoal": profile.l_mem_uncoal,
        "sm_power_alpha": profile.sm_power_alpha,
        "sm_power_beta": profile.sm_power_beta,
        "sm_power_delta": profile.sm_power_delta,
        "transient_ratio_r": profile.transient_ratio_r,
        "kappa": profile.kappa,
        "lambda": profile.lambda_,
        "p_base_shape": profile.p_base_shape,
        "p_mem_base": profile.p_mem_base,
        "time_weights": list(profile.time_weights),
        "t_base": profile.t_base,
        "e_overhead": profile.e_overhead,
    }


def load_profile(path: str | Path) -> tuple[ArchitectureSpec, CalibrationProfile]:
    """Read a combined architecture + calibration JSON file."""
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaViolation(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(obj, dict):
        raise SchemaViolation(f"{path}: top level must be an object")
    arch = architecture_from_dict(_need(obj, "architecture", str(path)))
    profile = calibration_from_dict(_need(obj, "calibration", str(path)))
    return arch, profile


def load_architecture(path: str | Path) -> ArchitectureSpec:
    """Read an architecture spec from a combined or architecture-only JSON file."""
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaViolation(f"{path}: not valid JSON ({exc})") from exc
    if isinstance(obj, dict) and "architecture" in obj:
        return architecture_from_dict(obj["architecture"])
    return architecture_from_dict(obj if isinstance(obj, dict) else {})


def save_profile(
    path: str | Path, arch: ArchitectureSpec, profile: CalibrationProfile
) -> None:
    """Write a combined profile file; load_profile(save_profile(...)) is identity.

    The payload is validated before writing so a saved profile always loads.
    """
    payload = {
        "architecture": architecture_to_dict(arch),
        "calibration": calibration_to_dict(profile),
    }
    architecture_from_dict(payload["architecture"])
    calibration_from_dict(payload["calibration"])
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
