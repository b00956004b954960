"""Evaluation metrics over prediction reports and measured power traces."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

from scipy import stats

from .errors import (
    DegenerateConstantInput,
    EmptyTrace,
    LengthMismatch,
    NonpositiveInput,
    RecommendedExceedsTotal,
    SchemaViolation,
    ZeroBaseline,
)


@dataclass(frozen=True)
class PowerTrace:
    """Sampled instantaneous power: (seconds, watts) pairs plus the nominal
    sampling interval used to close the final open interval."""

    samples: tuple[tuple[float, float], ...]
    dt_nominal: float

    def __post_init__(self):
        if not self.samples:
            raise EmptyTrace("power trace has no samples")
        times = [t for t, _ in self.samples]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("trace timestamps must be strictly increasing")
        if any(p < 0 for _, p in self.samples):
            raise ValueError("trace powers must be >= 0")


@dataclass(frozen=True)
class MetricReport:
    """Computed metrics; fields are None when their inputs were not supplied."""

    j_per_token: float | None = None
    delta_e_pct: float | None = None
    delta_thr_pct: float | None = None
    crr: float | None = None
    speedup: float | None = None
    greenup: float | None = None
    powerup: float | None = None
    divergence_pct: float | None = None
    spearman_rho: float | None = None

    def as_dict(self) -> dict:
        return {
            "j_per_token": self.j_per_token,
            "delta_e_pct": self.delta_e_pct,
            "delta_thr_pct": self.delta_thr_pct,
            "crr": self.crr,
            "speedup": self.speedup,
            "greenup": self.greenup,
            "powerup": self.powerup,
            "divergence_pct": self.divergence_pct,
            "spearman_rho": self.spearman_rho,
        }


def load_trace(path: str | Path, dt_nominal: float | None = None) -> PowerTrace:
    """Read a trace CSV with header t_s,p_w; dt defaults to the first interval."""
    samples: list[tuple[float, float]] = []
    with open(path, newline="") as handle:
        reader = csv.DictReader(handle)
        header = reader.fieldnames or []
        for col in ("t_s", "p_w"):
            if col not in header:
                raise SchemaViolation(f"{path}: missing column {col!r}")
        for i, row in enumerate(reader, start=2):
            try:
                samples.append((float(row["t_s"]), float(row["p_w"])))
            except (TypeError, ValueError):
                raise SchemaViolation(f"{path}:{i}: non-numeric trace sample")
    if not samples:
        raise EmptyTrace(f"{path}: no samples")
    if dt_nominal is None:
        dt_nominal = samples[1][0] - samples[0][0] if len(samples) > 1 else 1.0
    return PowerTrace(samples=tuple(samples), dt_nominal=dt_nominal)


def trace_energy(trace: PowerTrace) -> float:
    """Left-Riemann integral of the trace; the final sample is extended by the
    nominal sampling interval. No interpolation."""
    total = 0.0
    samples = trace.samples
    for (t0, p0), (t1, _) in zip(samples, samples[1:]):
        total += p0 * (t1 - t0)
    total += samples[-1][1] * trace.dt_nominal
    return total


def joules_per_token(trace: PowerTrace, batch: int, seq_len: int, n_runs: int) -> float:
    """Integrated trace energy normalised by batch * seq_len * n_runs tokens."""
    if n_runs < 1:
        raise ValueError(f"n_runs must be >= 1, got {n_runs}")
    if batch < 1 or seq_len < 1:
        raise ValueError("batch and seq_len must be >= 1")
    return trace_energy(trace) / (batch * seq_len * n_runs)


def delta_energy_pct(e_base: float, e_opt: float) -> float:
    """(E_base - E_opt) / E_base * 100."""
    if e_base <= 0:
        raise ZeroBaseline(f"baseline energy must be positive, got {e_base}")
    return (e_base - e_opt) / e_base * 100.0


def delta_throughput_pct(thr_opt: float, thr_base: float) -> float:
    """(Thr_opt - Thr_base) / Thr_base * 100."""
    if thr_base <= 0:
        raise ZeroBaseline(f"baseline throughput must be positive, got {thr_base}")
    return (thr_opt - thr_base) / thr_base * 100.0


def crr(total_configs: int, recommended: int) -> float:
    """Configuration reduction ratio: 1 - recommended/total."""
    if total_configs <= 0:
        raise ZeroBaseline(f"total configs must be positive, got {total_configs}")
    if recommended > total_configs:
        raise RecommendedExceedsTotal(
            f"recommended {recommended} exceeds total {total_configs}"
        )
    return 1.0 - recommended / total_configs


def greenup_speedup_powerup(
    e_base: float, t_base: float, e_cand: float, t_cand: float
) -> tuple[float, float, float, float]:
    """(greenup, speedup, powerup, divergence_pct) for a candidate vs baseline.

    greenup = E_base/E_cand, speedup = T_base/T_cand, powerup = P_cand/P_base
    with P = E/T, so greenup * powerup = speedup by construction. Divergence is
    |speedup - greenup| / speedup * 100.
    """
    if min(e_base, t_base, e_cand, t_cand) <= 0:
        raise NonpositiveInput("all energies and times must be positive")
    greenup = e_base / e_cand
    speedup = t_base / t_cand
    powerup = (e_cand / t_cand) / (e_base / t_base)
    divergence_pct = abs(speedup - greenup) / speedup * 100.0
    return greenup, speedup, powerup, divergence_pct


def spearman_rho(xs: list[float], ys: list[float]) -> float:
    """Spearman rank correlation with average ranks for ties."""
    if len(xs) != len(ys):
        raise LengthMismatch(f"length mismatch: {len(xs)} vs {len(ys)}")
    if len(xs) < 3:
        raise LengthMismatch(f"need at least 3 points, got {len(xs)}")
    if min(xs) == max(xs) or min(ys) == max(ys):
        raise DegenerateConstantInput("rank correlation undefined for constant input")
    rho = stats.spearmanr(xs, ys).statistic
    if math.isnan(rho):
        raise DegenerateConstantInput("rank correlation degenerated to NaN")
    return float(rho)
