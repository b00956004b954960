from __future__ import annotations

import json
from pathlib import Path

import pytest

from ptxwatt import (
    ArchitectureSpec,
    CalibrationProfile,
    KernelFeatures,
    build_cfg,
    default_architecture,
    default_calibration,
    estimate_trip_counts,
    parse_ptx,
)

FIXTURES = Path(__file__).parent / "fixtures"
FIXTURE_NAMES = ("straight_line", "vecadd", "diamond", "counted_loop", "mha_like")


@pytest.fixture(scope="session")
def manifest() -> dict:
    return json.loads((FIXTURES / "manifest.json").read_text())


@pytest.fixture(scope="session")
def arch() -> ArchitectureSpec:
    return default_architecture()


@pytest.fixture(scope="session")
def profile() -> CalibrationProfile:
    return default_calibration()


def fixture_source(name: str) -> str:
    return (FIXTURES / f"{name}.ptx").read_text()


def parsed_fixture(name: str, default_trip: float = 32.0):
    """Parse a fixture and run the full static pipeline; returns (module, cfg)."""
    module = parse_ptx(fixture_source(name))
    cfg = estimate_trip_counts(build_cfg(module), module, default_trip=default_trip)
    return module, cfg


def make_features(
    n_mem=100.0,
    by_unit=None,
    n_sync=0.0,
    aligned=1.0,
    eta=1.0,
    warps=4,
    blocks_per_sm=12.0,
    shared=0,
    mem_bytes=None,
    registers=32,
) -> KernelFeatures:
    """Features object with direct control of every knob, for model tests."""
    by_unit = dict(by_unit or {"FP32": 200.0, "INT": 100.0, "SFU": 10.0, "ALU": 50.0})
    return KernelFeatures(
        n_mem=n_mem,
        n_comp_by_unit=by_unit,
        n_comp=by_unit["FP32"] + by_unit["INT"] + by_unit["SFU"],
        n_sync=n_sync,
        aligned_fraction=aligned,
        eta_coal=eta,
        warps=warps,
        blocks_per_sm=blocks_per_sm,
        registers_per_thread=registers,
        shared_bytes=shared,
        mem_bytes=mem_bytes if mem_bytes is not None else n_mem * 4.0,
    )
