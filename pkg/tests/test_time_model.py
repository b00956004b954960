from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest

from ptxwatt import InputResources, LaunchConfig, cwp, execution_time, extract_features, mwp
from ptxwatt.errors import ZeroComputeCycles, ZeroDelay

from conftest import make_features, parsed_fixture


def test_mwp_arithmetic():
    assert mwp(400.0, 40.0) == 10.0
    assert mwp(40.0, 40.0) == 1.0
    assert mwp(20.0, 40.0) == 1.0  # floored


def test_mwp_zero_delay():
    with pytest.raises(ZeroDelay):
        mwp(400.0, 0.0)


def test_cwp_arithmetic():
    assert cwp(0.0, 100.0) == 1.0
    assert cwp(300.0, 100.0) == 4.0


def test_cwp_zero_compute():
    with pytest.raises(ZeroComputeCycles):
        cwp(100.0, 0.0)


def _single_wave_grid() -> InputResources:
    return InputResources(shared_mem_bytes=0, grid_x=1, grid_y=1, grid_z=1)


def test_compute_only_time(arch, profile):
    # pure compute: 1e6 FP32 ops, CWP pinned to 1 via zero memory latency
    feats = make_features(
        n_mem=0.0, mem_bytes=0.0, n_sync=0.0,
        by_unit={"FP32": 1e6, "INT": 0.0, "SFU": 0.0, "ALU": 0.0},
        warps=1, blocks_per_sm=48.0,
    )
    arch = replace(arch, ipc=4.0, f_base=1e9, exec_cycles={**arch.exec_cycles, "FP32": 4.0},
                   issue_cycles={**arch.issue_cycles, "FP32": 1.0})
    profile = replace(profile, l_mem_coal=0.0, time_weights=(1.0, 1.0, 1.0), t_base=0.0)
    breakdown = execution_time(feats, profile, arch, _single_wave_grid())
    assert breakdown.cwp == 1.0
    assert breakdown.t_mem == 0.0
    assert breakdown.t_sync == 0.0
    assert breakdown.t_exec == 2.5e-4


def test_all_zero_counts_give_t_base(arch, profile):
    feats = make_features(
        n_mem=0.0, mem_bytes=0.0, n_sync=0.0,
        by_unit={"FP32": 0.0, "INT": 0.0, "SFU": 0.0, "ALU": 0.0},
    )
    profile = replace(profile, t_base=3.5e-6)
    breakdown = execution_time(feats, profile, arch, _single_wave_grid())
    assert breakdown.t_exec == 3.5e-6


def test_vecadd_matches_hand_evaluated_formula(arch, profile):
    module, cfg = parsed_fixture("vecadd", default_trip=1.0)
    config = LaunchConfig(1, 32, arch.p_tdp)
    resources = InputResources(shared_mem_bytes=0, grid_x=4, grid_y=1, grid_z=1)
    feats = extract_features(module, cfg, config, resources, arch)
    breakdown = execution_time(feats, profile, arch, resources)

    # spreadsheet-style evaluation of the same chain
    mwp_v = max(1.0, profile.l_mem_coal / arch.departure_delay)
    window = (1 * 4.0 + 5 * 4.0 + 0 * 16.0) / 6.0  # count-weighted exec/issue
    cwp_v = (profile.l_mem_coal + window) / window
    eta = min(1.0, 1 / 32) * 1.0
    bw_eff = arch.bw_max * max(eta, profile.l_mem_coal / profile.l_mem_uncoal)
    waves = 1.0  # 4 blocks of 1 warp fit in one wave
    t_mem = 12.0 * waves / (mwp_v * bw_eff)
    t_comp = 6.0 * waves / (cwp_v * arch.ipc * arch.f_base)
    expected = t_mem + t_comp + profile.t_base

    assert math.isclose(breakdown.t_exec, expected, rel_tol=1e-12)
    assert breakdown.mwp == mwp_v
    assert math.isclose(breakdown.cwp, cwp_v, rel_tol=1e-12)


def test_additivity(arch, profile):
    rng = np.random.default_rng(11)
    for _ in range(50):
        feats = make_features(
            n_mem=float(rng.integers(0, 500)),
            n_sync=float(rng.integers(0, 20)),
            by_unit={
                "FP32": float(rng.integers(0, 1000)),
                "INT": float(rng.integers(0, 1000)),
                "SFU": float(rng.integers(0, 100)),
                "ALU": float(rng.integers(0, 500)),
            },
            eta=float(rng.uniform(0, 1)),
        )
        weights = tuple(float(w) for w in rng.uniform(0.2, 2.0, size=3))
        p = replace(profile, time_weights=weights, t_base=float(rng.uniform(0, 1e-5)))
        b = execution_time(feats, p, arch, _single_wave_grid())
        lhs = b.t_exec - p.t_base
        rhs = weights[0] * b.t_mem + weights[1] * b.t_comp + weights[2] * b.t_sync
        assert math.isclose(lhs, rhs, rel_tol=1e-12, abs_tol=1e-30)


def test_monotone_nonincreasing_in_eta(arch, profile):
    rng = np.random.default_rng(23)
    for _ in range(200):
        feats = make_features(
            n_mem=float(rng.integers(1, 1000)),
            by_unit={
                "FP32": float(rng.integers(0, 2000)),
                "INT": float(rng.integers(0, 2000)),
                "SFU": float(rng.integers(0, 200)),
                "ALU": float(rng.integers(0, 1000)),
            },
            n_sync=float(rng.integers(0, 10)),
        )
        e1, e2 = sorted(rng.uniform(0.0, 1.0, size=2))
        t_low = execution_time(replace(feats, eta_coal=e1), profile, arch, _single_wave_grid())
        t_high = execution_time(replace(feats, eta_coal=e2), profile, arch, _single_wave_grid())
        assert t_high.t_exec <= t_low.t_exec + 1e-18


def test_monotone_nondecreasing_in_counts(arch, profile):
    rng = np.random.default_rng(29)
    for _ in range(200):
        by_unit = {
            "FP32": float(rng.integers(0, 2000)),
            "INT": float(rng.integers(0, 2000)),
            "SFU": float(rng.integers(0, 200)),
            "ALU": float(rng.integers(0, 1000)),
        }
        feats = make_features(
            n_mem=float(rng.integers(0, 1000)),
            by_unit=by_unit,
            n_sync=float(rng.integers(0, 10)),
            eta=float(rng.uniform(0, 1)),
        )
        base = execution_time(feats, profile, arch, _single_wave_grid()).t_exec

        more_mem = replace(
            feats, n_mem=feats.n_mem + 10, mem_bytes=feats.mem_bytes + 40.0
        )
        assert execution_time(more_mem, profile, arch, _single_wave_grid()).t_exec >= base - 1e-18

        unit = ("FP32", "INT", "SFU")[int(rng.integers(0, 3))]
        bumped = dict(by_unit)
        bumped[unit] += 50.0
        more_comp = replace(
            feats,
            n_comp_by_unit=bumped,
            n_comp=bumped["FP32"] + bumped["INT"] + bumped["SFU"],
        )
        assert execution_time(more_comp, profile, arch, _single_wave_grid()).t_exec >= base - 1e-18

        more_sync = replace(feats, n_sync=feats.n_sync + 3)
        assert execution_time(more_sync, profile, arch, _single_wave_grid()).t_exec >= base - 1e-18


def test_doubling_counts_doubles_time_above_base(arch, profile):
    feats = make_features(n_mem=300.0, n_sync=4.0)
    doubled = replace(
        feats,
        n_mem=feats.n_mem * 2,
        mem_bytes=feats.mem_bytes * 2,
        n_sync=feats.n_sync * 2,
        n_comp=feats.n_comp * 2,
        n_comp_by_unit={u: 2 * c for u, c in feats.n_comp_by_unit.items()},
    )
    grid = _single_wave_grid()
    t1 = execution_time(feats, profile, arch, grid)
    t2 = execution_time(doubled, profile, arch, grid)
    assert math.isclose(t2.t_exec - profile.t_base, 2 * (t1.t_exec - profile.t_base), rel_tol=1e-12)


def test_eta_zero_uses_serialised_bandwidth(arch, profile):
    feats = make_features(n_mem=100.0, eta=0.0)
    breakdown = execution_time(feats, profile, arch, _single_wave_grid())
    assert breakdown.bw_eff == arch.bw_max * profile.l_mem_coal / profile.l_mem_uncoal
    assert math.isfinite(breakdown.t_exec)


def test_multi_wave_scaling(arch, profile):
    # a grid needing two full waves doubles the variable time
    feats = make_features(warps=16, blocks_per_sm=3.0, n_mem=100.0)
    one_wave = InputResources(shared_mem_bytes=0, grid_x=arch.sm_count * 3, grid_y=1)
    two_waves = InputResources(shared_mem_bytes=0, grid_x=arch.sm_count * 6, grid_y=1)
    t1 = execution_time(feats, profile, arch, one_wave)
    t2 = execution_time(feats, profile, arch, two_waves)
    assert math.isclose(
        t2.t_exec - profile.t_base, 2 * (t1.t_exec - profile.t_base), rel_tol=1e-12
    )
