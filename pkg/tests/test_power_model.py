from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest

from ptxwatt import (
    InputResources,
    LaunchConfig,
    activity_rate,
    compute_intensity,
    dvfs_frequency,
    dynamic_power,
    estimate_active_sms,
    memory_power,
    shape_power,
    sm_concurrency_power,
    transient_correction,
)
from ptxwatt.errors import CapAboveTdp, EmptyGrid, ZeroCycles

from conftest import make_features


def test_activity_rate_examples():
    assert activity_rate(0.0, 8.0, 4.0, 1.0) == 0.0
    assert activity_rate(1000.0, 8.0, 4.0, 1.0) == 2000.0
    assert activity_rate(1000.0, 8.0, 4.0, 2.0) == 4000.0


def test_activity_rate_zero_cycles():
    with pytest.raises(ZeroCycles):
        activity_rate(1000.0, 8.0, 0.0, 1.0)


def test_compute_intensity():
    assert compute_intensity(100.0, 100.0) == 1.0
    assert compute_intensity(100.0, 0.0) == math.inf
    assert compute_intensity(0.0, 100.0) == 0.0


def test_shape_power_square_block():
    assert shape_power(10.0, 0.1, 16, 16, 1.0) == 10.0


def test_shape_power_infinite_intensity():
    assert shape_power(10.0, 0.1, 2, 32, math.inf) == 10.0


def test_shape_power_numeric():
    expected = 10.0 * (1.0 + 0.1 * math.log(16.0) / 2.0)
    value = shape_power(10.0, 0.1, 2, 32, 1.0)
    assert math.isclose(value, expected, rel_tol=1e-12)
    assert math.isclose(value, 11.386294361119891, rel_tol=1e-12)


def test_shape_power_symmetry():
    rng = np.random.default_rng(31)
    for _ in range(200):
        bx, by = (int(v) for v in rng.integers(1, 1025, size=2))
        kappa = float(rng.uniform(0, 0.5))
        ci = float(rng.uniform(0, 10))
        assert math.isclose(
            shape_power(10.0, kappa, bx, by, ci),
            shape_power(10.0, kappa, by, bx, ci),
            rel_tol=1e-12,
        )
        assert shape_power(10.0, kappa, bx, by, ci) >= 10.0


def test_memory_power():
    assert memory_power(20.0, 0.5, 1.0) == 20.0
    assert memory_power(20.0, 0.5, 0.0) == 30.0
    assert memory_power(20.0, 0.25, 0.6) == 22.0


def test_memory_power_floor():
    rng = np.random.default_rng(37)
    for _ in range(200):
        lam = float(rng.uniform(0, 1))
        eta = float(rng.uniform(0, 1))
        p = memory_power(20.0, lam, eta)
        assert p >= 20.0
        if eta == 1.0 or lam == 0.0:
            assert p == 20.0


def test_sm_concurrency_power():
    assert sm_concurrency_power(0, 2.0, 0.8, 30.0) == 30.0
    assert sm_concurrency_power(1, 2.0, 0.8, 30.0) == 32.0
    expected = 2.0 * 16 ** 0.8 + 30.0
    assert math.isclose(sm_concurrency_power(16, 2.0, 0.8, 30.0), expected, rel_tol=1e-12)
    assert math.isclose(sm_concurrency_power(16, 2.0, 0.8, 30.0), 48.37917367995256, rel_tol=1e-12)


def test_estimate_active_sms(arch):
    config = LaunchConfig(32, 1, arch.p_tdp)
    assert estimate_active_sms(config, InputResources(0, grid_x=4), arch) == 4
    assert estimate_active_sms(config, InputResources(0, grid_x=100, grid_y=100), arch) == arch.sm_count
    with pytest.raises(EmptyGrid):
        estimate_active_sms(config, InputResources(0, grid_x=0), arch)


def test_transient_correction():
    assert transient_correction(100.0, 2e-5, 1e-5, 0.833) == 100.0
    assert math.isclose(transient_correction(100.0, 5e-6, 1e-5, 0.833), 83.3, rel_tol=1e-12)
    assert transient_correction(100.0, 5e-6, 1e-5, 1.0) == 100.0


def test_transient_never_increases_power():
    rng = np.random.default_rng(41)
    for _ in range(200):
        p = float(rng.uniform(0, 400))
        t = float(rng.uniform(0, 1e-4))
        r = float(rng.uniform(0.01, 1.0))
        assert transient_correction(p, t, 1e-5, r) <= p


def test_dvfs_frequency():
    assert dvfs_frequency(1.5e9, 250.0, 250.0, 3) == 1.5e9
    assert math.isclose(dvfs_frequency(1.0, 125.0, 250.0, 3), 0.5 ** (1 / 3), rel_tol=1e-12)
    assert math.isclose(dvfs_frequency(1.0, 125.0, 250.0, 3), 0.7937005259840998, rel_tol=1e-12)
    assert math.isclose(dvfs_frequency(1.0, 100.0, 250.0, 3), 0.4 ** (1 / 3), rel_tol=1e-12)
    assert math.isclose(dvfs_frequency(1.0, 100.0, 250.0, 3), 0.7368062997280773, rel_tol=1e-12)


def test_dvfs_cap_above_tdp():
    with pytest.raises(CapAboveTdp):
        dvfs_frequency(1.5e9, 300.0, 250.0, 3)
    with pytest.raises(CapAboveTdp):
        dvfs_frequency(1.5e9, 0.0, 250.0, 3)


def test_dvfs_monotone_in_cap(arch, profile):
    feats = make_features(n_mem=200.0, eta=0.8)
    resources = InputResources(0, grid_x=64)
    caps = np.linspace(arch.p_cap_min, arch.p_tdp, 25)
    prev_f, prev_p = -1.0, -1.0
    for cap in caps:
        config = LaunchConfig(8, 8, float(cap))
        power = dynamic_power(feats, profile, arch, config, resources, t_exec=1e-3)
        assert power.f_adj >= prev_f
        assert power.p_dyn >= prev_p - 1e-12
        prev_f, prev_p = power.f_adj, power.p_dyn


def test_dynamic_power_zero_counts_delta_only(arch, profile):
    # alpha = 0 and zeroed base terms leave only the concurrency offset,
    # scaled by the DVFS factor
    feats = make_features(
        n_mem=0.0, mem_bytes=0.0, n_sync=0.0, eta=1.0,
        by_unit={"FP32": 0.0, "INT": 0.0, "SFU": 0.0, "ALU": 0.0},
    )
    stripped = replace(
        profile, sm_power_alpha=0.0, sm_power_delta=30.0,
        p_base_shape=0.0, p_mem_base=0.0,
    )
    config = LaunchConfig(8, 8, 125.0)
    power = dynamic_power(feats, stripped, arch, config, InputResources(0, grid_x=2),
                          t_exec=1.0)
    assert power.p_units == 0.0
    assert power.p_shape == 0.0
    assert power.p_mem == 0.0
    assert math.isclose(power.p_dyn, 30.0 * (125.0 / 250.0) ** (1 / 3), rel_tol=1e-12)


def test_dynamic_power_square_block_no_penalties(arch, profile):
    feats = make_features(n_mem=100.0, eta=1.0)
    config = LaunchConfig(16, 16, arch.p_tdp)
    power = dynamic_power(feats, profile, arch, config, InputResources(0, grid_x=64),
                          t_exec=1.0)
    assert power.p_shape == profile.p_base_shape
    assert power.p_mem == profile.p_mem_base


def test_dynamic_power_matches_hand_composition(arch, profile):
    feats = make_features(
        n_mem=131.0,
        by_unit={"FP32": 64.0, "INT": 133.0, "SFU": 1.0, "ALU": 69.0},
        n_sync=2.0,
        eta=1.0,
        warps=1,
        blocks_per_sm=48.0,
    )
    config = LaunchConfig(32, 1, 200.0)
    resources = InputResources(0, grid_x=16, grid_y=4)
    t_exec = 5e-4
    power = dynamic_power(feats, profile, arch, config, resources, t_exec)

    warps_per_sm = 48.0
    p_units = (
        profile.beta_u["FP32"] * 64.0 * warps_per_sm / (4.0 / 1.0)
        + profile.beta_u["INT"] * 133.0 * warps_per_sm / (4.0 / 1.0)
        + profile.beta_u["SFU"] * 1.0 * warps_per_sm / (16.0 / 4.0)
        + profile.beta_u["ALU"] * 69.0 * warps_per_sm / (2.0 / 1.0)
        + profile.beta_u["Mem"] * 131.0 * warps_per_sm / (400.0 / 4.0)
    )
    ci = 198.0 / 131.0
    p_shape = profile.p_base_shape * (1 + profile.kappa * abs(math.log(32.0)) / (1 + ci))
    p_mem = profile.p_mem_base
    p_sm = profile.sm_power_alpha * 48 ** profile.sm_power_beta + profile.sm_power_delta
    expected = (p_units + p_shape + p_mem + p_sm) * (200.0 / 250.0) ** (1 / 3)

    assert math.isclose(power.p_units, p_units, rel_tol=1e-12)
    assert math.isclose(power.p_shape, p_shape, rel_tol=1e-12)
    assert power.p_mem == p_mem
    assert math.isclose(power.p_sm, p_sm, rel_tol=1e-12)
    assert math.isclose(power.p_dyn, expected, rel_tol=1e-12)
    assert not power.cap_limited


def test_cap_clamps_total_draw(arch, profile):
    # enormous unit activity pushes demand far above the cap
    feats = make_features(
        n_mem=1e9, by_unit={"FP32": 1e9, "INT": 0.0, "SFU": 0.0, "ALU": 0.0},
    )
    config = LaunchConfig(32, 32, arch.p_cap_min)
    power = dynamic_power(feats, profile, arch, config, InputResources(0, grid_x=64),
                          t_exec=1.0)
    assert power.cap_limited
    assert power.p_dyn + arch.p_static <= config.p_cap + 1e-9 * config.p_cap


def test_components_nonnegative(arch, profile):
    rng = np.random.default_rng(43)
    for _ in range(200):
        feats = make_features(
            n_mem=float(rng.integers(0, 5000)),
            by_unit={
                "FP32": float(rng.integers(0, 5000)),
                "INT": float(rng.integers(0, 5000)),
                "SFU": float(rng.integers(0, 500)),
                "ALU": float(rng.integers(0, 2000)),
            },
            n_sync=float(rng.integers(0, 50)),
            eta=float(rng.uniform(0, 1)),
        )
        bx = int(2 ** rng.integers(0, 11))
        by = max(1, 32 // bx) * int(2 ** rng.integers(0, 3))
        cap = float(rng.uniform(arch.p_cap_min, arch.p_tdp))
        power = dynamic_power(
            feats, profile, arch, LaunchConfig(bx, by, cap),
            InputResources(0, grid_x=int(rng.integers(1, 500))),
            t_exec=float(rng.uniform(1e-6, 1e-2)),
        )
        for value in (power.p_units, power.p_shape, power.p_mem, power.p_sm,
                      power.p_dyn, power.f_adj):
            assert value >= 0.0
