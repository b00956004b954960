from __future__ import annotations

import math

import numpy as np
import pytest

from ptxwatt import InputResources, LaunchConfig, coalescing_efficiency, extract_features
from ptxwatt.errors import InvalidConfig

from conftest import FIXTURE_NAMES, parsed_fixture


def test_coalescing_efficiency_saturated():
    assert coalescing_efficiency(32, 1.0) == 1.0


def test_coalescing_efficiency_narrow_block():
    assert coalescing_efficiency(16, 1.0) == 0.5


def test_coalescing_efficiency_clamped_with_misalignment():
    assert coalescing_efficiency(64, 0.75) == 0.75


def test_coalescing_efficiency_monotone_and_bounded():
    rng = np.random.default_rng(7)
    for _ in range(200):
        bx = int(rng.integers(1, 1025))
        frac = float(rng.uniform(0.0, 1.0))
        eta = coalescing_efficiency(bx, frac)
        assert 0.0 <= eta <= 1.0
        assert coalescing_efficiency(bx * 2, frac) >= eta
        # linear in the aligned fraction
        assert math.isclose(coalescing_efficiency(bx, frac / 2), eta / 2, rel_tol=1e-12)


def test_blocks_per_sm_no_shared(arch):
    module, cfg = parsed_fixture("straight_line")
    config = LaunchConfig(8, 8, arch.p_tdp)
    feats = extract_features(module, cfg, config, InputResources(shared_mem_bytes=0), arch)
    assert feats.warps == 2
    assert feats.blocks_per_sm == 24.0  # shared term vacuous


def test_blocks_per_sm_shared_limited(arch):
    module, cfg = parsed_fixture("straight_line")
    config = LaunchConfig(2, 32, arch.p_tdp)
    feats = extract_features(
        module, cfg, config, InputResources(shared_mem_bytes=12 * 1024), arch
    )
    assert feats.warps == 2
    assert feats.blocks_per_sm == 4.0  # min(48/2, 48KiB/12KiB)


def test_vecadd_feature_counts(arch, manifest):
    module, cfg = parsed_fixture("vecadd", default_trip=1.0)
    config = LaunchConfig(1, 32, arch.p_tdp)
    feats = extract_features(module, cfg, config, InputResources(shared_mem_bytes=0), arch)
    expected = manifest["vecadd"]["dynamic"]
    assert feats.n_mem == expected["n_mem"]
    assert feats.mem_bytes == expected["mem_bytes"]
    assert feats.n_comp == expected["n_comp"]
    assert feats.n_comp_by_unit == expected["by_unit"]
    assert feats.n_sync == expected["n_sync"]
    assert feats.warps == 1
    assert feats.eta_coal == coalescing_efficiency(1, 1.0)


@pytest.mark.parametrize("name", FIXTURE_NAMES)
def test_fixture_dynamic_counts_match_manifest(name, arch, manifest):
    module, cfg = parsed_fixture(name)
    config = LaunchConfig(32, 1, arch.p_tdp)
    feats = extract_features(module, cfg, config, InputResources(shared_mem_bytes=0), arch)
    expected = manifest[name]["dynamic"]
    assert feats.n_mem == expected["n_mem"]
    assert feats.mem_bytes == expected["mem_bytes"]
    assert feats.n_comp == expected["n_comp"]
    assert feats.n_comp_by_unit == expected["by_unit"]
    assert feats.n_sync == expected["n_sync"]


def test_invalid_config_warp_alignment(arch):
    module, cfg = parsed_fixture("straight_line")
    resources = InputResources(shared_mem_bytes=0)
    with pytest.raises(InvalidConfig):
        extract_features(module, cfg, LaunchConfig(3, 5, arch.p_tdp), resources, arch)
    with pytest.raises(InvalidConfig):
        extract_features(module, cfg, LaunchConfig(1, 1, arch.p_tdp), resources, arch)
    with pytest.raises(InvalidConfig):
        extract_features(module, cfg, LaunchConfig(64, 32, arch.p_tdp), resources, arch)


def test_occupancy_bounds(arch):
    module, cfg = parsed_fixture("mha_like")
    for bx, by, shared in [(32, 1, 0), (16, 4, 4096), (32, 32, 16384)]:
        feats = extract_features(
            module, cfg, LaunchConfig(bx, by, arch.p_tdp),
            InputResources(shared_mem_bytes=shared), arch,
        )
        assert feats.blocks_per_sm <= arch.max_warps_per_sm / feats.warps
        if feats.shared_bytes > 0:
            assert feats.blocks_per_sm <= arch.max_shared_per_sm / feats.shared_bytes


def test_static_plus_dynamic_shared(arch):
    module, cfg = parsed_fixture("mha_like")
    feats = extract_features(
        module, cfg, LaunchConfig(32, 1, arch.p_tdp),
        InputResources(shared_mem_bytes=1024), arch,
    )
    assert feats.shared_bytes == 512 + 1024


def test_extraction_deterministic(arch):
    module, cfg = parsed_fixture("mha_like")
    config = LaunchConfig(16, 4, arch.p_tdp)
    resources = InputResources(shared_mem_bytes=256)
    a = extract_features(module, cfg, config, resources, arch)
    b = extract_features(module, cfg, config, resources, arch)
    assert a == b
