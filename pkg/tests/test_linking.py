import json
import math

import numpy as np
import pytest

from nehari_linking.errors import BumpTruncated, NotProjectable
from nehari_linking.grid import ExteriorGrid, linking_grid
from nehari_linking.linking import (
    LinkingConfig, LinkingScan, SurfaceBumps, bump, cutoff_xi, epsilon_R,
    geometry_scan, interaction_integrals, psi,
)


@pytest.fixture(scope="module")
def scan8(profile, model):
    cfg = LinkingConfig(R=8.0, n_y=8, n_t=11, n_theta=4)
    grid = linking_grid(8.0)
    return geometry_scan(cfg, profile, grid, model), grid


def test_cutoff_xi():
    assert cutoff_xi(np.array([0.5, 0.0]), 1.0) == 0.0
    assert cutoff_xi(np.array([0.0, 2.5]), 1.0) == 1.0
    assert 0 < cutoff_xi(1.5, 1.0) < 1


def test_bump_truncation(profile, model, small_grid):
    with pytest.raises(BumpTruncated):
        bump(profile, small_grid, (9.0, 0.0), model)


def test_epsilon_orderings_and_scaling(profile, model):
    e10 = epsilon_R(profile, 10.0, model)
    e14 = epsilon_R(profile, 14.0, model)
    assert e10.mismatch <= 1e-3 and e14.mismatch <= 1e-3
    ratio = e14.scaled() / e10.scaled()
    assert abs(ratio - 1.0) <= 0.10
    with pytest.raises(ValueError):
        epsilon_R(profile, 3.0, model)
    with pytest.raises(BumpTruncated):
        epsilon_R(profile, 10.0, model, box=(12.0, 12.0))


def test_splitting_defect_is_small_against_eps(profile, model):
    vals = [interaction_integrals(profile, model, R)["F_split_over_eps"] for R in (6.0, 10.0)]
    assert vals[1] < vals[0] < 1.0


def test_config_samples(model):
    cfg = LinkingConfig(R=8.0)
    ys = cfg.y_samples
    np.testing.assert_allclose(ys[0], [-1.0, 0.0])
    np.testing.assert_allclose(np.linalg.norm(ys - np.array([1.0, 0.0]), axis=1), 2.0)
    assert cfg.t_samples[10] == 0.5
    with pytest.raises(ValueError):
        LinkingConfig(R=8.0, x0=(2.0, 0.0))
    with pytest.raises(BumpTruncated):
        cfg.validate(ExteriorGrid(h=0.1, R_out=12.0), model)


def test_surface_endpoints(profile, model):
    cfg = LinkingConfig(R=8.0)
    grid = linking_grid(8.0)
    bumps = SurfaceBumps(cfg, profile, grid, model)
    ys = cfg.y_samples
    assert bumps.surface(ys[3], 0.0) is bumps.base
    a = psi(cfg, ys[3], 0.0, profile, grid, model, bumps).projected.values
    b = psi(cfg, ys[5], 0.0, profile, grid, model, bumps).projected.values
    assert np.array_equal(a, b)
    half = psi(cfg, ys[0], 0.5, profile, grid, model, bumps)
    assert abs(half.tau - 2.0) <= 0.15


def test_psi_names_the_failing_radius(profile, model):
    cfg = LinkingConfig(R=0.6)
    grid = ExteriorGrid(h=0.1, R_out=12.0, rho=0.1)
    bumps = SurfaceBumps(cfg, profile, grid, model)
    # sign-flipped base: the combination has no positive part near t = 0
    bumps.base = -1.0 * bumps.base
    with pytest.raises(NotProjectable, match="too small"):
        psi(cfg, cfg.y_samples[1], 0.01, profile, grid, model, bumps)


def test_scan_verdicts(scan8):
    scan, grid = scan8
    v = scan.verdict()
    assert v["inequalities"] == {"cap": True, "supinf": True, "window": True}
    assert v["margins"]["supinf"] > 0
    assert 1.0 < scan.L < 3.0
    assert len(scan.witnesses) >= 4
    assert scan.interior_max_ok()
    assert scan.sup_dQ == pytest.approx(scan.m, rel=5e-3)


def test_scan_csv_roundtrip(scan8, tmp_path):
    scan, _ = scan8
    scan.write_csv(tmp_path / "scan.csv")
    rows = LinkingScan.read_csv(tmp_path / "scan.csv")
    assert len(rows) == len(scan.records)
    assert rows[7] == scan.records[7]
    assert math.isfinite(json.loads(scan.verdict_json())["L"])
