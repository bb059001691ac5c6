import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gaugecvt import cvt, placement
from gaugecvt.errors import ConfigurationError, DegenerateFieldError
from gaugecvt.grf import FieldSpec, generate_grf
from gaugecvt.grid import Grid, ObservationMatrix


@pytest.fixture(scope="module")
def benchmark_report(benchmark_obs):
    return placement.gauge_optim(benchmark_obs, placement.PipelineConfig(k_g=20, seed=7))


@pytest.fixture(scope="module")
def small_run_obs():
    return generate_grf(FieldSpec(Grid(16, 14), 300, 1.0, 4.0, 1.0, seed=3))


def test_benchmark_end_to_end(benchmark_report):
    rep = benchmark_report
    assert 7 <= rep.decorrelation_d <= 11
    assert rep.result.status == cvt.CONVERGED
    assert rep.result.final_energy < rep.result.initial_energy
    assert rep.density.grid.nx == 160 and rep.density.grid.cell_size_km == 0.25
    np.testing.assert_allclose(rep.generators_km, rep.result.generators.positions * 0.25)


def test_energy_of_placement_consistent(benchmark_report):
    rep = benchmark_report
    assert placement.energy_of_placement(rep.density, rep.result.generators) == rep.result.final_energy
    assert placement.energy_of_placement(rep, rep.initial) == rep.result.initial_energy


def test_beats_random_placements(benchmark_report):
    rep = benchmark_report
    prob = cvt.DiscreteProblem.from_field(rep.density)
    e = rep.result.final_energy
    for s in range(100):
        assert e <= cvt.energy(prob, cvt.initial_generators(prob, 20, seed=s, mode="uniform"))


def test_report_directory_deterministic(tmp_path, small_run_obs):
    cfg = placement.PipelineConfig(k_g=6, seed=2, interpolation_factor=2)
    for name in ("a", "b"):
        placement.write_report(placement.gauge_optim(small_run_obs, cfg), tmp_path / name)
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert files == sorted(placement.REPORT_FILES)
    for f in files:
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    summary = json.loads((tmp_path / "a" / "report.json").read_text())
    assert summary["final_energy"] <= summary["initial_energy"]
    assert json.loads((tmp_path / "a" / "config.json").read_text())["k_g"] == 6


def test_constant_correlation_fails_at_density_stage():
    g = Grid(8, 8)
    obs = ObservationMatrix(g, np.tile(np.arange(6.0) ** 2, (64, 1)))
    with pytest.raises(DegenerateFieldError) as err:
        placement.gauge_optim(obs, placement.PipelineConfig(k_g=3, alpha_override=1))
    assert err.value.stage == "density"
    assert str(err.value).startswith("[density]")


def test_config_dict_roundtrip():
    cfg = placement.PipelineConfig(k_g=5, solver="lloyd", solver_options={"tol": 1e-6})
    assert placement.PipelineConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ConfigurationError):
        placement.PipelineConfig.from_dict({"k_g": 5, "kg": 3})
    with pytest.raises(ConfigurationError):
        placement.PipelineConfig(k_g=0)


def test_points_csv_roundtrip(tmp_path):
    pts = np.random.default_rng(0).random((7, 2)) * 10
    placement.write_generators_csv(tmp_path / "g.csv", pts, 5.0)
    grid_xy, km_xy = placement.read_points_csv(tmp_path / "g.csv")
    np.testing.assert_array_equal(grid_xy, pts)
    np.testing.assert_array_equal(km_xy, pts * 5.0)
    (tmp_path / "k.csv").write_text("x_km,y_km\n5,10\n")
    grid_xy, _ = placement.read_points_csv(tmp_path / "k.csv", cell_size_km=5.0)
    np.testing.assert_array_equal(grid_xy, [[1.0, 2.0]])


class TestCompare:
    def test_identity(self):
        pts = cvt.GeneratorSet(np.random.default_rng(1).random((12, 2)) * 30)
        rep = placement.compare_placements(pts, pts, [0.1, 1, 5], cell_size_km=5.0)
        assert rep.counts_within == [12, 12, 12]

    def test_seven_km(self):
        rep = placement.compare_km([[0.0, 7.0]], [[0.0, 0.0], [30.0, 30.0]], [2, 5, 10])
        assert rep.counts_within == [0, 0, 1] and rep.counts_outside == [1, 1, 0]
        assert rep.to_csv().splitlines() == ["radius_km,within,outside", "2,0,1", "5,0,1", "10,1,0"]

    def test_radii_validated(self):
        with pytest.raises(ConfigurationError):
            placement.compare_km([[0, 0]], [[1, 1]], [5, 2])

    def test_basin_sized_instance(self):
        rng = np.random.default_rng(138)
        mask_pts = rng.random((4000, 2)) * [120.0, 90.0]
        keep = ((mask_pts[:, 0] - 60) / 60) ** 2 + ((mask_pts[:, 1] - 45) / 45) ** 2 < 1
        cand = mask_pts[keep]
        real = cand[rng.choice(len(cand), 138, replace=False)]
        optimal = cand[rng.choice(len(cand), 138, replace=False)]
        rep = placement.compare_km(real, optimal, [2, 5, 10])
        assert rep.counts_within == sorted(rep.counts_within)
        assert all(a + b == 138 for a, b in zip(rep.counts_within, rep.counts_outside))

    @settings(max_examples=100, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 40), m=st.integers(1, 40),
           radii=st.lists(st.floats(0.01, 50), min_size=1, max_size=6, unique=True))
    def test_conserves_and_monotone(self, seed, n, m, radii):
        rng = np.random.default_rng(seed)
        rep = placement.compare_km(rng.random((n, 2)) * 40, rng.random((m, 2)) * 40, sorted(radii))
        assert all(a + b == n for a, b in zip(rep.counts_within, rep.counts_outside))
        assert rep.counts_within == sorted(rep.counts_within)
