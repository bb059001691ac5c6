import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gaugecvt.errors import DimensionError, FormatError, ValidationError
from gaugecvt.grid import Grid, ObservationMatrix, ScalarField
from gaugecvt.io import load_field, load_observations, save_field, save_observations


def _obs(nx=2, ny=2, n_time=3, mask=None, seed=0):
    grid = Grid(nx, ny, mask=mask)
    rng = np.random.default_rng(seed)
    return ObservationMatrix(grid, rng.standard_normal((grid.n_cells, n_time)))


class TestGrid:
    def test_invariants(self):
        with pytest.raises(ValueError):
            Grid(1, 5)
        with pytest.raises(ValueError):
            Grid(3, 3, cell_size_km=0)
        with pytest.raises(ValueError):
            Grid(3, 3, mask=np.zeros((3, 3), bool))

    def test_centers_and_physical(self):
        g = Grid(3, 2, cell_size_km=5.0)
        c = g.cell_centers()
        assert c[0].tolist() == [0.5, 0.5]
        assert c[-1].tolist() == [2.5, 1.5]
        np.testing.assert_array_equal(g.to_physical(c), c * 5.0)
        np.testing.assert_array_equal(g.to_grid(g.to_physical(c)), c)

    def test_mask_scan_order(self):
        mask = np.ones((3, 4), bool)
        mask[1, 2] = False
        g = Grid(4, 3, mask=mask)
        assert g.n_cells == 11
        idx = g.index_map()
        assert idx[1, 2] == -1
        assert sorted(idx[idx >= 0].tolist()) == list(range(11))

    def test_snap_skips_masked_cells(self):
        mask = np.ones((3, 3), bool)
        mask[1, 1] = False
        g = Grid(3, 3, mask=mask)
        c = g.snap(np.array([[1.5, 1.5]]))[0]
        assert np.hypot(*(g.cell_centers()[c] - 1.5)) == pytest.approx(1.0)

    def test_refine(self):
        g = Grid(4, 3, cell_size_km=2.0).refine(2)
        assert (g.nx, g.ny, g.cell_size_km) == (8, 6, 1.0)


class TestContainers:
    def test_observation_validation(self):
        g = Grid(2, 2)
        with pytest.raises(ValidationError):
            ObservationMatrix(g, np.zeros((4, 2)))
        with pytest.raises(ValidationError):
            ObservationMatrix(g, np.zeros((3, 5)))
        v = np.zeros((4, 5))
        v[2, 3] = np.inf
        with pytest.raises(ValidationError, match="cell 2.*time 3"):
            ObservationMatrix(g, v)

    def test_field_array_roundtrip(self):
        mask = np.array([[True, False], [True, True]])
        g = Grid(2, 2, mask=mask)
        f = ScalarField(g, [1.0, 2.0, 3.0])
        a = f.to_array()
        assert np.isnan(a[0, 1])
        assert ScalarField.from_array(g, a) == f


class TestBinaryAndCsv:
    def test_smallest_binary(self, tmp_path):
        obs = _obs()
        save_observations(obs, tmp_path / "o.bin")
        back = load_observations(tmp_path / "o.bin")
        assert back.n_cells == 4 and back.n_time == 3
        np.testing.assert_array_equal(back.values, obs.values)

    def test_csv_matches_binary(self, tmp_path):
        obs = _obs(3, 4, 5, seed=2)
        save_observations(obs, tmp_path / "o.csv")
        back = load_observations(tmp_path / "o.csv")
        np.testing.assert_array_equal(back.values, obs.values)
        assert (tmp_path / "o.csv").read_text().splitlines()[0] == "x,y,t,value"

    def test_eleven_values_for_four_cells(self, tmp_path):
        save_observations(_obs(), tmp_path / "o.bin")
        data = (tmp_path / "o.bin").read_bytes()
        (tmp_path / "bad.bin").write_bytes(data[:-8])
        with pytest.raises(DimensionError):
            load_observations(tmp_path / "bad.bin")

    def test_bad_magic_names_offset(self, tmp_path):
        (tmp_path / "x.bin").write_bytes(b"NOPE" + bytes(40))
        with pytest.raises(FormatError, match="offset 0"):
            load_observations(tmp_path / "x.bin")

    def test_nonfinite_payload(self, tmp_path):
        save_observations(_obs(), tmp_path / "o.bin")
        data = bytearray((tmp_path / "o.bin").read_bytes())
        data[-8:] = struct.pack("<d", float("nan"))
        (tmp_path / "n.bin").write_bytes(bytes(data))
        with pytest.raises(ValidationError, match="cell 3"):
            load_observations(tmp_path / "n.bin")

    def test_csv_bad_header(self, tmp_path):
        (tmp_path / "b.csv").write_text("a,b,c\n0,0,0,1\n")
        with pytest.raises(FormatError, match="line 1"):
            load_observations(tmp_path / "b.csv")

    def test_csv_missing_entry(self, tmp_path):
        save_observations(_obs(), tmp_path / "o.csv")
        lines = (tmp_path / "o.csv").read_text().splitlines()
        (tmp_path / "m.csv").write_text("\n".join(lines[:-1]) + "\n")
        with pytest.raises(DimensionError):
            load_observations(tmp_path / "m.csv")

    def test_constant_field_roundtrip(self, tmp_path):
        f = ScalarField(Grid(3, 3), np.ones(9))
        for name in ("f.bin", "f.csv"):
            save_field(f, tmp_path / name)
            assert load_field(tmp_path / name) == f

    def test_masked_cells_absent(self, tmp_path):
        mask = np.ones((3, 3), bool)
        mask[0, 0] = mask[2, 1] = False
        f = ScalarField(Grid(3, 3, mask=mask), np.arange(7.0))
        save_field(f, tmp_path / "f.csv")
        rows = (tmp_path / "f.csv").read_text().splitlines()[1:]
        assert len(rows) == 7
        assert not any(r.startswith("0,0,") or r.startswith("1,2,") for r in rows)
        save_field(f, tmp_path / "f.bin")
        assert load_field(tmp_path / "f.bin") == f

    def test_nan_field_rejected(self, tmp_path):
        f = ScalarField(Grid(2, 2), [1.0, np.nan, 2.0, 3.0])
        with pytest.raises(ValidationError):
            save_field(f, tmp_path / "f.bin")

    @settings(max_examples=30, deadline=None)
    @given(nx=st.integers(2, 6), ny=st.integers(2, 6), n_time=st.integers(3, 6),
           seed=st.integers(0, 2**32 - 1), masked=st.booleans())
    def test_roundtrip_property(self, tmp_path_factory, nx, ny, n_time, seed, masked):
        rng = np.random.default_rng(seed)
        mask = None
        if masked:
            mask = rng.random((ny, nx)) < 0.7
            mask.flat[0] = True
        obs = _obs(nx, ny, n_time, mask=mask, seed=seed)
        d = tmp_path_factory.mktemp("rt")
        for name in ("o.bin", "o.csv"):
            save_observations(obs, d / name)
            back = load_observations(d / name)
            np.testing.assert_array_equal(back.values, obs.values)
            # CSV infers the extent from the cells present, so compare cell coordinates
            np.testing.assert_array_equal(back.grid.cell_indices(), obs.grid.cell_indices())
