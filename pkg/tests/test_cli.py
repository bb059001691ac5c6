import json
import subprocess
import sys

import numpy as np
import pytest

from gaugecvt import placement
from gaugecvt.cli import main
from gaugecvt.grid import Grid, ObservationMatrix, ScalarField
from gaugecvt.io import load_field, save_field, save_observations


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert main(["gen-grf", "--nx", "16", "--ny", "12", "--n-time", "200", "--d0", "4", "--seed", "7",
                 "--cell-size-km", "5", "--out", str(d / "obs.bin")]) == 0
    return d


def _resolved(stderr):
    line = next(l for l in stderr.splitlines() if "resolved config:" in l)
    return json.loads(line.split("resolved config:", 1)[1])


def test_pipeline_writes_report(workdir):
    out = workdir / "run1"
    rc = main(["pipeline", "--input", str(workdir / "obs.bin"), "--k-g", "6", "--seed", "7",
               "--interp-factor", "2", "--cell-size-km", "5", "--out", str(out)])
    assert rc == 0
    assert sorted(p.name for p in out.iterdir()) == sorted(placement.REPORT_FILES)
    summary = json.loads((out / "report.json").read_text())
    assert summary["fine_grid"]["cell_size_km"] == 2.5


def test_corr_map_deterministic(workdir):
    for name in ("c1.bin", "c2.bin"):
        assert main(["corr-map", "--input", str(workdir / "obs.bin"), "--d", "3", "--samples", "100",
                     "--seed", "1", "--out", str(workdir / name)]) == 0
    assert (workdir / "c1.bin").read_bytes() == (workdir / "c2.bin").read_bytes()


def test_density_and_optimize(workdir):
    assert main(["corr-map", "--input", str(workdir / "obs.bin"), "--d", "3", "--out",
                 str(workdir / "cm.bin")]) == 0
    assert main(["density", "--input", str(workdir / "cm.bin"), "--k-g", "5", "--interp-factor", "2",
                 "--trace", str(workdir / "alpha.csv"), "--out", str(workdir / "dens.bin")]) == 0
    assert (workdir / "alpha.csv").read_text().startswith("alpha,k\n")
    assert load_field(workdir / "dens.bin").grid.nx == 32
    assert main(["optimize", "--input", str(workdir / "dens.bin"), "--k-g", "5", "--solver", "lloyd",
                 "--out", str(workdir / "opt")]) == 0
    assert sorted(p.name for p in (workdir / "opt").iterdir()) == ["density.bin", "generators.csv", "trace.csv"]


def test_correlogram(workdir):
    assert main(["correlogram", "--input", str(workdir / "obs.bin"), "--max-lag", "5",
                 "--out", str(workdir / "cg.csv")]) == 0
    assert (workdir / "cg.csv").read_text().splitlines()[0] == "lag,mean_corr,samples"


def test_compare_matches_library(workdir, tmp_path):
    run = workdir / "run1"
    if not run.exists():
        test_pipeline_writes_report(workdir)
    (tmp_path / "gauges.csv").write_text("x_km,y_km\n3,4\n20,20\n40,10\n7.5,22\n")
    assert main(["compare", "--real", str(tmp_path / "gauges.csv"), "--optimal", str(run / "generators.csv"),
                 "--radii", "2,5,10", "--out", str(tmp_path / "cmp")]) == 0
    rows = (tmp_path / "cmp" / "comparison.csv").read_text().splitlines()
    assert rows[0] == "radius_km,within,outside" and len(rows) == 4
    _, opt_km = placement.read_points_csv(run / "generators.csv")
    ref = placement.compare_km([[3, 4], [20, 20], [40, 10], [7.5, 22]], opt_km, [2, 5, 10])
    assert rows[1:] == ref.to_csv().splitlines()[1:]
    for row in rows[1:]:
        _, a, b = row.split(",")
        assert int(a) + int(b) == 4


def test_render(workdir, tmp_path):
    run = workdir / "run1"
    if not run.exists():
        test_pipeline_writes_report(workdir)
    (tmp_path / "g.csv").write_text("x_km,y_km\n10,10\n30,20\n")
    assert main(["render", "--input", str(run), "--overlay", str(tmp_path / "g.csv"),
                 "--out", str(tmp_path / "m.svg")]) == 0
    svg = (tmp_path / "m.svg").read_text()
    assert svg.count('class="generator"') == 6 and svg.count('class="gauge"') == 2
    assert main(["render", "--input", str(tmp_path), "--out", str(tmp_path / "x.svg")]) == 3


def test_config_precedence(workdir, tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"seed": 3, "mc_samples": 20, "d": 2}))
    args = ["corr-map", "--input", str(workdir / "obs.bin"), "--config", str(cfg), "--out", str(tmp_path / "c.bin")]
    assert main(args + ["--seed", "5"]) == 0
    first = capsys.readouterr().err
    resolved = _resolved(first)
    assert (resolved["seed"], resolved["mc_samples"], resolved["d"]) == (5, 20, 2)
    assert main(args + ["--seed", "5"]) == 0
    assert _resolved(capsys.readouterr().err) == resolved


def test_pipeline_config_alpha_key(workdir, tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"k_g": 4, "alpha": 2, "interpolation_factor": 1}))
    assert main(["pipeline", "--input", str(workdir / "obs.bin"), "--config", str(cfg),
                 "--out", str(tmp_path / "run")]) == 0
    assert _resolved(capsys.readouterr().err)["alpha_override"] == 2
    assert json.loads((tmp_path / "run" / "report.json").read_text())["alpha"] == 2


def test_writes_only_declared_paths(workdir, tmp_path):
    out = tmp_path / "only"
    out.mkdir()
    assert main(["corr-map", "--input", str(workdir / "obs.bin"), "--d", "2", "--out", str(out / "c.bin")]) == 0
    assert [p.name for p in out.iterdir()] == ["c.bin"]


class TestExitCodes:
    def test_usage(self, capsys):
        with pytest.raises(SystemExit) as e:
            main(["pipeline", "--k-g", "3"])
        assert e.value.code == 2

    def test_missing_setting(self, workdir, tmp_path, capsys):
        rc = main(["corr-map", "--input", str(workdir / "obs.bin"), "--out", str(tmp_path / "c.bin")])
        assert rc == 2
        assert "corr-map" in capsys.readouterr().err

    def test_unknown_config_key(self, workdir, tmp_path):
        (tmp_path / "c.json").write_text('{"sead": 1}')
        assert main(["corr-map", "--input", str(workdir / "obs.bin"), "--config", str(tmp_path / "c.json"),
                     "--d", "2", "--out", str(tmp_path / "c.bin")]) == 2

    def test_bad_input(self, tmp_path, capsys):
        (tmp_path / "junk.bin").write_bytes(b"JUNKJUNKJUNKJUNKJUNK")
        assert main(["corr-map", "--input", str(tmp_path / "junk.bin"), "--d", "2",
                     "--out", str(tmp_path / "c.bin")]) == 3
        assert main(["corr-map", "--input", str(tmp_path / "nope.bin"), "--d", "2",
                     "--out", str(tmp_path / "c.bin")]) == 3
        assert not (tmp_path / "c.bin").exists()

    def test_numerical(self, tmp_path, capsys):
        g = Grid(6, 6)
        save_observations(ObservationMatrix(g, np.tile(np.arange(5.0), (36, 1))), tmp_path / "o.bin")
        rc = main(["pipeline", "--input", str(tmp_path / "o.bin"), "--k-g", "2", "--alpha", "1",
                   "--out", str(tmp_path / "run")])
        assert rc == 4
        last = capsys.readouterr().err.strip().splitlines()[-1]
        assert "density" in last and "DegenerateFieldError" in last

    def test_degenerate_density_input(self, tmp_path):
        save_field(ScalarField(Grid(3, 3), np.full(9, 0.5)), tmp_path / "c.bin")
        assert main(["density", "--input", str(tmp_path / "c.bin"), "--alpha", "2",
                     "--out", str(tmp_path / "d.bin")]) == 4


def test_module_entry_point(workdir, tmp_path):
    proc = subprocess.run([sys.executable, "-m", "gaugecvt", "correlogram", "--input", str(workdir / "obs.bin"),
                           "--max-lag", "3", "--out", str(tmp_path / "cg.csv")], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert "resolved config" in proc.stderr
