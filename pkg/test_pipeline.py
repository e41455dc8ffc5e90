"""
Tests for end-to-end runs, the catalog and the command line
"""
import json

import numpy as np
import pytest

import main
from errors import InputError, NumericalError, ResourceGuardError, StageError
from pipeline import Pipeline, PipelineReport, catalog, load_report, pipeline


def _make_segment():
    return np.linspace(-1, 1, 9) + 0j


def _make_l_shape():
    """Polyline 0.1 -> 0.9 -> 0.9 + 0.8i"""
    leg = np.linspace(0, 0.8, 81)
    return np.concatenate([0.1 + leg, 0.9 + 1j * leg[1:]]).astype(complex)


class TestPipeline:
    def test_run_without_solving(self, tmp_path):
        report = pipeline(_make_segment(), tmp_path, depth=1, walkers=2000, seed=3, max_solve_degree=0)
        assert report.skipped == ["solve", "trace", "align"]
        assert report.hausdorff is None
        assert report.grid_distance <= 1.0
        for name in ("tree.json", "measures.json", "plan.json", "decorated.json", "measures_decorated.json",
                     "overlay.svg", "report.json"):
            assert (tmp_path / name).exists()
        assert not (tmp_path / "poly.json").exists()
        assert report.sizes["decorated_edges"] >= report.sizes["tree_edges"]
        assert set(report.timings) == {"approximate", "measure", "decorate", "measure_decorated"}

    def test_report_round_trip(self, tmp_path):
        report = pipeline(_make_segment(), tmp_path, depth=1, walkers=2000, max_solve_degree=0)
        loaded = load_report(tmp_path / "report.json")
        assert loaded.sizes == report.sizes
        assert loaded.skipped == report.skipped
        assert loaded.seeds == {"walk": 0, "solve": 0}

    def test_unknown_report_field(self):
        with pytest.raises(InputError):
            PipelineReport.from_json({"input": "x", "depth": 1, "delta_exp": 4, "walkers": 1, "seeds": {},
                                      "colour": "red"})

    def test_strict_guard(self, tmp_path):
        with pytest.raises(StageError) as info:
            pipeline(_make_segment(), tmp_path, depth=1, walkers=2000, max_solve_degree=0, strict=True)
        assert info.value.stage == "solve"
        assert info.value.exit_code == 3

    def test_depth_guard(self, tmp_path):
        with pytest.raises(ResourceGuardError):
            Pipeline(_make_segment(), tmp_path, depth=6)
        Pipeline(_make_segment(), tmp_path, depth=6, allow_deep=True)

    def test_points_file(self, tmp_path):
        source = tmp_path / "K.json"
        source.write_text(json.dumps([[-1, 0], [1, 0]]), encoding="utf-8")
        assert Pipeline(str(source), tmp_path / "out", depth=1).source == str(source)

    def test_numpy_failure_is_numerical(self, tmp_path):
        def singular():
            return np.linalg.solve(np.zeros((2, 2)), np.ones(2))

        with pytest.raises(StageError) as info:
            Pipeline(_make_segment(), tmp_path, depth=1)._stage("align", singular)
        assert info.value.stage == "align"
        assert info.value.exit_code == 2
        assert isinstance(info.value.cause, NumericalError)

    @pytest.mark.slow
    def test_full_run(self, tmp_path):
        report = pipeline(_make_segment(), tmp_path, depth=1, walkers=20000, seed=1)
        assert report.solved_tree in ("decorated", "grid")
        assert report.newton["residual"] < 1e-9
        assert report.hausdorff is not None
        assert (tmp_path / "poly.json").exists()
        assert (tmp_path / "geom.json").exists()

    @pytest.mark.slow
    def test_l_shape_improves_with_depth(self, tmp_path):
        coarse = pipeline(_make_l_shape(), tmp_path / "d3", depth=3, walkers=40000, seed=4)
        fine = pipeline(_make_l_shape(), tmp_path / "d4", depth=4, walkers=40000, seed=4)
        assert coarse.balance["after"]["max_side_deviation"] < coarse.balance["before"]["max_side_deviation"]
        assert fine.grid_distance < coarse.grid_distance
        if coarse.hausdorff is not None and fine.hausdorff is not None:
            assert fine.hausdorff < coarse.hausdorff


class TestCatalog:
    def test_small_catalog(self, tmp_path):
        result = catalog(3, tmp_path)
        assert result["partial"] is False
        assert [entry["edges"] for entry in result["entries"]] == [1, 2, 3, 3]
        for entry in result["entries"]:
            assert (tmp_path / entry["svg"]).exists()
        assert json.loads((tmp_path / "catalog.json").read_text(encoding="utf-8")) == result

    def test_guards(self, tmp_path):
        with pytest.raises(ResourceGuardError):
            catalog(9, tmp_path)
        with pytest.raises(InputError):
            catalog(0, tmp_path)


class TestCommandLine:
    def test_enumerate(self, capsys):
        assert main.main(["enumerate", "--edges", "3"]) == 0
        codes = capsys.readouterr().out.split()
        assert len(codes) == 2
        assert "dududu" in codes

    def test_solve_code(self, tmp_path):
        target = tmp_path / "poly.json"
        assert main.main(["solve", "--code", "ddduuu", "--output", str(target)]) == 0
        data = json.loads(target.read_text(encoding="utf-8"))
        assert data["degree"] == 3

    def test_bad_code_exit_code(self, tmp_path):
        assert main.main(["solve", "--code", "dudd", "--output", str(tmp_path / "p.json")]) == 1

    def test_documented_approximate_and_balance(self, tmp_path):
        points = tmp_path / "points.json"
        points.write_text(json.dumps([[-1, 0], [0, 0], [1, 0]]), encoding="utf-8")
        tree, report = tmp_path / "tree.json", tmp_path / "report.json"
        assert main.main(["approximate", "--input", str(points), "--depth", "1", "--output", str(tree)]) == 0
        assert main.main(["balance", "--tree", str(tree), "--walkers", "500", "--seed", "2",
                          "--report", str(report)]) == 0
        data = json.loads(report.read_text(encoding="utf-8"))
        assert data["seed"] == 2
        assert "summary" in data

    def test_usage_error_is_an_input_error(self, tmp_path):
        assert main.main(["approximate", "--output", str(tmp_path / "t.json")]) == 1
        assert main.main(["no-such-command"]) == 1

    def test_guard_exit_code(self, tmp_path):
        assert main.main(["catalog", "--max-edges", "9", "--output-dir", str(tmp_path)]) == 3

    def test_trace_round_trip(self, tmp_path):
        poly, tree = tmp_path / "poly.json", tmp_path / "tree.json"
        assert main.main(["solve", "--code", "dududu", "--output", str(poly)]) == 0
        assert main.main(["trace", "--poly", str(poly), "--output", str(tree), "--svg",
                          str(tmp_path / "tree.svg")]) == 0
        assert (tmp_path / "tree.svg").exists()
