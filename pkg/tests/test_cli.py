import io
import json
import time

import numpy as np
import pandas as pd
import pytest

from conftest import CURRENCIES_27, random_walk_rates, write_rates
from fxnet.cli import main
from fxnet.models import RdcParams
from fxnet.services.dependence import rdc

EXPECTED_FILES = {
    "manifest.json",
    "edges.csv",
    "rankings.csv",
    "degree_series.csv",
    "maxgap.csv",
    "intrafrac.csv",
    "intrafrac_kde.csv",
    "degree_correlations.csv",
    "tailfits.json",
}


def run_files(directory):
    return {path.relative_to(directory).as_posix(): path.read_bytes() for path in directory.rglob("*") if path.is_file()}


def evolve(rates, out, *extra):
    return main(["evolve", "--input", str(rates), "--out", str(out), "--jobs", "1", *extra])


@pytest.fixture
def sample_columns(tmp_path):
    rng = np.random.default_rng(77)
    x = rng.uniform(0.125, 1.125, size=400)
    frame = pd.DataFrame({"x": x, "y": np.sin(4 * np.pi * x) + 0.1 * rng.normal(size=400), "same": x})
    path = tmp_path / "columns.csv"
    frame.to_csv(path, index=False)
    return path, frame


class TestRdcCommand:
    def test_identical_columns(self, sample_columns, capsys):
        path, _ = sample_columns
        assert main(["rdc", "--input", str(path), "--x", "x", "--y", "same"]) == 0
        first = capsys.readouterr().out.splitlines()[0]
        assert first.startswith("rdc,")
        assert float(first.split(",")[1]) >= 0.95

    def test_output_is_deterministic_and_matches_library(self, sample_columns, capsys):
        path, frame = sample_columns
        args = ["rdc", "--input", str(path), "--x", "x", "--y", "y", "--seed", "7"]
        assert main(args) == 0
        first = capsys.readouterr().out
        assert main(args) == 0
        assert capsys.readouterr().out == first

        expected = rdc(frame["x"].to_numpy(), frame["y"].to_numpy(), RdcParams(seed=7))
        lines = first.splitlines()
        assert lines[0] == f"rdc,{expected.value:.6g}"
        assert len([line for line in lines if line.startswith("repetition,")]) == 5

    def test_unknown_column_is_an_input_error(self, sample_columns, capsys):
        path, _ = sample_columns
        assert main(["rdc", "--input", str(path), "--x", "x", "--y", "nope"]) == 2
        assert "nope" in capsys.readouterr().err

    def test_missing_file(self, tmp_path, capsys):
        assert main(["rdc", "--input", str(tmp_path / "none.csv"), "--x", "a", "--y", "b"]) == 2

    @pytest.mark.parametrize("flags", [["--k", "0"], ["--seed", "-1"], ["--reps", "0"], ["--s", "0"], ["--ridge", "-1"]])
    def test_invalid_parameters_are_input_errors(self, sample_columns, capsys, flags):
        path, _ = sample_columns
        assert main(["rdc", "--input", str(path), "--x", "x", "--y", "y", *flags]) == 2
        err = capsys.readouterr().err
        assert "Invalid RDC parameters" in err
        assert "Traceback" not in err


class TestEvolveCommand:
    def test_toy_run_writes_twenty_trees(self, toy_rates, tmp_path):
        out = tmp_path / "run"
        assert evolve(toy_rates, out) == 0
        files = run_files(out)
        assert EXPECTED_FILES <= set(files)
        assert len([name for name in files if name.startswith("trees/")]) == 20

        manifest = json.loads(files["manifest.json"])
        assert manifest["counts"] == {"rate_rows": 120, "return_rows": 119, "currencies": 5, "windows": 20, "networks": 20}
        assert manifest["seed"] == 0
        assert manifest["config"]["measure"] == "rdc"

        edges = pd.read_csv(out / "edges.csv")
        assert list(edges.columns) == ["date", "node_i", "node_j", "weight"]
        assert len(edges) == 20 * 4
        assert b"\r\n" not in files["edges.csv"]

    def test_rerun_is_byte_identical(self, toy_rates, tmp_path):
        assert evolve(toy_rates, tmp_path / "first", "--seed", "11") == 0
        assert evolve(toy_rates, tmp_path / "second", "--seed", "11") == 0
        first, second = run_files(tmp_path / "first"), run_files(tmp_path / "second")
        assert first == second
        manifest = json.loads(first["manifest.json"])
        assert "out" not in manifest["config"] and "jobs" not in manifest["config"]
        assert "timings_ms" not in manifest

    def test_pearson_keeps_the_file_schema(self, toy_rates, tmp_path):
        assert evolve(toy_rates, tmp_path / "rdc") == 0
        assert evolve(toy_rates, tmp_path / "pearson", "--measure", "pearson") == 0
        rdc_files, pearson_files = run_files(tmp_path / "rdc"), run_files(tmp_path / "pearson")
        assert set(rdc_files) == set(pearson_files)
        for name in rdc_files:
            if name.endswith(".csv"):
                assert rdc_files[name].splitlines()[0] == pearson_files[name].splitlines()[0]

    def test_failure_leaves_no_partial_output(self, toy_rates, tmp_path, capsys):
        mapping = tmp_path / "partial_map.csv"
        mapping.write_text("USD,Americas\nEUR,Europe\nCNY,Asia\nHKD,Asia\n", encoding="utf-8")
        out = tmp_path / "run"
        assert evolve(toy_rates, out, "--continents", str(mapping)) == 2
        assert "GBP" in capsys.readouterr().err
        assert not out.exists()
        assert not list(tmp_path.glob(".run.staging-*"))

    def test_config_file_with_flag_override(self, toy_rates, tmp_path):
        config = tmp_path / "run.conf"
        config.write_text(f"input = {toy_rates}\nmeasure = pearson\nwindow = 110\nreps = 3\n", encoding="utf-8")
        out = tmp_path / "run"
        assert main(["evolve", "--config", str(config), "--window", "115", "--out", str(out), "--jobs", "1"]) == 0
        manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
        assert manifest["config"]["measure"] == "pearson"
        assert manifest["config"]["window"] == 115
        assert manifest["config"]["repetitions"] == 3
        assert manifest["counts"]["networks"] == 5

    def test_invalid_configuration(self, toy_rates, tmp_path):
        assert evolve(toy_rates, tmp_path / "run", "--window", "1") == 2
        assert evolve(toy_rates, tmp_path / "run", "--window", "500") == 2

    def test_redenominated_run(self, toy_rates, tmp_path):
        out = tmp_path / "run"
        assert evolve(toy_rates, out, "--base", "USD", "--measure", "pearson", "--continents", str(write_map(tmp_path))) == 0
        labels = json.loads(next((out / "trees").glob("*.json")).read_text(encoding="utf-8"))["labels"]
        assert "USD" not in labels and "XAG" in labels


def write_map(tmp_path):
    path = tmp_path / "with_silver.csv"
    path.write_text("EUR,Europe\nGBP,Europe\nCNY,Asia\nHKD,Asia\nXAG,Commodity\n", encoding="utf-8")
    return path


class TestRankAndPlotdata:
    @pytest.fixture
    def one_network_run(self, tmp_path):
        rates = write_rates(tmp_path / "short.csv", random_walk_rates(101, ("USD", "EUR", "CNY", "HKD", "GBP"), seed=3))
        out = tmp_path / "one"
        assert evolve(rates, out, "--measure", "pearson") == 0
        return out

    def test_rank_matches_single_tree_degrees(self, one_network_run, capsys):
        tree = json.loads(next((one_network_run / "trees").glob("*.json")).read_text(encoding="utf-8"))
        capsys.readouterr()
        assert main(["rank", "--out", str(one_network_run)]) == 0
        ranking = pd.read_csv(io.StringIO(capsys.readouterr().out))
        whole = ranking[ranking["period"] == "all"]
        assert dict(zip(whole["currency"], whole["avg_degree"])) == {k: float(v) for k, v in tree["degrees"].items()}

    def test_yearly_rows_sorted(self, tmp_path, capsys):
        rates = write_rates(tmp_path / "long.csv", random_walk_rates(400, ("USD", "EUR", "CNY", "HKD", "GBP"), seed=4))
        out = tmp_path / "long"
        assert evolve(rates, out, "--measure", "pearson") == 0
        capsys.readouterr()
        assert main(["rank", "--out", str(out), "--year", "2006"]) == 0
        ranking = pd.read_csv(io.StringIO(capsys.readouterr().out))
        assert set(ranking["period"].astype(str)) == {"2006"}
        assert list(ranking["avg_degree"]) == sorted(ranking["avg_degree"], reverse=True)
        assert list(ranking["rank"]) == list(range(1, len(ranking) + 1))

    def test_rank_with_baseline(self, one_network_run, tmp_path, capsys):
        capsys.readouterr()
        assert main(["rank", "--out", str(one_network_run), "--baseline", str(one_network_run)]) == 0
        ranking = pd.read_csv(io.StringIO(capsys.readouterr().out))
        assert list(ranking["rank"]) == list(ranking["baseline_rank"])

    def test_missing_manifest(self, tmp_path, capsys):
        assert main(["rank", "--out", str(tmp_path)]) == 2
        assert "evolve" in capsys.readouterr().err

    def test_plotdata_unknown_currency(self, one_network_run, capsys):
        assert main(["plotdata", "--out", str(one_network_run), "--kind", "degrees", "--currencies", "USD,JPY"]) == 2
        assert "JPY" in capsys.readouterr().err

    @pytest.mark.parametrize("kind", ["degrees", "maxgap", "intrafrac", "kde", "correlations"])
    def test_plotdata_kinds(self, one_network_run, capsys, kind):
        capsys.readouterr()
        assert main(["plotdata", "--out", str(one_network_run), "--kind", kind]) == 0
        assert len(capsys.readouterr().out.splitlines()) >= 2

    def test_plotdata_tailfit(self, one_network_run, capsys):
        capsys.readouterr()
        assert main(["plotdata", "--out", str(one_network_run), "--kind", "tailfit"]) == 0
        document = json.loads(capsys.readouterr().out)
        assert set(document) == {"max_gap", "min_gap"}


@pytest.mark.slow
def test_full_size_run_is_reproducible(tmp_path):
    rates = write_rates(tmp_path / "rates27.csv", random_walk_rates(601, CURRENCIES_27, seed=27))
    for name in ("first", "second"):
        args = ["evolve", "--input", str(rates), "--out", str(tmp_path / name), "--jobs", "4", "--seed", "5"]
        start = time.perf_counter()
        assert main(args) == 0
        print(f"evolve 27x600 run={name} elapsed_s={time.perf_counter() - start:.1f}")
    first, second = run_files(tmp_path / "first"), run_files(tmp_path / "second")
    assert json.loads(first["manifest.json"])["counts"]["networks"] == 501
    assert first == second
