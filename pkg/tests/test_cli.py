from __future__ import annotations

"""End-to-end tests for the command line entry point."""

import logging
import math
from pathlib import Path
from typing import Iterator

import numpy as np
import pandas as pd
import pytest

import main
from src.domain.schemas import PointPattern, Window
from src.io.storage import load_pattern, save_pattern


@pytest.fixture(autouse=True)
def reset_logging() -> Iterator[None]:
    """Close handlers that main installs on the root logger."""
    yield
    root = logging.getLogger()
    for handler in list(root.handlers):
        root.removeHandler(handler)
        handler.close()


@pytest.fixture
def single_point_file(tmp_path: Path) -> Path:
    pattern = PointPattern(window=Window(lower=(0.0, 0.0), upper=(1.0, 1.0)), points=[[0.5, 0.5]])
    return save_pattern(tmp_path / "single.csv", pattern)


@pytest.fixture
def simulated_file(tmp_path: Path) -> Path:
    path = tmp_path / "poisson.csv"
    assert main.main(["simulate", "--model", "poisson", "--params", "lambda=60", "--seed", "4", "--out", str(path)]) == 0
    return path


def test_simulate_is_reproducible(tmp_path: Path) -> None:
    arguments = ["simulate", "--model", "matern", "--params", "kappa=10,r=0.1,mu=3", "--seed", "7", "--replicate", "2"]
    first, second = tmp_path / "first.csv", tmp_path / "second.csv"
    assert main.main([*arguments, "--out", str(first)]) == 0
    assert main.main([*arguments, "--out", str(second)]) == 0
    assert first.read_bytes() == second.read_bytes()
    other = tmp_path / "other.csv"
    assert main.main([*arguments[:-1], "3", "--out", str(other)]) == 0
    assert load_pattern(other) != load_pattern(first)


def test_usage_errors_exit_with_two(tmp_path: Path) -> None:
    assert main.main(["estimate", "--h", "0.1", "--out", str(tmp_path / "raster.csv")]) == 2
    assert main.main(["simulate", "--model", "strauss", "--out", str(tmp_path / "x.csv")]) == 2


def test_version_exits_cleanly(capsys: pytest.CaptureFixture[str]) -> None:
    assert main.main(["--version"]) == 0
    assert "0.3.0" in capsys.readouterr().out


def test_select_single_point_matches_unit_mass_bandwidth(
    tmp_path: Path, single_point_file: Path, capsys: pytest.CaptureFixture[str]
) -> None:
    out = tmp_path / "selection.csv"
    code = main.main(
        [
            "select",
            "--pattern",
            str(single_point_file),
            "--method",
            "campbell",
            "--kernel",
            "box",
            "--hgrid",
            "0.5:0.6:101",
            "--threads",
            "1",
            "--out",
            str(out),
        ]
    )
    assert code == 0
    printed = capsys.readouterr().out.strip().splitlines()[-1]
    assert printed.startswith("selected,")
    assert float(printed.split(",")[1]) == pytest.approx(1.0 / math.sqrt(math.pi), abs=1e-3)
    assert out.read_text(encoding="utf-8").splitlines()[-1] == printed


def test_select_methods_on_simulated_pattern(tmp_path: Path, simulated_file: Path) -> None:
    for method in ("ppl", "diggle"):
        out = tmp_path / f"{method}.csv"
        arguments = ["select", "--pattern", str(simulated_file), "--method", method, "--hgrid", "0.02:0.5:10"]
        assert main.main([*arguments, "--out", str(out)]) == 0
        assert len(out.read_text(encoding="utf-8").splitlines()) == 12


def test_background_requires_campbell(tmp_path: Path, simulated_file: Path) -> None:
    arguments = ["select", "--pattern", str(simulated_file), "--method", "ppl", "--background", "20"]
    assert main.main([*arguments, "--out", str(tmp_path / "out.csv")]) == 1


def test_background_campbell_selection(tmp_path: Path, simulated_file: Path) -> None:
    out = tmp_path / "background.csv"
    arguments = ["select", "--pattern", str(simulated_file), "--method", "campbell", "--hgrid", "0.02:0.5:6"]
    arguments += ["--background", "20", "--background-replicates", "2", "--out", str(out)]
    assert main.main(arguments) == 0
    assert out.read_text(encoding="utf-8").splitlines()[-1].startswith("selected,")


def test_missing_pattern_file_exits_with_one(tmp_path: Path) -> None:
    arguments = ["select", "--pattern", str(tmp_path / "absent.csv"), "--method", "campbell"]
    assert main.main([*arguments, "--out", str(tmp_path / "out.csv")]) == 1


def test_estimate_writes_raster(tmp_path: Path, simulated_file: Path) -> None:
    out = tmp_path / "raster.csv"
    arguments = ["estimate", "--pattern", str(simulated_file), "--h", "0.1", "--grid", "16", "--out", str(out)]
    assert main.main(arguments) == 0
    frame = pd.read_csv(out, skiprows=1)
    assert len(frame) == 256
    background = tmp_path / "background.csv"
    assert main.main([*arguments[:-2], "--subtract-background", "10", "--out", str(background)]) == 0
    shifted = pd.read_csv(background, skiprows=1)
    assert shifted["value"].to_numpy() == pytest.approx(np.clip(frame["value"].to_numpy() - 10.0, 0.0, None))


def test_summaries_k_and_l(tmp_path: Path, simulated_file: Path) -> None:
    k_out, l_out = tmp_path / "k.csv", tmp_path / "l.csv"
    common = ["--pattern", str(simulated_file), "--tmax", "0.25", "--points", "26"]
    assert main.main(["summaries", "k", *common, "--out", str(k_out)]) == 0
    assert main.main(["summaries", "l", *common, "--correction", "none", "--out", str(l_out)]) == 0
    k_frame = pd.read_csv(k_out)
    assert list(k_frame.columns) == ["t", "khat"]
    assert len(k_frame) == 26
    assert k_frame["khat"].is_monotonic_increasing
    assert list(pd.read_csv(l_out).columns) == ["t", "lhat"]


def test_moments_with_mise(tmp_path: Path) -> None:
    out = tmp_path / "moments.csv"
    arguments = ["moments", "--model", "poisson", "--params", "lambda=50", "--h", "0.1", "--grid", "32"]
    arguments += ["--at", "0.5,0.5", "--at", "0.1,0.9", "--mise", "--out", str(out)]
    assert main.main(arguments) == 0
    values = dict(pd.read_csv(out).itertuples(index=False, name=None))
    assert values["intensity@0.5,0.5"] == pytest.approx(50.0)
    assert values["mean@0.5,0.5"] == pytest.approx(50.0, rel=1e-2)
    assert values["mean@0.1,0.9"] < values["mean@0.5,0.5"]
    assert values["mise"] > 0.0
    bad = ["moments", "--model", "poisson", "--params", "lambda=50", "--h", "0.1", "--at", "0.5"]
    assert main.main([*bad, "--out", str(out)]) == 1


def test_benchmark_from_experiment_file(tmp_path: Path) -> None:
    experiment = tmp_path / "experiment.cfg"
    experiment.write_text(
        "model = poisson\nparams = lambda=40\nreplicates = 2\nh_min = 0.05\nh_max = 0.5\nh_count = 5\n"
        "eval_resolution = 12\nlabel = smoke\n",
        encoding="utf-8",
    )
    out = tmp_path / "run"
    assert main.main(["benchmark", "--config", str(experiment), "--threads", "2", "--no-progress", "--out", str(out)]) == 0
    for name in ("per_replicate.csv", "table.csv", "config_echo.cfg", "run.log"):
        assert (out / name).exists()
    assert "threads = 2" in (out / "config_echo.cfg").read_text(encoding="utf-8")
    assert "Finished smoke" in (out / "run.log").read_text(encoding="utf-8")


def test_benchmark_preset_table(tmp_path: Path) -> None:
    out = tmp_path / "table"
    arguments = ["benchmark", "--table", "poisson", "--replicates", "1", "--hgrid", "0.05:0.5:4", "--grid", "10"]
    assert main.main([*arguments, "--threads", "1", "--no-progress", "--out", str(out)]) == 0
    lines = (out / "table.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == "setting,New,State,Likelihood"
    assert len(lines) == 4
    assert (out / "run.log").exists()
