from __future__ import annotations

"""Tests for the table reproduction script."""

import importlib.util
from pathlib import Path
from types import ModuleType

import pandas as pd

ROOT = Path(__file__).resolve().parents[1]


def _load_script() -> ModuleType:
    spec = importlib.util.spec_from_file_location("reproduce_tables", ROOT / "tools" / "reproduce_tables.py")
    assert spec is not None and spec.loader is not None
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


def test_reproduce_writes_csv_and_workbook(tmp_path: Path) -> None:
    script = _load_script()
    workbook = script.reproduce(
        ["poisson"],
        tmp_path / "tables",
        replicates=1,
        seed=3,
        hgrid="0.05:0.5:4",
        threads=1,
        grid=10,
        progress=False,
    )
    assert workbook.exists()
    table = (tmp_path / "tables" / "poisson.csv").read_text(encoding="utf-8").splitlines()
    assert table[0] == "setting,New,State,Likelihood"
    assert pd.ExcelFile(workbook).sheet_names == ["poisson"]
