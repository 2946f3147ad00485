from __future__ import annotations

"""Tests for the Excel export of benchmark tables."""

from pathlib import Path

import pandas as pd
import pytest
from openpyxl import load_workbook

from src.io.reporting import NUMBER_FORMAT, export_tables_to_excel


def _table() -> pd.DataFrame:
    frame = pd.DataFrame(
        {"New": [10.04, 9.0], "State": [10.6, None], "Likelihood": [5.9, 4.2]},
        index=pd.Index(["lambda = 10", "lambda = 50"], name="setting"),
    )
    return frame


def test_export_writes_one_sheet_per_table(tmp_path: Path) -> None:
    output = tmp_path / "reports" / "tables.xlsx"
    export_tables_to_excel({"poisson": _table(), "a-very-long-table-name-that-overflows": _table()}, output)
    workbook = load_workbook(output)
    assert workbook.sheetnames == ["poisson", "a-very-long-table-name-that-ove"]
    sheet = workbook["poisson"]
    assert [cell.value for cell in sheet[1]] == ["Setting", "New", "State", "Likelihood"]
    assert sheet["A2"].value == "lambda = 10"
    assert sheet["B2"].value == pytest.approx(10.04)
    assert sheet["B2"].number_format == NUMBER_FORMAT
    assert sheet["C3"].value is None
    assert sheet["A2"].alignment.horizontal == "left"
    assert sheet.sheet_view.showGridLines is False


def test_export_requires_tables(tmp_path: Path) -> None:
    with pytest.raises(ValueError):
        export_tables_to_excel({}, tmp_path / "empty.xlsx")
