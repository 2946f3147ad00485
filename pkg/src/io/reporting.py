from __future__ import annotations

import logging
from pathlib import Path
from typing import Mapping

import pandas as pd  # type: ignore[import-untyped]
from more_itertools import flatten


NUMBER_FORMAT = "#,##0.0"
MAX_SHEET_NAME = 31


logger = logging.getLogger(__name__)


def export_tables_to_excel(tables: Mapping[str, pd.DataFrame], output_path: Path) -> None:
    """Write benchmark tables to an Excel workbook, one sheet per table.

    Args:
        tables (Mapping[str, pd.DataFrame]): Tables keyed by sheet name, rows
            per setting and columns New, State, Likelihood.
        output_path (Path): Destination path for the workbook.

    Returns:
        None: Writes an Excel file to disk.
    """
    if not tables:
        raise ValueError("No tables to export")
    output_path.parent.mkdir(parents=True, exist_ok=True)
    logger.debug("Exporting %d tables to %s", len(tables), output_path)
    with pd.ExcelWriter(output_path, engine="openpyxl") as writer:
        for name, frame in tables.items():
            frame.to_excel(writer, sheet_name=name[:MAX_SHEET_NAME], index_label="Setting")
        _format_workbook(writer)


def _format_workbook(writer: pd.ExcelWriter) -> None:
    """Apply one-decimal number format, left-aligned labels and no gridlines.

    Args:
        writer (pd.ExcelWriter): Excel writer with workbook/worksheets.

    Returns:
        None: Mutates workbook formatting.
    """
    for sheet in writer.sheets.values():
        sheet.sheet_view.showGridLines = False
        for cell in flatten(sheet.iter_rows(min_row=2, min_col=2)):
            cell.number_format = NUMBER_FORMAT
        for item in flatten(sheet.iter_rows(min_row=2, max_col=1)):
            item.alignment = item.alignment.copy(horizontal="left")
