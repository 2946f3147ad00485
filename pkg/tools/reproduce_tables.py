from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from src.io.reporting import export_tables_to_excel  # noqa: E402
from src.logic.bandwidth import parse_bandwidth_grid  # noqa: E402
from src.logic.harness import PRESET_TABLES, emit_table, run_table, table_frame  # noqa: E402


logger = logging.getLogger(__name__)


def _parse_args(argv: list[str]) -> argparse.Namespace:
    parser = argparse.ArgumentParser(description="Run the preset benchmark tables and collect them in a workbook.")
    parser.add_argument("--tables", nargs="+", choices=sorted(PRESET_TABLES), default=list(PRESET_TABLES))
    parser.add_argument("--replicates", type=int, default=100)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--hgrid", default=None, help="Candidates as min:max:count")
    parser.add_argument("--grid", type=int, default=None, help="Evaluation nodes per axis")
    parser.add_argument("--threads", type=int, default=None)
    parser.add_argument("--out", type=Path, default=ROOT / "runs" / "tables")
    return parser.parse_args(argv)


def reproduce(
    tables: list[str],
    out_dir: Path,
    replicates: int,
    seed: int,
    hgrid: str | None,
    threads: int | None,
    grid: int | None = None,
    progress: bool = True,
) -> Path:
    """Run each preset table, write one CSV per table and a combined workbook."""
    out_dir.mkdir(parents=True, exist_ok=True)
    bandwidths = parse_bandwidth_grid(hgrid) if hgrid else None
    frames = {}
    for table in tables:
        logger.info("Running table %s with %d replicates", table, replicates)
        results = run_table(
            table,
            replicates=replicates,
            seed=seed,
            bandwidths=bandwidths,
            eval_resolution=grid,
            threads=threads,
            progress=progress,
        )
        (out_dir / f"{table}.csv").write_text(emit_table(results), encoding="utf-8")
        frames[table] = table_frame(results)
    workbook = out_dir / "tables.xlsx"
    export_tables_to_excel(frames, workbook)
    logger.info("Wrote %d tables to %s", len(frames), workbook)
    return workbook


def main() -> None:
    args = _parse_args(sys.argv[1:])
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(levelname)s %(message)s")
    reproduce(args.tables, args.out, args.replicates, args.seed, args.hgrid, args.threads, args.grid)


if __name__ == "__main__":
    main()
