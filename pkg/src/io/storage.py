from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import pandas as pd

from src.config import (
    coerce_float,
    coerce_int,
    get_bandwidth_grid_spec,
    get_eval_resolution,
    get_field_resolution,
)
from src.domain.schemas import (
    BandwidthMethod,
    BandwidthSelection,
    EdgeCorrection,
    ExperimentConfig,
    ExperimentResult,
    IntensityRaster,
    PointPattern,
    Window,
)
from src.logic.bandwidth import bandwidth_grid
from src.logic.harness import UNIT_SQUARE, emit_table, result_frame
from src.logic.kernels import parse_kernel
from src.logic.simulate import parse_model, parse_params


logger = logging.getLogger(__name__)


AXIS_NAMES = ("x", "y", "z")
INDEX_NAMES = ("i", "j", "k")
EXPERIMENT_KEYS = (
    "model",
    "params",
    "window",
    "replicates",
    "seed",
    "methods",
    "selection_kernel",
    "selection_edge",
    "h_min",
    "h_max",
    "h_count",
    "eval_resolution",
    "field_resolution",
    "threads",
    "label",
)


def save_pattern(path: Path, pattern: PointPattern) -> Path:
    """Write a point pattern as CSV with a leading window comment.

    Args:
        path (Path): Destination CSV path.
        pattern (PointPattern): Pattern to persist.

    Returns:
        Path: Path to the saved CSV.
    """
    path.parent.mkdir(parents=True, exist_ok=True)
    columns = _axis_names(pattern.window.dimension)
    frame = pd.DataFrame(pattern.points, columns=list(columns))
    with path.open("w", encoding="utf-8", newline="") as handle:
        handle.write(f"# window {format_window(pattern.window)}\n")
        frame.to_csv(handle, index=False, lineterminator="\n", float_format=format_float)
    logger.debug("Saved %d points to %s", pattern.count, path)
    return path


def load_pattern(path: Path) -> PointPattern:
    """Read a point pattern written by save_pattern.

    Args:
        path (Path): CSV path.

    Returns:
        PointPattern: Validated pattern.
    """
    with path.open("r", encoding="utf-8") as handle:
        first = handle.readline().strip()
    if not first.startswith("# window"):
        raise ValueError(f"{path} does not start with a '# window' line")
    window = parse_window(first.removeprefix("# window"))
    frame = pd.read_csv(path, skiprows=1, float_precision="round_trip")
    expected = list(_axis_names(window.dimension))
    if list(frame.columns) != expected:
        raise ValueError(f"{path} has columns {list(frame.columns)}, expected {expected}")
    logger.debug("Loaded %d points from %s", len(frame), path)
    return PointPattern(window=window, points=frame.to_numpy(dtype=float).reshape(-1, window.dimension))


def format_float(value: float) -> str:
    """Render a float with the shortest text that reads back to the same value."""
    return repr(float(value))


def format_window(window: Window) -> str:
    """Render window bounds as ``lower upper`` pairs per axis."""
    return " ".join(f"{format_float(low)} {format_float(high)}" for low, high in zip(window.lower, window.upper))


def parse_window(text: str) -> Window:
    """Parse ``lower upper`` pairs per axis into a window."""
    try:
        values = [float(token) for token in text.split()]
    except ValueError as exc:
        raise ValueError(f"Invalid window bounds {text!r}") from exc
    if not values or len(values) % 2:
        raise ValueError(f"Window bounds {text!r} must come in lower/upper pairs")
    return Window(lower=tuple(values[0::2]), upper=tuple(values[1::2]))


def save_raster(path: Path, raster: IntensityRaster) -> Path:
    """Write a raster as CSV with grid indices, node coordinates and values.

    Args:
        path (Path): Destination CSV path.
        raster (IntensityRaster): Raster to persist.

    Returns:
        Path: Path to the saved CSV.
    """
    path.parent.mkdir(parents=True, exist_ok=True)
    grid = raster.grid
    dimension = grid.window.dimension
    indices = np.indices(grid.resolution).reshape(dimension, -1).T
    frame = pd.concat(
        [
            pd.DataFrame(indices, columns=list(INDEX_NAMES[:dimension])),
            pd.DataFrame(grid.nodes, columns=list(_axis_names(dimension))),
            pd.DataFrame({"value": raster.values}),
        ],
        axis=1,
    )
    resolution = " ".join(str(count) for count in grid.resolution)
    with path.open("w", encoding="utf-8", newline="") as handle:
        handle.write(f"# window {format_window(grid.window)} # resolution {resolution}\n")
        frame.to_csv(handle, index=False, lineterminator="\n", float_format=format_float)
    logger.debug("Saved raster with %d nodes to %s", grid.size, path)
    return path


def save_selection(path: Path, selection: BandwidthSelection) -> Path:
    """Write a criterion curve ``h,value`` followed by ``selected,<h>``."""
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(list(selection.curve), columns=["h", "value"])
    with path.open("w", encoding="utf-8", newline="") as handle:
        frame.to_csv(handle, index=False, lineterminator="\n", float_format=format_float)
        handle.write(f"selected,{format_float(selection.selected_h)}\n")
    logger.debug("Saved %s selection (h=%s) to %s", selection.method.value, selection.selected_h, path)
    return path


def save_k_function(path: Path, t: np.ndarray, values: np.ndarray, column: str = "khat") -> Path:
    """Write a summary function table ``t,<column>``."""
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame({"t": t, column: values}).to_csv(path, index=False, lineterminator="\n", float_format=format_float)
    logger.debug("Saved %s table with %d rows to %s", column, len(t), path)
    return path


def save_moments(path: Path, moments: Mapping[str, float]) -> Path:
    """Write named moment values as ``quantity,value`` rows."""
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(list(moments.items()), columns=["quantity", "value"])
    frame.to_csv(path, index=False, lineterminator="\n", float_format=format_float)
    logger.debug("Saved %d moment values to %s", len(frame), path)
    return path


def read_experiment_file(path: Path) -> dict[str, str]:
    """Read a flat ``key = value`` file, ignoring blank lines and ``#`` comments.

    Args:
        path (Path): Experiment definition file.

    Returns:
        dict[str, str]: Raw entries keyed by lower-case name.
    """
    entries: dict[str, str] = {}
    for number, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"{path}:{number}: expected 'key = value'")
        name = key.strip().lower()
        if name not in EXPERIMENT_KEYS:
            raise ValueError(f"{path}:{number}: unknown key {name!r}")
        entries[name] = value.strip()
    return entries


def build_experiment_config(entries: Mapping[str, str]) -> ExperimentConfig:
    """Turn raw experiment entries into a validated configuration.

    Args:
        entries (Mapping[str, str]): Entries from read_experiment_file.

    Returns:
        ExperimentConfig: Validated configuration.
    """
    if "model" not in entries:
        raise ValueError("Experiment file must set 'model'")
    window = parse_window(entries["window"]) if "window" in entries else UNIT_SQUARE
    spec = parse_model(entries["model"], parse_params(entries.get("params", "")), window)
    default_min, default_max, default_count = get_bandwidth_grid_spec()
    grid = bandwidth_grid(
        coerce_float(entries.get("h_min"), default_min),
        coerce_float(entries.get("h_max"), default_max),
        coerce_int(entries.get("h_count"), default_count),
    )
    per_axis = coerce_int(entries.get("eval_resolution"), get_eval_resolution())
    methods = tuple(
        BandwidthMethod(name.strip().lower())
        for name in entries.get("methods", "campbell,diggle,ppl").split(",")
        if name.strip()
    )
    return ExperimentConfig(
        model=spec,
        replicates=coerce_int(entries.get("replicates"), 100),
        bandwidth_grid=grid,
        eval_resolution=(per_axis,) * window.dimension,
        selection_kernel=parse_kernel(entries.get("selection_kernel", "gaussian"), window.dimension),
        selection_edge=EdgeCorrection(entries.get("selection_edge", "none").strip().lower()),
        methods=methods,
        seed=coerce_int(entries.get("seed"), 0),
        field_resolution=coerce_int(entries.get("field_resolution"), get_field_resolution()),
        threads=coerce_int(entries.get("threads"), 0),
        label=entries.get("label", ""),
    )


def parse_experiment_config(path: Path) -> ExperimentConfig:
    """Read and validate an experiment definition file."""
    config = build_experiment_config(read_experiment_file(path))
    logger.debug("Parsed experiment %r from %s", config.label, path)
    return config


def build_run_dir(out_dir: Path) -> Path:
    """Create the output directory for a benchmark run.

    Args:
        out_dir (Path): Requested output directory.

    Returns:
        Path: The created directory.
    """
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir


def save_experiment_outputs(run_dir: Path, result: ExperimentResult, config: ExperimentConfig) -> list[Path]:
    """Write per-replicate rows, the summary table and the resolved configuration.

    Args:
        run_dir (Path): Output directory.
        result (ExperimentResult): Experiment result.
        config (ExperimentConfig): Configuration that produced it.

    Returns:
        list[Path]: Paths of the written files.
    """
    per_replicate = run_dir / "per_replicate.csv"
    result_frame(result).to_csv(per_replicate, index=False, lineterminator="\n", float_format=format_float)
    table = run_dir / "table.csv"
    table.write_text(emit_table([result]), encoding="utf-8")
    echo = run_dir / "config_echo.cfg"
    echo.write_text(format_experiment_config(config), encoding="utf-8")
    logger.info("Saved experiment outputs to %s", run_dir)
    return [per_replicate, table, echo]


def format_experiment_config(config: ExperimentConfig) -> str:
    """Render the resolved configuration as ``key = value`` lines."""
    payload = config.model_dump(mode="json")
    lines = ["# resolved experiment configuration"]
    for key, value in payload.items():
        rendered = json.dumps(value, sort_keys=True) if isinstance(value, (dict, list)) else str(value)
        lines.append(f"{key} = {rendered}")
    return "\n".join(lines) + "\n"


def save_table_outputs(
    run_dir: Path,
    table: str,
    results: Sequence[ExperimentResult],
    settings: Mapping[str, object],
) -> list[Path]:
    """Write a preset table run: rows per setting, per-replicate rows and the run settings.

    Args:
        run_dir (Path): Output directory.
        table (str): Preset table name.
        results (Sequence[ExperimentResult]): One result per table row.
        settings (Mapping[str, object]): Run arguments to echo.

    Returns:
        list[Path]: Paths of the written files.
    """
    per_replicate = run_dir / "per_replicate.csv"
    frames = [result_frame(result).assign(setting=result.label) for result in results]
    combined = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame()
    combined.to_csv(per_replicate, index=False, lineterminator="\n", float_format=format_float)
    table_path = run_dir / "table.csv"
    table_path.write_text(emit_table(results), encoding="utf-8")
    echo = run_dir / "config_echo.cfg"
    echo.write_text(
        "\n".join([f"# preset table {table}", *(f"{key} = {value}" for key, value in settings.items())]) + "\n",
        encoding="utf-8",
    )
    logger.info("Saved %s table outputs to %s", table, run_dir)
    return [per_replicate, table_path, echo]


def _axis_names(dimension: int) -> tuple[str, ...]:
    if not 1 <= dimension <= len(AXIS_NAMES):
        raise ValueError(f"Only 1 to {len(AXIS_NAMES)} dimensional data can be written, got {dimension}")
    return AXIS_NAMES[:dimension]
