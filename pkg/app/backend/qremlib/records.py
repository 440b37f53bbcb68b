"""Output rows of every experiment and their CSV / newline-delimited JSON writers."""

import csv
import io
import json
import logging
import sys
from collections.abc import Iterable, Sequence
from enum import Enum
from pathlib import Path
from typing import Optional, TextIO

from pydantic import BaseModel

logger = logging.getLogger("qremlab")


class OutputFormat(str, Enum):
    CSV = "csv"
    JSON = "json"


class PressureRow(BaseModel):
    variant: str
    p: Optional[int]
    n: int
    beta: float
    gamma: float
    value: float
    stderr: float
    disorder_stderr: float
    trace_stderr: float
    num_samples: int
    method: str
    base_seed: int
    probes: int
    krylov_dim: int
    wall_time_s: Optional[float] = None


class ConvergePRow(BaseModel):
    variant: str
    p: Optional[int]
    n: int
    beta: float
    gamma: float
    value: float
    stderr: float
    num_samples: int
    method: str
    base_seed: int
    qrem_pressure: float
    one_over_p_correction: Optional[float]
    gap: float
    gap_times_p: Optional[float]
    annealed_pressure: float
    wall_time_s: Optional[float] = None


class PhaseDiagramRow(BaseModel):
    variant: str
    p: Optional[int]
    n: int
    beta: float
    gamma: float
    value: float
    stderr: float
    num_samples: int
    method: str
    base_seed: int
    classical_value: float
    paramagnet_pressure: float
    qrem_pressure: float
    branch: str
    empirical_branch: str
    critical_field: float
    wall_time_s: Optional[float] = None


class SelfAveragingRow(BaseModel):
    variant: str
    p: Optional[int]
    n: int
    beta: float
    gamma: float
    num_disorder: int
    method: str
    base_seed: int
    mean: float
    t: float
    exceedance: float
    bound: float
    binomial_stderr: float
    within_bound: bool
    wall_time_s: Optional[float] = None


class ClusterCensusRow(BaseModel):
    """One census sample. A row without a seed marks a (variant, n) whose schedule is unusable."""

    seed: Optional[int]
    epsilon: float
    r: Optional[float]
    num_components: Optional[int]
    max_diameter: Optional[int]
    max_component_size: Optional[int]
    T_norm: Optional[float]
    bound_2N_sqrt_rL: Optional[float]
    event_flag: Optional[bool]
    L: Optional[int]
    variant: str
    n: int
    deep_hole_count: Optional[int]
    norm_check: str


class ClosedFormRow(BaseModel):
    beta: float
    gamma: float
    p: Optional[float]
    rem_pressure: float
    paramagnet_pressure: float
    qrem_pressure: float
    branch: str
    critical_field: float
    one_over_p_term: Optional[float]
    one_over_p_correction: Optional[float]


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, float):
        # repr is the shortest string that round-trips the 64-bit float
        return repr(value)
    return str(value)


def _json_value(value):
    if isinstance(value, Enum):
        return value.value
    return value


def write_csv(rows: Sequence[BaseModel], stream: TextIO, model: Optional[type[BaseModel]] = None):
    fields = list((model or type(rows[0])).model_fields) if (model or rows) else []
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(fields)
    for row in rows:
        record = row.model_dump()
        writer.writerow([_csv_cell(record[name]) for name in fields])


def write_ndjson(rows: Iterable[BaseModel], stream: TextIO):
    for row in rows:
        record = {key: _json_value(value) for key, value in row.model_dump().items()}
        stream.write(json.dumps(record) + "\n")


def render(rows: Sequence[BaseModel], output_format: OutputFormat, model: Optional[type[BaseModel]] = None) -> str:
    buffer = io.StringIO()
    if OutputFormat(output_format) == OutputFormat.CSV:
        write_csv(rows, buffer, model)
    else:
        write_ndjson(rows, buffer)
    return buffer.getvalue()


def write_rows(
    rows: Sequence[BaseModel],
    output: Optional[Path | str],
    output_format: OutputFormat,
    model: Optional[type[BaseModel]] = None,
):
    """Write rows to a file, or to stdout when output is None or "-"."""
    text = render(rows, output_format, model)
    if output is None or str(output) == "-":
        sys.stdout.write(text)
        return
    path = Path(output)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(text)
    logger.info("Wrote %d rows to %s", len(rows), path)
