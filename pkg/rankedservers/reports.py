"""
Output side of the command line: CSV tables, JSON reports and gnuplot data.

Every real is printed with ``format_real`` so that reading a file back gives
the same doubles bit for bit.
"""

import csv
import json
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ParameterError
from .services.analytic_core import SurvivalTable

SURVIVAL_CSV_HEADER = ("lambda", "l", "d", "survival")


class OutputFormat(str, Enum):
    CSV = "csv"
    JSON = "json"


class Subcommand(str, Enum):
    EXACT_SURVIVAL = "exact-survival"
    EXACT_MOMENTS = "exact-moments"
    ASYM = "asym"
    TAIL_CHECK = "tail-check"
    BODY_CHECK = "body-check"
    SIMULATE = "simulate"
    COMPARE = "compare"
    SWEEP = "sweep"
    UNIFORM_CHECK = "uniform-check"

    @property
    def is_check(self):
        return self in _CHECK_SUBCOMMANDS


_CHECK_SUBCOMMANDS = {
    Subcommand.COMPARE,
    Subcommand.TAIL_CHECK,
    Subcommand.BODY_CHECK,
    Subcommand.SWEEP,
    Subcommand.UNIFORM_CHECK,
}


@dataclass(frozen=True)
class RunSpec:
    """What was asked for: echoed into every JSON report."""

    subcommand: Subcommand
    parameters: dict = field(default_factory=dict)
    output_format: OutputFormat = OutputFormat.CSV
    output_path: str | None = None

    def to_dict(self):
        return {
            "subcommand": self.subcommand.value,
            "parameters": dict(self.parameters),
            "output_format": self.output_format.value,
            "output_path": self.output_path,
        }


@dataclass(frozen=True)
class ComparisonReport:
    statistic: float
    threshold: float
    alpha: float
    n: int
    argmax_l: int
    verdict: bool

    def to_dict(self):
        return {
            "statistic": self.statistic,
            "threshold": self.threshold,
            "alpha": self.alpha,
            "n": self.n,
            "argmax_l": self.argmax_l,
            "verdict": self.verdict,
        }


def format_real(x):
    """Shortest decimal that parses back to ``x``; ``2.0`` prints as ``2``."""
    text = repr(float(x))
    if text.endswith(".0"):
        text = text[:-2]
    return text


def _format_cell(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format_real(value)
    if value is None:
        return ""
    return str(value)


def emit_survival_csv(table, sink):
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(SURVIVAL_CSV_HEADER)
    lam = format_real(table.lam)
    for l in range(table.l_max + 1):
        writer.writerow(
            (lam, l, format_real(table.d[l]), format_real(table.survival[l]))
        )


def read_survival_csv(source):
    """Parse what ``emit_survival_csv`` wrote back into a ``SurvivalTable``."""
    reader = csv.reader(source)
    header = next(reader, None)
    if header is None or tuple(header) != SURVIVAL_CSV_HEADER:
        raise ParameterError(f"not a survival table: header {header!r}.")
    lams, ds, survival = [], [], []
    for row_number, row in enumerate(reader):
        if not row:
            continue
        lam, l, d, s = row
        if int(l) != row_number:
            raise ParameterError(f"rows out of order: expected l={row_number}, got {l}.")
        lams.append(float(lam))
        ds.append(float(d))
        survival.append(float(s))
    if not lams:
        raise ParameterError("survival table has no rows.")
    if len(set(lams)) != 1:
        raise ParameterError("survival table mixes several lambda values.")
    d = np.array(ds, dtype=np.float64)
    overflow = np.flatnonzero(np.isinf(d))
    return SurvivalTable(
        lam=lams[0],
        l_max=len(ds) - 1,
        d=d,
        survival=np.array(survival, dtype=np.float64),
        overflow_index=int(overflow[0]) if overflow.size else None,
    )


def emit_rows_csv(rows, sink, columns=None):
    """One CSV line per dict in ``rows``; columns default to the first row's keys."""
    rows = list(rows)
    if columns is None:
        columns = list(rows[0].keys()) if rows else []
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_format_cell(row.get(column)) for column in columns])


def _json_ready(value):
    if isinstance(value, dict):
        return {str(k): _json_ready(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_ready(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_json_ready(v) for v in value.tolist()]
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def emit_json(payload, sink):
    json.dump(_json_ready(payload), sink, sort_keys=True, indent=2, allow_nan=False)
    sink.write("\n")


def emit_plot_data(columns, sink):
    """gnuplot data: a ``#`` header naming the columns, then whitespace-separated rows."""
    names = list(columns.keys())
    series = [list(columns[name]) for name in names]
    lengths = {len(s) for s in series}
    if len(lengths) > 1:
        raise ParameterError(f"plot columns have different lengths: {sorted(lengths)}.")
    sink.write("# " + " ".join(names) + "\n")
    for row in zip(*series):
        sink.write(" ".join(_format_cell(v) for v in row) + "\n")
