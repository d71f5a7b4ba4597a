"""Per-iteration run metrics and their CSV form.

A RunRecord holds one row per logged iteration of a single seed. CSV files
stack the records of several seeds, 17 significant digits per float, empty
cells for absent values.
"""

import csv
import logging
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import constants as C

logger = logging.getLogger(__name__)


@dataclass
class MetricRow:
    """Metrics at one logged iteration."""

    k: int
    passes: float  # Effective passes: gradient and HVP evaluations in dataset units
    loss: float  # F(w_k) on the training set
    grad_norm_sq: float
    eta: float
    d_min: float | None = None  # Extremes of the preconditioner diagonal
    d_max: float | None = None
    gap: float | None = None  # F(w_k) - F*, when a converged reference exists
    test_accuracy: float | None = None
    theta: float | None = None
    psi: float | None = None  # Lyapunov energy, adaptive runs with known F*
    drift: float | None = None
    v_inf: float | None = None
    gamma_emp: float | None = None


@dataclass
class RunRecord:
    """All logged rows of one optimizer run on one seed."""

    optimizer: str
    seed: int
    rows: list[MetricRow] = field(default_factory=list)
    status: str = "ok"  # "ok" or the abort reason
    iterates: list[np.ndarray] | None = None  # Retained by instrumented runs only
    diagonals: list[np.ndarray] | None = None  # Clamped preconditioner per row, instrumented runs only

    @property
    def final(self) -> MetricRow:
        return self.rows[-1]

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def column(self, name: str) -> np.ndarray:
        """One metric across rows; absent values become NaN."""
        values = [getattr(row, name) for row in self.rows]
        return np.array([np.nan if v is None else v for v in values], dtype=np.float64)


ROW_FIELDS = [f.name for f in fields(MetricRow)]
CSV_HEADER = ["optimizer", "seed", *ROW_FIELDS, "status"]


def _format(value: object) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return C.CSV_FLOAT_FORMAT % value
    return str(value)


def emit_csv(records: list[RunRecord], path: Path) -> None:
    """Write records stacked by seed; the status lands on each record's last row.

    Raises:
        ValueError: If ``records`` is empty
    """
    if not records:
        raise ValueError("no records to write")
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for record in records:
            for i, row in enumerate(record.rows):
                status = record.status if i == len(record.rows) - 1 else ""
                writer.writerow(
                    [record.optimizer, record.seed]
                    + [_format(getattr(row, name)) for name in ROW_FIELDS]
                    + [status]
                )
    logger.info("Wrote %d records to %s", len(records), path)


def _parse_cell(name: str, text: str) -> object:
    if text == "":
        return None
    if name == "k":
        return int(text)
    return float(text)


def read_csv(path: Path) -> list[RunRecord]:
    """Read a CSV written by ``emit_csv`` back into records, in file order.

    A record ends at its status cell, so consecutive runs with the same
    optimizer and seed stay separate.
    """
    records: list[RunRecord] = []
    closed = True
    with Path(path).open(newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames != CSV_HEADER:
            raise ValueError(f"unexpected CSV header {reader.fieldnames}")
        for line in reader:
            key = (line["optimizer"], int(line["seed"]))
            if closed or (records[-1].optimizer, records[-1].seed) != key:
                records.append(RunRecord(optimizer=key[0], seed=key[1]))
            record = records[-1]
            record.rows.append(MetricRow(**{name: _parse_cell(name, line[name]) for name in ROW_FIELDS}))
            closed = bool(line["status"])
            if closed:
                record.status = line["status"]
    return records
