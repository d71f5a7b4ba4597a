"""Tests for run records and their CSV form."""

import math

import numpy as np
import pytest

from oasis_bench.metrics import CSV_HEADER, ROW_FIELDS, MetricRow, RunRecord, emit_csv, read_csv


def _record(optimizer: str, seed: int, rows: int, status: str = "ok") -> RunRecord:
    record = RunRecord(optimizer=optimizer, seed=seed, status=status)
    for k in range(rows):
        record.rows.append(
            MetricRow(
                k=k,
                passes=2.0 * k,
                loss=1.0 / (k + 3),
                grad_norm_sq=0.1**k,
                eta=1e-4 * (k + 1),
                d_min=1e-5,
                d_max=2.5,
                gap=None if k == 0 else 1.0 / 3.0**k,
                theta=None if k < 2 else 1.1,
            )
        )
    return record


class TestRunRecord:
    def test_final_and_ok(self):
        record = _record("oasis", 0, 3)
        assert record.final.k == 2
        assert record.ok
        assert not _record("oasis", 0, 1, status="aborted: diverged").ok

    def test_column_fills_nan(self):
        gaps = _record("oasis", 0, 3).column("gap")
        assert math.isnan(gaps[0])
        np.testing.assert_allclose(gaps[1:], [1.0 / 3.0, 1.0 / 9.0])


class TestCsv:
    def test_header(self):
        assert CSV_HEADER[:3] == ["optimizer", "seed", "k"]
        assert CSV_HEADER[-1] == "status"
        assert len(CSV_HEADER) == len(ROW_FIELDS) + 3

    def test_single_row_file(self, tmp_path):
        path = tmp_path / "one.csv"
        emit_csv([_record("sgd", 4, 1)], path)
        lines = path.read_text().splitlines()
        assert len(lines) == 2
        assert lines[0] == ",".join(CSV_HEADER)
        assert lines[1].startswith("sgd,4,0,0,")
        assert lines[1].endswith(",ok")

    def test_status_only_on_last_row(self, tmp_path):
        path = tmp_path / "status.csv"
        emit_csv([_record("adam", 0, 3, status="aborted: non-finite iterate")], path)
        cells = [line.rsplit(",", 1)[-1] for line in path.read_text().splitlines()[1:]]
        assert cells == ["", "", "aborted: non-finite iterate"]

    def test_read_back_exactly(self, tmp_path):
        records = [_record("oasis", 0, 4), _record("oasis", 1, 2, status="aborted: diverged")]
        path = tmp_path / "runs.csv"
        emit_csv(records, path)
        loaded = read_csv(path)
        assert [(r.optimizer, r.seed, r.status) for r in loaded] == [
            ("oasis", 0, "ok"),
            ("oasis", 1, "aborted: diverged"),
        ]
        for original, parsed in zip(records, loaded):
            assert parsed.rows == original.rows

    def test_consecutive_runs_with_same_key_stay_apart(self, tmp_path):
        records = [_record("adahessian", 0, 3), _record("adahessian", 0, 3), _record("oasis", 0, 1)]
        path = tmp_path / "grid.csv"
        emit_csv(records, path)
        loaded = read_csv(path)
        assert [(r.optimizer, r.seed, len(r.rows)) for r in loaded] == [
            ("adahessian", 0, 3),
            ("adahessian", 0, 3),
            ("oasis", 0, 1),
        ]

    def test_empty_records_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="no records"):
            emit_csv([], tmp_path / "empty.csv")

    def test_foreign_header_rejected(self, tmp_path):
        path = tmp_path / "foreign.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(ValueError, match="unexpected CSV header"):
            read_csv(path)
