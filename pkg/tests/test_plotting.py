"""Tests for the SVG plots."""

import pytest

from oasis_bench.harness import diag_fidelity_experiment
from oasis_bench.linalg import Rng
from oasis_bench.metrics import MetricRow, RunRecord
from oasis_bench.plotting import emit_fidelity_plot, emit_svg_plot


def _record(optimizer: str, seed: int) -> RunRecord:
    record = RunRecord(optimizer=optimizer, seed=seed)
    for k in range(5):
        record.rows.append(
            MetricRow(k=k, passes=float(k), loss=1.0 / (k + 1), grad_norm_sq=0.5**k, eta=0.1, gap=None if k == 0 else 0.1**k)
        )
    return record


class TestEmitSvgPlot:
    def test_one_line_per_seed(self, tmp_path):
        path = tmp_path / "gap.svg"
        emit_svg_plot([_record("oasis", s) for s in range(3)], "gap", path)
        svg = path.read_text()
        assert svg.lstrip().startswith("<?xml")
        for seed in range(3):
            assert f'id="seed-{seed}"' in svg

    def test_mixed_optimizers_are_prefixed(self, tmp_path):
        path = tmp_path / "mixed.svg"
        emit_svg_plot([_record("oasis", 0), _record("adam", 0)], "loss", path)
        svg = path.read_text()
        assert 'id="oasis-seed-0"' in svg
        assert 'id="adam-seed-0"' in svg

    def test_byte_stable(self, tmp_path):
        records = [_record("oasis", 0), _record("oasis", 1)]
        first, second = tmp_path / "a.svg", tmp_path / "b.svg"
        emit_svg_plot(records, "grad_norm_sq", first)
        emit_svg_plot(records, "grad_norm_sq", second)
        assert first.read_bytes() == second.read_bytes()

    def test_empty_records(self, tmp_path):
        with pytest.raises(ValueError, match="no records"):
            emit_svg_plot([], "gap", tmp_path / "x.svg")

    def test_unknown_metric(self, tmp_path):
        with pytest.raises(ValueError, match="unknown metric"):
            emit_svg_plot([_record("oasis", 0)], "accuracy", tmp_path / "x.svg")


class TestEmitFidelityPlot:
    def test_series_ids(self, tmp_path):
        path = tmp_path / "fidelity.svg"
        emit_fidelity_plot(diag_fidelity_experiment(dim=6, iters=30, rng=Rng(0)), path)
        svg = path.read_text()
        for gid in ("running-mean", "oasis", "adahessian", "true", "oasis-scale", "adahessian-scale"):
            assert f'id="{gid}"' in svg
