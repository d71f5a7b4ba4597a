"""SVG line charts of run metrics and of the diagonal-fidelity experiment.

Output is byte-stable for identical inputs: the SVG hash salt is fixed and the
date metadata is dropped.
"""

import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .harness import FidelityResult  # noqa: E402
from .metrics import ROW_FIELDS, RunRecord  # noqa: E402

logger = logging.getLogger(__name__)

# Metrics plotted on a log-scale y axis
LOG_METRICS = {"gap", "grad_norm_sq", "psi", "drift", "eta"}

_SVG_RC = {"svg.hashsalt": "oasis-bench", "svg.fonttype": "none"}

_AXIS_LABELS = {
    "gap": "F(w) - F*",
    "grad_norm_sq": "||grad F(w)||^2",
    "loss": "F(w)",
    "eta": "step size",
    "test_accuracy": "test accuracy",
    "psi": "Lyapunov energy",
}


def _save_svg(fig: plt.Figure, path: Path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None}, bbox_inches="tight")
    plt.close(fig)
    logger.info("Wrote plot to %s", path)


def emit_svg_plot(records: list[RunRecord], metric: str, path: Path) -> None:
    """Plot ``metric`` against effective passes, one line per record.

    Each line carries the SVG id ``seed-<seed>`` (prefixed by the optimizer
    when records mix optimizers). Gap-like metrics use a log-scale y axis;
    non-positive values are masked there.

    Raises:
        ValueError: If ``records`` is empty or ``metric`` is not a row field
    """
    if not records:
        raise ValueError("no records to plot")
    if metric not in ROW_FIELDS:
        raise ValueError(f"unknown metric '{metric}'; choose from {', '.join(ROW_FIELDS)}")

    mixed = len({r.optimizer for r in records}) > 1
    with plt.rc_context(_SVG_RC):
        fig, ax = plt.subplots(figsize=(6, 4))
        for record in records:
            label = f"{record.optimizer} seed {record.seed}" if mixed else f"seed {record.seed}"
            (line,) = ax.plot(record.column("passes"), record.column(metric), label=label, linewidth=1.2)
            gid = f"seed-{record.seed}"
            line.set_gid(f"{record.optimizer}-{gid}" if mixed else gid)
        if metric in LOG_METRICS:
            ax.set_yscale("log")
        ax.set_xlabel("effective passes")
        ax.set_ylabel(_AXIS_LABELS.get(metric, metric))
        ax.grid(True, alpha=0.3)
        ax.legend(fontsize=8)
        _save_svg(fig, Path(path))


def emit_fidelity_plot(result: FidelityResult, path: Path) -> None:
    """Relative error per sample count (left) and final per-coordinate scales (right)."""
    with plt.rc_context(_SVG_RC):
        fig, (left, right) = plt.subplots(1, 2, figsize=(11, 4))
        samples = range(1, len(result.running_mean) + 1)
        left.plot(samples, result.running_mean, label="Hutchinson running mean", gid="running-mean")
        left.plot(samples, result.oasis, label="OASIS EMA", gid="oasis")
        left.plot(samples, result.adahessian, label="AdaHessian EMA", gid="adahessian")
        left.set_yscale("log")
        left.set_xlabel("samples")
        left.set_ylabel("relative error")
        left.grid(True, alpha=0.3)
        left.legend(fontsize=8)

        coords = range(len(result.true_diag))
        right.scatter(coords, abs(result.true_diag), s=10, marker="o", label="|diag(A)|", gid="true")
        right.scatter(coords, result.final_oasis, s=10, marker="x", label="OASIS", gid="oasis-scale")
        right.scatter(coords, result.final_adahessian, s=10, marker="+", label="AdaHessian", gid="adahessian-scale")
        right.set_xlabel("coordinate")
        right.set_ylabel("scale")
        right.legend(fontsize=8)
        _save_svg(fig, Path(path))
