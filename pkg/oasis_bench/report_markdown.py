"""Markdown report generation.

Generates a Markdown theory-verification report from a TheoryReport.
"""

from pathlib import Path

from . import constants as C
from .verify import CheckResult, TheoryReport


def format_margin(value: float | None) -> str:
    """Format a margin compactly; absent margins show as a dash."""
    if value is None:
        return "-"
    return f"{value:.3g}"


def check_label(check: CheckResult) -> str:
    """Check name, marked when the check is a negative control."""
    if check.negative_control:
        return f"{check.name} ({C.LABEL_NEGATIVE_CONTROL})"
    return check.name


def generate_markdown_report(report: TheoryReport, output_path: Path) -> None:
    """Generate a Markdown report for a theory-check suite.

    Args:
        report: Completed suite results
        output_path: Path to write the Markdown file
    """
    lines: list[str] = []

    # Title
    lines.append(f"# {C.REPORT_TITLE}")
    lines.append("")

    # Report metadata
    generated_at = report.generated_at.strftime("%Y-%m-%d %H:%M")
    lines.append(f"**{C.LABEL_GENERATED}** {generated_at}")
    lines.append("")
    lines.append(f"**{C.LABEL_SUITE}** {report.suite}")
    lines.append("")
    lines.append(f"**{C.LABEL_SEEDS}** {', '.join(str(s) for s in report.seeds)}")
    lines.append("")

    lines.append(f"> **Note:** {C.DISCLAIMER_TEXT}")
    lines.append("")

    if not report.checks:
        lines.append(C.NO_CHECKS_MESSAGE)
        lines.append("")
    else:
        # Summary table
        lines.append(f"## {C.HEADING_SUMMARY}")
        lines.append("")
        lines.append(C.DESC_SUMMARY)
        lines.append("")
        lines.append(f"| {C.LABEL_METRIC} | {C.LABEL_VALUE} |")
        lines.append("|---|---|")
        lines.append(f"| {C.LABEL_TOTAL_CHECKS} | {report.total} |")
        lines.append(f"| {C.LABEL_PASSED} | {report.passed} |")
        lines.append(f"| {C.LABEL_FAILED} | {report.failed} |")
        lines.append(f"| {C.LABEL_NOT_APPLICABLE} | {report.not_applicable} |")
        lines.append("")

        # Check descriptions, in first-seen order
        seen: list[str] = []
        for check in report.checks:
            if check.name not in seen:
                seen.append(check.name)
        for name in seen:
            lines.append(f"- **{name}** ({C.CHECK_ANCHORS[name]}): {C.CHECK_DESCRIPTIONS[name]}")
        lines.append("")

        # Per-check table
        lines.append(f"## {C.HEADING_CHECKS}")
        lines.append("")
        lines.append(C.DESC_CHECKS)
        lines.append("")
        lines.append(
            f"| {C.LABEL_CHECK} | {C.LABEL_FIXTURE} | {C.LABEL_SEED} | {C.LABEL_STATUS} "
            f"| {C.LABEL_MARGIN} | {C.LABEL_GAMMA} | {C.LABEL_ITERATIONS} |"
        )
        lines.append("|---|---|---|---|---|---|---|")
        for check in report.checks:
            lines.append(
                f"| {check_label(check)} | {check.fixture} | {check.seed} | {check.status} "
                f"| {format_margin(check.margin)} | {check.gamma_used or '-'} | {check.iterations} |"
            )
        lines.append("")

        failures = [c for c in report.checks if not c.passed]
        if failures:
            lines.append(f"## {C.HEADING_FAILURES}")
            lines.append("")
            lines.append(C.DESC_FAILURES)
            lines.append("")
            for check in failures:
                lines.append(
                    f"- {check_label(check)} on {check.fixture} (seed {check.seed}), "
                    f"k={check.first_violation}: {check.detail}"
                )
            lines.append("")

    if report.ergodic:
        lines.append(f"## {C.HEADING_ERGODIC}")
        lines.append("")
        lines.append(C.DESC_ERGODIC)
        lines.append("")
        lines.append(
            f"| {C.LABEL_FIXTURE} | {C.LABEL_SEED} | {C.LABEL_K} | {C.LABEL_C_TERM} "
            f"| {C.LABEL_Q_TERM} | {C.LABEL_BOUND} | {C.LABEL_GAP_AVERAGE} |"
        )
        lines.append("|---|---|---|---|---|---|---|")
        for s in report.ergodic:
            lines.append(
                f"| {s.fixture} | {s.seed} | {s.k} | {s.c_term:.4g} | {s.q_term:.4g} "
                f"| {s.bound:.4g} | {s.gap_at_average:.4g} |"
            )
        lines.append("")

    # Methodology section
    lines.append(f"## {C.HEADING_METHODOLOGY}")
    lines.append("")
    lines.append(C.METHODOLOGY_TEXT)

    output_path.write_text("\n".join(lines))
