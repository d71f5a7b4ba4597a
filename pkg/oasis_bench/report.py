"""PDF report generation.

Generates a simple PDF version of the theory-verification report.
"""

from pathlib import Path
from xml.sax.saxutils import escape

from reportlab.lib import colors
from reportlab.lib.pagesizes import landscape, letter
from reportlab.lib.styles import getSampleStyleSheet
from reportlab.lib.units import inch
from reportlab.platypus import Paragraph, SimpleDocTemplate, Spacer, Table, TableStyle

from . import constants as C
from .report_markdown import check_label, format_margin
from .verify import TheoryReport

_TABLE_STYLE = [
    ("BACKGROUND", (0, 0), (-1, 0), colors.HexColor("#f3f4f6")),
    ("TEXTCOLOR", (0, 0), (-1, 0), colors.HexColor("#374151")),
    ("FONTNAME", (0, 0), (-1, 0), "Helvetica-Bold"),
    ("FONTSIZE", (0, 0), (-1, -1), 10),
    ("BOTTOMPADDING", (0, 0), (-1, 0), 12),
    ("TOPPADDING", (0, 0), (-1, -1), 8),
    ("BOTTOMPADDING", (0, 1), (-1, -1), 8),
    ("GRID", (0, 0), (-1, -1), 0.5, colors.HexColor("#e5e7eb")),
    ("VALIGN", (0, 0), (-1, -1), "MIDDLE"),
]


def _table(data: list[list[str]], col_widths: list[float], font_size: int = 10) -> Table:
    table = Table(data, colWidths=col_widths, repeatRows=1)
    style = list(_TABLE_STYLE)
    if font_size != 10:
        style.append(("FONTSIZE", (0, 0), (-1, -1), font_size))
        style.append(("TOPPADDING", (0, 0), (-1, -1), 4))
        style.append(("BOTTOMPADDING", (0, 1), (-1, -1), 4))
    table.setStyle(TableStyle(style))
    return table


def generate_report(report: TheoryReport, output_path: Path) -> None:
    """Generate a PDF report for a theory-check suite.

    Args:
        report: Completed suite results
        output_path: Path to write the PDF
    """
    doc = SimpleDocTemplate(
        str(output_path),
        pagesize=landscape(letter),
        rightMargin=0.5 * inch,
        leftMargin=0.5 * inch,
        topMargin=0.5 * inch,
        bottomMargin=0.5 * inch,
    )

    styles = getSampleStyleSheet()
    title_style = styles["Heading1"]
    heading_style = styles["Heading2"]
    normal_style = styles["Normal"]

    elements: list = []

    # Title
    elements.append(Paragraph(C.REPORT_TITLE, title_style))
    elements.append(Spacer(1, 0.1 * inch))

    # Report metadata
    generated_at = report.generated_at.strftime("%Y-%m-%d %H:%M")
    elements.append(Paragraph(f"<b>{C.LABEL_GENERATED}</b> {generated_at}", normal_style))
    elements.append(Paragraph(f"<b>{C.LABEL_SUITE}</b> {report.suite}", normal_style))
    seeds = ", ".join(str(s) for s in report.seeds)
    elements.append(Paragraph(f"<b>{C.LABEL_SEEDS}</b> {seeds}", normal_style))
    elements.append(Spacer(1, 0.15 * inch))

    elements.append(Paragraph(f"<b>Important:</b> {C.DISCLAIMER_TEXT}", normal_style))
    elements.append(Spacer(1, 0.15 * inch))

    if not report.checks:
        elements.append(Paragraph(C.NO_CHECKS_MESSAGE, normal_style))
    else:
        elements.append(Paragraph(C.HEADING_SUMMARY, heading_style))
        elements.append(Paragraph(C.DESC_SUMMARY, normal_style))
        summary_data = [
            [C.LABEL_METRIC, C.LABEL_VALUE],
            [C.LABEL_TOTAL_CHECKS, str(report.total)],
            [C.LABEL_PASSED, str(report.passed)],
            [C.LABEL_FAILED, str(report.failed)],
            [C.LABEL_NOT_APPLICABLE, str(report.not_applicable)],
        ]
        elements.append(_table(summary_data, [4 * inch, 2.5 * inch]))
        elements.append(Spacer(1, 0.2 * inch))

        elements.append(Paragraph(C.HEADING_CHECKS, heading_style))
        elements.append(Paragraph(C.DESC_CHECKS, normal_style))
        check_data = [[C.LABEL_CHECK, C.LABEL_FIXTURE, C.LABEL_SEED, C.LABEL_STATUS, C.LABEL_MARGIN, C.LABEL_GAMMA]]
        for check in report.checks:
            check_data.append([
                check_label(check),
                check.fixture,
                str(check.seed),
                check.status,
                format_margin(check.margin),
                check.gamma_used or "-",
            ])
        widths = [2.8 * inch, 1.7 * inch, 0.5 * inch, 1.0 * inch, 1.1 * inch, 1.6 * inch]
        elements.append(_table(check_data, widths, font_size=8))
        elements.append(Spacer(1, 0.2 * inch))

        failures = [c for c in report.checks if not c.passed]
        if failures:
            elements.append(Paragraph(C.HEADING_FAILURES, heading_style))
            elements.append(Paragraph(C.DESC_FAILURES, normal_style))
            for check in failures:
                elements.append(
                    Paragraph(
                        f"<b>{check_label(check)}</b> on {escape(check.fixture)} (seed {check.seed}), "
                        f"k={check.first_violation}: {escape(check.detail)}",
                        normal_style,
                    )
                )
            elements.append(Spacer(1, 0.2 * inch))

    if report.ergodic:
        elements.append(Paragraph(C.HEADING_ERGODIC, heading_style))
        elements.append(Paragraph(C.DESC_ERGODIC, normal_style))
        ergodic_data = [
            [C.LABEL_FIXTURE, C.LABEL_SEED, C.LABEL_K, C.LABEL_C_TERM, C.LABEL_Q_TERM, C.LABEL_BOUND, C.LABEL_GAP_AVERAGE]
        ]
        for s in report.ergodic:
            ergodic_data.append([
                s.fixture, str(s.seed), str(s.k), f"{s.c_term:.4g}", f"{s.q_term:.4g}",
                f"{s.bound:.4g}", f"{s.gap_at_average:.4g}",
            ])
        widths = [1.8 * inch, 0.6 * inch, 0.6 * inch, 1.2 * inch, 1.2 * inch, 1.2 * inch, 1.4 * inch]
        elements.append(_table(ergodic_data, widths, font_size=8))
        elements.append(Spacer(1, 0.2 * inch))

    # Methodology section
    elements.append(Paragraph(C.HEADING_METHODOLOGY, heading_style))
    elements.append(Paragraph(C.METHODOLOGY_TEXT, normal_style))

    doc.build(elements)
