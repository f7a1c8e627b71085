# GNU General Public License v3.0+ (see LICENSES/GPL-3.0-or-later.txt or
# https://www.gnu.org/licenses/gpl-3.0.txt)
# SPDX-License-Identifier: GPL-3.0-or-later

"""
Human-readable efficiency reports as ReStructuredText or MarkDown.
"""

from __future__ import annotations

import abc
from collections.abc import Mapping, Sequence

from antsibull_docutils.md_utils import md_escape
from antsibull_docutils.rst_utils import column_width, rst_escape
from antsibull_docutils.utils import ensure_newline_after_last_content

from .config import TextFormat
from .diagnostics import EfficiencyReport


class ReportDocument(abc.ABC):
    """
    Line-based document with a title, sections, paragraphs and tables.
    """

    lines: list[str]

    def __init__(self):
        self.lines = []

    @abc.abstractmethod
    def escape(self, text: str) -> str:
        """
        Escape plain text for the target format.
        """

    @abc.abstractmethod
    def add_title(self, title: str) -> None:
        """
        Add the document title.
        """

    @abc.abstractmethod
    def add_section(self, title: str) -> None:
        """
        Start a new section.
        """

    @abc.abstractmethod
    def add_table(self, header: Sequence[str], rows: Sequence[Sequence[str]]) -> None:
        """
        Add a table; cells are escaped here.
        """

    def add_paragraph(self, text: str) -> None:
        ensure_newline_after_last_content(self.lines)
        self.lines.append(self.escape(text))
        self.lines.append("")

    def render(self) -> str:
        while self.lines and not self.lines[-1]:
            self.lines.pop()
        return "\n".join(self.lines) + "\n"


class RSTReportDocument(ReportDocument):
    """
    ReStructuredText report.
    """

    def escape(self, text: str) -> str:
        return rst_escape(text)

    def add_title(self, title: str) -> None:
        title = rst_escape(title)
        line = "=" * column_width(title)
        self.lines.extend([line, title, line, ""])

    def add_section(self, title: str) -> None:
        ensure_newline_after_last_content(self.lines)
        title = rst_escape(title)
        self.lines.extend([title, "-" * column_width(title), ""])

    def add_table(self, header: Sequence[str], rows: Sequence[Sequence[str]]) -> None:
        ensure_newline_after_last_content(self.lines)
        cells = [[rst_escape(cell) for cell in row] for row in [header, *rows]]
        widths = [
            max(column_width(row[k]) for row in cells) for k in range(len(header))
        ]
        border = "  ".join("=" * width for width in widths)

        def line(row: list[str]) -> str:
            return "  ".join(
                cell + " " * (width - column_width(cell)) for cell, width in zip(row, widths)
            ).rstrip()

        self.lines.append(border)
        self.lines.append(line(cells[0]))
        self.lines.append(border)
        self.lines.extend(line(row) for row in cells[1:])
        self.lines.append(border)
        self.lines.append("")


class MDReportDocument(ReportDocument):
    """
    MarkDown report.
    """

    def escape(self, text: str) -> str:
        return md_escape(text)

    def add_title(self, title: str) -> None:
        self.lines.extend(["# " + md_escape(title), ""])

    def add_section(self, title: str) -> None:
        ensure_newline_after_last_content(self.lines)
        self.lines.extend(["## " + md_escape(title), ""])

    def add_table(self, header: Sequence[str], rows: Sequence[Sequence[str]]) -> None:
        ensure_newline_after_last_content(self.lines)
        self.lines.append("| " + " | ".join(md_escape(cell) for cell in header) + " |")
        self.lines.append("|" + "|".join(" --- " for _ in header) + "|")
        for row in rows:
            self.lines.append("| " + " | ".join(md_escape(cell) for cell in row) + " |")
        self.lines.append("")


def create_document(text_format: TextFormat) -> ReportDocument:
    if text_format == TextFormat.RESTRUCTURED_TEXT:
        return RSTReportDocument()
    if text_format == TextFormat.MARKDOWN:
        return MDReportDocument()
    raise ValueError(f"Unsupported format {text_format}")


def _number(value: float | None) -> str:
    if value is None:
        return "n/a"
    return "{0:.4g}".format(value)


def _add_report(document: ReportDocument, report: EfficiencyReport) -> None:
    document.add_table(
        ["quantity", "ESS"],
        [[name, _number(value)] for name, value in sorted(report.ess.items())],
    )
    summary = [
        ["draws", str(report.draws)],
        ["iterations", str(report.iterations)],
        ["thin", str(report.thin)],
        ["minimum ESS", "{0} ({1})".format(_number(report.min_ess), report.min_quantity)],
        ["wall time (s)", _number(report.wall_time)],
        ["ESS per second", _number(report.ess_per_second)],
    ]
    summary.extend(
        ["acceptance: {0}".format(move), _number(rate)]
        for move, rate in sorted(report.acceptance.items())
    )
    document.add_table(["", "value"], summary)


def render_efficiency_report(report: EfficiencyReport, text_format: TextFormat) -> str:
    """
    Render the report of a single chain.
    """
    document = create_document(text_format)
    document.add_title("Efficiency of {0}".format(report.sampler or "sampler"))
    _add_report(document, report)
    return document.render()


def render_comparison(
    reports: Mapping[str, EfficiencyReport],
    text_format: TextFormat,
    title: str = "Sampler comparison",
    reference: str = "baseline",
) -> str:
    """
    Render several samplers run on the same data, with efficiencies relative
    to ``reference`` when it is among them.
    """
    document = create_document(text_format)
    document.add_title(title)
    timed = all(report.ess_per_second is not None for report in reports.values())
    unit = "ESS per second" if timed else "ESS per iteration"
    document.add_paragraph(
        "Efficiency is the minimum ESS over all monitored quantities, per {0}.".format(
            "second" if timed else "iteration"
        )
    )
    base = reports[reference].efficiency if reference in reports else None
    rows = []
    for name, report in reports.items():
        ratio = None if not base else report.efficiency / base
        rows.append(
            [
                name,
                _number(report.min_ess),
                report.min_quantity,
                _number(report.efficiency),
                _number(ratio),
            ]
        )
    document.add_table(
        ["sampler", "minimum ESS", "quantity", unit, "ratio to {0}".format(reference)],
        rows,
    )
    for name, report in reports.items():
        document.add_section(name)
        _add_report(document, report)
    return document.render()
