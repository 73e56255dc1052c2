"""Text renderings of run reports."""
from typing import Dict, List, Optional, Sequence, Tuple

from hybridisland.formats.scenario_yaml import CASES, EVENTS
from hybridisland.model.scenario import RunReport


def _number(value: Optional[float], digits: int = 4) -> str:
    return "-" if value is None else f"{value:.{digits}g}"


def format_report(report: RunReport) -> str:
    timeline = report.timeline
    rows = [
        f"scenario: {report.scenario}",
        f"case: {report.case or '-'}",
        f"event: {report.event_label or '-'}",
        f"verdict: {report.verdict.value}",
        f"a75: {_number(report.a75, 6)}",
        f"arcv1: {_number(report.arcv1, 6)} pu/s",
        f"arcv2: {_number(report.arcv2, 6)} pu/s",
        f"latency: {_number(report.latency_cycles)} cycles",
        f"flagged at: {_number(timeline.t_event_flagged, 6)} s",
        f"verdict at: {_number(timeline.t_verdict, 6)} s",
    ]
    if timeline.ack is not None:
        rows.append(
            f"power shift: DG {timeline.ack.dg_id} to {timeline.ack.fraction:.0%}, "
            f"effective at {timeline.ack.t_effective:.6f} s"
        )
    if timeline.error is not None:
        rows.append(f"error: {timeline.error}")
    if report.artifacts:
        rows.append("artifacts:")
        rows.extend(f"  {path}" for path in report.artifacts)
    return "\n".join(rows)


def _cell(report: RunReport) -> str:
    values = " / ".join(
        _number(value) for value in (report.a75, report.arcv1, report.arcv2)
    )
    return f"{values} ({report.verdict.value})"


def format_matrix(reports: Sequence[RunReport]) -> str:
    """Event rows by case columns of ``a75 / arcv1 / arcv2 (verdict)`` cells.

    Reports without a known case and event are listed below the matrix.
    """
    cells: Dict[Tuple[str, str], str] = {}
    extra = []
    for report in reports:
        if report.event_label in EVENTS and report.case in CASES:
            cells[(report.event_label, report.case)] = _cell(report)
        else:
            extra.append(f"{report.scenario}: {_cell(report)}")
    cases = [case for case in CASES if any(key[1] == case for key in cells)]
    events = [event for event in EVENTS if any(key[0] == event for key in cells)]
    rows: List[str] = []
    if cells:
        table = [["event"] + cases]
        for event in events:
            table.append([event] + [cells.get((event, case), "") for case in cases])
        widths = [max(len(row[i]) for row in table) for i in range(len(table[0]))]
        for row in table:
            rows.append("  ".join(cell.ljust(width) for cell, width in zip(row, widths)))
    if extra:
        if rows:
            rows.append("")
        rows.extend(extra)
    return "\n".join(line.rstrip() for line in rows)
