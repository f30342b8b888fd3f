"""Comparison tables in markdown, CSV or a plot-friendly machine format.

Numbers are rounded half-up at render time only. The ``machine`` format keeps
full precision (shortest round-trip float repr) in whitespace-separated,
gnuplot-readable blocks so it can be parsed back with :func:`parse_machine`.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from typing import Optional, Sequence, Union

from .metrics import CohortMetrics
from .model import format_timestamp
from .surveystats import BoxplotStats, ChoiceTally, LikertSummary

FORMATS = ("markdown", "csv", "machine")
MISSING = "–"

Cell = Union[float, int, str, None]


@dataclass(frozen=True)
class Column:
    header: str
    decimals: Optional[int]  # None: text column
    key: str = ""

    @property
    def machine_key(self) -> str:
        return self.key or self.header.lower().replace(" ", "_")


@dataclass
class Table:
    title: str
    label_header: str
    columns: list[Column]
    rows: list[tuple[str, bool, list[Cell]]] = field(default_factory=list)
    footnotes: list[str] = field(default_factory=list)

    def add_row(self, label: str, kanban: bool, cells: Sequence[Cell]):
        if len(cells) != len(self.columns):
            raise ValueError(f"row {label!r} has {len(cells)} cells, table has {len(self.columns)} columns")
        self.rows.append((label, kanban, list(cells)))


def round_half_up(x: float, decimals: int) -> str:
    q = Decimal(1).scaleb(-decimals)
    d = Decimal(repr(float(x))).quantize(q, rounding=ROUND_HALF_UP)
    if d == 0:
        d = abs(d)
    return f"{d:.{decimals}f}"


def format_cell(value: Cell, col: Column) -> str:
    if value is None:
        return MISSING
    if col.decimals is None:
        return str(value)
    return round_half_up(value, col.decimals)


def _row_label(label: str, kanban: bool) -> str:
    return f"{label}*" if kanban else label


def render_markdown(t: Table) -> str:
    out = [f"### {t.title}", ""]
    out.append(" | ".join([t.label_header] + [c.header for c in t.columns]))
    out.append(" | ".join(["---"] + ["---" if c.decimals is None else "---:" for c in t.columns]))
    for label, kanban, cells in t.rows:
        out.append(" | ".join([_row_label(label, kanban)] + [format_cell(v, c) for v, c in zip(cells, t.columns)]))
    if t.footnotes:
        out.append("")
        out.extend(t.footnotes)
    return "\n".join(out) + "\n"


def render_csv(t: Table) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([t.label_header] + [c.header for c in t.columns])
    for label, kanban, cells in t.rows:
        w.writerow([_row_label(label, kanban)] + [format_cell(v, c) for v, c in zip(cells, t.columns)])
    return buf.getvalue()


def _machine_value(v: Cell, col: Column) -> str:
    if v is None:
        return "NaN"
    if col.decimals is None:
        return json.dumps(str(v), ensure_ascii=False)
    return repr(float(v))


def render_machine(t: Table) -> str:
    out = [f"# table: {t.title}"]
    out.append("# columns: " + " ".join(["label", "kanban"] + [c.machine_key for c in t.columns]))
    out.append("# decimals: " + " ".join("-" if c.decimals is None else str(c.decimals) for c in t.columns))
    for label, kanban, cells in t.rows:
        values = [_machine_value(v, c) for v, c in zip(cells, t.columns)]
        out.append(" ".join([json.dumps(label, ensure_ascii=False), "1" if kanban else "0"] + values))
    return "\n".join(out) + "\n"


def render(t: Table, fmt: str = "markdown") -> str:
    if fmt == "markdown":
        return render_markdown(t)
    if fmt == "csv":
        return render_csv(t)
    if fmt == "machine":
        return render_machine(t)
    raise ValueError(f"unknown format {fmt!r}; expected one of {', '.join(FORMATS)}")


def render_many(tables: Sequence[Table], fmt: str = "markdown") -> str:
    # two blank lines separate datasets for gnuplot's `index`
    sep = "\n\n" if fmt == "machine" else "\n"
    return sep.join(render(t, fmt) for t in tables)


def _tokens(line: str, decoder=json.JSONDecoder()):
    pos = 0
    while pos < len(line):
        if line[pos] == " ":
            pos += 1
        elif line[pos] == '"':
            value, pos = decoder.raw_decode(line, pos)
            yield value, True
        else:
            end = line.find(" ", pos)
            end = len(line) if end < 0 else end
            yield line[pos:end], False
            pos = end


def parse_machine(text: str) -> list[Table]:
    """Inverse of :func:`render_machine` / :func:`render_many` in machine format."""
    tables: list[Table] = []
    keys: list[str] = []
    for line in text.splitlines():
        if not line.strip():
            continue
        if line.startswith("# table: "):
            tables.append(Table(line[len("# table: "):], "label", []))
        elif line.startswith("# columns: "):
            keys = line[len("# columns: "):].split()[2:]
        elif line.startswith("# decimals: "):
            decimals = [None if d == "-" else int(d) for d in line[len("# decimals: "):].split()]
            tables[-1].columns = [Column(k, d, k) for k, d in zip(keys, decimals)]
        elif not line.startswith("#"):
            (label, _), (kanban, _), *raw = _tokens(line)
            cells: list[Cell] = []
            for (value, quoted), col in zip(raw, tables[-1].columns):
                if quoted:
                    cells.append(value)
                else:
                    f = float(value)
                    cells.append(None if math.isnan(f) else f)
            tables[-1].rows.append((label, kanban == "1", cells))
    return tables


# --- published-layout tables ------------------------------------------------------------

KANBAN_NOTE = "Rows marked * are cohorts that used Kanban."


def _provenance(rows: Sequence[CohortMetrics]) -> list[str]:
    notes = []
    for r in rows:
        notes.append(
            f"{r.cohort_label}: {r.contributor_count} contributors, {r.commit_count} commits, "
            f"{r.issue_count} issues, window [{format_timestamp(r.window.start)}, {format_timestamp(r.window.end)})"
        )
    return notes


def commit_table(rows: Sequence[CohortMetrics]) -> Table:
    t = Table(
        "Comparison of commit attributes",
        "Course year",
        [
            Column("Commit amount", 1, "commit_amount"),
            Column("Touched files", 1, "touched_files"),
            Column("Last-minute commits", 1, "last_minute_commits"),
            Column("Line changes per commit", 1, "line_changes_per_commit"),
            Column("Unique issues referenced", 1, "unique_issues_referenced"),
        ],
    )
    for r in rows:
        c = r.commit
        t.add_row(r.cohort_label, r.kanban_flag, [
            c.commit_amount, c.touched_files, c.last_minute_commits,
            c.line_changes_per_commit, c.unique_issues_referenced,
        ])
    t.footnotes = [
        KANBAN_NOTE,
        "All columns except line changes per commit are means per contributor.",
    ]
    if any(r.commit.empty for r in rows):
        t.footnotes.append("Cohorts without commits in the window report 0 line changes per commit.")
    t.footnotes += _provenance(rows)
    return t


def issue_table(rows: Sequence[CohortMetrics]) -> Table:
    t = Table(
        "Comparison of issues and their attributes",
        "Course year",
        [
            Column("Issue amount", 1, "issue_amount"),
            Column("Issue events", 1, "issue_events"),
            Column("Issue comments", 1, "issue_comments"),
            Column("% issues opened & closed by same person", 0, "pct_same_open_close"),
        ],
    )
    for r in rows:
        i = r.issue
        pct = None if i.empty_selection else i.pct_same_open_close
        t.add_row(r.cohort_label, r.kanban_flag, [i.issue_amount, i.issue_events, i.issue_comments, pct])
    t.footnotes = [KANBAN_NOTE, "Amounts, events and comments are means per contributor."]
    if any(r.issue.empty_selection for r in rows):
        t.footnotes.append(f"{MISSING} no issues were closed in the study window.")
    t.footnotes += _provenance(rows)
    return t


def text_table(rows: Sequence[CohortMetrics]) -> Table:
    t = Table(
        "Issue body and title length",
        "Course year",
        [
            Column("Body mean", 1), Column("Body stdev", 1), Column("Body median", 1),
            Column("Title mean", 1), Column("Title stdev", 1), Column("Title median", 1),
        ],
    )
    for r in rows:
        if r.text is None:
            cells = [None] * 6
        else:
            b, ti = r.text.body, r.text.title
            cells = [b.mean, b.stdev, b.median, ti.mean, ti.stdev, ti.median]
        t.add_row(r.cohort_label, r.kanban_flag, cells)
    t.footnotes = [KANBAN_NOTE, "Lengths are counted in Unicode characters."]
    if any(r.text is None for r in rows):
        t.footnotes.append(f"{MISSING} no issues were closed in the study window.")
    t.footnotes += _provenance(rows)
    return t


def likert_table(rows: Sequence[tuple[str, str, LikertSummary]]) -> Table:
    """``rows`` are (question id, topic, summary) triples."""
    t = Table(
        "5-point Likert scale questions",
        "#",
        [
            Column("Question topic", None, "topic"),
            Column("Mean", 2),
            Column("Std. Dev.", 2, "stdev"),
            Column("10% Trim. Mean", 2, "trimmed_mean_10"),
            Column("Median", 2),
            Column("Range", 2),
        ],
    )
    for qid, topic, s in rows:
        t.add_row(qid, False, [topic, s.mean, s.stdev, s.trimmed_mean_10, s.median, s.range])
    t.footnotes = ["Answers: 1 strong no, 2 no, 3 neutral, 4 yes, 5 strong yes."]
    t.footnotes += [f"Question {qid}: N = {s.n}" for qid, _, s in rows]
    return t


def boxplot_table(rows: Sequence[tuple[str, BoxplotStats]]) -> Table:
    t = Table(
        "Box-plot statistics",
        "#",
        [
            Column("N", 0), Column("Q1", 2), Column("Median", 2), Column("Q3", 2),
            Column("Whisker low", 2), Column("Whisker high", 2), Column("Mean", 2),
            Column("Outliers", None),
        ],
    )
    for qid, b in rows:
        outliers = " ".join(format_cell(v, Column("", 2)) for v in b.outliers)
        t.add_row(qid, False, [b.n, b.q1, b.median, b.q3, b.whisker_low, b.whisker_high, b.mean, outliers])
    t.footnotes = ["Box limits are the 25th and 75th percentiles; whiskers reach the furthest data within 1.5 IQR."]
    return t


def tally_table(tallies: Sequence[tuple[str, ChoiceTally]]) -> Table:
    """``tallies`` are (topic, tally) pairs; one row per answer option."""
    t = Table("Multiple-choice answers", "#", [Column("Topic", None), Column("Option", None), Column("Count", 0)])
    for topic, tally in tallies:
        for option, count in tally.counts.items():
            t.add_row(tally.question_id, False, [topic, option, count])
    t.footnotes = [f"Question {tally.question_id}: N = {tally.respondents}" for _, tally in tallies]
    return t


def render_commit_table(rows: Sequence[CohortMetrics], fmt: str = "markdown") -> str:
    return render(commit_table(rows), fmt)


def render_issue_table(rows: Sequence[CohortMetrics], fmt: str = "markdown") -> str:
    return render(issue_table(rows), fmt)


def render_text_table(rows: Sequence[CohortMetrics], fmt: str = "markdown") -> str:
    return render(text_table(rows), fmt)


def render_likert_table(rows, fmt: str = "markdown") -> str:
    return render(likert_table(rows), fmt)
