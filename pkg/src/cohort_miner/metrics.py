"""Per-contributor commit, issue and issue-text statistics for projects and cohorts.

Counting is separated from normalisation: ``*_totals`` functions produce
integer tallies that add across projects, and the metric dataclasses divide
those by the contributor count exactly once.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from typing import Callable, Iterable, Optional, Sequence

from .errors import EmptySelectionError, EmptyWindowError, ValidationError
from .git_ingest import CommitRecord, extract_issue_refs, filter_commits
from .identity import AliasMap, ContributorSet, active_contributors, actors_of, resolve
from .model import CohortSpec, Options, ProjectSpec, TimeWindow
from .tracker_ingest import IssueRecord, Snapshot, restrict_activity, select_study_issues


@dataclass(frozen=True)
class CommitTotals:
    commits: int = 0
    touched_files: int = 0
    distinct_files: frozenset = frozenset()
    last_minute: int = 0
    line_changes: int = 0
    issue_refs: frozenset = frozenset()

    def __add__(self, other: "CommitTotals") -> "CommitTotals":
        return CommitTotals(
            self.commits + other.commits,
            self.touched_files + other.touched_files,
            self.distinct_files | other.distinct_files,
            self.last_minute + other.last_minute,
            self.line_changes + other.line_changes,
            self.issue_refs | other.issue_refs,
        )


@dataclass(frozen=True)
class IssueTotals:
    issues: int = 0
    events: int = 0
    comments: int = 0
    same_open_close: int = 0

    def __add__(self, other: "IssueTotals") -> "IssueTotals":
        return IssueTotals(
            self.issues + other.issues,
            self.events + other.events,
            self.comments + other.comments,
            self.same_open_close + other.same_open_close,
        )


@dataclass(frozen=True)
class CommitMetrics:
    commit_amount: float
    touched_files: float
    last_minute_commits: float
    line_changes_per_commit: float
    unique_issues_referenced: float
    empty: bool = False


@dataclass(frozen=True)
class IssueMetrics:
    issue_amount: float
    issue_events: float
    issue_comments: float
    pct_same_open_close: float
    empty_selection: bool = False


@dataclass(frozen=True)
class Summary:
    mean: float
    stdev: float
    median: float


@dataclass(frozen=True)
class TextStats:
    body: Summary
    title: Summary


@dataclass(frozen=True)
class CohortMetrics:
    cohort_label: str
    window: TimeWindow
    contributor_count: int
    commit: CommitMetrics
    issue: IssueMetrics
    text: Optional[TextStats]
    kanban_flag: bool = False
    commit_count: int = 0
    issue_count: int = 0
    windows: tuple[TimeWindow, ...] = field(default=(), compare=False)


def _check_n(n):
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise ValidationError(f"contributor count must be a positive integer, got {n!r}")


def commit_totals(
    commits: Iterable[CommitRecord],
    project_end: datetime,
    last_minute_hours: int = 24,
    *,
    timestamp_source: str = "author",
    refs: str = "any",
    scope: str = "",
) -> CommitTotals:
    """Tally window-filtered, non-merge commits of one project.

    ``scope`` qualifies file paths and issue numbers so tallies of different
    repositories can be added without collisions.
    """
    band = timedelta(hours=last_minute_hours)
    n = files = last_minute = lines = 0
    paths, refs_seen = set(), set()
    for c in commits:
        n += 1
        files += len(c.file_deltas)
        paths.update((scope, d.path) for d in c.file_deltas)
        lines += sum(d.line_changes for d in c.file_deltas)
        if project_end - c.timestamp(timestamp_source) < band:
            last_minute += 1
        refs_seen.update((scope, r) for r in extract_issue_refs(c.message, refs))
    return CommitTotals(n, files, frozenset(paths), last_minute, lines, frozenset(refs_seen))


def commit_metrics_from_totals(t: CommitTotals, n: int, options: Options = Options()) -> CommitMetrics:
    _check_n(n)
    touched = t.touched_files if options.touched_files == "sum" else len(t.distinct_files)
    if options.normalize_line_changes:
        per_commit = t.line_changes / n
    else:
        per_commit = t.line_changes / t.commits if t.commits else 0.0
    return CommitMetrics(
        commit_amount=t.commits / n,
        touched_files=touched / n,
        last_minute_commits=t.last_minute / n,
        line_changes_per_commit=per_commit,
        unique_issues_referenced=len(t.issue_refs) / n,
        empty=t.commits == 0,
    )


def commit_metrics(
    commits: Sequence[CommitRecord],
    n: int,
    project_end: datetime,
    last_minute_hours: int = 24,
    options: Options = Options(),
) -> CommitMetrics:
    _check_n(n)
    totals = commit_totals(
        commits, project_end, last_minute_hours,
        timestamp_source=options.timestamp_source, refs=options.refs,
    )
    return commit_metrics_from_totals(totals, n, options)


def issue_totals(issues: Iterable[IssueRecord], same_person: Callable[[str, str], bool]) -> IssueTotals:
    count = events = comments = same = 0
    for i in issues:
        if i.closer is None:
            raise ValidationError(f"issue #{i.number} has no closer")
        count += 1
        events += len(i.events)
        comments += len(i.comments)
        same += bool(same_person(i.opener, i.closer))
    return IssueTotals(count, events, comments, same)


def issue_metrics_from_totals(t: IssueTotals, n: int) -> IssueMetrics:
    _check_n(n)
    return IssueMetrics(
        issue_amount=t.issues / n,
        issue_events=t.events / n,
        issue_comments=t.comments / n,
        pct_same_open_close=100.0 * t.same_open_close / t.issues if t.issues else 0.0,
        empty_selection=t.issues == 0,
    )


def issue_metrics(
    issues: Sequence[IssueRecord], n: int, contributors: Optional[ContributorSet] = None
) -> IssueMetrics:
    """Issue means per contributor; opener and closer are compared through ``contributors``."""
    _check_n(n)
    if contributors is None:
        same = lambda a, b: a == b  # noqa: E731
    else:
        same = lambda a, b: contributors.for_login(a) == contributors.for_login(b)  # noqa: E731
    return issue_metrics_from_totals(issue_totals(issues, same), n)


def summarize(values: Sequence[float]) -> Summary:
    """Mean, sample standard deviation (0 for one value) and median."""
    if not values:
        raise EmptySelectionError()
    stdev = statistics.stdev(values) if len(values) > 1 else 0.0
    return Summary(statistics.fmean(values), stdev, float(statistics.median(values)))


def issue_text_stats(issues: Sequence[IssueRecord]) -> TextStats:
    if not issues:
        raise EmptySelectionError("empty-selection: no issues to measure text length on")
    return TextStats(
        body=summarize([i.body_length for i in issues]),
        title=summarize([i.title_length for i in issues]),
    )


# --- cohort assembly ---------------------------------------------------------------

@dataclass(frozen=True)
class ProjectInput:
    """Raw material for one project: its settings, its commit dump and its tracker snapshot."""

    project: ProjectSpec
    commits: Sequence[CommitRecord]
    snapshot: Snapshot


@dataclass(frozen=True)
class _Prepared:
    project: ProjectSpec
    window: TimeWindow
    commits: list
    issues: list


def _prepare(inp: ProjectInput, options: Options) -> _Prepared:
    w = inp.project.window
    commits = filter_commits(inp.commits, w, options.timestamp_source)
    issues = select_study_issues(inp.snapshot, w)
    if options.strict_window_events:
        issues = restrict_activity(issues, w)
    return _Prepared(inp.project, w, commits, issues)


def assemble(
    cohort: CohortSpec,
    inputs: Sequence[ProjectInput],
    aliases: Optional[AliasMap] = None,
    options: Options = Options(),
) -> CohortMetrics:
    """Compute one cohort's row: filter each project under its own window, then aggregate."""
    prepared = [_prepare(inp, options) for inp in inputs]
    all_commits = [c for p in prepared for c in p.commits]
    all_issues = [i for p in prepared for i in p.issues]
    cs = resolve(actors_of(all_commits, all_issues), aliases)

    active_total = set()
    per_project = []
    for p in prepared:
        active = active_contributors(cs, p.commits, p.issues)
        if not active:
            raise EmptyWindowError(p.project.name)
        active_total |= active
        ct = commit_totals(
            p.commits, p.project.project_end, p.project.last_minute_hours,
            timestamp_source=options.timestamp_source, refs=options.refs, scope=p.project.name,
        )
        it = issue_totals(p.issues, lambda a, b: cs.for_login(a) == cs.for_login(b))
        per_project.append((p, len(active), ct, it))

    n = len(active_total)
    if options.aggregate == "pooled":
        ct = sum((x[2] for x in per_project), CommitTotals())
        it = sum((x[3] for x in per_project), IssueTotals())
        commit = commit_metrics_from_totals(ct, n, options)
        issue = issue_metrics_from_totals(it, n)
        text = issue_text_stats(all_issues) if all_issues else None
    else:
        commit = _mean_of(
            CommitMetrics,
            [commit_metrics_from_totals(x[2], x[1], options) for x in per_project],
        )
        issue = _mean_of(IssueMetrics, [issue_metrics_from_totals(x[3], x[1]) for x in per_project])
        texts = [issue_text_stats(p.issues) for p in prepared if p.issues]
        text = None
        if texts:
            text = TextStats(
                _mean_of(Summary, [t.body for t in texts]), _mean_of(Summary, [t.title for t in texts])
            )

    windows = tuple(p.window for p in prepared)
    span = TimeWindow(min(w.start for w in windows), max(w.end for w in windows))
    return CohortMetrics(
        cohort_label=cohort.label,
        window=span,
        contributor_count=n,
        commit=commit,
        issue=issue,
        text=text,
        kanban_flag=cohort.kanban_flag,
        commit_count=len(all_commits),
        issue_count=len(all_issues),
        windows=windows,
    )


def _mean_of(cls, rows):
    """Field-wise mean of dataclass rows; boolean flags are and-ed.

    Projects whose issue selection is empty are left out of the
    opener/closer percentage average.
    """
    values = {}
    for name in cls.__dataclass_fields__:
        if name in ("empty", "empty_selection"):
            values[name] = all(getattr(r, name) for r in rows)
        elif name == "pct_same_open_close":
            pcts = [r.pct_same_open_close for r in rows if not r.empty_selection]
            values[name] = statistics.fmean(pcts) if pcts else 0.0
        else:
            values[name] = statistics.fmean(getattr(r, name) for r in rows)
    return cls(**values)
