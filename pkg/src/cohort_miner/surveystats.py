"""Descriptive statistics for questionnaire answers.

Likert summaries, box-plot five-number summaries and multiple-choice tallies,
plus the reader for delimiter-separated survey exports.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import yaml

from .errors import EmptySampleError, SchemaError, ValidationError


@dataclass(frozen=True)
class LikertSample:
    question_id: str
    values: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))
        bad = [v for v in self.values if isinstance(v, bool) or v not in (1, 2, 3, 4, 5)]
        if bad:
            raise ValidationError(f"question {self.question_id}: answers outside 1..5: {bad}")


@dataclass(frozen=True)
class LikertSummary:
    mean: float
    stdev: float
    trimmed_mean_10: float
    median: float
    range: float
    n: int = 0


@dataclass(frozen=True)
class BoxplotStats:
    q1: float
    median: float
    q3: float
    whisker_low: float
    whisker_high: float
    outliers: tuple[float, ...]
    mean: float
    n: int = 0


@dataclass(frozen=True)
class ChoiceTally:
    question_id: str
    counts: dict
    respondents: int


def mean(values: Sequence[float]) -> float:
    if not values:
        raise EmptySampleError()
    return math.fsum(values) / len(values)


def sample_stdev(values: Sequence[float]) -> float:
    """Standard deviation with the n-1 denominator; 0 for a single value."""
    n = len(values)
    if n == 0:
        raise EmptySampleError()
    if n == 1:
        return 0.0
    m = mean(values)
    return math.sqrt(math.fsum((v - m) ** 2 for v in values) / (n - 1))


def median(values: Sequence[float]) -> float:
    if not values:
        raise EmptySampleError()
    s = sorted(values)
    mid = len(s) // 2
    if len(s) % 2:
        return float(s[mid])
    return (s[mid - 1] + s[mid]) / 2


def trimmed_mean(values: Sequence[float], fraction: float = 0.10) -> float:
    """Mean after dropping ``floor(fraction * n)`` values from each end."""
    if not 0 <= fraction < 0.5:
        raise ValidationError(f"trim fraction must be in [0, 0.5), got {fraction}")
    if not values:
        raise EmptySampleError()
    k = math.floor(fraction * len(values))
    s = sorted(values)
    return mean(s[k:len(s) - k])


def quantile(sorted_values: Sequence[float], p: float) -> float:
    """Linear interpolation between order statistics at zero-based position ``p * (n - 1)``."""
    if not sorted_values:
        raise EmptySampleError()
    pos = p * (len(sorted_values) - 1)
    lo = math.floor(pos)
    hi = min(lo + 1, len(sorted_values) - 1)
    frac = pos - lo
    return sorted_values[lo] + (sorted_values[hi] - sorted_values[lo]) * frac


def likert_summary(s: LikertSample, trim_fraction: float = 0.10) -> LikertSummary:
    values = s.values
    if not values:
        raise EmptySampleError(f"empty-sample: question {s.question_id} has no answers")
    return LikertSummary(
        mean=mean(values),
        stdev=sample_stdev(values),
        trimmed_mean_10=trimmed_mean(values, trim_fraction),
        median=median(values),
        range=float(max(values) - min(values)),
        n=len(values),
    )


def boxplot_stats(values: Sequence[float], whisker: float = 1.5) -> BoxplotStats:
    """Quartiles, whiskers snapped to data within 1.5 IQR fences, and outliers."""
    if not values:
        raise EmptySampleError()
    s = sorted(values)
    q1, q3 = quantile(s, 0.25), quantile(s, 0.75)
    iqr = q3 - q1
    lo_fence, hi_fence = q1 - whisker * iqr, q3 + whisker * iqr
    inside = [v for v in s if lo_fence <= v <= hi_fence]
    return BoxplotStats(
        q1=q1,
        median=median(s),
        q3=q3,
        whisker_low=inside[0],
        whisker_high=inside[-1],
        outliers=tuple(v for v in s if v < lo_fence or v > hi_fence),
        mean=mean(s),
        n=len(s),
    )


def choice_tally(question_id: str, responses: Iterable[Iterable[str]], options: Sequence[str]) -> ChoiceTally:
    counts = {o: 0 for o in options}
    respondents = 0
    for picked in responses:
        respondents += 1
        for label in set(picked):
            if label not in counts:
                raise ValidationError(f"question {question_id}: unknown option {label!r}")
            counts[label] += 1
    return ChoiceTally(question_id, counts, respondents)


# --- survey files -------------------------------------------------------------------

@dataclass(frozen=True)
class Question:
    id: str
    column: str
    kind: str  # likert | choice | text
    topic: str = ""
    options: tuple[str, ...] = ()
    separator: str = ";"


@dataclass
class SurveyResults:
    likert: list[tuple[Question, LikertSummary, BoxplotStats]] = field(default_factory=list)
    choices: list[tuple[Question, ChoiceTally]] = field(default_factory=list)
    texts: list[tuple[Question, list[str]]] = field(default_factory=list)
    respondents: int = 0


def load_questions(path: Path) -> tuple[list[Question], Optional[str]]:
    """Read the sidecar describing which column holds which question."""
    try:
        doc = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise SchemaError("$", f"{path}: not valid YAML ({exc})") from None
    if not isinstance(doc, dict) or not isinstance(doc.get("questions"), list):
        raise SchemaError("$.questions", "expected a list of questions")
    delimiter = doc.get("delimiter")
    questions = []
    for i, q in enumerate(doc["questions"]):
        where = f"$.questions[{i}]"
        if not isinstance(q, dict):
            raise SchemaError(where, "expected object")
        kind = q.get("kind", "likert")
        if kind not in ("likert", "choice", "text"):
            raise SchemaError(f"{where}.kind", f"unknown kind {kind!r}")
        if "id" not in q:
            raise SchemaError(f"{where}.id", "missing")
        options = q.get("options", [])
        if kind == "choice" and not options:
            raise SchemaError(f"{where}.options", "choice questions need options")
        questions.append(
            Question(
                id=str(q["id"]),
                column=str(q.get("column", q["id"])),
                kind=kind,
                topic=str(q.get("topic", "")),
                options=tuple(str(o) for o in options),
                separator=str(q.get("separator", ";")),
            )
        )
    return questions, delimiter


def analyze_survey(
    text: str,
    questions: Sequence[Question],
    delimiter: Optional[str] = None,
    trim_fraction: float = 0.10,
) -> SurveyResults:
    """Summarise a survey export: one row per respondent, blank cell = no answer."""
    if delimiter is None:
        try:
            delimiter = csv.Sniffer().sniff(text.split("\n", 1)[0], delimiters=",;\t").delimiter
        except csv.Error:
            delimiter = ","
    reader = csv.DictReader(io.StringIO(text), delimiter=delimiter)
    rows = list(reader)
    header = reader.fieldnames or []
    results = SurveyResults(respondents=len(rows))
    for q in questions:
        if q.column not in header:
            raise ValidationError(f"question {q.id}: column {q.column!r} not in survey table")
        cells = [(r.get(q.column) or "").strip() for r in rows]
        if q.kind == "likert":
            values = []
            for line, cell in enumerate(cells, start=2):
                if not cell:
                    continue
                try:
                    values.append(int(cell))
                except ValueError:
                    raise ValidationError(f"row {line}, question {q.id}: not an integer: {cell!r}") from None
            sample = LikertSample(q.id, tuple(values))
            results.likert.append((q, likert_summary(sample, trim_fraction), boxplot_stats(values)))
        elif q.kind == "choice":
            picks = [[p.strip() for p in cell.split(q.separator) if p.strip()] for cell in cells]
            results.choices.append((q, choice_tally(q.id, picks, q.options)))
        else:
            results.texts.append((q, [c for c in cells if c]))
    return results
