"""Time windows, project/cohort descriptions and the run configuration file."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Any

import yaml

from .errors import SchemaError, ValidationError

UTC = timezone.utc


def to_utc(t: datetime) -> datetime:
    if t.tzinfo is None or t.utcoffset() is None:
        raise ValidationError(f"timestamp {t.isoformat()} has no UTC offset")
    return t.astimezone(UTC)


def parse_timestamp(text: str) -> datetime:
    """Parse an ISO-8601 timestamp with offset (``Z`` accepted) into UTC."""
    s = text.strip()
    if s.endswith(("Z", "z")):
        s = s[:-1] + "+00:00"
    try:
        t = datetime.fromisoformat(s)
    except ValueError:
        raise ValidationError(f"not an ISO-8601 timestamp: {text!r}") from None
    return to_utc(t)


def format_timestamp(t: datetime) -> str:
    return to_utc(t).isoformat().replace("+00:00", "Z")


@dataclass(frozen=True)
class TimeWindow:
    """Half-open UTC interval ``[start, end)``."""

    start: datetime
    end: datetime

    def __post_init__(self):
        object.__setattr__(self, "start", to_utc(self.start))
        object.__setattr__(self, "end", to_utc(self.end))
        if not self.start < self.end:
            raise ValidationError(f"window start {self.start} is not before end {self.end}")

    def __contains__(self, t: datetime) -> bool:
        return window_contains(self, t)

    @property
    def duration(self) -> timedelta:
        return self.end - self.start

    def __str__(self):
        return f"[{format_timestamp(self.start)}, {format_timestamp(self.end)})"


def window_from_project_end(end: datetime, days: int) -> TimeWindow:
    if isinstance(days, bool) or not isinstance(days, int) or days < 1:
        raise ValidationError(f"window length must be a positive number of days, got {days!r}")
    end = to_utc(end)
    return TimeWindow(end - timedelta(days=days), end)


def window_contains(w: TimeWindow, t: datetime) -> bool:
    return w.start <= t < w.end


TIMESTAMP_SOURCES = ("author", "committer")
REFS_MODES = ("any", "keyword")
TOUCHED_FILES_MODES = ("sum", "distinct")
AGGREGATE_MODES = ("pooled", "mean-of-projects")


@dataclass(frozen=True)
class Options:
    """Switches for the places where the metric definitions admit more than one reading."""

    timestamp_source: str = "author"
    refs: str = "any"
    touched_files: str = "sum"
    normalize_line_changes: bool = False
    aggregate: str = "pooled"
    strict_window_events: bool = False

    def __post_init__(self):
        for name, allowed in (
            ("timestamp_source", TIMESTAMP_SOURCES),
            ("refs", REFS_MODES),
            ("touched_files", TOUCHED_FILES_MODES),
            ("aggregate", AGGREGATE_MODES),
        ):
            value = getattr(self, name)
            if value not in allowed:
                raise ValidationError(f"{name} must be one of {', '.join(allowed)}; got {value!r}")
        for name in ("normalize_line_changes", "strict_window_events"):
            if not isinstance(getattr(self, name), bool):
                raise ValidationError(f"{name} must be a boolean")


@dataclass(frozen=True)
class ProjectSpec:
    name: str
    repo_source: str
    project_end: datetime
    window_days: int = 7
    last_minute_hours: int = 24
    git_dump: Path | None = None

    def __post_init__(self):
        object.__setattr__(self, "project_end", to_utc(self.project_end))
        if not self.name:
            raise ValidationError("project name must be non-empty")
        for attr in ("window_days", "last_minute_hours"):
            v = getattr(self, attr)
            if isinstance(v, bool) or not isinstance(v, int) or v < 1:
                raise ValidationError(f"project {self.name!r}: {attr} must be a positive integer")
        if self.last_minute_hours > self.window_days * 24:
            raise ValidationError(
                f"project {self.name!r}: last_minute_hours exceeds the window length"
            )

    @property
    def window(self) -> TimeWindow:
        return window_from_project_end(self.project_end, self.window_days)


@dataclass(frozen=True)
class CohortSpec:
    label: str
    projects: tuple[ProjectSpec, ...]
    kanban_flag: bool = False

    def __post_init__(self):
        object.__setattr__(self, "projects", tuple(self.projects))
        if not self.projects:
            raise ValidationError(f"cohort {self.label!r} has no projects")
        names = [p.name for p in self.projects]
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            raise ValidationError(f"cohort {self.label!r}: duplicate project names {dupes}")


@dataclass(frozen=True)
class RunConfig:
    cohorts: tuple[CohortSpec, ...]
    alias_map_path: Path | None = None
    snapshot_dir: Path = Path("snapshots")
    dump_dir: Path = Path("dumps")
    api_base: str = "https://api.github.com"
    options: Options = field(default_factory=Options)

    def cohort(self, label: str) -> CohortSpec:
        for c in self.cohorts:
            if c.label == label:
                return c
        known = ", ".join(c.label for c in self.cohorts)
        raise ValidationError(f"unknown cohort {label!r} (known: {known})")

    def snapshot_path(self, cohort: CohortSpec, project: ProjectSpec) -> Path:
        return self.snapshot_dir / f"{_slug(cohort.label)}__{_slug(project.name)}.json"

    def dump_path(self, cohort: CohortSpec, project: ProjectSpec) -> Path:
        if project.git_dump is not None:
            return project.git_dump
        return self.dump_dir / f"{_slug(cohort.label)}__{_slug(project.name)}.dump"


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "-", text).strip("-") or "_"


# --- config file -----------------------------------------------------------

_TOP_KEYS = {"cohorts", "alias_map", "snapshot_dir", "dump_dir", "api_base", "flags"}
_COHORT_KEYS = {"label", "kanban", "projects"}
_PROJECT_KEYS = {"name", "repo_source", "project_end", "window_days", "last_minute_hours", "git_dump"}


def _expect(value, kind, path):
    if not isinstance(value, kind) or (kind is int and isinstance(value, bool)):
        names = kind.__name__ if isinstance(kind, type) else "/".join(k.__name__ for k in kind)
        raise SchemaError(path, f"expected {names}, got {type(value).__name__}")
    return value


def _check_keys(mapping, allowed, path):
    unknown = sorted(set(mapping) - allowed)
    if unknown:
        raise SchemaError(path, f"unknown key(s) {', '.join(map(str, unknown))}")


def _timestamp(value, path) -> datetime:
    # YAML turns bare timestamps into datetimes; naive ones are taken as UTC.
    if isinstance(value, datetime):
        return value.replace(tzinfo=UTC) if value.tzinfo is None else value.astimezone(UTC)
    text = _expect(value, str, path)
    try:
        return parse_timestamp(text)
    except ValidationError:
        try:
            naive = datetime.fromisoformat(text)
        except ValueError:
            raise SchemaError(path, f"not an ISO-8601 timestamp: {text!r}") from None
        if naive.tzinfo is not None:
            raise
        return naive.replace(tzinfo=UTC)


def parse_config(data: Any, base_dir: Path = Path(".")) -> RunConfig:
    """Build a :class:`RunConfig` from an already-decoded YAML document."""
    _expect(data, dict, "$")
    _check_keys(data, _TOP_KEYS, "$")

    def path_of(key, default):
        value = data.get(key, default)
        if value is None:
            return None
        return base_dir / _expect(value, str, f"$.{key}")

    flags = data.get("flags") or {}
    _expect(flags, dict, "$.flags")
    try:
        options = Options(**flags)
    except TypeError as exc:
        raise SchemaError("$.flags", str(exc)) from None
    except ValidationError as exc:
        raise SchemaError("$.flags", str(exc)) from None

    cohorts = []
    labels = set()
    for i, c in enumerate(_expect(data.get("cohorts"), list, "$.cohorts")):
        cpath = f"$.cohorts[{i}]"
        _expect(c, dict, cpath)
        _check_keys(c, _COHORT_KEYS, cpath)
        label = str(_expect(c.get("label"), (str, int, float), f"{cpath}.label"))
        if label in labels:
            raise SchemaError(f"{cpath}.label", f"duplicate cohort label {label!r}")
        labels.add(label)
        projects = []
        for j, p in enumerate(_expect(c.get("projects"), list, f"{cpath}.projects")):
            ppath = f"{cpath}.projects[{j}]"
            _expect(p, dict, ppath)
            _check_keys(p, _PROJECT_KEYS, ppath)
            dump = p.get("git_dump")
            try:
                projects.append(
                    ProjectSpec(
                        name=str(_expect(p.get("name"), (str, int), f"{ppath}.name")),
                        repo_source=_expect(p.get("repo_source"), str, f"{ppath}.repo_source"),
                        project_end=_timestamp(p.get("project_end"), f"{ppath}.project_end"),
                        window_days=_expect(p.get("window_days", 7), int, f"{ppath}.window_days"),
                        last_minute_hours=_expect(
                            p.get("last_minute_hours", 24), int, f"{ppath}.last_minute_hours"
                        ),
                        git_dump=None if dump is None else base_dir / _expect(dump, str, f"{ppath}.git_dump"),
                    )
                )
            except SchemaError:
                raise
            except ValidationError as exc:
                raise SchemaError(ppath, str(exc)) from None
        kanban = _expect(c.get("kanban", False), bool, f"{cpath}.kanban")
        try:
            cohorts.append(CohortSpec(label, tuple(projects), kanban))
        except ValidationError as exc:
            raise SchemaError(cpath, str(exc)) from None

    return RunConfig(
        cohorts=tuple(cohorts),
        alias_map_path=path_of("alias_map", None),
        snapshot_dir=path_of("snapshot_dir", "snapshots"),
        dump_dir=path_of("dump_dir", "dumps"),
        api_base=_expect(data.get("api_base", "https://api.github.com"), str, "$.api_base").rstrip("/"),
        options=options,
    )


def load_config(path: Path) -> RunConfig:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ValidationError(f"{path}: {exc}") from None
    return parse_config(data, path.parent)
