"""Issue-tracker snapshots: fetching from a GitHub-style REST API, persisting, selecting.

Analysis only ever reads saved snapshots; the HTTP client exists to produce them.
"""

from __future__ import annotations

import json
import logging
import re
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field, replace
from datetime import datetime
from typing import Callable, Iterable, Mapping, Optional, Protocol

from .errors import (
    AuthError,
    MalformedPayloadError,
    RateLimitError,
    SchemaError,
    TransportError,
    ValidationError,
)
from .model import UTC, TimeWindow, format_timestamp, parse_timestamp, window_contains

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
GHOST = "ghost"  # login the service substitutes for deleted accounts


@dataclass(frozen=True)
class IssueEvent:
    kind: str
    actor: Optional[str]
    at: datetime

    def __post_init__(self):
        if not self.kind or self.kind == "commented":
            raise ValidationError(f"invalid event kind {self.kind!r}")


@dataclass(frozen=True)
class IssueComment:
    actor: str
    at: datetime
    length_chars: int


@dataclass(frozen=True)
class IssueRecord:
    number: int
    title: str
    body: str
    opener: str
    opened_at: datetime
    closer: Optional[str] = None
    closed_at: Optional[datetime] = None
    is_pull_request: bool = False
    events: tuple[IssueEvent, ...] = ()
    comments: tuple[IssueComment, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))
        object.__setattr__(self, "comments", tuple(self.comments))
        if self.number < 1:
            raise ValidationError(f"issue number must be positive, got {self.number}")
        if self.closed_at is not None:
            if self.closer is None:
                raise ValidationError(f"issue #{self.number} is closed but has no closer")
            if self.closed_at < self.opened_at:
                raise ValidationError(f"issue #{self.number} closed before it was opened")

    @property
    def body_length(self) -> int:
        return len(self.body)

    @property
    def title_length(self) -> int:
        return len(self.title)


@dataclass(frozen=True)
class Snapshot:
    repo_id: str
    fetched_at: datetime
    issues: tuple[IssueRecord, ...] = field(default_factory=tuple)

    def __post_init__(self):
        issues = tuple(sorted(self.issues, key=lambda i: i.number))
        numbers = [i.number for i in issues]
        if len(set(numbers)) != len(numbers):
            raise ValidationError(f"snapshot {self.repo_id}: duplicate issue numbers")
        object.__setattr__(self, "issues", issues)


def select_study_issues(s: Snapshot | Iterable[IssueRecord], w: TimeWindow) -> list[IssueRecord]:
    """Issues (not pull requests) closed inside the window."""
    issues = s.issues if isinstance(s, Snapshot) else s
    return [
        i for i in issues
        if not i.is_pull_request and i.closed_at is not None and window_contains(w, i.closed_at)
    ]


def restrict_activity(issues: Iterable[IssueRecord], w: TimeWindow) -> list[IssueRecord]:
    """Drop events and comments stamped outside the window."""
    return [
        replace(
            i,
            events=tuple(e for e in i.events if window_contains(w, e.at)),
            comments=tuple(c for c in i.comments if window_contains(w, c.at)),
        )
        for i in issues
    ]


# --- persistence ---------------------------------------------------------------

def _issue_doc(i: IssueRecord) -> dict:
    return {
        "number": i.number,
        "title": i.title,
        "body": i.body,
        "opener": i.opener,
        "closer": i.closer,
        "opened_at": format_timestamp(i.opened_at),
        "closed_at": None if i.closed_at is None else format_timestamp(i.closed_at),
        "is_pull_request": i.is_pull_request,
        "events": [
            {"kind": e.kind, "actor": e.actor, "at": format_timestamp(e.at)} for e in i.events
        ],
        "comments": [
            {"actor": c.actor, "at": format_timestamp(c.at), "length_chars": c.length_chars}
            for c in i.comments
        ],
    }


def save_snapshot(s: Snapshot) -> bytes:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "repo_id": s.repo_id,
        "fetched_at": format_timestamp(s.fetched_at),
        "issues": [_issue_doc(i) for i in s.issues],
    }
    return (json.dumps(doc, ensure_ascii=False, indent=2) + "\n").encode("utf-8")


class _Reader:
    """Typed field access that reports failures by JSON path."""

    def __init__(self, doc, path):
        if not isinstance(doc, dict):
            raise SchemaError(path, f"expected object, got {type(doc).__name__}")
        self.doc, self.path = doc, path

    def _get(self, key, types, optional=False):
        p = f"{self.path}.{key}"
        if key not in self.doc:
            raise SchemaError(p, "missing")
        v = self.doc[key]
        if v is None and optional:
            return None
        if not isinstance(v, types) or (isinstance(v, bool) and bool not in _as_tuple(types)):
            raise SchemaError(p, f"expected {_type_names(types)}, got {type(v).__name__}")
        return v

    def str(self, key, optional=False):
        return self._get(key, str, optional)

    def int(self, key, minimum=None):
        v = self._get(key, int)
        if minimum is not None and v < minimum:
            raise SchemaError(f"{self.path}.{key}", f"must be >= {minimum}")
        return v

    def bool(self, key):
        return self._get(key, bool)

    def time(self, key, optional=False):
        v = self.str(key, optional)
        if v is None:
            return None
        try:
            return parse_timestamp(v)
        except ValidationError:
            raise SchemaError(f"{self.path}.{key}", f"not an ISO-8601 timestamp: {v!r}") from None

    def list(self, key):
        return self._get(key, list)


def _as_tuple(t):
    return t if isinstance(t, tuple) else (t,)


def _type_names(t):
    names = {"str": "string", "int": "integer", "bool": "boolean", "list": "array", "dict": "object"}
    return " or ".join(names.get(x.__name__, x.__name__) for x in _as_tuple(t))


def load_snapshot(data: bytes) -> Snapshot:
    try:
        doc = json.loads(data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data)
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SchemaError("$", f"not a UTF-8 JSON document ({exc})") from None
    top = _Reader(doc, "$")
    version = top.int("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaError("$.schema_version", f"unsupported version {version}")
    issues = []
    for n, raw in enumerate(top.list("issues")):
        path = f"$.issues[{n}]"
        r = _Reader(raw, path)
        events = []
        for k, ev in enumerate(r.list("events")):
            er = _Reader(ev, f"{path}.events[{k}]")
            kind = er.str("kind")
            if not kind or kind == "commented":
                raise SchemaError(f"{er.path}.kind", f"invalid event kind {kind!r}")
            events.append(IssueEvent(kind, er.str("actor", optional=True), er.time("at")))
        comments = []
        for k, cm in enumerate(r.list("comments")):
            cr = _Reader(cm, f"{path}.comments[{k}]")
            comments.append(IssueComment(cr.str("actor"), cr.time("at"), cr.int("length_chars", 0)))
        try:
            issues.append(
                IssueRecord(
                    number=r.int("number", 1),
                    title=r.str("title"),
                    body=r.str("body"),
                    opener=r.str("opener"),
                    opened_at=r.time("opened_at"),
                    closer=r.str("closer", optional=True),
                    closed_at=r.time("closed_at", optional=True),
                    is_pull_request=r.bool("is_pull_request"),
                    events=tuple(events),
                    comments=tuple(comments),
                )
            )
        except SchemaError:
            raise
        except ValidationError as exc:
            raise SchemaError(path, str(exc)) from None
    numbers = [i.number for i in issues]
    if numbers != sorted(set(numbers)):
        raise SchemaError("$.issues", "issue numbers must be unique and ascending")
    return Snapshot(top.str("repo_id"), top.time("fetched_at"), tuple(issues))


# --- fetching ---------------------------------------------------------------------

@dataclass
class Response:
    status: int
    headers: Mapping[str, str]
    body: bytes

    def header(self, name: str) -> Optional[str]:
        name = name.lower()
        for k, v in self.headers.items():
            if k.lower() == name:
                return v
        return None


class Transport(Protocol):
    def get(self, url: str, headers: Mapping[str, str]) -> Response: ...


class UrllibTransport:
    def __init__(self, timeout: float = 30.0):
        self.timeout = timeout

    def get(self, url, headers):
        req = urllib.request.Request(url, headers=dict(headers))
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                return Response(resp.status, dict(resp.headers.items()), resp.read())
        except urllib.error.HTTPError as exc:
            return Response(exc.code, dict(exc.headers.items()), exc.read())
        except (urllib.error.URLError, OSError) as exc:
            raise TransportError(url, str(exc)) from None


_NEXT_LINK = re.compile(r'<([^>]+)>\s*;\s*rel="next"')


class TrackerClient:
    """Paginating, rate-limit-aware GET client for a GitHub-style API."""

    def __init__(
        self,
        token: str,
        http: Transport,
        base_url: str = "https://api.github.com",
        per_page: int = 100,
        max_retries: int = 5,
        sleep: Callable[[float], None] = time.sleep,
        clock: Callable[[], float] = time.time,
    ):
        self.base_url = base_url.rstrip("/")
        self.http = http
        self.per_page = per_page
        self.max_retries = max_retries
        self.sleep = sleep
        self.clock = clock
        self.headers = {
            "Accept": "application/vnd.github+json",
            "Authorization": f"Bearer {token}",
            "User-Agent": "cohort-miner",
        }

    def _wait_for_reset(self, resp: Response):
        retry_after = resp.header("retry-after")
        if retry_after and retry_after.isdigit():
            delay = float(retry_after)
        else:
            reset = resp.header("x-ratelimit-reset")
            delay = max(float(reset) - self.clock(), 0.0) + 1.0 if reset else 60.0
        log.info("rate limited; sleeping %.0fs", delay)
        self.sleep(delay)

    def get(self, url: str) -> Response:
        for attempt in range(self.max_retries + 1):
            resp = self.http.get(url, self.headers)
            limited = resp.status in (403, 429) and (
                resp.header("x-ratelimit-remaining") == "0" or resp.header("retry-after") is not None
            )
            if limited:
                if attempt == self.max_retries:
                    raise RateLimitError(url, f"still limited after {self.max_retries} retries")
                self._wait_for_reset(resp)
                continue
            if resp.status in (401, 403):
                raise AuthError(url, f"HTTP {resp.status}")
            if resp.status >= 400:
                raise TransportError(url, f"HTTP {resp.status}")
            return resp
        raise AssertionError("unreachable")

    def paginate(self, path: str) -> list[dict]:
        sep = "&" if "?" in path else "?"
        url = f"{self.base_url}{path}{sep}per_page={self.per_page}"
        items = []
        while url:
            resp = self.get(url)
            try:
                page = json.loads(resp.body.decode("utf-8"))
            except (UnicodeDecodeError, json.JSONDecodeError) as exc:
                raise MalformedPayloadError(url, f"invalid JSON ({exc})") from None
            if not isinstance(page, list):
                raise MalformedPayloadError(url, "expected a JSON array")
            items.extend(page)
            m = _NEXT_LINK.search(resp.header("link") or "")
            url = m.group(1) if m else None
        return items


def _login(obj) -> Optional[str]:
    if isinstance(obj, dict) and isinstance(obj.get("login"), str):
        return obj["login"]
    return None


def _issue_number_from_url(url) -> Optional[int]:
    m = re.search(r"/issues/(\d+)$", url or "")
    return int(m.group(1)) if m else None


def fetch_snapshot(
    repo_id: str,
    auth_token: str,
    http: Transport,
    *,
    base_url: str = "https://api.github.com",
    client: Optional[TrackerClient] = None,
    now: Optional[Callable[[], datetime]] = None,
    **client_options,
) -> Snapshot:
    """Download every issue of ``owner/name`` with its events and comments."""
    client = client or TrackerClient(auth_token, http, base_url, **client_options)
    prefix = f"/repos/{repo_id}"

    raw_issues = client.paginate(f"{prefix}/issues?state=all&direction=asc&sort=created")
    raw_events = client.paginate(f"{prefix}/issues/events")
    raw_comments = client.paginate(f"{prefix}/issues/comments")

    def parse(url, fn, item):
        try:
            return fn(item)
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedPayloadError(url, f"unexpected item shape ({exc!r})") from None

    events = {}
    events_url = f"{client.base_url}{prefix}/issues/events"
    for item in raw_events:
        number, ev = parse(events_url, _parse_event, item)
        if ev is not None:
            events.setdefault(number, []).append(ev)

    comments = {}
    comments_url = f"{client.base_url}{prefix}/issues/comments"
    for item in raw_comments:
        number, cm = parse(comments_url, _parse_comment, item)
        comments.setdefault(number, []).append(cm)

    issues_url = f"{client.base_url}{prefix}/issues"
    issues = {}
    for item in raw_issues:
        issue = parse(issues_url, lambda x: _parse_issue(x, events, comments), item)
        issues[issue.number] = issue  # pagination may repeat an item when the remote changes

    fetched_at = (now or (lambda: datetime.now(UTC)))()
    return Snapshot(repo_id, fetched_at, tuple(issues.values()))


def _parse_event(item):
    number = item["issue"]["number"]
    kind = item["event"]
    if kind == "commented":
        return number, None
    return number, IssueEvent(kind, _login(item.get("actor")), parse_timestamp(item["created_at"]))


def _parse_comment(item):
    number = _issue_number_from_url(item["issue_url"])
    if number is None:
        raise ValueError(f"cannot read issue number from {item['issue_url']!r}")
    body = item.get("body") or ""
    return number, IssueComment(
        _login(item.get("user")) or GHOST, parse_timestamp(item["created_at"]), len(body)
    )


def _parse_issue(item, events, comments) -> IssueRecord:
    number = item["number"]
    if not isinstance(number, int) or isinstance(number, bool):
        raise ValueError("issue number is not an integer")
    evs = sorted(events.get(number, ()), key=lambda e: (e.at, e.kind, e.actor or ""))
    cms = sorted(comments.get(number, ()), key=lambda c: (c.at, c.actor, c.length_chars))
    closed_at = parse_timestamp(item["closed_at"]) if item.get("closed_at") else None
    closer = None
    if closed_at is not None:
        closer = _login(item.get("closed_by"))
        if closer is None:
            closes = [e for e in evs if e.kind == "closed"]
            closer = (closes[-1].actor if closes else None) or GHOST
    return IssueRecord(
        number=number,
        title=item.get("title") or "",
        body=item.get("body") or "",
        opener=_login(item.get("user")) or GHOST,
        opened_at=parse_timestamp(item["created_at"]),
        closer=closer,
        closed_at=closed_at,
        is_pull_request=item.get("pull_request") is not None,
        events=tuple(evs),
        comments=tuple(cms),
    )
