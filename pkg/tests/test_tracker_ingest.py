import json
import random
from datetime import datetime, timedelta, timezone

import pytest
from hypothesis import given, settings, strategies as st

from cohort_miner.errors import (
    AuthError,
    MalformedPayloadError,
    RateLimitError,
    SchemaError,
    TransportError,
)
from cohort_miner.model import window_from_project_end
from cohort_miner.tracker_ingest import (
    IssueComment,
    IssueEvent,
    Response,
    Snapshot,
    fetch_snapshot,
    load_snapshot,
    restrict_activity,
    save_snapshot,
    select_study_issues,
)

from helpers import END, make_issue, random_issues

UTC = timezone.utc
FETCHED = datetime(2018, 3, 1, tzinfo=UTC)
W = window_from_project_end(END, 7)


# --- selection --------------------------------------------------------------------

def test_select_issue_closed_inside_window():
    i = make_issue(1, closed_at=END - timedelta(days=2))
    assert select_study_issues(Snapshot("o/r", FETCHED, (i,)), W) == [i]


def test_select_excludes_pull_requests():
    pr = make_issue(1, closed_at=END - timedelta(days=2), pr=True)
    assert select_study_issues(Snapshot("o/r", FETCHED, (pr,)), W) == []


def test_select_excludes_open_and_out_of_window():
    still_open = make_issue(1, closed_at=None)
    early = make_issue(2, closed_at=W.start - timedelta(seconds=1))
    at_end = make_issue(3, closed_at=END)
    assert select_study_issues(Snapshot("o/r", FETCHED, (still_open, early, at_end)), W) == []


@given(st.integers(0, 2**32))
def test_select_idempotent_order_preserving_subset(seed):
    items = random_issues(random.Random(seed))
    snap = Snapshot("o/r", FETCHED, tuple(items))
    once = select_study_issues(snap, W)
    assert select_study_issues(once, W) == once
    assert all(i in snap.issues for i in once)
    assert [i.number for i in once] == sorted(i.number for i in once)
    assert all(i.closer is not None for i in once)


def test_restrict_activity_drops_outside_events():
    i = make_issue(1, events=2, comments=1)  # all stamped at open time, 4 days before END
    inside = type(i)(**{**i.__dict__, "events": i.events + (IssueEvent("closed", "ann", END - timedelta(hours=1)),)})
    narrow = window_from_project_end(END, 1)
    [r] = restrict_activity([inside], narrow)
    assert [e.kind for e in r.events] == ["closed"] and r.comments == ()


# --- persistence ------------------------------------------------------------------

def test_empty_snapshot_round_trip():
    s = Snapshot("o/r", FETCHED, ())
    assert load_snapshot(save_snapshot(s)) == s


def test_truncated_file_is_schema_error():
    data = save_snapshot(Snapshot("o/r", FETCHED, (make_issue(1),)))
    with pytest.raises(SchemaError) as exc:
        load_snapshot(data[: len(data) // 2])
    assert exc.value.path == "$"


def test_saved_document_shape():
    doc = json.loads(save_snapshot(Snapshot("o/r", FETCHED, (make_issue(2, body="äb"),))))
    assert doc["schema_version"] == 1
    issue = doc["issues"][0]
    assert set(issue) == {"number", "title", "body", "opener", "closer", "opened_at", "closed_at",
                          "is_pull_request", "events", "comments"}
    assert issue["body"] == "äb"
    assert doc["fetched_at"] == "2018-03-01T00:00:00Z"


def _doc():
    return json.loads(save_snapshot(Snapshot("o/r", FETCHED, (make_issue(1, events=1, comments=1), make_issue(2)))))


@pytest.mark.parametrize("mutate, path", [
    (lambda d: d.pop("repo_id"), "$.repo_id"),
    (lambda d: d.update(schema_version=2), "$.schema_version"),
    (lambda d: d["issues"][1].update(number="2"), "$.issues[1].number"),
    (lambda d: d["issues"][1].update(number=0), "$.issues[1].number"),
    (lambda d: d["issues"][0]["events"][0].update(at="noon"), "$.issues[0].events[0].at"),
    (lambda d: d["issues"][0]["events"][0].update(kind="commented"), "$.issues[0].events[0].kind"),
    (lambda d: d["issues"][0]["comments"][0].update(length_chars=-1), "$.issues[0].comments[0].length_chars"),
    (lambda d: d["issues"][0].update(is_pull_request=1), "$.issues[0].is_pull_request"),
    (lambda d: d["issues"][0].update(closer=None), "$.issues[0]"),
    (lambda d: d["issues"].reverse(), "$.issues"),
    (lambda d: d.update(issues={}), "$.issues"),
    (lambda d: d["issues"].__setitem__(0, []), "$.issues[0]"),
])
def test_schema_violations_name_the_path(mutate, path):
    doc = _doc()
    mutate(doc)
    with pytest.raises(SchemaError) as exc:
        load_snapshot(json.dumps(doc).encode())
    assert exc.value.path == path


def random_snapshot(seed):
    rng = random.Random(seed)
    fetched = END + timedelta(seconds=rng.randint(0, 10**6), microseconds=rng.choice([0, rng.randint(0, 999999)]))
    return Snapshot(f"org/repo-{rng.randint(0, 99)}", fetched, tuple(random_issues(rng)))


@settings(max_examples=500, deadline=None)
@given(st.integers(0, 2**32))
def test_snapshot_round_trip_randomized(seed):
    s = random_snapshot(seed)
    data = save_snapshot(s)
    assert load_snapshot(data) == s
    assert save_snapshot(load_snapshot(data)) == data


# --- fetching ---------------------------------------------------------------------

API = "https://api.example.test"


def gh_issue(n, *, pr=False, closed=True, closed_by="ann"):
    item = {
        "number": n, "title": f"Issue {n}", "body": None if n % 5 == 0 else f"Body of {n} – ü",
        "user": {"login": "ben"}, "created_at": "2018-01-20T10:00:00Z",
        "closed_at": "2018-01-29T10:00:00Z" if closed else None,
    }
    if closed_by and closed:
        item["closed_by"] = {"login": closed_by}
    if pr:
        item["pull_request"] = {"url": f"{API}/repos/o/r/pulls/{n}"}
    return item


class MockTransport:
    """Serves scripted responses per URL; unscripted URLs get an empty page."""

    def __init__(self, routes):
        self.routes = {url: list(responses) for url, responses in routes.items()}
        self.calls = []

    def get(self, url, headers):
        self.calls.append((url, dict(headers)))
        queue = self.routes.get(url)
        if not queue:
            return Response(200, {}, b"[]")
        return queue.pop(0) if len(queue) > 1 else queue[0]


def page(items, next_url=None, **headers):
    if next_url:
        headers["Link"] = f'<{next_url}>; rel="next", <{API}/last>; rel="last"'
    return Response(200, headers, json.dumps(items).encode())


ISSUES = f"{API}/repos/o/r/issues?state=all&direction=asc&sort=created&per_page=100"
EVENTS = f"{API}/repos/o/r/issues/events?per_page=100"
COMMENTS = f"{API}/repos/o/r/issues/comments?per_page=100"


def fetch(transport, **kw):
    kw.setdefault("sleep", lambda s: None)
    return fetch_snapshot("o/r", "tok", transport, base_url=API, now=lambda: FETCHED, **kw)


def test_fetch_empty_repository():
    t = MockTransport({})
    s = fetch(t)
    assert s.issues == () and s.repo_id == "o/r"
    assert [u for u, _ in t.calls] == [ISSUES, EVENTS, COMMENTS]
    assert t.calls[0][1]["Authorization"] == "Bearer tok"


def paged_issue_routes(total=201, per_page=100):
    items = [gh_issue(n, pr=(n % 50 == 0)) for n in range(1, total + 1)]
    routes = {}
    pages = [items[i:i + per_page] for i in range(0, total, per_page)]
    urls = [ISSUES] + [f"{API}/repos/o/r/issues?state=all&page={k}&per_page=100" for k in range(2, len(pages) + 1)]
    for k, (url, chunk) in enumerate(zip(urls, pages)):
        routes[url] = [page(chunk, urls[k + 1] if k + 1 < len(urls) else None)]
    return routes, urls


def test_fetch_paginates_201_issues_over_three_pages():
    routes, urls = paged_issue_routes()
    t = MockTransport(routes)
    s = fetch(t)
    assert len(s.issues) == 201
    issue_calls = [u for u, _ in t.calls if "/issues?" in u]
    assert issue_calls == urls and len(urls) == 3
    assert [i.number for i in s.issues] == list(range(1, 202))


def test_fetch_flags_pull_requests():
    routes, _ = paged_issue_routes()
    s = fetch(MockTransport(routes))
    assert {i.number for i in s.issues if i.is_pull_request} == {50, 100, 150, 200}
    assert s.issues[4].body == ""  # null body on the service side


def test_fetch_retries_after_rate_limit():
    limited = Response(403, {"X-RateLimit-Remaining": "0", "X-RateLimit-Reset": "1000"}, b"{}")
    t = MockTransport({ISSUES: [limited, page([gh_issue(1)])]})
    slept = []
    s = fetch(t, sleep=slept.append, clock=lambda: 990.0)
    assert len(s.issues) == 1
    assert [u for u, _ in t.calls].count(ISSUES) == 2
    assert slept == [11.0]


def test_fetch_honours_retry_after():
    limited = Response(429, {"Retry-After": "7"}, b"")
    slept = []
    fetch(MockTransport({EVENTS: [limited, page([])]}), sleep=slept.append)
    assert slept == [7.0]


def test_fetch_gives_up_after_max_retries():
    limited = Response(403, {"x-ratelimit-remaining": "0", "x-ratelimit-reset": "0"}, b"")
    with pytest.raises(RateLimitError) as exc:
        fetch(MockTransport({ISSUES: [limited]}), max_retries=2)
    assert exc.value.url == ISSUES


@pytest.mark.parametrize("response, error", [
    (Response(401, {}, b""), AuthError),
    (Response(403, {"X-RateLimit-Remaining": "42"}, b""), AuthError),
    (Response(500, {}, b""), TransportError),
    (Response(200, {}, b"{not json"), MalformedPayloadError),
    (Response(200, {}, b'{"message": "object"}'), MalformedPayloadError),
    (Response(200, {}, b'[{"title": "no number"}]'), MalformedPayloadError),
])
def test_fetch_error_kinds_carry_url(response, error):
    with pytest.raises(error) as exc:
        fetch(MockTransport({ISSUES: [response]}))
    assert exc.value.url.startswith(f"{API}/repos/o/r/issues")
    assert type(exc.value) is error


def test_transport_failure_propagates():
    class Down:
        def get(self, url, headers):
            raise TransportError(url, "connection refused")

    with pytest.raises(TransportError):
        fetch(Down())


def test_fetch_attaches_events_comments_and_closer():
    issue = gh_issue(7, closed_by=None)
    events = [
        {"event": "labeled", "actor": {"login": "cat"}, "created_at": "2018-01-21T10:00:00Z", "issue": {"number": 7}},
        {"event": "closed", "actor": {"login": "dan"}, "created_at": "2018-01-28T10:00:00Z", "issue": {"number": 7}},
        {"event": "reopened", "actor": None, "created_at": "2018-01-28T11:00:00Z", "issue": {"number": 7}},
        {"event": "closed", "actor": {"login": "eve"}, "created_at": "2018-01-29T10:00:00Z", "issue": {"number": 7}},
        {"event": "commented", "actor": {"login": "eve"}, "created_at": "2018-01-29T10:00:00Z", "issue": {"number": 7}},
    ]
    comments = [
        {"user": {"login": "fay"}, "created_at": "2018-01-22T10:00:00Z", "body": "Looks good 👍",
         "issue_url": f"{API}/repos/o/r/issues/7"},
        {"user": None, "created_at": "2018-01-23T10:00:00Z", "body": "",
         "issue_url": f"{API}/repos/o/r/issues/7"},
    ]
    t = MockTransport({ISSUES: [page([issue])], EVENTS: [page(events)], COMMENTS: [page(comments)]})
    [i] = fetch(t).issues
    assert i.closer == "eve"  # last closed event
    assert [e.kind for e in i.events] == ["labeled", "closed", "reopened", "closed"]
    assert i.events[2].actor is None
    assert i.comments == (
        IssueComment("fay", datetime(2018, 1, 22, 10, tzinfo=UTC), 12),
        IssueComment("ghost", datetime(2018, 1, 23, 10, tzinfo=UTC), 0),
    )


def test_closed_by_field_takes_precedence():
    events = [{"event": "closed", "actor": {"login": "dan"}, "created_at": "2018-01-28T10:00:00Z", "issue": {"number": 3}}]
    t = MockTransport({ISSUES: [page([gh_issue(3, closed_by="ann")])], EVENTS: [page(events)]})
    assert fetch(t).issues[0].closer == "ann"


def test_fetch_deterministic_apart_from_fetched_at():
    routes, _ = paged_issue_routes(150)
    a = fetch_snapshot("o/r", "t", MockTransport(routes), base_url=API, now=lambda: FETCHED)
    b = fetch_snapshot("o/r", "t", MockTransport(routes), base_url=API, now=lambda: FETCHED + timedelta(days=1))
    da, db = json.loads(save_snapshot(a)), json.loads(save_snapshot(b))
    assert da.pop("fetched_at") != db.pop("fetched_at")
    assert da == db
    assert save_snapshot(a) == save_snapshot(
        fetch_snapshot("o/r", "t", MockTransport(routes), base_url=API, now=lambda: FETCHED)
    )
