"""Builders and hypothesis strategies shared by the test modules."""

import hashlib
import random
from datetime import datetime, timedelta, timezone

from hypothesis import strategies as st

from cohort_miner.git_ingest import CommitRecord, FileDelta
from cohort_miner.tracker_ingest import IssueComment, IssueEvent, IssueRecord

UTC = timezone.utc
END = datetime(2018, 1, 31, tzinfo=UTC)

LOGINS = ["ann", "ben", "cat", "dan", "eve", "fay"]
AUTHORS = [(n.title(), f"{n}@uni.example") for n in LOGINS]


def sha(seed) -> str:
    return hashlib.sha1(str(seed).encode()).hexdigest()


def make_commit(seed=0, author=AUTHORS[0], at=END - timedelta(hours=30), message="", deltas=(), parents=1):
    return CommitRecord(
        id=sha(seed), author_name=author[0], author_email=author[1],
        author_time=at, committer_time=at, message=message,
        parent_count=parents, file_deltas=tuple(FileDelta(*d) for d in deltas),
    )


def make_issue(number, opener="ann", closer="ann", closed_at=END - timedelta(days=1), *,
               title="t", body="", events=0, comments=0, pr=False):
    opened = (closed_at or END) - timedelta(days=3)
    return IssueRecord(
        number=number, title=title, body=body, opener=opener, opened_at=opened,
        closer=closer if closed_at else None, closed_at=closed_at, is_pull_request=pr,
        events=tuple(IssueEvent("labeled", opener, opened) for _ in range(events)),
        comments=tuple(IssueComment(opener, opened, 3) for _ in range(comments)),
    )


# --- random instances ------------------------------------------------------------
# Instances are built from a hypothesis-drawn seed: far cheaper than drawing
# every field through hypothesis, which matters for the 1000-example runs.

MESSAGE_PARTS = ["fix #1", "#2", "a#3", "#0", "x", "#10", "(#4)", "closes #5", "ü#6", "#007"]
PATHS = ["a", "b", "c/d", "e.png", "f", "g h"]
EVENT_KINDS = ["labeled", "assigned", "closed", "referenced", "milestoned"]
TEXT_CHARS = "abc xyzäöü€\n漢"


def random_text(rng, max_len=60):
    return "".join(rng.choice(TEXT_CHARS) for _ in range(rng.randint(0, max_len)))


def random_commits(rng, max_size=50, merges=True, authors=AUTHORS):
    out = []
    for k in range(rng.randint(0, max_size)):
        deltas = []
        for p in rng.sample(PATHS, rng.randint(0, 4)):
            if p.endswith(".png") and rng.random() < 0.5:
                deltas.append((p, None, None))
            else:
                deltas.append((p, rng.randint(0, 500), rng.randint(0, 500)))
        parents = rng.choice([0, 1, 1, 1, 2, 3]) if merges else rng.choice([0, 1])
        out.append(make_commit(
            seed=(k, rng.random()),
            author=rng.choice(authors),
            at=END + timedelta(seconds=rng.randint(-9 * 86400, 86400)),
            message=" ".join(rng.choice(MESSAGE_PARTS) for _ in range(rng.randint(0, 4))),
            deltas=deltas,
            parents=parents,
        ))
    return out


def random_issues(rng, max_size=20, closed_only=False, logins=LOGINS):
    out = []
    for number in rng.sample(range(1, 500), rng.randint(0, max_size)):
        opened = END + timedelta(seconds=rng.randint(-11 * 86400, 86400))
        closed = None
        if closed_only or rng.random() < 0.7:
            closed = opened + timedelta(seconds=rng.randint(0, 4 * 86400))
        evs = tuple(
            IssueEvent(rng.choice(EVENT_KINDS), rng.choice(logins + [None]),
                       opened + timedelta(minutes=rng.randint(0, 9000)))
            for _ in range(rng.randint(0, 5))
        )
        cms = tuple(
            IssueComment(rng.choice(logins), opened + timedelta(minutes=rng.randint(0, 9000)), rng.randint(0, 300))
            for _ in range(rng.randint(0, 4))
        )
        out.append(IssueRecord(
            number=number, title=random_text(rng, 20), body=random_text(rng), opener=rng.choice(logins),
            opened_at=opened, closer=rng.choice(logins) if closed else None, closed_at=closed,
            is_pull_request=not closed_only and rng.random() < 0.2, events=evs, comments=cms,
        ))
    return out


seeds = st.integers(min_value=0, max_value=2**32 - 1)


def commits(max_size=50, merges=True):
    return seeds.map(lambda s: random_commits(random.Random(s), max_size, merges))


def issues(max_size=20, closed_only=False):
    return seeds.map(lambda s: random_issues(random.Random(s), max_size, closed_only))
