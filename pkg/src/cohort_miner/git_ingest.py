"""Commit records from a line-oriented git dump.

Dump layout, one block per commit::

    C|<sha>|<author name>|<author email>|<author time>|<committer time>|<parent count>
    M|<base64 of the raw commit message>
    <added>\t<deleted>\t<path>          (zero or more numstat lines)
    <blank line>

``-`` in a numstat column marks a binary file whose line counts are unknown.
The dump is produced from a local clone by piping ``git log`` (see
:data:`GIT_LOG_ARGS`) through ``python -m cohort_miner.git_ingest``.
"""

from __future__ import annotations

import base64
import binascii
import re
import sys
from dataclasses import dataclass
from datetime import datetime
from typing import BinaryIO, Iterable, Optional

from .errors import ParseError, ValidationError
from .model import TimeWindow, format_timestamp, parse_timestamp, window_contains

_SHA = re.compile(r"[0-9a-f]{40}")


@dataclass(frozen=True)
class FileDelta:
    path: str
    lines_added: Optional[int]  # None: binary, unknown
    lines_deleted: Optional[int]

    @property
    def line_changes(self) -> int:
        return (self.lines_added or 0) + (self.lines_deleted or 0)


@dataclass(frozen=True)
class CommitRecord:
    id: str
    author_name: str
    author_email: str
    author_time: datetime
    committer_time: datetime
    message: str
    parent_count: int
    file_deltas: tuple[FileDelta, ...] = ()

    def __post_init__(self):
        if not _SHA.fullmatch(self.id):
            raise ValidationError(f"commit id must be 40 lowercase hex chars: {self.id!r}")
        if self.parent_count < 0:
            raise ValidationError(f"{self.id}: negative parent count")
        object.__setattr__(self, "file_deltas", tuple(self.file_deltas))
        paths = [d.path for d in self.file_deltas]
        if len(set(paths)) != len(paths):
            raise ValidationError(f"{self.id}: duplicate file path in deltas")

    @property
    def is_merge(self) -> bool:
        return self.parent_count >= 2

    def timestamp(self, source: str = "author") -> datetime:
        return self.author_time if source == "author" else self.committer_time


def _numstat_field(text: str, lineno: int) -> Optional[int]:
    if text == "-":
        return None
    if not text.isdigit():
        raise ParseError(f"bad numstat count {text!r}", lineno)
    return int(text)


def parse_commit_log(stream: BinaryIO | bytes) -> list[CommitRecord]:
    """Parse the dump format into records, in stream order."""
    data = stream if isinstance(stream, (bytes, bytearray)) else stream.read()
    lines = bytes(data).split(b"\n")
    if lines and lines[-1] == b"":
        lines.pop()

    records = []
    header = None  # (lineno, fields)
    message = None
    deltas: list[FileDelta] = []

    def finish(lineno):
        nonlocal header, message, deltas
        hline, (sha, name, email, at, ct, parents) = header
        if message is None:
            raise ParseError(f"commit {sha} has no message line", lineno)
        try:
            records.append(CommitRecord(sha, name, email, at, ct, message, parents, tuple(deltas)))
        except ValidationError as exc:
            raise ParseError(str(exc), hline) from None
        header, message, deltas = None, None, []

    for lineno, raw in enumerate(lines, start=1):
        if header is None:
            if raw == b"":
                continue
            header = (lineno, _parse_header(raw, lineno))
        elif message is None:
            if not raw.startswith(b"M|"):
                raise ParseError("expected message line 'M|<base64>'", lineno)
            try:
                message = base64.b64decode(raw[2:], validate=True).decode("utf-8")
            except (binascii.Error, UnicodeDecodeError):
                raise ParseError("message is not valid base64-encoded UTF-8", lineno) from None
        elif raw == b"":
            finish(lineno)
        else:
            parts = raw.split(b"\t", 2)
            if len(parts) != 3 or not parts[2]:
                raise ParseError("expected numstat line '<added>\\t<deleted>\\t<path>'", lineno)
            added = _numstat_field(parts[0].decode("ascii", "replace"), lineno)
            deleted = _numstat_field(parts[1].decode("ascii", "replace"), lineno)
            deltas.append(FileDelta(parts[2].decode("utf-8", "replace"), added, deleted))

    if header is not None:
        raise ParseError(f"truncated record for commit {header[1][0]} at end of input", len(lines))
    return records


def _parse_header(raw: bytes, lineno: int):
    try:
        line = raw.decode("utf-8")
    except UnicodeDecodeError:
        raise ParseError("header is not valid UTF-8", lineno) from None
    if not line.startswith("C|"):
        raise ParseError("expected commit header 'C|...'", lineno)
    sha, _, rest = line[2:].partition("|")
    # names may contain '|', so peel fixed fields off both ends
    tail = rest.rsplit("|", 3)
    if len(tail) != 4 or "|" not in tail[0]:
        raise ParseError("commit header needs 7 '|'-separated fields", lineno)
    ident, at, ct, parents = tail
    name, _, email = ident.rpartition("|")
    if not parents.isdigit():
        raise ParseError(f"bad parent count {parents!r}", lineno)
    try:
        author_time, committer_time = parse_timestamp(at), parse_timestamp(ct)
    except ValidationError as exc:
        raise ParseError(str(exc), lineno) from None
    return sha, name, email, author_time, committer_time, int(parents)


def serialize_commit_log(records: Iterable[CommitRecord]) -> bytes:
    out = []
    for c in records:
        out.append(
            f"C|{c.id}|{c.author_name}|{c.author_email}|{format_timestamp(c.author_time)}"
            f"|{format_timestamp(c.committer_time)}|{c.parent_count}"
        )
        out.append("M|" + base64.b64encode(c.message.encode("utf-8")).decode("ascii"))
        for d in c.file_deltas:
            added = "-" if d.lines_added is None else str(d.lines_added)
            deleted = "-" if d.lines_deleted is None else str(d.lines_deleted)
            out.append(f"{added}\t{deleted}\t{d.path}")
        out.append("")
    return "".join(line + "\n" for line in out).encode("utf-8")


def filter_commits(
    commits: Iterable[CommitRecord], w: TimeWindow, timestamp_source: str = "author"
) -> list[CommitRecord]:
    """Drop merge commits and commits stamped outside ``w``."""
    return [
        c for c in commits
        if c.parent_count <= 1 and window_contains(w, c.timestamp(timestamp_source))
    ]


_ANY_REF = re.compile(r"(?<![^\W_])#(\d+)")
_KEYWORD_REF = re.compile(
    r"\b(?:fix(?:e[sd])?|close[sd]?|resolve[sd]?)(?:\s+issue)?:?\s+(?<![^\W_])#(\d+)",
    re.IGNORECASE,
)


def extract_issue_refs(message: str, mode: str = "any") -> set[int]:
    """Issue numbers referenced as ``#<digits>`` in a commit message.

    ``mode="keyword"`` only accepts references directly preceded by a closing
    keyword such as ``fixes`` or ``closed issue``.
    """
    pattern = _KEYWORD_REF if mode == "keyword" else _ANY_REF
    return {n for n in (int(m.group(1)) for m in pattern.finditer(message)) if n > 0}


# --- producing dumps from a clone --------------------------------------------

_RS, _US = "\x1e", "\x1f"

GIT_LOG_ARGS = (
    "git", "-c", "core.quotepath=off", "log", "--all", "--no-renames", "--numstat",
    "--date=iso-strict", f"--format=%x1eC|%H|%an|%ae|%aI|%cI|%P%x1f%B%x1f",
)


def dump_command(repo: str = "<clone>", out: str = "<project>.dump") -> str:
    import shlex

    git = ["git", "-C", repo, *GIT_LOG_ARGS[1:]]
    return (
        " ".join(shlex.quote(a) for a in git)
        + f" | {shlex.quote(sys.executable)} -m cohort_miner.git_ingest > {shlex.quote(out)}"
    )


def convert_git_log(raw: bytes) -> bytes:
    """Turn the raw output of :data:`GIT_LOG_ARGS` into the dump format."""
    out = []
    for block in raw.split(_RS.encode())[1:]:
        head, message, numstat = block.split(_US.encode(), 2)
        fields = head.decode("utf-8", "replace").split("|")
        sha, *ident_times, parents = fields[1:]
        *ident, at, ct = ident_times
        name, email = "|".join(ident[:-1]), ident[-1]
        parent_count = len(parents.split())
        out.append(f"C|{sha}|{name}|{email}|{at}|{ct}|{parent_count}\n".encode("utf-8"))
        msg = message.decode("utf-8", "replace").encode("utf-8")
        out.append(b"M|" + base64.b64encode(msg) + b"\n")
        for line in numstat.split(b"\n"):
            if line.strip():
                out.append(line.rstrip(b"\r") + b"\n")
        out.append(b"\n")
    return b"".join(out)


def dump_repository(repo_path: str) -> bytes:
    import subprocess

    proc = subprocess.run(
        ["git", "-C", str(repo_path), *GIT_LOG_ARGS[1:]],
        stdout=subprocess.PIPE, stderr=subprocess.PIPE,
    )
    if proc.returncode != 0:
        raise OSError(f"git log failed in {repo_path}: {proc.stderr.decode('utf-8', 'replace').strip()}")
    raw = proc.stdout
    return convert_git_log(raw)


if __name__ == "__main__":
    sys.stdout.buffer.write(convert_git_log(sys.stdin.buffer.read()))
