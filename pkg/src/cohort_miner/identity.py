"""Contributor identity resolution.

Raw identities (commit author name/email pairs, tracker logins) are bound to
canonical contributor ids. Binding precedence:

1. an explicit alias-map matcher (exact name+email pair, then email, then login);
2. an email (case-insensitive) or login shared with other actors;
3. a fresh id, ``email:<lowercased email>`` or else ``login:<login>``.

Names alone never merge identities.

Alias map file format, one canonical contributor per line::

    # comment
    alice = email:alice@uni.example, login:alice-gh, pair:Alice Smith <a@home.example>
    !exclude = login:tutor-bot

``!exclude`` lists accounts (e.g. tutors) left out of contributor counts.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

from .errors import EmptyWindowError, ParseError, ValidationError

EXCLUDE = "!exclude"


@dataclass(frozen=True)
class RawActor:
    source: str  # "commit" or "tracker"
    name: Optional[str] = None
    email: Optional[str] = None
    login: Optional[str] = None

    def __post_init__(self):
        if self.source not in ("commit", "tracker"):
            raise ValidationError(f"unknown actor source {self.source!r}")
        if not self.email and not self.login:
            raise ValidationError("actor needs an email or a login")

    @classmethod
    def from_commit(cls, commit) -> "RawActor":
        return cls("commit", commit.author_name, commit.author_email)

    @classmethod
    def from_login(cls, login: str) -> "RawActor":
        return cls("tracker", login=login)

    @property
    def email_key(self) -> Optional[str]:
        return self.email.casefold() if self.email else None


@dataclass(frozen=True)
class Matcher:
    kind: str  # "email", "login" or "pair"
    value: str
    name: Optional[str] = None  # pair matchers only

    @property
    def key(self):
        if self.kind == "email":
            return ("email", self.value.casefold())
        if self.kind == "pair":
            return ("pair", self.name, self.value.casefold())
        return ("login", self.value)

    def __str__(self):
        if self.kind == "pair":
            return f"pair:{self.name} <{self.value}>"
        return f"{self.kind}:{self.value}"


@dataclass
class AliasMap:
    entries: dict[str, set[Matcher]] = field(default_factory=dict)
    exclude: set[Matcher] = field(default_factory=set)

    def __post_init__(self):
        self._index = {}
        for cid, matchers in sorted(self.entries.items()):
            for m in matchers:
                other = self._index.get(m.key)
                if other is not None and other != cid:
                    raise ValidationError(f"matcher {m} appears under both {other!r} and {cid!r}")
                self._index[m.key] = cid
        self._excluded = {m.key for m in self.exclude}

    def lookup(self, actor: RawActor) -> Optional[str]:
        keys = []
        if actor.email and actor.name is not None:
            keys.append(("pair", actor.name, actor.email_key))
        if actor.email:
            keys.append(("email", actor.email_key))
        if actor.login:
            keys.append(("login", actor.login))
        for k in keys:
            if k in self._index:
                return self._index[k]
        return None

    def is_excluded(self, actor: RawActor) -> bool:
        return any(
            k in self._excluded
            for k in (
                ("pair", actor.name, actor.email_key) if actor.email else None,
                ("email", actor.email_key) if actor.email else None,
                ("login", actor.login) if actor.login else None,
            )
            if k is not None
        )


def _parse_matcher(text: str, lineno: int) -> Matcher:
    kind, sep, value = text.partition(":")
    kind, value = kind.strip(), value.strip()
    if not sep or not value:
        raise ParseError(f"matcher {text.strip()!r} is not '<kind>:<value>'", lineno)
    if kind == "email":
        return Matcher("email", value)
    if kind == "login":
        return Matcher("login", value)
    if kind == "pair":
        if not value.endswith(">") or "<" not in value:
            raise ParseError(f"pair matcher must read 'pair:Name <email>', got {value!r}", lineno)
        name, _, email = value[:-1].rpartition("<")
        return Matcher("pair", email.strip(), name.strip())
    raise ParseError(f"unknown matcher kind {kind!r} (email, login, pair)", lineno)


def parse_alias_map(text: str) -> AliasMap:
    entries: dict[str, set[Matcher]] = {}
    exclude: set[Matcher] = set()
    seen: dict[tuple, tuple[str, int]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        cid, sep, rest = line.partition("=")
        cid = cid.strip()
        if not sep or not cid:
            raise ParseError("expected '<canonical id> = <matcher>, ...'", lineno)
        matchers = {_parse_matcher(part, lineno) for part in rest.split(",") if part.strip()}
        if not matchers:
            raise ParseError(f"entry {cid!r} has no matchers", lineno)
        for m in matchers:
            if m.key in seen and seen[m.key][0] != cid:
                other, other_line = seen[m.key]
                raise ParseError(f"matcher {m} already bound to {other!r} on line {other_line}", lineno)
            seen[m.key] = (cid, lineno)
        if cid == EXCLUDE:
            exclude |= matchers
        else:
            entries.setdefault(cid, set()).update(matchers)
    return AliasMap(entries, exclude)


def format_alias_map(aliases: AliasMap) -> str:
    lines = []
    for cid in sorted(aliases.entries):
        lines.append(f"{cid} = " + ", ".join(sorted(map(str, aliases.entries[cid]))))
    if aliases.exclude:
        lines.append(f"{EXCLUDE} = " + ", ".join(sorted(map(str, aliases.exclude))))
    return "".join(line + "\n" for line in lines)


@dataclass(frozen=True)
class ContributorSet:
    contributors: frozenset[str]
    binding: Mapping[RawActor, str]
    excluded: frozenset[str] = frozenset()

    def __getitem__(self, actor: RawActor) -> str:
        return self.binding[actor]

    def for_commit(self, commit) -> str:
        return self.binding[RawActor.from_commit(commit)]

    def for_login(self, login: str) -> str:
        return self.binding[RawActor.from_login(login)]


class _DisjointSet:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, i):
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, a, b):
        a, b = self.find(a), self.find(b)
        if a != b:
            self.parent[max(a, b)] = min(a, b)


def resolve(actors: Iterable[RawActor], aliases: Optional[AliasMap] = None) -> ContributorSet:
    """Bind every actor to a canonical contributor id."""
    aliases = aliases if aliases is not None else AliasMap()
    # sorting makes every tie-break below independent of input order
    unique = sorted(set(actors), key=lambda a: (a.source, a.name or "", a.email or "", a.login or ""))

    binding: dict[RawActor, str] = {}
    free = []
    for a in unique:
        cid = aliases.lookup(a)
        if cid is None:
            free.append(a)
        else:
            binding[a] = cid

    email_alias = defaultdict(set)
    login_alias = defaultdict(set)
    for a, cid in binding.items():
        if a.email:
            email_alias[a.email_key].add(cid)
        if a.login:
            login_alias[a.login].add(cid)

    ds = _DisjointSet(len(free))
    first_by_key = {}
    for i, a in enumerate(free):
        for key in (("email", a.email_key), ("login", a.login)):
            if key[1] is None:
                continue
            if key in first_by_key:
                ds.union(first_by_key[key], i)
            else:
                first_by_key[key] = i

    groups = defaultdict(list)
    for i, a in enumerate(free):
        groups[ds.find(i)].append(a)

    for members in groups.values():
        via_email = set().union(*(email_alias.get(a.email_key, ()) for a in members if a.email))
        via_login = set().union(*(login_alias.get(a.login, ()) for a in members if a.login))
        if via_email:
            cid = min(via_email)
        elif via_login:
            cid = min(via_login)
        else:
            emails = sorted(a.email_key for a in members if a.email)
            cid = f"email:{emails[0]}" if emails else f"login:{min(a.login for a in members)}"
        for a in members:
            binding[a] = cid

    excluded = frozenset(cid for a, cid in binding.items() if aliases.is_excluded(a))
    return ContributorSet(frozenset(binding.values()), binding, excluded)


def active_contributor_count(
    cs: ContributorSet, commits, issues, w=None, project: Optional[str] = None
) -> int:
    """Number of canonical ids with any activity in the (already filtered) inputs."""
    active = active_contributors(cs, commits, issues)
    if not active:
        raise EmptyWindowError(project)
    return len(active)


def active_contributors(cs: ContributorSet, commits, issues) -> set[str]:
    active = {cs.for_commit(c) for c in commits}
    for issue in issues:
        active.add(cs.for_login(issue.opener))
        if issue.closer is not None:
            active.add(cs.for_login(issue.closer))
        active.update(cs.for_login(e.actor) for e in issue.events if e.actor is not None)
        active.update(cs.for_login(c.actor) for c in issue.comments)
    return active - cs.excluded


def actors_of(commits, issues) -> list[RawActor]:
    """Every raw identity appearing in the inputs."""
    found = {RawActor.from_commit(c) for c in commits}
    for issue in issues:
        logins = {issue.opener, issue.closer}
        logins.update(e.actor for e in issue.events)
        logins.update(c.actor for c in issue.comments)
        found.update(RawActor.from_login(x) for x in logins if x)
    return sorted(found, key=lambda a: (a.source, a.name or "", a.email or "", a.login or ""))
