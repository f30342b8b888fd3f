"""``cohort-miner`` command line.

Exit codes: 0 success, 1 validation/usage error, 2 I/O or transport error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .errors import FetchError, ValidationError
from .git_ingest import dump_command, dump_repository, parse_commit_log
from .identity import AliasMap, parse_alias_map
from .metrics import ProjectInput, assemble
from .model import CohortSpec, RunConfig, load_config
from .report import (
    FORMATS,
    boxplot_table,
    commit_table,
    issue_table,
    likert_table,
    render_many,
    tally_table,
    text_table,
)
from .surveystats import analyze_survey, load_questions
from .tracker_ingest import UrllibTransport, fetch_snapshot, load_snapshot, save_snapshot

log = logging.getLogger("cohort_miner")

TOKEN_ENV = "COHORT_MINER_TOKEN"


class UsageError(Exception):
    def __init__(self, message, usage):
        super().__init__(message)
        self.usage = usage


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message, self.format_usage())


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", type=Path, default=argparse.SUPPRESS,
                        help="cohort configuration file (default ./cohorts.conf)")
    output = _Parser(add_help=False)
    output.add_argument("--format", choices=FORMATS, default="markdown")
    output.add_argument("--out", type=Path, help="write to this file instead of stdout")

    p = _Parser(prog="cohort-miner", parents=[common],
                description="Mine commit and issue activity of project cohorts and compare them.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    f = sub.add_parser("fetch", parents=[common], help="download tracker snapshots")
    f.add_argument("--cohort", help="only projects of this cohort")

    a = sub.add_parser("analyze", parents=[common, output], help="metrics for one cohort")
    a.add_argument("cohort")

    sub.add_parser("compare", parents=[common, output], help="metric tables for all cohorts")

    s = sub.add_parser("survey", parents=[output], help="summarise a survey export")
    s.add_argument("file", type=Path)
    s.add_argument("--questions", type=Path,
                   help="question sidecar (default: <file stem>.questions.yaml)")
    s.add_argument("--trim", type=float, default=0.10, help="trim fraction per tail")

    d = sub.add_parser("dump-cmd", help="print the git invocation that produces a commit dump")
    d.add_argument("repo", nargs="?", default="<clone>")
    d.add_argument("--out", default="<project>.dump")
    return p


def _emit(text: str, out: Optional[Path]):
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text, encoding="utf-8")


def _config(args) -> RunConfig:
    return load_config(getattr(args, "config", Path("cohorts.conf")))


def _aliases(cfg: RunConfig) -> AliasMap:
    if cfg.alias_map_path is None:
        return AliasMap()
    try:
        return parse_alias_map(cfg.alias_map_path.read_text(encoding="utf-8"))
    except ValidationError as exc:
        raise ValidationError(f"{cfg.alias_map_path}: {exc}") from None


def load_inputs(cfg: RunConfig, cohort: CohortSpec) -> list[ProjectInput]:
    inputs = []
    for project in cohort.projects:
        dump = cfg.dump_path(cohort, project)
        if dump.exists():
            data = dump.read_bytes()
        elif Path(project.repo_source).is_dir():
            log.info("no dump at %s; reading local clone %s", dump, project.repo_source)
            data = dump_repository(project.repo_source)
        else:
            raise FileNotFoundError(f"{project.name}: no commit dump at {dump}")
        try:
            commits = parse_commit_log(data)
        except ValidationError as exc:
            raise ValidationError(f"{dump}: {exc}") from None
        snap_path = cfg.snapshot_path(cohort, project)
        if not snap_path.exists():
            raise FileNotFoundError(f"{project.name}: no tracker snapshot at {snap_path} (run fetch)")
        try:
            snapshot = load_snapshot(snap_path.read_bytes())
        except ValidationError as exc:
            raise ValidationError(f"{snap_path}: {exc}") from None
        inputs.append(ProjectInput(project, commits, snapshot))
    return inputs


def analyze_cohorts(cfg: RunConfig, cohorts: Sequence[CohortSpec]):
    aliases = _aliases(cfg)
    return [assemble(c, load_inputs(cfg, c), aliases, cfg.options) for c in cohorts]


def cmd_fetch(args) -> int:
    cfg = _config(args)
    token = os.environ.get(TOKEN_ENV)
    if not token:
        raise ValidationError(f"set {TOKEN_ENV} to an API token with read access")
    cohorts = [cfg.cohort(args.cohort)] if args.cohort else cfg.cohorts
    http = UrllibTransport()
    for cohort in cohorts:
        for project in cohort.projects:
            path = cfg.snapshot_path(cohort, project)
            log.info("fetching %s -> %s", project.repo_source, path)
            snapshot = fetch_snapshot(project.repo_source, token, http, base_url=cfg.api_base)
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_bytes(save_snapshot(snapshot))
            print(f"{project.name}: {len(snapshot.issues)} items -> {path}", file=sys.stderr)
    return 0


def cmd_analyze(args) -> int:
    cfg = _config(args)
    rows = analyze_cohorts(cfg, [cfg.cohort(args.cohort)])
    _emit(render_many([text_table(rows), commit_table(rows), issue_table(rows)], args.format), args.out)
    return 0


def cmd_compare(args) -> int:
    cfg = _config(args)
    rows = analyze_cohorts(cfg, cfg.cohorts)
    _emit(render_many([text_table(rows), commit_table(rows), issue_table(rows)], args.format), args.out)
    return 0


def cmd_survey(args) -> int:
    sidecar = args.questions or args.file.with_name(args.file.stem + ".questions.yaml")
    questions, delimiter = load_questions(sidecar)
    if delimiter is None and args.file.suffix == ".tsv":
        delimiter = "\t"
    results = analyze_survey(args.file.read_text(encoding="utf-8-sig"), questions, delimiter, args.trim)
    tables = []
    if results.likert:
        tables.append(likert_table([(q.id, q.topic, s) for q, s, _ in results.likert]))
        tables.append(boxplot_table([(q.id, b) for q, _, b in results.likert]))
    if results.choices:
        tables.append(tally_table([(q.topic, t) for q, t in results.choices]))
    text = render_many(tables, args.format)
    if args.format == "markdown":
        for q, answers in results.texts:
            text += f"\n### Question {q.id}: {q.topic or 'free text'} ({len(answers)} answers)\n\n"
            text += "".join(f"- {a}\n" for a in answers)
    _emit(text, args.out)
    return 0


def cmd_dump_cmd(args) -> int:
    print(dump_command(args.repo, args.out))
    return 0


COMMANDS = {
    "fetch": cmd_fetch,
    "analyze": cmd_analyze,
    "compare": cmd_compare,
    "survey": cmd_survey,
    "dump-cmd": cmd_dump_cmd,
}


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        sys.stderr.write(exc.usage)
        print(f"cohort-miner: error: {exc}", file=sys.stderr)
        return 1
    if args.command is None:
        sys.stderr.write(parser.format_usage())
        print("cohort-miner: error: a subcommand is required", file=sys.stderr)
        return 1
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(message)s",
        stream=sys.stderr,
    )
    try:
        return COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"cohort-miner: {exc}", file=sys.stderr)
        return 1
    except FetchError as exc:
        print(f"cohort-miner: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"cohort-miner: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
