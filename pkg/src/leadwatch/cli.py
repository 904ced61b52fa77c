"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import signal
import sys
import threading
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .config import CONFIG_ENV, PipelineConfig, default_config_dict, load_config, resolve_config_path
from .digest import FORMATS, DigestSpec, render_digest, select_leads, sort_leads
from .errors import ConfigError, LeadwatchError
from .evaluation import (
    aggregate_human,
    coverage_metrics,
    kappa_report,
    load_extracted,
    load_ground_truth,
    load_overrides,
    pairwise_kappa,
    rating_agreement,
    table_report,
    triage_metrics,
)
from .evaluation.matching import DEFAULT_TAU, match_corpus
from .evaluation.report import fmt_ratio
from .logs import attach_run_log, detach
from .runner import RunAborted, Scheduler, run_once
from .store import LeadStore

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2

# reference magnitude for cost projection: articles processed in one week of live monitoring
REFERENCE_ARTICLES_PER_WEEK = 89

logger = logging.getLogger("leadwatch.cli")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse exits 2 by default
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _since(value: str) -> datetime:
    try:
        dt = datetime.fromisoformat(value.replace("Z", "+00:00"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an ISO-8601 timestamp: {value!r}") from None
    return dt if dt.tzinfo else dt.replace(tzinfo=timezone.utc)


def _number_list(value: str) -> list[float]:
    try:
        return [float(x) for x in value.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers: {value!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="leadwatch", description="Monitor alert feeds for newsworthy leads and evaluate extraction quality.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--config", help=f"config file (JSON); defaults to ${CONFIG_ENV} or ./leadwatch.json")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("init", help="write a starter config and create the lead database")
    s.add_argument("--path", default="leadwatch.json", help="where to write the config (default: %(default)s)")
    s.add_argument("--force", action="store_true", help="overwrite an existing config file")

    sub.add_parser("run", help="poll feeds and process new articles once")

    s = sub.add_parser("watch", help="run daily at the configured UTC time until interrupted")
    s.add_argument("--no-catch-up", action="store_true", help="do not run immediately when today's window has passed")

    s = sub.add_parser("digest", help="render leads at or above a newsworthiness threshold")
    s.add_argument("--threshold", type=float, help="minimum newsworthiness rating, 1-5 (default from config, 4.0)")
    s.add_argument("--since", type=_since, help="only leads first seen at or after this ISO-8601 time")
    s.add_argument("--format", choices=FORMATS, help="output format (default from config, markdown)")
    s.add_argument("--include-duplicates", action="store_true", help="also list leads marked as duplicates")
    s.add_argument("--db", help="lead database path (overrides config)")
    s.add_argument("-o", "--output", help="write to this file instead of stdout")

    s = sub.add_parser("export", help="export every stored lead, duplicates included")
    s.add_argument("--format", choices=("jsonl", "csv"), default="jsonl", help="default: %(default)s")
    s.add_argument("--db", help="lead database path (overrides config)")
    s.add_argument("-o", "--output", help="write to this file instead of stdout")

    ev = sub.add_parser("eval", help="evaluation metrics against human annotations")
    esub = ev.add_subparsers(dest="eval_command", required=True, parser_class=_Parser)

    s = esub.add_parser("coverage", help="use-case identification precision/recall/F1")
    s.add_argument("--tp", type=int, help="true positives (direct mode)")
    s.add_argument("--fp", type=int, help="false positives (direct mode)")
    s.add_argument("--fn", type=int, help="false negatives (direct mode)")
    s.add_argument("--label", default="model", help="row label in direct mode (default: %(default)s)")
    _add_matching_args(s)
    s.add_argument("--table-format", choices=("markdown", "csv", "latex"), default="markdown")

    s = esub.add_parser("agreement", help="newsworthiness agreement with the mean human rating")
    s.add_argument("--pairs", help="CSV with columns pred,human")
    _add_matching_args(s)
    s.add_argument("--table-format", choices=("markdown", "csv", "latex"), default="markdown")

    s = esub.add_parser("kappa", help="pairwise Cohen's kappa between annotators")
    s.add_argument("--truth", required=True, help="ground-truth JSONL with human_ratings")
    s.add_argument("--table-format", choices=("markdown", "csv", "latex"), default="markdown")

    s = esub.add_parser("triage", help="precision/recall/F1 of flagging at a rating threshold")
    s.add_argument("--pairs", help="CSV with columns pred,human")
    s.add_argument("--pred", type=_number_list, help="comma-separated model ratings")
    s.add_argument("--human", type=_number_list, help="comma-separated human ratings")
    s.add_argument("--threshold", type=float, default=4.0, help="default: %(default)s")
    return p


def _add_matching_args(s: argparse.ArgumentParser) -> None:
    s.add_argument("--truth", help="ground-truth JSONL")
    s.add_argument(
        "--extracted", action="append", default=[], metavar="[LABEL=]PATH",
        help="extracted-articles JSONL keyed by article_id; repeat for several models",
    )
    s.add_argument("--overrides", help="manual match file of 'extracted_index,gt_id' lines")
    s.add_argument("--tau", type=float, default=DEFAULT_TAU, help="similarity threshold (default: %(default)s)")


def _load(args) -> PipelineConfig:
    path = resolve_config_path(args.config)
    if path is None:
        return PipelineConfig()
    return load_config(path)


def _emit(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _store(args, config: PipelineConfig) -> LeadStore:
    return LeadStore(getattr(args, "db", None) or config.db_path, theta=config.dedup_theta)


def cmd_init(args) -> int:
    path = Path(args.path)
    if path.exists() and not args.force:
        raise UsageError(f"{path} exists; use --force to overwrite")
    path.write_text(json.dumps(default_config_dict(), indent=2) + "\n", encoding="utf-8")
    config = load_config(path)
    LeadStore(config.db_path).close()
    print(f"wrote {path}; database at {config.db_path}")
    print("edit the feed URLs and set enabled=true, then export OPENAI_API_KEY and run 'leadwatch run'")
    return EXIT_OK


def _print_run(run, config: PipelineConfig) -> None:
    print(json.dumps({
        "run_id": run.run_id,
        "status": run.status,
        "articles_seen": run.articles_seen,
        "articles_processed": run.articles_processed,
        "articles_failed": run.articles_failed,
        "leads_extracted": run.leads_extracted,
        "input_tokens": run.input_tokens,
        "output_tokens": run.output_tokens,
        "estimated_cost": run.estimated_cost,
        "started_at": run.started_at.isoformat(),
        "finished_at": run.finished_at.isoformat() if run.finished_at else None,
    }, indent=2))
    if run.articles_processed:
        per_article = run.estimated_cost / run.articles_processed
        weekly = per_article * REFERENCE_ARTICLES_PER_WEEK
        print(f"estimated cost ${run.estimated_cost:.4f}; at {REFERENCE_ARTICLES_PER_WEEK} articles/week "
              f"that projects to ${weekly:.2f}/week at the configured prices")


def cmd_run(args) -> int:
    config = _load(args)
    handler = attach_run_log(config.log_path)
    try:
        run = run_once(config)
    except RunAborted as exc:
        _print_run(exc.run, config)
        print(f"run aborted: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    finally:
        detach(handler)
    _print_run(run, config)
    if run.articles_failed:
        print(f"{run.articles_failed} article(s) failed; see {config.log_path}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_watch(args) -> int:
    config = _load(args)
    handler = attach_run_log(config.log_path)
    stop = threading.Event()
    for sig in (signal.SIGINT, signal.SIGTERM):
        signal.signal(sig, lambda *_: stop.set())

    def last_started():
        with LeadStore(config.db_path) as store:
            last = store.last_run()
        return last.started_at if last else None

    def run():
        record = run_once(config)
        _print_run(record, config)
        return record

    sched = Scheduler(config.schedule_time, run, last_started, stop=stop, max_nap=30)
    if args.no_catch_up:
        sched.needs_catch_up = lambda: False  # type: ignore[method-assign]
    print(f"watching; daily run at {config.schedule} UTC (Ctrl-C to stop)", file=sys.stderr)
    try:
        sched.loop()
    finally:
        detach(handler)
    return EXIT_OK


def cmd_digest(args) -> int:
    config = _load(args)
    spec = DigestSpec(
        threshold=args.threshold if args.threshold is not None else config.digest.threshold,
        since=args.since,
        format=args.format or config.digest.format,
        include_duplicates=args.include_duplicates or config.digest.include_duplicates,
    )
    with _store(args, config) as store:
        leads = select_leads(store, spec)
    _emit(render_digest(leads, spec.format), args.output)
    return EXIT_OK


def cmd_export(args) -> int:
    config = _load(args)
    with _store(args, config) as store:
        leads = store.leads(include_duplicates=True)
    _emit(render_digest(sort_leads(leads), args.format), args.output)
    return EXIT_OK


def _extracted_args(values: list[str]) -> list[tuple[str, str]]:
    out = []
    for v in values:
        label, sep, path = v.partition("=")
        out.append((label, path) if sep else (Path(v).stem, v))
    return out


def _match_models(args):
    if not args.truth or not args.extracted:
        raise UsageError("matching mode needs --truth and at least one --extracted")
    truth = load_ground_truth(args.truth)
    overrides = load_overrides(args.overrides) if args.overrides else ()
    results = {}
    for label, path in _extracted_args(args.extracted):
        articles = load_extracted(path)
        results[label] = match_corpus([(aid, a.use_cases) for aid, a in articles], truth.items, args.tau, overrides)
    return results


def cmd_eval_coverage(args) -> int:
    direct = (args.tp, args.fp, args.fn)
    if any(v is not None for v in direct):
        if any(v is None for v in direct):
            raise UsageError("direct mode needs all of --tp, --fp and --fn")
        if args.truth or args.extracted:
            raise UsageError("use either --tp/--fp/--fn or --truth/--extracted, not both")
        report = coverage_metrics(args.tp, args.fp, args.fn)
        print(f"precision {fmt_ratio(report.precision)} recall {fmt_ratio(report.recall)} f1 {fmt_ratio(report.f1)}")
        print(table_report({args.label: report}, fmt=args.table_format), end="")
        return EXIT_OK
    reports = {label: coverage_metrics(m.tp, m.fp, m.fn) for label, m in _match_models(args).items()}
    print(table_report(reports, fmt=args.table_format), end="")
    return EXIT_OK


def _read_pairs(path: str) -> tuple[list[float], list[float]]:
    text = Path(path).read_text(encoding="utf-8")
    reader = csv.DictReader(io.StringIO(text))
    if not reader.fieldnames or not {"pred", "human"} <= set(reader.fieldnames):
        raise UsageError(f"{path}: expected CSV header with 'pred' and 'human'")
    pred, human = [], []
    for row in reader:
        if not row["pred"].strip() or not row["human"].strip():
            continue  # no usable rating
        pred.append(float(row["pred"]))
        human.append(float(row["human"]))
    return pred, human


def cmd_eval_agreement(args) -> int:
    if args.pairs:
        pred, human = _read_pairs(args.pairs)
        reports = {Path(args.pairs).stem: rating_agreement(pred, human)}
    else:
        reports = {}
        for label, m in _match_models(args).items():
            pred = [p for p, _ in m.rated_pairs]
            human = [aggregate_human(gt.human_ratings) for _, gt in m.rated_pairs]
            reports[label] = rating_agreement(pred, human)
    print(table_report(agreement=reports, fmt=args.table_format), end="")
    return EXIT_OK


def cmd_eval_kappa(args) -> int:
    result = pairwise_kappa(load_ground_truth(args.truth))
    print(kappa_report(result, fmt=args.table_format), end="")
    return EXIT_OK


def cmd_eval_triage(args) -> int:
    if args.pairs:
        pred, human = _read_pairs(args.pairs)
    elif args.pred is not None and args.human is not None:
        pred, human = args.pred, args.human
    else:
        raise UsageError("give --pairs, or both --pred and --human")
    r = triage_metrics(pred, human, args.threshold)
    print(f"threshold >= {args.threshold:g}: tp {r.tp} fp {r.fp} fn {r.fn}")
    print(f"precision {fmt_ratio(r.precision)} recall {fmt_ratio(r.recall)} f1 {fmt_ratio(r.f1)}")
    return EXIT_OK


COMMANDS = {
    "init": cmd_init,
    "run": cmd_run,
    "watch": cmd_watch,
    "digest": cmd_digest,
    "export": cmd_export,
    ("eval", "coverage"): cmd_eval_coverage,
    ("eval", "agreement"): cmd_eval_agreement,
    ("eval", "kappa"): cmd_eval_kappa,
    ("eval", "triage"): cmd_eval_triage,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.verbose:
        logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    key = ("eval", args.eval_command) if args.command == "eval" else args.command
    try:
        return COMMANDS[key](args)
    except UsageError as exc:
        print(f"leadwatch: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, ValueError) as exc:
        print(f"leadwatch: error: {exc}", file=sys.stderr)
        return EXIT_USAGE if isinstance(exc, ConfigError) else EXIT_RUNTIME
    except (LeadwatchError, OSError, KeyError) as exc:
        print(f"leadwatch: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
