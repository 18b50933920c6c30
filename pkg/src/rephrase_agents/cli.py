"""Command-line entry point: ``rephrase-agents <subcommand> ...``.

Exit codes: 0 success, 1 user error (bad flags, invalid inputs), 2 runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from collections.abc import Sequence
from pathlib import Path

from .agents import load_prompts
from .backend import LiveBackend, ScriptedBackend, load_script
from .dataset import class_support, load_annotations, load_dataset, save_dataset
from .errors import ConfigError, RephraseError
from .experiment import CONFIG_KEYS, execute_arm, make_config, read_config_file, read_records
from .knowledge import (
    DEFAULT_B,
    DEFAULT_K1,
    DEFAULT_MAX_WORDS,
    DEFAULT_OVERLAP_WORDS,
    DEFAULT_TOP_K,
    index_corpus,
    load_corpus,
    load_index,
    retrieve,
    save_index,
)
from .metrics import Prediction, agreement, arm_deltas, evaluate
from .reporting import FORMATS, F1Column, render_f1_table, render_report
from .types import VerdictStatus, canonical_order

log = logging.getLogger("rephrase_agents")

EXIT_OK, EXIT_USER, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def __init__(self, *args, **kwargs):
        kwargs.setdefault("allow_abbrev", False)
        super().__init__(*args, **kwargs)

    def error(self, message: str):  # argparse would exit 2; usage errors are exit 1 here
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _pct(value: float) -> str:
    return f"{round(100 * value) + 0:d}%"


# --- ingest ------------------------------------------------------------------


def cmd_ingest(args: argparse.Namespace) -> int:
    d = load_dataset(args.input, args.format)
    save_dataset(d, args.out, "jsonl")
    print(f"{len(d)} records")
    missing = sum(r.gold is None for r in d)
    if missing:
        print(f"class support unavailable: {missing} record(s) have no gold label")
        return EXIT_OK
    for cat, n in class_support(d).items():
        print(f"{cat.display_name:<20}{n:>6d}")
    print(f"wrote {args.out}")
    return EXIT_OK


# --- knowledge base ----------------------------------------------------------


def cmd_kb_build(args: argparse.Namespace) -> int:
    docs = load_corpus(args.docs)
    idx = index_corpus(docs, args.max_words, args.overlap_words, args.k1, args.b)
    save_index(idx, args.out)
    print(f"{len(idx)} chunks from {len(docs)} documents")
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_kb_query(args: argparse.Namespace) -> int:
    idx = load_index(args.index)
    results = retrieve(idx, args.query, args.top_k)
    print(f"{len(results)} results")
    for rank, r in enumerate(results, start=1):
        preview = " ".join(r.text.split()[:20])
        print(f"{rank}. {r.chunk_id} {r.score:.6f} {preview}")
    return EXIT_OK


# --- run ---------------------------------------------------------------------


def _make_backend_factory(spec: str, model: str):
    if spec.startswith("scripted:"):
        script = load_script(spec.split(":", 1)[1])
        # fresh replay state per arm so arms never share consumption
        return lambda: ScriptedBackend(script)
    if spec == "live":
        if not model:
            raise ConfigError("the live backend needs --model")
        shared = LiveBackend(model)
        return lambda: shared
    raise ConfigError(f"unknown backend {spec!r} (use 'live' or 'scripted:<file>')")


def cmd_run(args: argparse.Namespace) -> int:
    values: dict[str, str] = read_config_file(args.config) if args.config else {}
    for key in CONFIG_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = str(flag)
    cfg = make_config(values)
    if not cfg.dataset:
        raise ConfigError("--dataset is required")

    # every check that can fail on user input happens before the first model call
    dataset = load_dataset(cfg.dataset)
    idx = load_index(cfg.index) if any(a.informed for a in cfg.arms) else None
    prompts = load_prompts(cfg.prompts) if cfg.prompts else None
    new_backend = _make_backend_factory(cfg.backend, cfg.model)

    for arm in cfg.arms:
        summary = execute_arm(cfg, arm, dataset, new_backend(), idx, resume=True, prompts=prompts)
        c = summary.counts
        print(
            f"[{arm.value}] {len(dataset)} pairs: executed {summary.executed}, skipped {summary.skipped}; "
            f"ok {c[VerdictStatus.OK]}, parse_failure {c[VerdictStatus.PARSE_FAILURE]}, "
            f"backend_failure {c[VerdictStatus.BACKEND_FAILURE]} -> {summary.path}"
        )
    return EXIT_OK


# --- eval --------------------------------------------------------------------


def load_predictions(path: str | Path) -> tuple[str, list[Prediction]]:
    """Predictions from a results file, a label file, or a gold-bearing dataset.

    Returns the arm name (from the records, else the file stem) and predictions.
    """
    path = Path(path)
    first = ""
    if path.suffix.lower() in (".jsonl", ".ndjson", ".json"):
        with open(path, encoding="utf-8") as fh:
            first = next((line for line in fh if line.strip()), "")
    if '"verdict"' in first:
        records = read_records(path)
        arm = records[0].arm.value if records else path.stem
        preds = [Prediction(r.pair_id, r.verdict.category, r.verdict.status) for r in records]
        return arm, preds
    labels = load_annotations(path)
    return path.stem, [Prediction(pid, cat) for pid, cat in labels.items()]


def cmd_eval(args: argparse.Namespace) -> int:
    gold = load_annotations(args.gold)
    formats = [f.strip() for f in args.formats.split(",") if f.strip()]
    bad = [f for f in formats if f not in FORMATS]
    if bad:
        raise ConfigError(f"unknown format(s): {', '.join(bad)}")

    reports = {}
    for pred_path in args.predictions:
        arm, preds = load_predictions(pred_path)
        name = arm if arm not in reports else Path(pred_path).stem
        report = evaluate(preds, gold, name)
        reports[name] = report
        render_report(report, formats, args.report_dir, stem=name)
        print(
            f"[{name}] scored {report.scored}, excluded {report.excluded} "
            f"(parse_failure {report.parse_failures}, backend_failure {report.backend_failures})"
        )
        print(f"macro_f1 {report.macro_f1:.2f} mcc {report.mcc:.2f}")

    if len(reports) > 1:
        table, _ = render_f1_table([F1Column.from_report(r) for r in reports.values()])
        print(table, end="")
        baseline = next(iter(reports))
        for name, (df1, dmcc) in arm_deltas(reports, baseline).items():
            print(f"delta {name} vs {baseline}: macro_f1 {df1:+.2f} mcc {dmcc:+.2f}")
    return EXIT_OK


# --- kappa -------------------------------------------------------------------


def cmd_kappa(args: argparse.Namespace) -> int:
    rep = agreement(load_annotations(args.a), load_annotations(args.b))
    print(f"Items {rep.n_items}")
    print(f"Overall {_pct(rep.overall)}")
    if args.per_category:
        for cat in canonical_order():
            flag = " (degenerate: chance agreement is 1)" if cat in rep.degenerate else ""
            print(f"{cat.display_name} {_pct(rep.per_category[cat])}{flag}")
    return EXIT_OK


# --- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rephrase-agents", description="Classify rephrase pairs by agent deliberation and evaluate the predictions.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="validate a dataset and write canonical JSONL")
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=["csv", "jsonl"])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    kb = sub.add_parser("kb", help="build or query the theory index")
    kb_sub = kb.add_subparsers(dest="kb_command", required=True, parser_class=_Parser)
    b = kb_sub.add_parser("build")
    b.add_argument("--docs", required=True, help="directory of plain-text files")
    b.add_argument("--out", required=True)
    b.add_argument("--max-words", dest="max_words", type=int, default=DEFAULT_MAX_WORDS)
    b.add_argument("--overlap-words", dest="overlap_words", type=int, default=DEFAULT_OVERLAP_WORDS)
    b.add_argument("--k1", type=float, default=DEFAULT_K1)
    b.add_argument("--b", type=float, default=DEFAULT_B)
    b.set_defaults(func=cmd_kb_build)
    q = kb_sub.add_parser("query")
    q.add_argument("--index", required=True)
    q.add_argument("--query", required=True)
    q.add_argument("--top-k", dest="top_k", type=int, default=DEFAULT_TOP_K)
    q.set_defaults(func=cmd_kb_query)

    r = sub.add_parser("run", help="run experiment arms")
    r.add_argument("--config")
    r.add_argument("--arm", help="single_zero, single_rag, mas_zero, mas_rag or all")
    r.add_argument("--dataset")
    r.add_argument("--index")
    r.add_argument("--out")
    r.add_argument("--backend", help="live or scripted:<file>")
    r.add_argument("--workers", type=int)
    r.add_argument("--model")
    r.add_argument("--temperature", type=float)
    r.add_argument("--prompts", help="directory of <role>.txt prompt templates")
    for key in ("rounds", "verdict_reprompts", "top_k", "max_output_tokens"):
        r.add_argument(f"--{key}", f"--{key.replace('_', '-')}", dest=key, type=int)
    r.set_defaults(func=cmd_run)

    e = sub.add_parser("eval", help="score predictions against gold labels")
    e.add_argument("--predictions", required=True, nargs="+")
    e.add_argument("--gold", required=True)
    e.add_argument("--report-dir", dest="report_dir", default="reports")
    e.add_argument("--formats", default="text,csv", help="comma-separated subset of text,csv,svg")
    e.set_defaults(func=cmd_eval)

    k = sub.add_parser("kappa", help="inter-annotator agreement")
    k.add_argument("--a", required=True)
    k.add_argument("--b", required=True)
    k.add_argument("--per-category", dest="per_category", action="store_true")
    k.set_defaults(func=cmd_kappa)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USER
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (RephraseError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USER
    except Exception as exc:  # noqa: BLE001
        log.exception("runtime failure")
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
