"""Command-line entry point: ``nxdga {detect,train,evaluate,simulate,bench,plan}``.

Exit codes: 0 success, 1 usage error, 2 data or configuration error,
3 model archive incompatible with this build.
"""
from __future__ import annotations

import argparse
import contextlib
import csv
import hashlib
import json
import logging
import os
import platform
import sys
import time
from collections import defaultdict
from pathlib import Path
from typing import Dict, List, Optional

from . import __version__

log = logging.getLogger("nxdga")

CONFIG_ENV = "NXDGA_CONFIG"
EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_MODEL = 0, 1, 2, 3
REPORT_COLUMNS = ("class", "precision", "recall", "f1", "f1_std", "tp", "fp", "tn", "fn")


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class MalformedLine(DataError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> List[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


# -- shared helpers --------------------------------------------------------------

def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def load_config(path: Optional[str]):
    from .engine import EngineConfig

    path = path or os.environ.get(CONFIG_ENV)
    if not path:
        return EngineConfig(), None
    if not Path(path).is_file():
        raise DataError(f"config file not found: {path}")
    return EngineConfig.from_file(path), path


def run_manifest(command: str, cfg, model_hash: Optional[str], inputs: Dict[str, str],
                 started: float, stats: dict) -> dict:
    """Provenance record written next to detect and bench outputs."""
    from dataclasses import asdict

    return {
        "command": command,
        "tool_version": __version__,
        "python": platform.python_version(),
        "config": asdict(cfg),
        "model_sha256": model_hash,
        "inputs_sha256": inputs,
        "wall_clock": {"started_unix": round(started, 3),
                       "seconds": round(time.time() - started, 3)},
        "stats": stats,
    }


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


@contextlib.contextmanager
def _open_out(path):
    if path in (None, "-"):
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            yield fh


@contextlib.contextmanager
def _open_in(path):
    if path in (None, "-"):
        yield sys.stdin
    else:
        with open(path, encoding="utf-8") as fh:
            yield fh


def _load_model(path):
    from . import archive

    if not Path(path).is_file():
        raise DataError(f"model archive not found: {path}")
    return archive.load(path), file_sha256(path)


def _load_labeled(paths, suffixes) -> Dict[str, List[str]]:
    """AGD SLDs by family from corpus CSVs (or plain name lists, family = file stem)."""
    from .dga_sim import load_corpus, read_name_list
    from .training import to_slds

    by_family: Dict[str, List[str]] = defaultdict(list)
    for p in paths:
        if not Path(p).is_file():
            raise DataError(f"corpus file not found: {p}")
        if p.endswith(".csv"):
            for r in load_corpus(p).records:
                if r.label == "agd":
                    by_family[r.family].append(r.qname)
        else:
            by_family[Path(p).name.split(".")[0]].extend(read_name_list(p))
    return {f: to_slds(v, suffixes) for f, v in by_family.items()}


def _load_benign(path, suffixes) -> List[str]:
    from .dga_sim import read_name_list
    from .features import EmptyCorpus
    from .training import to_slds

    if not path or not Path(path).is_file():
        raise EmptyCorpus(f"benign file not found: {path}")
    slds = to_slds(read_name_list(path), suffixes)
    if not slds:
        raise EmptyCorpus(f"benign file {path} holds no usable names")
    return slds


def _write_report(reports, path):
    with _open_out(path) as fh:
        w = csv.DictWriter(fh, fieldnames=list(REPORT_COLUMNS), lineterminator="\n")
        w.writeheader()
        for name, rep in reports.items():
            w.writerow(rep.row(name))


# -- subcommands -----------------------------------------------------------------

def parse_line(line: str, suffixes, fallback: bool):
    """``timestamp host qname`` to a record; None for blank and comment lines."""
    from .domain import DomainError, DomainRecord

    line = line.split("#", 1)[0].strip()
    if not line:
        return None
    parts = line.split()
    if len(parts) != 3:
        raise MalformedLine(f"expected 3 fields, got {len(parts)}")
    ts, host, qname = parts
    try:
        ts = int(ts)
    except ValueError:
        raise MalformedLine(f"timestamp {ts!r} is not an integer") from None
    try:
        return DomainRecord.parse(host, ts, qname, suffixes, fallback=fallback)
    except DomainError as e:
        raise MalformedLine(str(e)) from None


def cmd_detect(args) -> int:
    from .domain import SuffixList
    from .engine import DetectionEngine

    started = time.time()
    cfg, cfg_path = load_config(args.config)
    if args.no_classifier:
        cfg = cfg.replace(classifier_enabled=False)
    model, model_hash = (None, None)
    if args.model:
        model, model_hash = _load_model(args.model)
    suffixes = SuffixList.from_file(args.suffixes) if args.suffixes else SuffixList.bundled()
    engine = DetectionEngine(cfg, model)
    total = malformed = alerts = 0
    batch = []

    def flush(out):
        nonlocal alerts
        for a in engine.process_batch(batch):
            out.write(a.to_json() + "\n")
            alerts += 1
        batch.clear()

    with _open_in(args.input) as src, _open_out(args.output) as out:
        for n, line in enumerate(src, 1):
            try:
                rec = parse_line(line, suffixes, cfg.suffix_fallback)
            except MalformedLine as e:
                total += 1
                malformed += 1
                if malformed <= 10:
                    log.warning("line %d skipped: %s", n, e)
                continue
            if rec is None:
                continue
            total += 1
            batch.append(rec)
            if len(batch) >= args.batch_size:
                flush(out)
        flush(out)
        out.flush()
    stats = {"lines": total, "records": engine.records, "malformed": malformed,
             "whitelisted": engine.skipped, "alerts": alerts, "hosts_live": len(engine.hosts)}
    if args.manifest:
        inputs = {}
        if args.input not in (None, "-"):
            inputs[args.input] = file_sha256(args.input)
        if cfg_path:
            inputs[cfg_path] = file_sha256(cfg_path)
        _write_json(args.manifest, run_manifest("detect", cfg, model_hash, inputs, started, stats))
    if malformed:
        log.warning("%d of %d lines malformed", malformed, total)
    if total and malformed / total > cfg.max_malformed_fraction:
        log.error("malformed fraction %.4f exceeds limit %.4f",
                  malformed / total, cfg.max_malformed_fraction)
        return EXIT_DATA
    return EXIT_OK


def cmd_train(args) -> int:
    from . import archive
    from .domain import SuffixList
    from .segment import UnigramLexicon
    from .training import train_detector

    suffixes = SuffixList.bundled()
    benign = _load_benign(args.benign, suffixes)
    agd = _load_labeled(args.agd, suffixes)
    lexicon = UnigramLexicon.from_file(args.lexicon) if args.lexicon else None
    cfg, _ = load_config(args.config)
    res = train_detector(benign, agd, seed=args.seed, n_trees=args.trees, folds=args.folds,
                         repeats=args.repeats, per_family=args.per_family,
                         lexicon=lexicon, threshold=cfg.classifier_score_threshold,
                         evaluate=not args.no_cv)
    digest = archive.save(res.model, args.out)
    log.info("wrote %s (sha256 %s)", args.out, digest)
    if res.reports:
        _write_report(res.reports, args.report)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    from .domain import SuffixList
    from .training import evaluate_model

    suffixes = SuffixList.bundled()
    model, _ = _load_model(args.model)
    benign = _load_benign(args.benign, suffixes)
    agd = _load_labeled(args.agd, suffixes)
    _write_report(evaluate_model(model, benign, agd), args.report)
    return EXIT_OK


def cmd_simulate(args) -> int:
    from dataclasses import replace

    from .dga_sim import family_template, generate, load_template, write_corpus_csv

    if args.template:
        if not Path(args.template).is_file():
            raise DataError(f"template file not found: {args.template}")
        tpl = load_template(args.template)
    else:
        tpl = family_template(args.family)
    tpl = replace(tpl, seed=args.seed)
    corpus = generate(tpl, args.count, unique=args.unique)
    with _open_out(args.output) as fh:
        write_corpus_csv(corpus, fh)
    return EXIT_OK


def cmd_bench(args) -> int:
    from . import bench
    from .dga_sim import bundled_benign, load_corpus, read_name_list, sample_benign

    started = time.time()
    cfg, cfg_path = load_config(args.config)
    corpora: Dict[str, List[str]] = defaultdict(list)
    inputs = {}
    for p in args.corpus:
        if not Path(p).is_file():
            raise DataError(f"corpus file not found: {p}")
        inputs[p] = file_sha256(p)
        if p.endswith(".csv"):
            for r in load_corpus(p).records:
                corpora[r.family if r.label == "agd" else "benign"].append(r.qname)
        else:
            corpora[Path(p).name.split(".")[0]].extend(read_name_list(p))
    if args.benign_sample:
        corpora["benign"].extend(sample_benign(bundled_benign(), args.benign_sample,
                                               args.seed).qnames)
    if not corpora:
        raise UsageError("no corpora given (use --corpus and/or --benign-sample)")
    if cfg_path:
        inputs[cfg_path] = file_sha256(cfg_path)
    rows = []
    for fam in sorted(corpora):
        prepared = bench.prepare(corpora[fam])
        rows.extend(bench.run_family(fam, prepared, args.t, args.repeats, args.seed, cfg))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "bench_runs.csv", "w", newline="", encoding="utf-8") as fh:
        bench.write_csv(rows, bench.RUN_COLUMNS, fh)
    summary = bench.summarize(rows)
    with open(out / "bench_summary.csv", "w", newline="", encoding="utf-8") as fh:
        bench.write_csv(summary, bench.SUMMARY_COLUMNS, fh)
    (out / "plot_bench.py").write_text(bench.PLOT_STUB, encoding="utf-8")
    _write_json(out / "manifest.json", run_manifest(
        "bench", cfg, None, inputs, started,
        {"families": sorted(corpora), "repeats": args.repeats, "t": args.t,
         "seed": args.seed, "runs": len(rows)}))
    for s in summary:
        print(f"{s['family']:>16} t={s['t']} {s['filter']:>7} mean={s['mean']} "
              f"triggered={s['triggered']}/{s['runs']}")
    return EXIT_OK


def cmd_plan(args) -> int:
    from .collision import plan_table

    if not 0.0 < args.p < 1.0:
        raise UsageError("--p must lie strictly between 0 and 1")
    with _open_out(args.output) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("L", "t", "n", "p"))
        for L in args.L:
            for row in plan_table(L, args.t, args.p):
                w.writerow((row[0], row[1], row[2], f"{row[3]:.6f}"))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="nxdga", description="Wordlist-DGA detection over NXDomain logs.")
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    d = sub.add_parser("detect", help="stream 'timestamp host qname' lines, emit JSON alerts")
    d.add_argument("--input", "-i", default="-", help="record file, '-' for stdin (default)")
    d.add_argument("--model", "-m", help="model archive; without it the classifier is off")
    d.add_argument("--config", "-c", help=f"key=value config (default: ${CONFIG_ENV})")
    d.add_argument("--output", "-o", default="-")
    d.add_argument("--manifest", help="write a run manifest JSON here")
    d.add_argument("--suffixes", help="public suffix file replacing the bundled list")
    d.add_argument("--no-classifier", action="store_true")
    d.add_argument("--batch-size", type=int, default=512)
    d.set_defaults(func=cmd_detect)

    t = sub.add_parser("train", help="build a model archive and a cross-validation report")
    t.add_argument("--benign", required=True, help="benign names, one per line (.gz ok)")
    t.add_argument("--agd", required=True, nargs="+", help="corpus CSVs from 'simulate'")
    t.add_argument("--out", required=True, help="model archive to write")
    t.add_argument("--report", default="-", help="CSV report (default stdout)")
    t.add_argument("--seed", type=int, required=True)
    t.add_argument("--trees", type=int, default=100)
    t.add_argument("--folds", type=int, default=10)
    t.add_argument("--repeats", type=int, default=1)
    t.add_argument("--per-family", type=int, help="cap on AGDs per family in the CV datasets")
    t.add_argument("--lexicon", help="segmentation word list replacing the bundled one")
    t.add_argument("--no-cv", action="store_true", help="skip cross-validation")
    t.add_argument("--config", "-c")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("evaluate", help="score a model on labeled hold-out data")
    e.add_argument("--model", "-m", required=True)
    e.add_argument("--benign", required=True)
    e.add_argument("--agd", required=True, nargs="+")
    e.add_argument("--report", default="-")
    e.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("simulate", help="generate a labeled AGD corpus CSV")
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--template", help="JSON template file")
    g.add_argument("--family", help="bundled family preset")
    s.add_argument("--count", type=int, required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--unique", action="store_true")
    s.add_argument("--output", "-o", default="-")
    s.set_defaults(func=cmd_simulate)

    b = sub.add_parser("bench", help="records-to-first-alert distributions per family")
    b.add_argument("--corpus", nargs="*", default=[], help="corpus CSVs or name lists")
    b.add_argument("--benign-sample", type=int, default=0,
                   help="add this many names sampled from the bundled benign list")
    b.add_argument("--repeats", type=int, default=100)
    b.add_argument("--seed", type=int, required=True)
    b.add_argument("--t", type=_int_list, default=[3, 4, 5, 6, 7],
                   help="comma-separated strike thresholds")
    b.add_argument("--config", "-c")
    b.add_argument("--out", required=True, help="output directory")
    b.set_defaults(func=cmd_bench)

    pl = sub.add_parser("plan", help="smallest n reaching a collision probability")
    pl.add_argument("--L", type=_int_list, required=True, help="dictionary size(s)")
    pl.add_argument("--t", type=_int_list, default=[2, 3, 4, 5, 6, 7])
    pl.add_argument("--p", type=float, required=True)
    pl.add_argument("--output", "-o", default="-")
    pl.set_defaults(func=cmd_plan)
    return p


def main(argv=None) -> int:
    from .archive import ModelMismatch
    from .classifier import ClassifierError
    from .collision import InvalidParams
    from .dga_sim import CountExceedsPopulation, TemplateError
    from .engine import ConfigError
    from .features import EmptyCorpus

    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="nxdga: %(levelname)s: %(message)s")
    try:
        return args.func(args)
    except ModelMismatch as e:
        log.error("model mismatch: %s", e)
        return EXIT_MODEL
    except (UsageError, InvalidParams) as e:
        log.error("%s", e)
        return EXIT_USAGE
    except (DataError, ConfigError, TemplateError, CountExceedsPopulation, EmptyCorpus,
            ClassifierError, OSError, ValueError) as e:
        log.error("%s: %s", type(e).__name__, e)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
