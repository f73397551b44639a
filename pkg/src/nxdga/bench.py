"""Records-to-first-alert benchmarks over shuffled corpora.

Each run replays one shuffle of a family's corpus through a fresh host (one
record per second, classifier off) and notes the 1-based record index at
which the word and pattern filters first alert. Runs that end without an
alert are censored and left out of the means.
"""
from __future__ import annotations

import csv
import statistics
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .domain import DomainRecord, SuffixList
from .engine import EngineConfig, HostState, observe
from .segment import Segmentation, UnigramLexicon, segment

RUN_COLUMNS = ("family", "t", "repeat", "word_records", "pattern_records")
SUMMARY_COLUMNS = ("family", "t", "filter", "runs", "triggered", "mean", "median")


@dataclass(frozen=True)
class Prepared:
    records: Tuple[DomainRecord, ...]
    segs: Tuple[Segmentation, ...]

    def __len__(self):
        return len(self.records)


def prepare(qnames: Iterable[str], suffixes: Optional[SuffixList] = None,
            lexicon: Optional[UnigramLexicon] = None) -> Prepared:
    """Parse and segment a corpus once so shuffles only permute indices."""
    suffixes = suffixes or SuffixList.bundled()
    lexicon = lexicon or UnigramLexicon.bundled()
    recs = tuple(DomainRecord.parse("bench", 0, q, suffixes, fallback=True) for q in qnames)
    if not recs:
        raise ValueError("empty corpus")
    return Prepared(recs, tuple(segment(r.sld, lexicon) for r in recs))


def first_alerts(corpus: Prepared, order: Sequence[int], cfg: EngineConfig,
                 filters=("word", "pattern")) -> Dict[str, Optional[int]]:
    """1-based record index of each filter's first alert along ``order`` (None if never)."""
    cfg = cfg.replace(classifier_enabled=False)
    st = HostState("bench", cfg.window_size)
    found: Dict[str, Optional[int]] = {f: None for f in filters}
    pending = set(filters)
    for pos, i in enumerate(order):
        r = corpus.records[i]
        rec = DomainRecord("bench", pos, r.qname, r.sld, r.tld)
        for a in observe(st, rec, cfg, None, seg=corpus.segs[i]):
            if a.filter in pending:
                found[a.filter] = pos + 1
                pending.discard(a.filter)
        if not pending:
            break
    return found


def shuffles(n: int, repeats: int, seed: int):
    """``repeats`` permutations of ``range(n)``, each from its own child stream of ``seed``."""
    for ss in np.random.SeedSequence(seed).spawn(repeats):
        yield np.random.Generator(np.random.PCG64(ss)).permutation(n)


def run_family(family: str, corpus: Prepared, t_values: Sequence[int], repeats: int,
               seed: int, cfg: Optional[EngineConfig] = None,
               filters=("word", "pattern")) -> List[dict]:
    cfg = cfg or EngineConfig()
    rows = []
    for t in t_values:
        c = cfg.replace(word_strike_threshold=t)
        # the same shuffles for every t, so thresholds are compared on equal footing
        for rep, order in enumerate(shuffles(len(corpus), repeats, seed)):
            hit = first_alerts(corpus, order, c, filters)
            rows.append({"family": family, "t": t, "repeat": rep,
                         "word_records": hit.get("word"), "pattern_records": hit.get("pattern")})
    return rows


def summarize(rows: Sequence[dict]) -> List[dict]:
    groups: Dict[Tuple[str, int, str], List[Optional[int]]] = {}
    for r in rows:
        for filt in ("word", "pattern"):
            groups.setdefault((r["family"], r["t"], filt), []).append(r[f"{filt}_records"])
    out = []
    for (fam, t, filt), vals in groups.items():
        hits = [v for v in vals if v is not None]
        out.append({"family": fam, "t": t, "filter": filt, "runs": len(vals),
                    "triggered": len(hits),
                    "mean": round(statistics.fmean(hits), 4) if hits else None,
                    "median": statistics.median(hits) if hits else None})
    return out


def mean_records(rows: Sequence[dict], filt: str) -> float:
    """Mean over triggered runs; NaN when none triggered."""
    hits = [r[f"{filt}_records"] for r in rows if r[f"{filt}_records"] is not None]
    return statistics.fmean(hits) if hits else float("nan")


def write_csv(rows: Sequence[dict], columns: Sequence[str], fh):
    w = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: "" if r.get(k) is None else r.get(k) for k in columns})


PLOT_STUB = '''"""Plot records-to-first-alert distributions written by `nxdga bench`.

Usage: python plot_bench.py bench_runs.csv [out.png]  (needs matplotlib)
"""
import csv
import sys
from collections import defaultdict

import matplotlib.pyplot as plt

runs = defaultdict(list)
with open(sys.argv[1]) as fh:
    for row in csv.DictReader(fh):
        if row["word_records"]:
            runs[(row["family"], int(row["t"]))].append(int(row["word_records"]))
families = sorted({f for f, _ in runs})
ts = sorted({t for _, t in runs})
fig, axes = plt.subplots(1, len(ts), figsize=(4 * len(ts), 4), sharey=True, squeeze=False)
for ax, t in zip(axes[0], ts):
    ax.boxplot([runs.get((f, t), [0]) for f in families], labels=families)
    ax.set_title(f"t = {t}")
    ax.tick_params(axis="x", rotation=60)
axes[0][0].set_ylabel("records to first word alert")
fig.tight_layout()
fig.savefig(sys.argv[2] if len(sys.argv) > 2 else "bench_word.png")
'''
