"""Corpus-level training and evaluation glue.

The benign list is split in two disjoint parts: one supplies the benign
n-gram reference, the other supplies benign training samples. Harvesting grams
from the very names the classifier is evaluated on would make every benign
sample score a perfect gram ratio.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .archive import DetectorModel
from .classifier import (DGAForestClassifier, EvalReport, SingleClass, cross_validate,
                         precision_recall_f1)
from .domain import DomainError, SuffixList, parse_qname
from .features import EmptyCorpus, FeatureExtractor, MarkovGibberishModel, build_benign_grams
from .segment import UnigramLexicon


def to_slds(names: Sequence[str], suffixes: Optional[SuffixList] = None) -> List[str]:
    """SLDs of the parseable names (bare labels pass through), duplicates dropped."""
    suffixes = suffixes or SuffixList.bundled()
    out = []
    seen = set()
    for name in names:
        name = name.strip().lower().rstrip(".")
        if not name:
            continue
        try:
            sld = parse_qname(name, suffixes, fallback=True)[0] if "." in name else name
        except DomainError:
            continue
        if sld.startswith("xn--") or sld in seen:
            continue
        seen.add(sld)
        out.append(sld)
    return out


def split_benign(slds: Sequence[str], seed: int, gram_fraction: float = 0.5
                 ) -> Tuple[List[str], List[str]]:
    """Shuffle and split into (gram reference, sample pool)."""
    if not slds:
        raise EmptyCorpus("benign corpus is empty")
    if not 0.0 < gram_fraction < 1.0:
        raise ValueError("gram_fraction must lie strictly between 0 and 1")
    order = np.random.Generator(np.random.PCG64(seed)).permutation(len(slds))
    cut = max(1, int(round(len(slds) * gram_fraction)))
    ref = [slds[i] for i in order[:cut]]
    pool = [slds[i] for i in order[cut:]]
    return ref, pool


def build_extractor(reference: Sequence[str], lexicon: Optional[UnigramLexicon] = None,
                    markov: Optional[MarkovGibberishModel] = None) -> FeatureExtractor:
    return FeatureExtractor.from_parts(build_benign_grams(reference),
                                       markov or MarkovGibberishModel.bundled(), lexicon)


def family_dataset(ext: FeatureExtractor, agd: Sequence[str], pool: Sequence[str],
                   n: Optional[int], seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """``n`` family AGDs against ``n`` benign pool samples (fewer if either side is short)."""
    rng = np.random.Generator(np.random.PCG64(seed))
    n = min(n or len(agd), len(agd), len(pool))
    a = [agd[i] for i in np.sort(rng.choice(len(agd), n, replace=False))]
    b = [pool[i] for i in np.sort(rng.choice(len(pool), n, replace=False))]
    X = ext.transform(a + b)
    y = np.r_[np.ones(n, dtype=np.int64), np.zeros(n, dtype=np.int64)]
    return X, y


@dataclass
class TrainResult:
    model: DetectorModel
    reports: Dict[str, EvalReport]


def train_detector(benign: Sequence[str], agd_by_family: Dict[str, Sequence[str]], seed: int,
                   n_trees: int = 100, folds: int = 10, repeats: int = 1,
                   per_family: Optional[int] = None, gram_fraction: float = 0.5,
                   lexicon: Optional[UnigramLexicon] = None, threshold: float = 0.5,
                   evaluate: bool = True) -> TrainResult:
    """Fit the extractor and forest; cross-validate each family against benign samples.

    The final forest is trained on every AGD plus an equal number of benign
    pool samples (or the whole pool, if smaller).
    """
    if not benign:
        raise EmptyCorpus("benign corpus is empty")
    agd_by_family = {f: list(v) for f, v in agd_by_family.items() if len(v)}
    if not agd_by_family:
        raise SingleClass("no AGD samples supplied")
    ref, pool = split_benign(list(benign), seed, gram_fraction)
    if not pool:
        raise SingleClass("benign corpus too small to leave training samples")
    ext = build_extractor(ref, lexicon)
    ss = np.random.SeedSequence(seed)
    fam_seeds = dict(zip(sorted(agd_by_family), ss.spawn(len(agd_by_family))))
    forest = DGAForestClassifier(n_estimators=n_trees, threshold=threshold)
    reports = {}
    if evaluate:
        for fam in sorted(agd_by_family):
            s1, s2 = (int(x) for x in fam_seeds[fam].generate_state(2))
            X, y = family_dataset(ext, agd_by_family[fam], pool, per_family, s1)
            reports[fam] = cross_validate(X, y, folds=folds, repeats=repeats, seed=s2,
                                          estimator=forest)
    all_agd = [s for fam in sorted(agd_by_family) for s in agd_by_family[fam]]
    X, y = family_dataset(ext, all_agd, pool, None, int(ss.generate_state(1)[0]))
    forest = forest.set_params(random_state=seed).fit(X, y)
    return TrainResult(DetectorModel(ext, forest), reports)


def evaluate_model(model: DetectorModel, benign: Sequence[str],
                   agd_by_family: Dict[str, Sequence[str]]) -> Dict[str, EvalReport]:
    """Hold-out scores of a fitted model, one report per family plus ``all``."""
    ext, forest = model.extractor, model.forest
    if forest is None:
        raise SingleClass("model archive holds no classifier")
    benign_pred = forest.predict(ext.transform(benign)) if len(benign) else np.zeros(0)
    fp = int(benign_pred.sum())
    tn = len(benign_pred) - fp
    out = {}
    tot = dict(tp=0, fn=0)
    for fam in sorted(agd_by_family):
        pred = forest.predict(ext.transform(list(agd_by_family[fam])))
        tp = int(pred.sum())
        fn = len(pred) - tp
        tot["tp"] += tp
        tot["fn"] += fn
        out[fam] = _report(tp, fp, tn, fn)
    out["all"] = _report(tot["tp"], fp, tn, tot["fn"])
    return out


def _report(tp, fp, tn, fn) -> EvalReport:
    p1, r1, f1 = precision_recall_f1(tp, fp, fn)
    p0, r0, f0 = precision_recall_f1(tn, fn, fp)
    return EvalReport({"benign": p0, "agd": p1}, {"benign": r0, "agd": r1},
                      {"benign": f0, "agd": f1}, 0.0, dict(tp=tp, fp=fp, tn=tn, fn=fn), [f1])
