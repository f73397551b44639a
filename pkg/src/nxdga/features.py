"""Lexical and statistical features of a second-level label.

The feature vector has 21 numeric columns, in this fixed order:

======================  ===================================================
l_hex                   1 if every character is in [0-9a-f]
l_len, l_dig            label length, digit count
l_con_max               longest run of consonants ('y' is a consonant)
l_w2, l_w3              words longer than 2 / 3 characters
r_con_vow               consonants / vowels (denominator floored at 1)
r_dom_3g .. r_dom_5g    share of the label's n-grams seen in benign names
m2_dom_ws, m2_dom_wds   mean bigram log-probability of the spaced word strings
r_ws_len .. r_w3_len    character length of the word strings over l_len
e_dom .. e_dom_w3       Shannon entropy (bits) of the label and word strings
======================  ===================================================

"WS" strings come from segmenting the raw label, "WDS" strings from segmenting
it with digits removed. ``W2``/``W3`` strings concatenate the WS words longer
than 2 / 3 characters.
"""
from __future__ import annotations

import hashlib
import math
import re
from collections import Counter
from dataclasses import astuple, dataclass, fields
from functools import lru_cache
from importlib import resources
from typing import Dict, FrozenSet, Iterable, Optional, Tuple

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .segment import Segmentation, UnigramLexicon, segment

FEATURE_VERSION = 1
GRAM_SIZES = (3, 4, 5)
VOWELS = frozenset("aeiou")
CONSONANTS = frozenset("bcdfghjklmnpqrstvwxyz")
HEX = frozenset("0123456789abcdef")
ALPHABET = "abcdefghijklmnopqrstuvwxyz "
_CHAR_INDEX = {c: i for i, c in enumerate(ALPHABET)}
_DIGITS = re.compile(r"[0-9]")
_NON_ALPHA = re.compile(r"[^a-z]+")


class EmptyCorpus(ValueError):
    pass


@dataclass(frozen=True)
class FeatureVector:
    l_hex: int
    l_len: int
    l_dig: int
    l_con_max: int
    l_w2: int
    l_w3: int
    r_con_vow: float
    r_dom_3g: float
    r_dom_4g: float
    r_dom_5g: float
    m2_dom_ws: float
    m2_dom_wds: float
    r_ws_len: float
    r_wds_len: float
    r_w2_len: float
    r_w3_len: float
    e_dom: float
    e_dom_ws: float
    e_dom_wds: float
    e_dom_w2: float
    e_dom_w3: float

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=np.float64)


FEATURE_NAMES: Tuple[str, ...] = tuple(f.name for f in fields(FeatureVector))


def feature_order_hash() -> str:
    text = f"v{FEATURE_VERSION}:" + ",".join(FEATURE_NAMES)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def ngrams(s: str, n: int) -> FrozenSet[str]:
    return frozenset(s[i:i + n] for i in range(len(s) - n + 1))


def entropy(s: str) -> float:
    """Shannon entropy in bits of the character distribution of ``s``."""
    if not s:
        return 0.0
    n = len(s)
    h = 0.0
    for c in Counter(s).values():
        p = c / n
        h -= p * math.log2(p)
    return h if h > 0.0 else 0.0


def max_consonant_run(s: str) -> int:
    best = run = 0
    for ch in s:
        if ch in CONSONANTS:
            run += 1
            if run > best:
                best = run
        else:
            run = 0
    return best


@dataclass(frozen=True)
class SequenceBundle:
    dom: str
    dom_d: str
    grams: Dict[int, FrozenSet[str]]
    dom_ws: str
    dom_wds: str
    dom_w2: str
    dom_w3: str
    words_ws: Tuple[str, ...]
    words_wds: Tuple[str, ...]


def derive_sequences(sld: str, seg_ws: Segmentation, seg_wds: Segmentation) -> SequenceBundle:
    return SequenceBundle(
        dom=sld,
        dom_d=_DIGITS.sub("", sld),
        grams={n: ngrams(sld, n) for n in GRAM_SIZES},
        dom_ws=" ".join(seg_ws.words),
        dom_wds=" ".join(seg_wds.words),
        dom_w2="".join(w for w in seg_ws.words if len(w) > 2),
        dom_w3="".join(w for w in seg_ws.words if len(w) > 3),
        words_ws=seg_ws.words,
        words_wds=seg_wds.words,
    )


def segment_both(sld: str, lexicon: UnigramLexicon) -> Tuple[Segmentation, Segmentation]:
    """Segmentations of the raw label and of the label with digits removed."""
    seg_ws = segment(sld, lexicon)
    stripped = _DIGITS.sub("", sld)
    if stripped == sld:
        return seg_ws, seg_ws
    if not stripped:
        return seg_ws, Segmentation((), 0.0, ("",))
    return seg_ws, segment(stripped, lexicon)


class BenignGramSet:
    """Character 3/4/5-grams observed in a benign corpus."""

    def __init__(self, grams_by_n: Dict[int, Iterable[str]]):
        self.grams_by_n: Dict[int, FrozenSet[str]] = {
            n: frozenset(g.lower() for g in grams_by_n.get(n, ())) for n in GRAM_SIZES}

    def ratio(self, grams: FrozenSet[str], n: int) -> float:
        if not grams:
            return 0.0
        known = self.grams_by_n[n]
        return sum(1 for g in grams if g in known) / len(grams)

    def __eq__(self, other):
        return isinstance(other, BenignGramSet) and self.grams_by_n == other.grams_by_n


def build_benign_grams(corpus: Iterable[str]) -> BenignGramSet:
    acc = {n: set() for n in GRAM_SIZES}
    seen = False
    for sld in corpus:
        sld = sld.strip().lower()
        if not sld:
            continue
        seen = True
        for n in GRAM_SIZES:
            acc[n].update(sld[i:i + n] for i in range(len(sld) - n + 1))
    if not seen:
        raise EmptyCorpus("benign corpus is empty")
    return BenignGramSet(acc)


def _normalize_text(line: str) -> str:
    return " ".join(_NON_ALPHA.sub(" ", line.lower()).split())


class MarkovGibberishModel:
    """Character bigram model over ``[a-z ]``; scores are mean log transition probabilities."""

    def __init__(self, log_prob: np.ndarray, threshold: float):
        log_prob = np.asarray(log_prob, dtype=np.float64)
        k = len(ALPHABET)
        if log_prob.shape != (k, k):
            raise ValueError(f"log_prob must be {k}x{k}")
        self.log_prob = log_prob
        self.threshold = float(threshold)
        self._rows = log_prob.tolist()

    def __deepcopy__(self, memo):
        return self

    def score(self, text: str) -> float:
        """Average transition log-probability; 0.0 when there is no transition."""
        idx = [_CHAR_INDEX[c] for c in text if c in _CHAR_INDEX]
        if len(idx) < 2:
            return 0.0
        rows = self._rows
        total = 0.0
        for a, b in zip(idx, idx[1:]):
            total += rows[a][b]
        return total / (len(idx) - 1)

    def is_gibberish(self, text: str) -> bool:
        return self.score(text) <= self.threshold

    @classmethod
    def bundled(cls) -> "MarkovGibberishModel":
        return _bundled_markov()


def train_markov(text_corpus: Iterable[str], holdout_every: int = 10,
                 n_random: int = 500, random_len: int = 20,
                 seed: int = 0) -> MarkovGibberishModel:
    """Fit an add-one smoothed bigram model.

    Every ``holdout_every``-th non-empty line is held out. The threshold is the
    midpoint between the mean held-out score and the mean score of uniformly
    random strings over the same alphabet.
    """
    lines = [s for s in (_normalize_text(line) for line in text_corpus) if s]
    if not lines:
        raise EmptyCorpus("text corpus is empty")
    if len(lines) >= 2 * holdout_every:
        held = lines[holdout_every - 1::holdout_every]
        train = [s for i, s in enumerate(lines) if (i + 1) % holdout_every]
    else:
        held = train = lines
    k = len(ALPHABET)
    counts = np.ones((k, k), dtype=np.float64)
    for s in train:
        idx = np.fromiter((_CHAR_INDEX[c] for c in s), dtype=np.intp, count=len(s))
        if len(idx) > 1:
            np.add.at(counts, (idx[:-1], idx[1:]), 1.0)
    log_prob = np.log(counts / counts.sum(axis=1, keepdims=True))
    model = MarkovGibberishModel(log_prob, 0.0)
    rng = np.random.Generator(np.random.PCG64(seed))
    rand = ["".join(ALPHABET[i] for i in rng.integers(0, k, size=random_len))
            for _ in range(n_random)]
    good = np.mean([model.score(s) for s in held])
    bad = np.mean([model.score(s) for s in rand])
    model.threshold = float((good + bad) / 2.0)
    return model


@lru_cache(maxsize=1)
def _bundled_markov() -> MarkovGibberishModel:
    text = (resources.files("nxdga") / "data" / "english.txt").read_text(encoding="utf-8")
    return train_markov(text.splitlines())


def _static_row(sld: str, lexicon: UnigramLexicon, markov: MarkovGibberishModel):
    """Every feature except the benign-gram ratios, plus the label's gram sets."""
    seg_ws, seg_wds = segment_both(sld, lexicon)
    seq = derive_sequences(sld, seg_ws, seg_wds)
    n = len(sld)
    digits = sum(ch.isdigit() for ch in sld)
    cons = sum(ch in CONSONANTS for ch in sld)
    vows = sum(ch in VOWELS for ch in sld)
    ws_len = len(seq.dom_ws) - max(len(seq.words_ws) - 1, 0)
    wds_len = len(seq.dom_wds) - max(len(seq.words_wds) - 1, 0)
    row = [
        1.0 if all(ch in HEX for ch in sld) else 0.0,
        float(n),
        float(digits),
        float(max_consonant_run(sld)),
        float(sum(len(w) > 2 for w in seq.words_ws)),
        float(sum(len(w) > 3 for w in seq.words_ws)),
        cons / vows if vows else float(cons),
        0.0, 0.0, 0.0,
        markov.score(seq.dom_ws),
        markov.score(seq.dom_wds),
        ws_len / n,
        wds_len / n,
        len(seq.dom_w2) / n,
        len(seq.dom_w3) / n,
        entropy(sld),
        entropy(seq.dom_ws),
        entropy(seq.dom_wds),
        entropy(seq.dom_w2),
        entropy(seq.dom_w3),
    ]
    return row, seq.grams, seg_ws


def extract(sld: str, grams: BenignGramSet, markov: MarkovGibberishModel,
            lexicon: UnigramLexicon) -> FeatureVector:
    if not sld:
        raise ValueError("empty label")
    row, label_grams, _ = _static_row(sld, lexicon, markov)
    for k, n in enumerate(GRAM_SIZES):
        row[7 + k] = grams.ratio(label_grams[n], n)
    for i in (0, 1, 2, 3, 4, 5):
        row[i] = int(row[i])
    return FeatureVector(*row)


class FeatureExtractor(TransformerMixin, BaseEstimator):
    """Map second-level labels to the 21-column feature matrix.

    ``fit`` harvests the benign n-gram sets from its input (rows with
    ``y == 0`` only, when labels are given). The Markov model defaults to the
    one trained on the bundled English text.

    Parameters
    ----------
    lexicon : UnigramLexicon, optional
        Segmentation lexicon; the bundled one when None.
    markov : MarkovGibberishModel, optional
        Bigram model; the bundled one when None.
    cache_size : int
        Number of labels whose gram-independent features are memoised.
    """

    def __init__(self, lexicon: Optional[UnigramLexicon] = None,
                 markov: Optional[MarkovGibberishModel] = None, cache_size: int = 200_000):
        self.lexicon = lexicon
        self.markov = markov
        self.cache_size = cache_size

    def _setup(self):
        self.lexicon_ = self.lexicon if self.lexicon is not None else UnigramLexicon.bundled()
        self.markov_ = self.markov if self.markov is not None else MarkovGibberishModel.bundled()
        lex, mk = self.lexicon_, self.markov_
        self._static = lru_cache(maxsize=self.cache_size)(lambda s: _static_row(s, lex, mk))

    def fit(self, X, y=None):
        X = _as_labels(X)
        if y is not None:
            y = np.asarray(y)
            if len(y) != len(X):
                raise ValueError("X and y have different lengths")
            X = [s for s, lab in zip(X, y) if lab == 0]
        self.grams_ = build_benign_grams(X)
        self._setup()
        self.n_features_out_ = len(FEATURE_NAMES)
        return self

    @classmethod
    def from_parts(cls, grams: BenignGramSet, markov: MarkovGibberishModel,
                   lexicon: Optional[UnigramLexicon] = None) -> "FeatureExtractor":
        """Assemble a fitted extractor from persisted components."""
        fx = cls(lexicon=lexicon, markov=markov)
        fx.grams_ = grams
        fx._setup()
        fx.n_features_out_ = len(FEATURE_NAMES)
        return fx

    def __getstate__(self):
        state = self.__dict__.copy()
        state.pop("_static", None)
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)
        if "grams_" in state:
            self._setup()

    def transform_one(self, sld: str) -> Tuple[np.ndarray, Segmentation]:
        """Feature row and raw-label segmentation for a single label."""
        check_is_fitted(self, "grams_")
        row, label_grams, seg = self._static(sld)
        row = list(row)
        for k, n in enumerate(GRAM_SIZES):
            row[7 + k] = self.grams_.ratio(label_grams[n], n)
        return np.array(row, dtype=np.float64), seg

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "grams_")
        X = _as_labels(X)
        out = np.empty((len(X), len(FEATURE_NAMES)), dtype=np.float64)
        ratio = self.grams_.ratio
        for i, sld in enumerate(X):
            if not sld:
                raise ValueError("empty label")
            row, label_grams, _ = self._static(sld)
            out[i] = row
            for k, n in enumerate(GRAM_SIZES):
                out[i, 7 + k] = ratio(label_grams[n], n)
        return out

    def get_feature_names_out(self, input_features=None):
        return np.asarray(FEATURE_NAMES, dtype=object)


def _as_labels(X):
    if isinstance(X, str):
        raise TypeError("expected an iterable of labels, got a single string")
    return [str(s).strip().lower() for s in X]
