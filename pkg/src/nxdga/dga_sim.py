"""Seeded generators for wordlist, counter, and permutation DGA templates.

All randomness comes from numpy's PCG64 (64-bit state-transition, 128-bit
state) seeded with ``DgaTemplate.seed``. Generators reproduce the *shape* of
each family's names; they are not seed-compatible with real malware.
"""
from __future__ import annotations

import csv
import gzip
import io
import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .segment import UnigramLexicon

KINDS = (
    "two_word",
    "alternating_until_len",
    "document_until_len",
    "two_dict_optional_sep",
    "fixed_prefix_counter",
    "permutation",
)

CSV_COLUMNS = ("qname", "label", "family", "seed", "ground_truth_words")

# Stand-in for nymaim2's 74 TLDs; every entry is in the bundled suffix list.
NYMAIM2_TLDS = (
    "com", "net", "org", "info", "biz", "ad", "ae", "ag", "am", "at", "be", "bz",
    "ca", "cc", "ch", "cl", "cn", "co", "cx", "cz", "de", "dk", "ec", "es", "eu",
    "fi", "fm", "fr", "gd", "gg", "gl", "gs", "gy", "hk", "hn", "ht", "ie", "im",
    "in", "io", "is", "it", "je", "jp", "kg", "ki", "kr", "la", "lc", "li", "lt",
    "lu", "lv", "me", "mn", "ms", "mu", "mx", "nl", "nu", "pl", "pw", "ru", "sc",
    "se", "sh", "si", "so", "tc", "tl", "tv", "tw", "us", "vc",
)

WORDLIST_FAMILIES = ("suppobox", "pizd", "matsnu", "nymaim2", "rovnix", "gozi")

# (name, size) slices taken in order from the segmenter lexicon's word pool
_SLICES = (
    ("suppobox", 384),
    ("pizd", 384),
    ("matsnu_verbs", 878),
    ("matsnu_nouns", 1008),
    ("nymaim2_first", 2450),
    ("nymaim2_second", 4387),
)
_POOL_SKIP = 100
_POOL_LEN = (4, 9)
_WORD = re.compile(r"[A-Za-z0-9]+")


class TemplateError(ValueError):
    pass


class UnsatisfiableLength(TemplateError):
    pass


class CountExceedsPopulation(ValueError):
    pass


@dataclass(frozen=True)
class DgaTemplate:
    kind: str
    dictionaries: Tuple[Tuple[str, ...], ...]
    length_bounds: Tuple[Optional[int], Optional[int]] = (None, None)
    separators: Tuple[str, ...] = ("",)
    tlds: Tuple[str, ...] = ("com",)
    seed: int = 0
    family: str = ""

    def __post_init__(self):
        object.__setattr__(self, "dictionaries", tuple(tuple(d) for d in self.dictionaries))
        object.__setattr__(self, "separators", tuple(self.separators) or ("",))
        object.__setattr__(self, "tlds", tuple(self.tlds))
        object.__setattr__(self, "length_bounds", tuple(self.length_bounds))
        if self.kind not in KINDS:
            raise TemplateError(f"unknown template kind {self.kind!r}; expected one of {KINDS}")
        if not self.tlds:
            raise TemplateError("at least one TLD is required")
        need = {"two_word": 2, "two_dict_optional_sep": 2, "alternating_until_len": 2,
                "document_until_len": 1, "fixed_prefix_counter": 1, "permutation": 1}[self.kind]
        if len(self.dictionaries) < need or any(not d for d in self.dictionaries[:need]):
            raise TemplateError(f"{self.kind} needs {need} non-empty dictionaries")
        lo, hi = self.length_bounds
        if lo is not None and hi is not None and hi <= lo:
            raise UnsatisfiableLength(f"empty length range ({lo}, {hi}]")
        if self.kind in ("alternating_until_len", "document_until_len"):
            if lo is None:
                raise TemplateError(f"{self.kind} needs a lower length bound")
            if hi is not None and min(len(w) for d in self.dictionaries for w in d) > hi:
                raise UnsatisfiableLength("every word is longer than the upper bound")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "dictionaries": [list(d) for d in self.dictionaries],
                "length_bounds": list(self.length_bounds), "separators": list(self.separators),
                "tlds": list(self.tlds), "seed": self.seed, "family": self.family}


@dataclass(frozen=True)
class CorpusRecord:
    qname: str
    label: str
    family: str
    seed: int
    words: Tuple[str, ...] = ()

    @property
    def sld(self) -> str:
        return self.qname.split(".", 1)[0]


@dataclass
class GeneratedCorpus:
    records: List[CorpusRecord] = field(default_factory=list)
    unique: bool = False

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def qnames(self) -> List[str]:
        return [r.qname for r in self.records]

    @property
    def slds(self) -> List[str]:
        return [r.sld for r in self.records]


def _pick(rng, seq):
    return seq[int(rng.integers(len(seq)))]


def _within(length, bounds):
    lo, hi = bounds
    return (lo is None or length > lo) and (hi is None or length <= hi)


def _distinct_permutations(s: str) -> int:
    n = math.factorial(len(s))
    for c in Counter(s).values():
        n //= math.factorial(c)
    return n


MAX_PERMUTATION_LEN = 9


def adjacent_transposition_orderings(s: str) -> Tuple[str, ...]:
    """Distinct orderings of ``s`` in Steinhaus-Johnson-Trotter order.

    Consecutive entries of the underlying sequence differ by one adjacent swap;
    orderings already produced (possible with repeated letters) are skipped.
    """
    n = len(s)
    if n > MAX_PERMUTATION_LEN:
        raise TemplateError(f"permutation base longer than {MAX_PERMUTATION_LEN} characters")
    perm = list(range(n))
    direction = [-1] * n
    seen = {s}
    out = [s]
    while True:
        # largest element whose neighbour in its direction is smaller
        mobile = -1
        for i in range(n):
            j = i + direction[perm[i]]
            if 0 <= j < n and perm[j] < perm[i] and (mobile < 0 or perm[i] > perm[mobile]):
                mobile = i
        if mobile < 0:
            return tuple(out)
        v = perm[mobile]
        j = mobile + direction[v]
        perm[mobile], perm[j] = perm[j], perm[mobile]
        for k in range(v + 1, n):
            direction[k] = -direction[k]
        word = "".join(s[k] for k in perm)
        if word not in seen:
            seen.add(word)
            out.append(word)


class _Generator:
    max_retries = 1000

    def __init__(self, template: DgaTemplate):
        self.t = template
        self.rng = np.random.Generator(np.random.PCG64(template.seed))
        self.i = 0
        # alternating kinds pick their starting list once per seed
        self.start = int(self.rng.integers(2)) if template.kind == "alternating_until_len" else 0
        if template.kind == "permutation":
            self.orderings = adjacent_transposition_orderings(template.dictionaries[0][0])
            self.i = int(self.rng.integers(len(self.orderings)))

    def __call__(self) -> Tuple[str, Tuple[str, ...], str]:
        t = self.t
        kind = t.kind
        if kind == "fixed_prefix_counter":
            stem = t.dictionaries[0][0]
            counter, k = divmod(self.i, len(t.tlds))
            self.i += 1
            return f"{stem}{counter}", (stem,), t.tlds[k]
        for _ in range(self.max_retries):
            sld, words = getattr(self, "_" + kind)()
            if _within(len(sld), t.length_bounds):
                return sld, words, _pick(self.rng, t.tlds)
        raise UnsatisfiableLength(
            f"no name within bounds {t.length_bounds} after {self.max_retries} draws")

    def _two_word(self):
        d = self.t.dictionaries
        a, b = _pick(self.rng, d[0]), _pick(self.rng, d[1])
        sep = _pick(self.rng, self.t.separators) if len(self.t.separators) > 1 else self.t.separators[0]
        return a + sep + b, (a, b)

    _two_dict_optional_sep = _two_word

    def _alternating_until_len(self):
        d = self.t.dictionaries
        lo = self.t.length_bounds[0]
        words = []
        length = 0
        k = self.start
        while length <= lo:
            w = _pick(self.rng, d[k % 2])
            words.append(w)
            length += len(w)
            k += 1
        return "".join(words), tuple(words)

    def _document_until_len(self):
        d = self.t.dictionaries[0]
        lo = self.t.length_bounds[0]
        words = []
        length = 0
        while length <= lo:
            w = _pick(self.rng, d)
            words.append(w)
            length += len(w)
        return "".join(words), tuple(words)

    def _permutation(self):
        # walk the ordering cycle from a seeded start; wraps after every ordering
        perm = self.orderings[self.i % len(self.orderings)]
        self.i += 1
        suffix = self.t.dictionaries[1][0] if len(self.t.dictionaries) > 1 else ""
        return perm + suffix, (perm, suffix) if suffix else (perm,)


def generate(template: DgaTemplate, count: int, unique: bool = False) -> GeneratedCorpus:
    """Generate ``count`` names from ``template``; ``unique`` drops repeated qnames."""
    if count < 1:
        raise ValueError("count must be >= 1")
    if unique and template.kind == "permutation":
        space = _distinct_permutations(template.dictionaries[0][0])
        if count > space:
            raise CountExceedsPopulation(f"only {space} distinct permutations exist")
    gen = _Generator(template)
    family = template.family or template.kind
    records: List[CorpusRecord] = []
    seen = set()
    budget = 200 * count + 1000
    while len(records) < count:
        budget -= 1
        if budget < 0:
            raise CountExceedsPopulation(
                f"could not draw {count} unique names (got {len(records)})")
        sld, words, tld = gen()
        qname = f"{sld}.{tld}"
        if unique:
            if qname in seen:
                continue
            seen.add(qname)
        records.append(CorpusRecord(qname, "agd", family, template.seed, words))
    return GeneratedCorpus(records, unique)


def _is_idn(name: str) -> bool:
    return any(label.startswith("xn--") for label in name.split("."))


def sample_benign(benign_list: Iterable[str], count: int, seed: int) -> GeneratedCorpus:
    """Uniform sample without replacement; IDN entries and repeats are skipped."""
    pool = []
    seen = set()
    for name in benign_list:
        name = name.strip().lower().rstrip(".")
        if not name or name.startswith("#") or _is_idn(name) or name in seen:
            continue
        seen.add(name)
        pool.append(name)
    if not pool:
        raise ValueError("benign list is empty")
    if count > len(pool):
        raise CountExceedsPopulation(f"asked for {count} of {len(pool)} names")
    rng = np.random.Generator(np.random.PCG64(seed))
    idx = rng.permutation(len(pool))[:count]
    return GeneratedCorpus([CorpusRecord(pool[i], "benign", "benign", seed) for i in idx], True)


# -- bundled resources ---------------------------------------------------------

def _data(name):
    return resources.files("nxdga") / "data" / name


@lru_cache(maxsize=1)
def bundled_benign() -> Tuple[str, ...]:
    """Popular registered domains, one per distinct SLD, in popularity order."""
    with gzip.open(io.BytesIO(_data("benign_domains.txt.gz").read_bytes()), "rt") as fh:
        return tuple(line.strip() for line in fh if line.strip())


def document_words(text: str, min_len: int = 1, letters_only: bool = False) -> Tuple[str, ...]:
    """Lowercase word tokens of a text in document order, repeats kept.

    Drawing uniformly from the token stream weights words by their frequency
    in the document.
    """
    out = []
    for w in _WORD.findall(text):
        w = w.lower()
        if len(w) < min_len or (letters_only and not w.isalpha()):
            continue
        out.append(w)
    return tuple(out)


@lru_cache(maxsize=1)
def bundled_dictionaries() -> Dict[str, Tuple[str, ...]]:
    """Micro-dictionaries cut from the segmenter lexicon plus two document lists.

    Lexicon slices skip the 100 most frequent words and keep 4-9 letter words,
    assigned to families in rank order.
    """
    lex = UnigramLexicon.bundled()
    lo, hi = _POOL_LEN
    pool = [w for w in lex.words[_POOL_SKIP:] if lo <= len(w) <= hi]
    out = {}
    pos = 0
    for name, size in _SLICES:
        out[name] = tuple(pool[pos:pos + size])
        pos += size
    out["rovnix"] = document_words(_data("declaration.txt").read_text(encoding="utf-8"))
    out["gozi"] = document_words(_data("lgpl-2.1.txt").read_text(encoding="utf-8"),
                                 min_len=3, letters_only=True)
    return out


def family_template(family: str, seed: int = 0) -> DgaTemplate:
    """Template reproducing one family's generation scheme with bundled dictionaries."""
    d = bundled_dictionaries()
    presets = {
        "suppobox": dict(kind="two_word", dictionaries=(d["suppobox"], d["suppobox"]),
                         tlds=("net",)),
        "pizd": dict(kind="two_word", dictionaries=(d["pizd"], d["pizd"]), tlds=("net",)),
        "matsnu": dict(kind="alternating_until_len",
                       dictionaries=(d["matsnu_verbs"], d["matsnu_nouns"]),
                       length_bounds=(24, None), tlds=("com",)),
        "nymaim2": dict(kind="two_dict_optional_sep",
                        dictionaries=(d["nymaim2_first"], d["nymaim2_second"]),
                        separators=("", "-"), tlds=NYMAIM2_TLDS),
        "rovnix": dict(kind="document_until_len", dictionaries=(d["rovnix"],),
                       length_bounds=(20, None), tlds=("com",)),
        "gozi": dict(kind="document_until_len", dictionaries=(d["gozi"],),
                     length_bounds=(11, 23), tlds=("com",)),
        "beebone": dict(kind="fixed_prefix_counter", dictionaries=(("backdates",),),
                        tlds=("com", "org", "net", "biz", "info")),
        "volatilecedar": dict(kind="permutation", dictionaries=(("dotnet",), ("explorer",)),
                              tlds=("info",)),
    }
    if family not in presets:
        raise TemplateError(f"no preset for family {family!r}")
    return DgaTemplate(seed=seed, family=family, **presets[family])


def template_from_dict(spec: dict) -> DgaTemplate:
    """Build a template from a JSON-style mapping.

    ``{"preset": "<family>"}`` starts from a bundled preset; any other key
    overrides it. Dictionary entries may be word lists or ``"@<name>"``
    references to :func:`bundled_dictionaries`.
    """
    spec = dict(spec)
    base = {}
    if "preset" in spec:
        base = family_template(spec.pop("preset"), int(spec.get("seed", 0))).to_dict()
    base.update(spec)
    dicts = []
    named = bundled_dictionaries()
    for d in base.get("dictionaries", []):
        if isinstance(d, str):
            if not d.startswith("@") or d[1:] not in named:
                raise TemplateError(f"unknown dictionary reference {d!r}")
            d = named[d[1:]]
        dicts.append(tuple(d))
    try:
        return DgaTemplate(
            kind=base["kind"],
            dictionaries=tuple(dicts),
            length_bounds=tuple(base.get("length_bounds", (None, None))),
            separators=tuple(base.get("separators", ("",))),
            tlds=tuple(base.get("tlds", ("com",))),
            seed=int(base.get("seed", 0)),
            family=str(base.get("family", "")),
        )
    except KeyError as exc:
        raise TemplateError(f"template is missing {exc.args[0]!r}") from None


def load_template(path) -> DgaTemplate:
    try:
        spec = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise TemplateError(f"{path}: {exc}") from None
    return template_from_dict(spec)


# -- CSV -----------------------------------------------------------------------

def write_corpus_csv(corpus: GeneratedCorpus, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in corpus.records:
        w.writerow((r.qname, r.label, r.family, r.seed, "|".join(r.words)))


def read_corpus_csv(fh) -> GeneratedCorpus:
    reader = csv.DictReader(fh)
    missing = set(CSV_COLUMNS) - set(reader.fieldnames or ())
    if missing:
        raise ValueError(f"corpus CSV lacks columns {sorted(missing)}")
    records = []
    for row in reader:
        words = tuple(w for w in row["ground_truth_words"].split("|") if w)
        records.append(CorpusRecord(row["qname"], row["label"], row["family"],
                                    int(row["seed"] or 0), words))
    return GeneratedCorpus(records, len({r.qname for r in records}) == len(records))


def load_corpus(path) -> GeneratedCorpus:
    with open(path, newline="", encoding="utf-8") as fh:
        return read_corpus_csv(fh)


def read_name_list(path) -> List[str]:
    """One name per line (``.gz`` accepted); blank lines and ``#`` comments skipped."""
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rt", encoding="utf-8") as fh:
        return [s for s in (line.split("#", 1)[0].strip() for line in fh) if s]
