"""Unigram word segmentation of concatenated labels.

Costs follow the Zipf model used by wordninja: the word at 0-based rank ``r`` in a
frequency-ordered list of ``N`` words costs ``ln((r + 1) * ln N)``. A character
that starts no lexicon word is emitted on its own at a fixed out-of-vocabulary
cost, one ``ln N`` above the worst-ranked word.
"""
from __future__ import annotations

import gzip
import math
import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, List, Sequence, Tuple

_ALPHA = re.compile(r"^[a-z]+$")
_RUNS = re.compile(r"[a-z]+")

# Relative tolerance for treating two segmentation costs as equal.
COST_EPS = 1e-9


class EmptyInput(ValueError):
    pass


class UnigramLexicon:
    """Immutable frequency-ordered word list with Zipf costs."""

    def __init__(self, words: Iterable[str]):
        ordered = []
        seen = set()
        for w in words:
            w = w.strip().lower()
            if not w or w in seen:
                continue
            if not _ALPHA.match(w):
                raise ValueError(f"lexicon entry {w!r} is not lowercase alphabetic")
            seen.add(w)
            ordered.append(w)
        if not ordered:
            raise ValueError("empty lexicon")
        self.words: Tuple[str, ...] = tuple(ordered)
        n = len(ordered)
        log_n = math.log(n) if n > 1 else 1.0
        self._cost = {w: math.log((i + 1) * log_n) for i, w in enumerate(ordered)}
        self.max_word_len = max(len(w) for w in ordered)
        self.oov_cost = math.log(n * log_n) + math.log(max(n, 2))
        self._rank = {w: i for i, w in enumerate(ordered)}
        # lexicon is immutable, so memoised run splits never go stale
        self._memo = lru_cache(maxsize=65536)(lambda run: _segment_run(run, self))

    def __len__(self):
        return len(self.words)

    def __deepcopy__(self, memo):
        return self

    def __reduce__(self):
        return (UnigramLexicon, (self.words,))

    def __contains__(self, word):
        return word in self._cost

    def rank(self, word: str) -> int:
        return self._rank[word]

    def cost(self, word: str) -> float:
        """Cost of ``word`` if in the lexicon; infinity otherwise."""
        return self._cost.get(word, math.inf)

    def piece_cost(self, piece: str) -> float:
        """Cost of one emitted token: a lexicon word or a lone OOV character."""
        c = self._cost.get(piece)
        if c is not None:
            return c
        return self.oov_cost if len(piece) == 1 else math.inf

    @classmethod
    def from_file(cls, path) -> "UnigramLexicon":
        path = Path(path)
        opener = gzip.open if path.suffix == ".gz" else open
        with opener(path, "rt", encoding="utf-8") as fh:
            return cls(line for line in fh)

    @classmethod
    def bundled(cls) -> "UnigramLexicon":
        return _bundled_lexicon()


@lru_cache(maxsize=1)
def _bundled_lexicon() -> UnigramLexicon:
    return UnigramLexicon.from_file(resources.files("nxdga") / "data" / "lexicon.txt.gz")


@dataclass(frozen=True)
class Segmentation:
    """Words recovered from a label.

    ``gaps`` holds the non-letter text around the words (``len(words) + 1``
    entries) so the original label can be rebuilt exactly.
    """

    words: Tuple[str, ...]
    total_cost: float
    gaps: Tuple[str, ...] = ("",)

    def __post_init__(self):
        if len(self.gaps) != len(self.words) + 1:
            raise ValueError("gaps must have len(words) + 1 entries")

    def __len__(self):
        return len(self.words)

    def join(self) -> str:
        out = [self.gaps[0]]
        for w, g in zip(self.words, self.gaps[1:]):
            out.append(w)
            out.append(g)
        return "".join(out)


def _segment_run(run: str, lexicon: UnigramLexicon) -> Tuple[List[str], float]:
    """Optimal split of one letter run.

    Dynamic programme over suffixes: ``best[i]`` is the best split of
    ``run[i:]``, ordered by (cost, word count, split positions). Filling from
    the right makes the lexicographic comparison a comparison of the first cut.
    """
    n = len(run)
    maxlen = lexicon.max_word_len
    cost = [0.0] * (n + 1)
    count = [0] * (n + 1)
    nxt = [n] * (n + 1)
    for i in range(n - 1, -1, -1):
        best_c = math.inf
        best_k = 0
        best_j = n
        for j in range(i + 1, min(n, i + maxlen) + 1):
            pc = lexicon.piece_cost(run[i:j])
            if pc == math.inf:
                continue
            c = pc + cost[j]
            k = count[j] + 1
            if best_c == math.inf:
                best_c, best_k, best_j = c, k, j
                continue
            tol = COST_EPS * max(1.0, abs(c), abs(best_c))
            if c < best_c - tol or (abs(c - best_c) <= tol and k < best_k):
                # j ascends, so on an exact tie the earlier cut is already kept
                best_c, best_k, best_j = c, k, j
        cost[i], count[i], nxt[i] = best_c, best_k, best_j
    words = []
    i = 0
    while i < n:
        words.append(run[i:nxt[i]])
        i = nxt[i]
    return words, cost[0]


def segment(sld: str, lexicon: UnigramLexicon) -> Segmentation:
    """Split ``sld`` into words; hyphens and digits are hard, unemitted boundaries."""
    if not sld:
        raise EmptyInput("cannot segment an empty label")
    seg_run = lexicon._memo
    words: List[str] = []
    gaps: List[str] = []
    total = 0.0
    pos = 0
    for m in _RUNS.finditer(sld):
        gap = sld[pos:m.start()]
        run_words, c = seg_run(m.group())
        total += c
        for k, w in enumerate(run_words):
            gaps.append(gap if k == 0 else "")
            words.append(w)
        pos = m.end()
    gaps.append(sld[pos:])
    if not words:
        gaps = [sld]
    return Segmentation(tuple(words), total, tuple(gaps))


def words_longer_than(seg: Segmentation | Sequence[str], min_len: int) -> List[str]:
    if min_len < 0:
        raise ValueError("min_len must be >= 0")
    words = seg.words if isinstance(seg, Segmentation) else seg
    return [w for w in words if len(w) > min_len]
