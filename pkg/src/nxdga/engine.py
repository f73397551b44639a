"""Per-host detection over a stream of NXDomain records.

Three filters run side by side on every record of a host:

* classifier: the forest's AGD score for the SLD;
* word: per-word counters, alert when one word has been seen ``t`` times;
* pattern: structural criteria over the last ``window_size`` records, alert
  after ``T'`` records whose window satisfied at least one criterion.

All state expires ``epoch_T`` seconds after it was last touched, and the clock
is the records' own timestamps, so a replay always produces the same alerts.
"""
from __future__ import annotations

import json
from collections import OrderedDict, deque
from dataclasses import asdict, dataclass, field, fields
from typing import Deque, Dict, Iterable, List, Optional, Sequence, Tuple

from .domain import DomainRecord
from .segment import Segmentation, UnigramLexicon, segment, words_longer_than

FILTERS = ("classifier", "word", "pattern")
CRITERIA = ("C1", "C2", "C3", "C4", "C5")


class ConfigError(ValueError):
    pass


class WindowNotFull(ValueError):
    pass


@dataclass(frozen=True)
class EngineConfig:
    word_strike_threshold: int = 3
    pattern_strike_threshold: int = 5
    epoch_T: int = 86_400
    min_word_len: int = 3
    window_size: int = 5
    long_domain_len: int = 10
    classifier_enabled: bool = True
    classifier_score_threshold: float = 0.5
    classifier_consecutive: int = 1
    escalation_k: int = 2
    whitelist: Optional[str] = None
    suffix_fallback: bool = False
    max_malformed_fraction: float = 0.01

    def __post_init__(self):
        if self.word_strike_threshold < 2:
            raise ConfigError("word_strike_threshold must be >= 2")
        if self.pattern_strike_threshold < 1:
            raise ConfigError("pattern_strike_threshold must be >= 1")
        if self.epoch_T <= 0:
            raise ConfigError("epoch_T must be > 0")
        if self.window_size < 2:
            raise ConfigError("window_size must be >= 2")
        if self.min_word_len < 0 or self.long_domain_len < 0:
            raise ConfigError("length settings must be >= 0")
        if not 0.0 <= self.classifier_score_threshold <= 1.0:
            raise ConfigError("classifier_score_threshold must lie in [0, 1]")
        if self.classifier_consecutive < 1:
            raise ConfigError("classifier_consecutive must be >= 1")
        if not 1 <= self.escalation_k <= len(FILTERS):
            raise ConfigError("escalation_k must be between 1 and 3")
        if not 0.0 <= self.max_malformed_fraction <= 1.0:
            raise ConfigError("max_malformed_fraction must lie in [0, 1]")

    def replace(self, **changes) -> "EngineConfig":
        return EngineConfig(**{**asdict(self), **changes})

    @classmethod
    def from_mapping(cls, values: Dict[str, str]) -> "EngineConfig":
        """Build from string values, coercing each to the field's type."""
        types = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            if key not in types:
                raise ConfigError(f"unknown config key {key!r}")
            kind = types[key]
            raw = raw.strip()
            try:
                if kind == "bool":
                    low = raw.lower()
                    if low not in ("1", "0", "true", "false", "yes", "no", "on", "off"):
                        raise ValueError(raw)
                    kwargs[key] = low in ("1", "true", "yes", "on")
                elif kind == "int":
                    kwargs[key] = int(raw)
                elif kind == "float":
                    kwargs[key] = float(raw)
                else:
                    kwargs[key] = raw or None
            except ValueError:
                raise ConfigError(f"bad value for {key}: {raw!r}") from None
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path) -> "EngineConfig":
        values = {}
        with open(path, encoding="utf-8") as fh:
            for n, line in enumerate(fh, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{n}: expected key=value")
                key, val = line.split("=", 1)
                values[key.strip()] = val
        return cls.from_mapping(values)

    def to_text(self) -> str:
        out = []
        for k, v in asdict(self).items():
            if v is None:
                v = ""
            elif isinstance(v, bool):
                v = "true" if v else "false"
            out.append(f"{k} = {v}")
        return "\n".join(out) + "\n"


@dataclass
class HostState:
    host_id: str
    window_size: int = 5
    # word -> [count, last_seen], kept in last_seen order so expiry pops from the front
    word_buckets: "OrderedDict[str, List[int]]" = field(default_factory=OrderedDict)
    pattern_counter: List[int] = field(default_factory=lambda: [0, 0])
    classifier_streak: List[int] = field(default_factory=lambda: [0, 0])
    recent_window: Deque[Tuple[DomainRecord, Segmentation]] = None
    alerts_raised: Dict[str, int] = field(default_factory=dict)  # filter -> timestamp
    clock: Optional[int] = None
    seen: int = 0

    def __post_init__(self):
        if self.recent_window is None:
            self.recent_window = deque(maxlen=self.window_size)

    def is_empty(self) -> bool:
        return not (self.word_buckets or self.recent_window or self.alerts_raised
                    or self.pattern_counter[0] or self.classifier_streak[0])


@dataclass(frozen=True)
class Alert:
    host_id: str
    filter: str
    evidence: Tuple[str, ...]
    timestamp: int
    domains_seen_count: int
    escalated: bool = False

    def __post_init__(self):
        if not self.evidence:
            raise ValueError("alert evidence must be non-empty")
        if self.filter not in FILTERS:
            raise ValueError(f"unknown filter {self.filter!r}")

    def to_json(self) -> str:
        return json.dumps({"host": self.host_id, "filter": self.filter,
                           "evidence": list(self.evidence), "timestamp": self.timestamp,
                           "count": self.domains_seen_count, "escalated": self.escalated},
                          separators=(",", ":"))


def prune(state: HostState, now: int, epoch_T: int) -> HostState:
    """Drop everything last touched before ``now - epoch_T``.

    A host whose state empties completely also restarts its ``seen`` count, so
    an expired host is indistinguishable from one never observed.
    """
    cutoff = now - epoch_T
    buckets = state.word_buckets
    while buckets and next(iter(buckets.values()))[1] < cutoff:
        buckets.popitem(last=False)
    if state.pattern_counter[0] and state.pattern_counter[1] < cutoff:
        state.pattern_counter = [0, 0]
    if state.classifier_streak[0] and state.classifier_streak[1] < cutoff:
        state.classifier_streak = [0, 0]
    while state.recent_window and state.recent_window[0][0].timestamp < cutoff:
        state.recent_window.popleft()
    state.alerts_raised = {f: ts for f, ts in state.alerts_raised.items() if ts >= cutoff}
    if state.is_empty():
        state.seen = 0
    return state


def check_pattern(window: Sequence[Tuple[DomainRecord, Segmentation]], M: int = 10,
                  window_size: int = 5) -> List[str]:
    """Criteria satisfied by every record of a full window.

    C1 all SLDs longer than ``M``; C2 equal word counts; C3 more than two words
    each; C4 more than two short (< 4 letters) words each; C5 one shared SLD
    under pairwise distinct TLDs.
    """
    if len(window) != window_size:
        raise WindowNotFull(f"window holds {len(window)} of {window_size} records")
    recs = [r for r, _ in window]
    counts = [len(s.words) for _, s in window]
    hits = []
    if all(len(r.sld) > M for r in recs):
        hits.append("C1")
    if len(set(counts)) == 1:
        hits.append("C2")
    if all(c > 2 for c in counts):
        hits.append("C3")
    if all(sum(1 for w in s.words if len(w) < 4) > 2 for _, s in window):
        hits.append("C4")
    if len({r.sld for r in recs}) == 1 and len({r.tld for r in recs}) == len(recs):
        hits.append("C5")
    return hits


def _raise(state: HostState, cfg: EngineConfig, filt: str, evidence, ts: int,
           out: List[Alert]):
    if filt in state.alerts_raised:
        return
    state.alerts_raised[filt] = ts
    out.append(Alert(state.host_id, filt, tuple(evidence), ts, state.seen,
                     escalated=len(state.alerts_raised) >= cfg.escalation_k))


def observe(state: HostState, rec: DomainRecord, cfg: EngineConfig, models=None, *,
            seg: Optional[Segmentation] = None, score: Optional[float] = None) -> List[Alert]:
    """Run the three filters on one record of ``state``'s host.

    ``models`` is a :class:`~nxdga.archive.DetectorModel` or None (no classifier,
    bundled lexicon). ``seg`` and ``score`` may be supplied when the caller has
    already computed them for this SLD.
    """
    if rec.host_id != state.host_id:
        raise ValueError(f"record of host {rec.host_id!r} fed to state of {state.host_id!r}")
    # the clock never runs backwards, even if a log line arrives late
    now = rec.timestamp if state.clock is None else max(state.clock, rec.timestamp)
    state.clock = now
    prune(state, now, cfg.epoch_T)
    state.seen += 1
    alerts: List[Alert] = []

    if seg is None:
        lexicon = models.lexicon if models is not None else UnigramLexicon.bundled()
        seg = segment(rec.sld, lexicon)

    forest = models.forest if models is not None else None
    if cfg.classifier_enabled and (forest is not None or score is not None):
        if score is None:
            row, _ = models.extractor.transform_one(rec.sld)
            score = float(forest.score_samples(row)[0])
        if score >= cfg.classifier_score_threshold:
            state.classifier_streak = [state.classifier_streak[0] + 1, now]
            if state.classifier_streak[0] >= cfg.classifier_consecutive:
                _raise(state, cfg, "classifier", [f"score={score:.4f}", rec.qname], now, alerts)
        else:
            state.classifier_streak = [0, 0]

    tripped = []
    for w in words_longer_than(seg, cfg.min_word_len):
        b = state.word_buckets.get(w)
        if b is None:
            b = state.word_buckets[w] = [0, now]
        else:
            state.word_buckets.move_to_end(w)
        b[0] += 1
        b[1] = now
        if b[0] >= cfg.word_strike_threshold and w not in tripped:
            tripped.append(w)
    if tripped:
        _raise(state, cfg, "word", tripped, now, alerts)

    state.recent_window.append((rec, seg))
    if len(state.recent_window) == cfg.window_size:
        hits = check_pattern(state.recent_window, cfg.long_domain_len, cfg.window_size)
        if hits:
            state.pattern_counter = [state.pattern_counter[0] + 1, now]
            if state.pattern_counter[0] >= cfg.pattern_strike_threshold:
                _raise(state, cfg, "pattern", hits, now, alerts)
    return alerts


def load_whitelist(path) -> frozenset:
    out = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip().lower()
            if line:
                out.add(line)
    return frozenset(out)


class DetectionEngine:
    """Multi-host engine with one :class:`HostState` per host id.

    Hosts never share state. ``process_batch`` scores the distinct SLDs of a
    batch in one classifier call, which changes speed but not results.
    """

    sweep_every = 50_000

    def __init__(self, cfg: Optional[EngineConfig] = None, models=None,
                 whitelist: Iterable[str] = ()):
        self.cfg = cfg or EngineConfig()
        self.models = models
        self.lexicon = models.lexicon if models is not None else UnigramLexicon.bundled()
        wl = set(whitelist)
        if self.cfg.whitelist:
            wl |= load_whitelist(self.cfg.whitelist)
        self.whitelist = frozenset(wl)
        self.hosts: Dict[str, HostState] = {}
        self.records = 0
        self.skipped = 0
        self._seg_cache: Dict[str, Segmentation] = {}

    @property
    def scoring(self) -> bool:
        return (self.cfg.classifier_enabled and self.models is not None
                and self.models.forest is not None)

    def _segment(self, sld: str) -> Segmentation:
        seg = self._seg_cache.get(sld)
        if seg is None:
            if len(self._seg_cache) >= 100_000:
                self._seg_cache.clear()
            seg = self._seg_cache[sld] = segment(sld, self.lexicon)
        return seg

    def _state(self, host_id: str) -> HostState:
        st = self.hosts.get(host_id)
        if st is None:
            st = self.hosts[host_id] = HostState(host_id, self.cfg.window_size)
        return st

    def _score(self, slds: Sequence[str]) -> Dict[str, float]:
        uniq = list(dict.fromkeys(slds))
        X = self.models.extractor.transform(uniq)
        return dict(zip(uniq, self.models.forest.score_samples(X).tolist()))

    def process(self, rec: DomainRecord) -> List[Alert]:
        return self.process_batch([rec])

    def process_batch(self, recs: Sequence[DomainRecord]) -> List[Alert]:
        if self.whitelist:
            kept = [r for r in recs if r.sld not in self.whitelist]
            self.skipped += len(recs) - len(kept)
            recs = kept
        scores = self._score([r.sld for r in recs]) if self.scoring and recs else {}
        out: List[Alert] = []
        for r in recs:
            out.extend(observe(self._state(r.host_id), r, self.cfg, self.models,
                               seg=self._segment(r.sld), score=scores.get(r.sld)))
            self.records += 1
            if self.records % self.sweep_every == 0:
                self.sweep()
        return out

    def sweep(self):
        """Forget hosts whose state has fully expired."""
        for host_id in list(self.hosts):
            st = self.hosts[host_id]
            prune(st, st.clock, self.cfg.epoch_T)
            if st.is_empty():
                del self.hosts[host_id]

