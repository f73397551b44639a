"""Query-name parsing: normalisation and SLD/TLD decomposition."""
from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional, Tuple

_VALID = re.compile(r"^[a-z0-9.-]+$")


class DomainError(ValueError):
    """Base class for query names that cannot be turned into a record."""


class EmptyLabel(DomainError):
    pass


class IdnRejected(DomainError):
    pass


class InvalidChar(DomainError):
    pass


class UnknownSuffix(DomainError):
    pass


class SuffixList:
    """Set of public suffixes matched longest-first.

    Only exact rules are supported (no ``*`` wildcards or ``!`` exceptions).
    """

    def __init__(self, suffixes: Iterable[str]):
        self.suffixes = frozenset(s.strip().lower().strip(".") for s in suffixes if s.strip())
        self.max_labels = max((s.count(".") + 1 for s in self.suffixes), default=0)

    def __len__(self):
        return len(self.suffixes)

    def __contains__(self, suffix):
        return suffix in self.suffixes

    @classmethod
    def from_file(cls, path) -> "SuffixList":
        """Read one suffix per line; ``#`` and ``//`` start comments."""
        lines = []
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            line = line.split("#", 1)[0].strip()
            if line and not line.startswith("//"):
                lines.append(line)
        return cls(lines)

    @classmethod
    def bundled(cls) -> "SuffixList":
        return cls.from_file(resources.files("nxdga") / "data" / "suffixes.txt")

    def longest_match(self, labels) -> Optional[int]:
        """Index into ``labels`` where the longest matching suffix starts, or None."""
        n = len(labels)
        for start in range(max(0, n - self.max_labels), n):
            if ".".join(labels[start:]) in self.suffixes:
                return start
        return None


def normalize(raw: str) -> str:
    return raw.strip().lower().rstrip(".")


def parse_qname(raw: str, suffixes: SuffixList, fallback: bool = False) -> Tuple[str, str]:
    """Split a query name into ``(sld, tld)``.

    ``tld`` is the longest suffix in ``suffixes`` and ``sld`` the label just left
    of it; deeper labels are dropped. With ``fallback=True`` an unknown suffix
    degrades to the last label instead of raising :class:`UnknownSuffix`.
    """
    name = normalize(raw)
    if not name:
        raise EmptyLabel("empty query name")
    if not name.isascii() or not _VALID.match(name):
        bad = next(c for c in name if not (c.isascii() and (c.isalnum() or c in ".-")))
        raise InvalidChar(f"invalid character {bad!r} in {raw!r}")
    labels = name.split(".")
    if any(not lbl for lbl in labels):
        raise EmptyLabel(f"empty label in {raw!r}")
    start = suffixes.longest_match(labels)
    if start is None:
        if not fallback:
            raise UnknownSuffix(f"no known suffix for {raw!r}")
        start = len(labels) - 1
    if start == 0:
        raise EmptyLabel(f"no label left of suffix in {raw!r}")
    sld = labels[start - 1]
    if sld.startswith("xn--"):
        raise IdnRejected(f"IDN label {sld!r}")
    return sld, ".".join(labels[start:])


@dataclass(frozen=True)
class DomainRecord:
    host_id: str
    timestamp: int
    qname: str
    sld: str
    tld: str

    @classmethod
    def parse(cls, host_id: str, timestamp: int, raw: str, suffixes: SuffixList,
              fallback: bool = False) -> "DomainRecord":
        sld, tld = parse_qname(raw, suffixes, fallback=fallback)
        return cls(str(host_id), int(timestamp), f"{sld}.{tld}", sld, tld)
