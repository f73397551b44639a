"""Regenerate the bundled data files under src/nxdga/data.

Sources (fetch them with ``pip download --no-deps <name>`` and unpack):

  --wordninja    wordninja sdist, file ``wordninja/wordninja_words.txt.gz`` (MIT)
  --psl          tldextract wheel, file ``tldextract/.tld_set_snapshot`` (MPL-2.0)
  --top-domains  domain-stats wheel, file ``domain_stats/data/top1m.import``
  --licenses     directory holding GPL-3, Apache-2.0, MPL-2.0, GFDL-1.3, LGPL-2.1

Usage::

    python scripts/build_data.py --wordninja ... --psl ... --top-domains ... \
        --licenses /usr/share/common-licenses
"""
import argparse
import gzip
import json
import re
from pathlib import Path

DATA = Path(__file__).resolve().parents[1] / "src" / "nxdga" / "data"
ALPHA = re.compile(r"^[a-z]+$")
LABEL = re.compile(r"^[a-z0-9-]+$")


def build_lexicon(src):
    with gzip.open(src, "rt", encoding="utf-8") as fh:
        words = [w.strip() for w in fh]
    words = [w for w in words if ALPHA.match(w)]
    with gzip.GzipFile(DATA / "lexicon.txt.gz", "wb", mtime=0) as fh:
        fh.write(("\n".join(words) + "\n").encode())
    return len(words)


def build_suffixes(src):
    out = []
    icann = False
    for line in Path(src).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if "===BEGIN ICANN DOMAINS===" in line:
            icann = True
        elif "===END ICANN DOMAINS===" in line:
            icann = False
        if not icann or not line or line.startswith("//"):
            continue
        if line[0] in "*!" or not line.isascii():
            continue
        if any(lbl.startswith("xn--") for lbl in line.split(".")):
            continue
        out.append(line.lower())
    header = ("# Public suffixes (ICANN section, exact rules only).\n"
              "# Derived from the Public Suffix List, MPL-2.0, https://publicsuffix.org/\n")
    (DATA / "suffixes.txt").write_text(header + "\n".join(out) + "\n", encoding="utf-8")
    return out


def build_benign(src, suffixes):
    import sys
    sys.path.insert(0, str(DATA.parents[1]))
    from nxdga.domain import SuffixList, parse_qname, DomainError

    sl = SuffixList(suffixes)
    rows = json.loads(Path(src).read_text(encoding="utf-8"))
    seen = set()
    out = []
    for row in rows:
        try:
            sld, tld = parse_qname(row["domain"], sl)
        except DomainError:
            continue
        if sld in seen:
            continue
        seen.add(sld)
        out.append(f"{sld}.{tld}")
    with gzip.GzipFile(DATA / "benign_domains.txt.gz", "wb", mtime=0) as fh:
        fh.write(("\n".join(out) + "\n").encode())
    return len(out)


def build_texts(licenses):
    lic = Path(licenses)
    english = [lic / n for n in ("GPL-3", "Apache-2.0", "MPL-2.0", "GFDL-1.3")]
    (DATA / "english.txt").write_text(
        "\n".join(p.read_text(encoding="utf-8") for p in english), encoding="utf-8")
    (DATA / "lgpl-2.1.txt").write_text((lic / "LGPL-2.1").read_text(encoding="utf-8"),
                                       encoding="utf-8")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--wordninja", required=True)
    ap.add_argument("--psl", required=True)
    ap.add_argument("--top-domains", required=True)
    ap.add_argument("--licenses", default="/usr/share/common-licenses")
    args = ap.parse_args()
    print("lexicon words:", build_lexicon(args.wordninja))
    suffixes = build_suffixes(args.psl)
    print("suffixes:", len(suffixes))
    print("benign domains:", build_benign(args.top_domains, suffixes))
    build_texts(args.licenses)


if __name__ == "__main__":
    main()
