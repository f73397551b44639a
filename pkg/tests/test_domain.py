import pytest
from hypothesis import given, strategies as st

from nxdga.domain import (DomainRecord, EmptyLabel, IdnRejected, InvalidChar, SuffixList,
                          UnknownSuffix, parse_qname)


def test_table_sample_splits(suffixes):
    assert parse_qname("possibleshake.net", suffixes) == ("possibleshake", "net")


def test_longest_suffix_wins():
    sl = SuffixList(["uk", "co.uk", "com"])
    assert parse_qname("a.b.example.co.uk", sl) == ("example", "co.uk")
    assert parse_qname("example.uk", sl) == ("example", "uk")


def test_idn_rejected(suffixes):
    with pytest.raises(IdnRejected):
        parse_qname("xn--bcher-kva.example", SuffixList(["example"]))
    with pytest.raises(IdnRejected):
        parse_qname("xn--bcher-kva.com", suffixes)


def test_errors(suffixes):
    with pytest.raises(EmptyLabel):
        parse_qname("com", suffixes)
    with pytest.raises(EmptyLabel):
        parse_qname("", suffixes)
    with pytest.raises(EmptyLabel):
        parse_qname("a..com", suffixes)
    with pytest.raises(InvalidChar):
        parse_qname("foo_bar.com", suffixes)
    with pytest.raises(InvalidChar):
        parse_qname("bücher.com", suffixes)
    with pytest.raises(UnknownSuffix):
        parse_qname("example.notarealtld", suffixes)


def test_fallback_uses_last_label(suffixes):
    assert parse_qname("www.example.notarealtld", suffixes, fallback=True) == (
        "example", "notarealtld")


def test_normalisation(suffixes):
    assert parse_qname("  WWW.Example.COM. ", suffixes) == ("example", "com")


def test_record_reconstruction(suffixes):
    r = DomainRecord.parse("h", 5, "Mail.Squirting-Eight.NET.", suffixes)
    assert r.qname == r.sld + "." + r.tld == "squirting-eight.net"
    assert r.sld == "squirting-eight"


def test_suffix_file_comments(tmp_path):
    p = tmp_path / "s.txt"
    p.write_text("# header\ncom\n// psl style comment\nco.uk  # trailing\n\n")
    sl = SuffixList.from_file(p)
    assert set(sl.suffixes) == {"com", "co.uk"}


label = st.text(alphabet="abcdefghijklmnopqrstuvwxyz0123456789-", min_size=1, max_size=20)
tld = st.sampled_from(["com", "net", "co.uk", "org", "info"])


@given(st.lists(label, min_size=0, max_size=2), label, tld)
def test_parse_idempotent_on_reconstruction(prefix, sld, suffix):
    sl = SuffixList(["com", "net", "co.uk", "uk", "org", "info"])
    if sld.startswith("xn--"):
        return
    raw = ".".join(prefix + [sld, suffix])
    got = parse_qname(raw, sl)
    assert got == (sld, suffix)
    assert parse_qname(got[0] + "." + got[1], sl) == got


@given(st.text(alphabet="abcdefgHIJKLMxyzXYZ09-.", min_size=1, max_size=25))
def test_case_insensitive(raw):
    sl = SuffixList(["com", "xyz", "co.uk"])

    def outcome(s):
        try:
            return parse_qname(s, sl)
        except Exception as e:
            return type(e)

    assert outcome(raw) == outcome(raw.lower())
