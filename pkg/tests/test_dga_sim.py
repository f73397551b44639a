import io
import itertools
import json
from collections import Counter

import pytest
from scipy.stats import chisquare

from nxdga import dga_sim
from nxdga.dga_sim import (CountExceedsPopulation, DgaTemplate, TemplateError,
                           UnsatisfiableLength, adjacent_transposition_orderings,
                           bundled_benign, family_template, generate, load_template,
                           read_corpus_csv, sample_benign, template_from_dict, write_corpus_csv)


def csv_bytes(corpus):
    buf = io.StringIO()
    write_corpus_csv(corpus, buf)
    return buf.getvalue().encode()


def test_singleton_two_word():
    t = DgaTemplate("two_word", (("above",), ("share",)), tlds=("net",), seed=1)
    assert set(generate(t, 20).slds) == {"aboveshare"}


def test_alternating_exceeds_bound():
    c = generate(family_template("matsnu", seed=4), 500)
    assert all(len(s) > 24 for s in c.slds)


def test_gozi_length_range():
    c = generate(family_template("gozi", seed=9), 500)
    assert all(12 <= len(s) <= 23 for s in c.slds)


def test_rovnix_exceeds_twenty():
    c = generate(family_template("rovnix", seed=2), 300)
    assert all(len(s) > 20 for s in c.slds)


def test_beebone_counter_cycles_tlds():
    c = generate(family_template("beebone"), 7)
    assert c.qnames[:6] == ["backdates0.com", "backdates0.org", "backdates0.net",
                            "backdates0.biz", "backdates0.info", "backdates1.com"]


def test_nymaim2_separators_and_tlds():
    assert len(set(dga_sim.NYMAIM2_TLDS)) == 74
    c = generate(family_template("nymaim2", seed=3), 2000)
    assert any("-" in s for s in c.slds) and any("-" not in s for s in c.slds)
    assert len({q.split(".", 1)[1] for q in c.qnames}) > 50


def test_bundled_dictionary_sizes():
    d = dga_sim.bundled_dictionaries()
    sizes = {k: len(set(v)) for k, v in d.items() if k not in ("rovnix", "gozi")}
    assert sizes == {"suppobox": 384, "pizd": 384, "matsnu_verbs": 878, "matsnu_nouns": 1008,
                     "nymaim2_first": 2450, "nymaim2_second": 4387}
    lexicon_slices = [set(d[k]) for k in sizes]
    for a, b in itertools.combinations(lexicon_slices, 2):
        assert not a & b
    assert all(len(w) >= 3 and w.isalpha() for w in d["gozi"])


@pytest.mark.parametrize("family", dga_sim.WORDLIST_FAMILIES + ("beebone", "volatilecedar"))
def test_ground_truth_conforms_to_template(family):
    t = family_template(family, seed=13)
    n = 300 if family == "volatilecedar" else 400
    for r in generate(t, n).records:
        sep = "-" if "-" in r.sld else ""
        rebuilt = sep.join(r.words)
        if family == "beebone":
            assert r.sld.startswith(r.words[0]) and r.sld[len(r.words[0]):].isdigit()
            continue
        assert rebuilt == r.sld
        if t.kind in ("two_word", "two_dict_optional_sep"):
            assert r.words[0] in t.dictionaries[0] and r.words[1] in t.dictionaries[1]
        elif t.kind == "alternating_until_len":
            k = 0 if r.words[0] in t.dictionaries[0] else 1
            for i, w in enumerate(r.words):
                assert w in t.dictionaries[(k + i) % 2]
        elif t.kind == "document_until_len":
            assert all(w in t.dictionaries[0] for w in r.words)
        elif t.kind == "permutation":
            assert sorted(r.words[0]) == sorted(t.dictionaries[0][0])
            assert r.words[1] == t.dictionaries[1][0]


def test_determinism_byte_identical():
    for fam in dga_sim.WORDLIST_FAMILIES:
        a = csv_bytes(generate(family_template(fam, seed=77), 300))
        b = csv_bytes(generate(family_template(fam, seed=77), 300))
        assert a == b
    assert csv_bytes(generate(family_template("pizd", seed=1), 50)) != csv_bytes(
        generate(family_template("pizd", seed=2), 50))


def test_first_word_uniform():
    L = 384
    t = family_template("suppobox", seed=31)
    first = Counter(r.words[0] for r in generate(t, 10 * L).records)
    observed = [first.get(w, 0) for w in t.dictionaries[0]]
    assert chisquare(observed).pvalue > 0.01


def test_unique_corpus():
    c = generate(family_template("pizd", seed=2), 3000, unique=True)
    assert c.unique and len(set(c.qnames)) == 3000
    with pytest.raises(CountExceedsPopulation):
        generate(family_template("volatilecedar"), 361, unique=True)
    t = DgaTemplate("two_word", (("a",), ("b",)), tlds=("com",))
    with pytest.raises(CountExceedsPopulation):
        generate(t, 2, unique=True)


def test_adjacent_transposition_order():
    seq = adjacent_transposition_orderings("abcd")
    assert len(seq) == 24 and len(set(seq)) == 24
    for a, b in zip(seq, seq[1:]):
        diff = [i for i in range(4) if a[i] != b[i]]
        assert len(diff) == 2 and diff[1] == diff[0] + 1
    assert len(adjacent_transposition_orderings("dotnet")) == 360


def test_unsatisfiable_lengths():
    with pytest.raises(UnsatisfiableLength):
        DgaTemplate("document_until_len", (("abcdef",),), length_bounds=(3, 5), tlds=("com",))
    t = DgaTemplate("two_word", (("ab",), ("cd",)), length_bounds=(10, None), tlds=("com",))
    with pytest.raises(UnsatisfiableLength):
        generate(t, 1)
    with pytest.raises(UnsatisfiableLength):
        DgaTemplate("two_word", (("a",), ("b",)), length_bounds=(5, 5), tlds=("com",))


def test_template_errors():
    with pytest.raises(TemplateError):
        DgaTemplate("markov_chain", (("a",),), tlds=("com",))
    with pytest.raises(TemplateError):
        DgaTemplate("two_word", (("a",),), tlds=("com",))
    with pytest.raises(TemplateError):
        family_template("conficker")
    with pytest.raises(TemplateError):
        template_from_dict({"kind": "two_word", "dictionaries": ["@nope", "@pizd"]})


def test_template_json(tmp_path):
    p = tmp_path / "t.json"
    p.write_text(json.dumps({"kind": "two_word", "dictionaries": ["@pizd", "@pizd"],
                             "tlds": ["net"], "seed": 3, "family": "pizdlike"}))
    t = load_template(p)
    assert t.dictionaries[0] == dga_sim.bundled_dictionaries()["pizd"] and t.family == "pizdlike"
    p.write_text(json.dumps({"preset": "matsnu", "seed": 8}))
    assert load_template(p) == family_template("matsnu", seed=8)
    p.write_text("{not json")
    with pytest.raises(TemplateError):
        load_template(p)


def test_csv_round_trip():
    c = generate(family_template("nymaim2", seed=5), 100)
    back = read_corpus_csv(io.StringIO(csv_bytes(c).decode()))
    assert back.records == c.records


def test_sample_benign_examples():
    names = [f"site{i}.com" for i in range(10)]
    s = sample_benign(names, 10, seed=1)
    assert sorted(s.qnames) == sorted(names) and s.qnames != names
    assert sample_benign(names, 5, seed=4).qnames == sample_benign(names, 5, seed=4).qnames
    with pytest.raises(CountExceedsPopulation):
        sample_benign(names, 11, seed=0)
    assert "xn--bcher-kva.com" not in sample_benign(names + ["xn--bcher-kva.com"], 11 - 1, 0).qnames


def test_sample_benign_bundled():
    s = sample_benign(bundled_benign(), 1000, seed=0)
    slds = s.slds
    assert len(slds) == 1000 and len(set(slds)) == 1000
    assert not any(x.startswith("xn--") for x in slds)
    assert {r.label for r in s.records} == {"benign"}
