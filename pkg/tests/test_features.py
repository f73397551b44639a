import math
import pickle
import statistics
import time

import numpy as np
import pytest
from hypothesis import given, strategies as st
from sklearn.base import clone

from nxdga.dga_sim import bundled_benign, sample_benign
from nxdga.features import (FEATURE_NAMES, ALPHABET, BenignGramSet, EmptyCorpus,
                            FeatureExtractor, build_benign_grams, derive_sequences, entropy,
                            extract, feature_order_hash, segment_both, train_markov)
from nxdga.segment import segment
from nxdga.training import to_slds


@pytest.fixture(scope="module")
def grams():
    return build_benign_grams(to_slds(sample_benign(bundled_benign(), 1000, seed=0).qnames))


def seq(sld, lexicon):
    return derive_sequences(sld, *segment_both(sld, lexicon))


def test_backdates_sequences(lexicon):
    s = seq("backdates0", lexicon)
    assert s.dom_d == "backdates"
    assert {"bac", "ack"} <= s.grams[3] and len(s.grams[3]) == 8


def test_short_label_has_no_trigrams(lexicon):
    assert seq("ab", lexicon).grams[3] == frozenset()


def test_aboveshare_sequences(lexicon):
    s = seq("aboveshare", lexicon)
    assert s.dom_ws == "above share"
    assert s.dom_w3 == "aboveshare"


def test_digit_stripped_segmentation(lexicon):
    s = seq("mail2share", lexicon)
    assert s.dom_d == "mailshare"
    assert s.dom_ws == "mail share" and s.dom_wds == "mail share"


def test_feature_examples(grams, markov, lexicon):
    assert extract("aaaa", grams, markov, lexicon).e_dom == 0.0
    assert extract("deadbeef", grams, markov, lexicon).l_hex == 1
    g = extract("google", grams, markov, lexicon)
    assert g.l_hex == 0
    assert (g.l_len, g.l_dig, g.l_con_max, g.r_con_vow) == (6, 0, 2, 1.0)


def test_benign_gram_ratio_on_common_name(grams, markov, lexicon):
    assert extract("google", grams, markov, lexicon).r_dom_3g >= 0.9


def test_vowelless_ratio_uses_floor(grams, markov, lexicon):
    assert extract("bcdfg", grams, markov, lexicon).r_con_vow == 5.0
    assert extract("1234", grams, markov, lexicon).r_con_vow == 0.0


def test_build_benign_grams_examples():
    g = build_benign_grams(["abc"])
    assert g.grams_by_n[3] == {"abc"} and g.grams_by_n[4] == frozenset()
    assert build_benign_grams(["abcd", "bcde"]).grams_by_n[3] == {"abc", "bcd", "cde"}
    with pytest.raises(EmptyCorpus):
        build_benign_grams([])
    with pytest.raises(EmptyCorpus):
        build_benign_grams(["", "  "])


def test_markov_observed_beats_unobserved():
    m = train_markov(["ababababab"] * 5)
    assert m.score("ab") > m.score("bb")


def test_markov_rows_normalised(markov):
    assert np.allclose(np.exp(markov.log_prob).sum(axis=1), 1.0, atol=1e-9)
    m = train_markov(["hello world", "the quick brown fox"])
    assert np.allclose(np.exp(m.log_prob).sum(axis=1), 1.0, atol=1e-9)


def test_bundled_markov_separates_english(markov):
    assert markov.score("the history former trial") > markov.threshold > markov.score("qzxvkq jwqp")


def test_train_markov_empty():
    with pytest.raises(EmptyCorpus):
        train_markov(["", "123 !!"])


def test_feature_order_is_fixed():
    assert FEATURE_NAMES[:3] == ("l_hex", "l_len", "l_dig")
    assert FEATURE_NAMES[-1] == "e_dom_w3" and len(FEATURE_NAMES) == 21
    assert feature_order_hash() == feature_order_hash()


def test_extractor_matches_extract(grams, markov, lexicon):
    fx = FeatureExtractor.from_parts(grams, markov, lexicon)
    names = ["google", "possibleshake", "3837avw-2iay7bstddjg0b", "aaaa"]
    X = fx.transform(names)
    for row, name in zip(X, names):
        assert np.array_equal(row, extract(name, grams, markov, lexicon).as_array())
    assert np.array_equal(fx.transform_one("google")[0], X[0])


def test_extractor_estimator_api(markov):
    fx = FeatureExtractor(markov=markov).fit(["google", "amazon", "possibleshake"], y=[0, 0, 1])
    assert "possibleshake"[:5] not in fx.grams_.grams_by_n[5]
    assert fx.get_params()["cache_size"] == 200_000
    fx2 = clone(fx).fit(["google"])
    assert fx2.transform(["google"]).shape == (1, 21)
    fx3 = pickle.loads(pickle.dumps(fx))
    assert np.array_equal(fx3.transform(["google"]), fx.transform(["google"]))
    assert list(fx.get_feature_names_out()) == list(FEATURE_NAMES)


sld = st.text(alphabet="abcdefghijklmnopqrstuvwxyz0123456789-", min_size=1, max_size=40)


@given(sld)
def test_bounds(grams, markov, lexicon, s):
    fv = extract(s, grams, markov, lexicon)
    assert 0.0 <= fv.e_dom <= math.log2(36) + 1e-12
    assert (fv.e_dom == 0.0) == (len(set(s)) == 1)
    assert fv.l_dig <= fv.l_len and fv.l_w3 <= fv.l_w2
    for n in (3, 4, 5):
        assert 0.0 <= getattr(fv, f"r_dom_{n}g") <= 1.0
    for name in ("r_con_vow", "r_ws_len", "r_wds_len", "r_w2_len", "r_w3_len"):
        assert 0.0 <= getattr(fv, name) <= fv.l_len
    s_ = derive_sequences(s, *segment_both(s, lexicon))
    for name, text in (("e_dom_ws", s_.dom_ws), ("e_dom_wds", s_.dom_wds),
                       ("e_dom_w2", s_.dom_w2), ("e_dom_w3", s_.dom_w3)):
        assert 0.0 <= getattr(fv, name) <= math.log2(max(len(set(text)), 1)) + 1e-12


@given(sld, st.text(alphabet="abcdefghijklmnopqrstuvwxyz0123456789", min_size=3, max_size=5))
def test_adding_gram_never_lowers_ratio(grams, markov, lexicon, s, extra):
    before = extract(s, grams, markov, lexicon)
    n = len(extra)
    bigger = BenignGramSet({k: set(grams.grams_by_n[k]) | ({extra} if k == n else set())
                            for k in (3, 4, 5)})
    after = extract(s, bigger, markov, lexicon)
    for k in (3, 4, 5):
        assert getattr(after, f"r_dom_{k}g") >= getattr(before, f"r_dom_{k}g")


def test_entropy_helper():
    assert entropy("") == 0.0
    assert entropy("ab") == pytest.approx(1.0)
    assert entropy(ALPHABET) == pytest.approx(math.log2(27))


def test_extract_latency(grams, markov, lexicon):
    rng = np.random.Generator(np.random.PCG64(7))
    alphabet = np.array(list("abcdefghijklmnopqrstuvwxyz0123456789"))
    names = ["".join(rng.choice(alphabet, size=int(rng.integers(5, 30)))) for _ in range(10_000)]
    times = []
    for s in names:
        t0 = time.perf_counter()
        extract(s, grams, markov, lexicon)
        times.append(time.perf_counter() - t0)
    assert statistics.median(times) < 5e-3
