import io
import json
import zipfile

import numpy as np
import pytest

from nxdga import archive, dga_sim
from nxdga.archive import DetectorModel, ModelMismatch
from nxdga.segment import UnigramLexicon
from nxdga.training import to_slds, train_detector


@pytest.fixture(scope="module")
def trained():
    benign = to_slds(dga_sim.bundled_benign()[:3000])
    agd = {"pizd": dga_sim.generate(dga_sim.family_template("pizd", seed=1), 600).slds}
    return benign, agd, train_detector(benign, agd, seed=4, n_trees=20, evaluate=False).model


def rewrite(data, name, fn):
    src = zipfile.ZipFile(io.BytesIO(data))
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w") as dst:
        for info in src.infolist():
            body = src.read(info)
            dst.writestr(info, fn(body) if info.filename == name else body)
    return buf.getvalue()


def test_round_trip(trained):
    _, _, model = trained
    back = archive.from_bytes(archive.to_bytes(model))
    names = ["google", "aboveshare", "3837avw-2iay7bstddjg0b", "possibleshake"]
    X1 = model.extractor.transform(names)
    X2 = back.extractor.transform(names)
    assert np.array_equal(X1, X2)
    assert np.array_equal(model.forest.score_samples(X1), back.forest.score_samples(X2))
    assert back.forest.get_params() == model.forest.get_params()


def test_bytes_identical_across_runs(trained):
    benign, agd, model = trained
    again = train_detector(benign, agd, seed=4, n_trees=20, evaluate=False).model
    assert archive.to_bytes(model) == archive.to_bytes(again)
    assert archive.to_bytes(archive.from_bytes(archive.to_bytes(model))) == archive.to_bytes(model)


def test_manifest_fields(trained, tmp_path):
    p = tmp_path / "m.zip"
    digest = archive.save(trained[2], p)
    assert len(digest) == 64
    m = archive.manifest_of(p)
    assert m["format"] == "nxdga-model" and m["version"] == 1
    assert m["feature_order"][0] == "l_hex" and len(m["feature_order"]) == 21
    assert m["classifier"]["n_trees"] == 20 and m["lexicon_bundled"]


def test_feature_hash_mismatch(trained):
    data = archive.to_bytes(trained[2])

    def tamper(body):
        m = json.loads(body)
        m["feature_order_hash"] = "0" * 16
        return json.dumps(m).encode()

    with pytest.raises(ModelMismatch):
        archive.from_bytes(rewrite(data, "manifest.json", tamper))


def test_version_and_garbage(trained):
    data = archive.to_bytes(trained[2])

    def bump(body):
        m = json.loads(body)
        m["version"] = 99
        return json.dumps(m).encode()

    with pytest.raises(ModelMismatch):
        archive.from_bytes(rewrite(data, "manifest.json", bump))
    with pytest.raises(ModelMismatch):
        archive.from_bytes(b"not a zip at all")


def test_custom_lexicon_travels_with_model(trained):
    _, _, model = trained
    lex = UnigramLexicon(["above", "share", "google", "possible", "shake"])
    ext = model.extractor
    from nxdga.features import FeatureExtractor

    custom = DetectorModel(FeatureExtractor.from_parts(ext.grams_, ext.markov_, lex), None)
    back = archive.from_bytes(archive.to_bytes(custom))
    assert back.lexicon.words == lex.words and back.forest is None

    def swap(body):
        return b"other\nwords"

    with pytest.raises(ModelMismatch):
        archive.from_bytes(rewrite(archive.to_bytes(custom), "lexicon.txt", swap))
