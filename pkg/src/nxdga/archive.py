"""Versioned model archive.

One zip file with fixed member timestamps, so equal models give equal bytes::

    manifest.json        format, version, feature order and its hash, lexicon
                         digest, Markov threshold, classifier parameters
    grams/3.txt ...      benign n-grams, sorted, one per line
    markov.npy           27x27 log transition matrix over [a-z ]
    trees/<name>.npy     concatenated tree arrays plus per-tree node offsets
    lexicon.txt          only when the model was built with a non-bundled lexicon

Loading compares the stored feature-order hash (and lexicon digest) against
the running code and raises :class:`ModelMismatch` on any difference.
"""
from __future__ import annotations

import hashlib
import io
import json
import zipfile
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .classifier import DGAForestClassifier, Tree
from .features import (FEATURE_NAMES, FEATURE_VERSION, GRAM_SIZES, BenignGramSet,
                       FeatureExtractor, MarkovGibberishModel, feature_order_hash)
from .segment import UnigramLexicon

FORMAT = "nxdga-model"
ARCHIVE_VERSION = 1
_EPOCH = (1980, 1, 1, 0, 0, 0)
_TREE_FIELDS = ("feature", "threshold", "left", "right", "counts")
_CLF_PARAMS = ("max_features", "max_depth", "min_samples_split", "bootstrap",
               "random_state", "threshold", "voting")


class ModelMismatch(Exception):
    """Archive incompatible with this build (feature order, lexicon or format)."""


def lexicon_digest(lexicon: UnigramLexicon) -> str:
    return hashlib.sha256("\n".join(lexicon.words).encode()).hexdigest()


@dataclass
class DetectorModel:
    extractor: FeatureExtractor
    forest: Optional[DGAForestClassifier]

    @property
    def lexicon(self) -> UnigramLexicon:
        return self.extractor.lexicon_


def _npy(arr: np.ndarray) -> bytes:
    buf = io.BytesIO()
    np.lib.format.write_array(buf, np.ascontiguousarray(arr), allow_pickle=False)
    return buf.getvalue()


def _put(zf: zipfile.ZipFile, name: str, data: bytes):
    info = zipfile.ZipInfo(name, date_time=_EPOCH)
    info.compress_type = zipfile.ZIP_DEFLATED
    info.external_attr = 0o644 << 16
    zf.writestr(info, data)


def to_bytes(model: DetectorModel) -> bytes:
    ext, forest = model.extractor, model.forest
    lex = ext.lexicon_
    bundled = lex is UnigramLexicon.bundled() or lexicon_digest(lex) == lexicon_digest(
        UnigramLexicon.bundled())
    manifest = {
        "format": FORMAT,
        "version": ARCHIVE_VERSION,
        "feature_version": FEATURE_VERSION,
        "feature_order": list(FEATURE_NAMES),
        "feature_order_hash": feature_order_hash(),
        "lexicon_sha256": lexicon_digest(lex),
        "lexicon_bundled": bundled,
        "markov_threshold": ext.markov_.threshold,
        "classifier": None,
    }
    if forest is not None:
        manifest["classifier"] = {
            "n_trees": len(forest.trees_),
            "n_features": int(forest.n_features_in_),
            "params": {k: getattr(forest, k) for k in _CLF_PARAMS},
        }
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w") as zf:
        _put(zf, "manifest.json", json.dumps(manifest, indent=2, sort_keys=True).encode())
        for n in GRAM_SIZES:
            _put(zf, f"grams/{n}.txt", "\n".join(sorted(ext.grams_.grams_by_n[n])).encode())
        _put(zf, "markov.npy", _npy(ext.markov_.log_prob))
        if forest is not None:
            trees = forest.trees_
            _put(zf, "trees/offsets.npy",
                 _npy(np.cumsum([0] + [t.n_nodes for t in trees]).astype(np.int64)))
            for f in _TREE_FIELDS:
                _put(zf, f"trees/{f}.npy", _npy(np.concatenate([getattr(t, f) for t in trees])))
        if not bundled:
            _put(zf, "lexicon.txt", "\n".join(lex.words).encode())
    return buf.getvalue()


def save(model: DetectorModel, path) -> str:
    """Write the archive; returns its sha256."""
    data = to_bytes(model)
    with open(path, "wb") as fh:
        fh.write(data)
    return hashlib.sha256(data).hexdigest()


def _load_npy(zf, name):
    return np.lib.format.read_array(io.BytesIO(zf.read(name)), allow_pickle=False)


def from_bytes(data: bytes) -> DetectorModel:
    try:
        zf = zipfile.ZipFile(io.BytesIO(data))
        manifest = json.loads(zf.read("manifest.json"))
    except (zipfile.BadZipFile, KeyError, ValueError) as e:
        raise ModelMismatch(f"not a model archive: {e}") from e
    if manifest.get("format") != FORMAT or manifest.get("version") != ARCHIVE_VERSION:
        raise ModelMismatch(
            f"unsupported archive {manifest.get('format')!r} v{manifest.get('version')}")
    if manifest.get("feature_order_hash") != feature_order_hash():
        raise ModelMismatch("feature order hash differs from this build's feature extractor")
    names = zf.namelist()
    if "lexicon.txt" in names:
        lex = UnigramLexicon(zf.read("lexicon.txt").decode().splitlines())
    else:
        lex = UnigramLexicon.bundled()
    if lexicon_digest(lex) != manifest.get("lexicon_sha256"):
        raise ModelMismatch("segmentation lexicon differs from the one the model was built with")
    grams = {}
    for n in GRAM_SIZES:
        text = zf.read(f"grams/{n}.txt").decode()
        grams[n] = text.split("\n") if text else ()
    grams = BenignGramSet(grams)
    markov = MarkovGibberishModel(_load_npy(zf, "markov.npy"), manifest["markov_threshold"])
    ext = FeatureExtractor.from_parts(grams, markov, lex)
    forest = None
    clf = manifest.get("classifier")
    if clf is not None:
        offs = _load_npy(zf, "trees/offsets.npy")
        cols = {f: _load_npy(zf, f"trees/{f}.npy") for f in _TREE_FIELDS}
        trees = [Tree(**{f: cols[f][a:b] for f in _TREE_FIELDS})
                 for a, b in zip(offs[:-1], offs[1:])]
        if len(trees) != clf["n_trees"]:
            raise ModelMismatch("tree count does not match manifest")
        forest = DGAForestClassifier.from_trees(trees, clf["n_features"], **clf["params"])
    return DetectorModel(ext, forest)


def load(path) -> DetectorModel:
    with open(path, "rb") as fh:
        return from_bytes(fh.read())


def manifest_of(path) -> dict:
    with zipfile.ZipFile(path) as zf:
        return json.loads(zf.read("manifest.json"))
