"""Bagged decision-tree ensemble for benign/AGD classification.

Trees are grown with scikit-learn's CART (Gini impurity, midpoint thresholds,
``sqrt(n_features)`` candidates per split) on bootstrap resamples drawn from
per-tree PCG64 streams spawned from ``random_state``. After fitting each tree
is copied into flat arrays holding integer class counts per leaf; prediction
walks those arrays directly, so a persisted model needs no pickled objects.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, clone
from sklearn.model_selection import StratifiedKFold
from sklearn.tree import DecisionTreeClassifier
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

CLASS_NAMES = ("benign", "agd")


class ClassifierError(ValueError):
    pass


class SingleClass(ClassifierError):
    pass


class TooFewSamples(ClassifierError):
    pass


class ArityMismatch(ClassifierError):
    pass


class TooFewSamplesPerFold(ClassifierError):
    pass


def encode_labels(y) -> np.ndarray:
    """Map labels to 0 (benign) / 1 (agd). Accepts 0/1, bools or the class names."""
    y = np.asarray(y)
    if y.dtype.kind in "OUS":
        bad = set(np.unique(y)) - set(CLASS_NAMES)
        if bad:
            raise ClassifierError(f"unknown labels {sorted(bad)}")
        return (y == "agd").astype(np.int64)
    vals = set(np.unique(y).tolist())
    if not vals <= {0, 1}:
        raise ClassifierError(f"numeric labels must be 0/1, got {sorted(vals)}")
    return y.astype(np.int64)


@dataclass
class Tree:
    """One fitted tree in array form; ``feature == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray  # (n_nodes, 2) class counts of the training rows reaching each leaf

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def leaf_proba(self) -> np.ndarray:
        tot = self.counts.sum(axis=1)
        return np.divide(self.counts[:, 1], tot, out=np.zeros(len(tot)), where=tot > 0)

    def apply(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        while True:
            f = self.feature[node]
            inner = f >= 0
            if not inner.any():
                return node
            go_left = X[rows, np.where(inner, f, 0)] <= self.threshold[node]
            node = np.where(inner, np.where(go_left, self.left[node], self.right[node]), node)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return self.leaf_proba()[self.apply(X)]


def _from_sklearn(est: DecisionTreeClassifier, X: np.ndarray, y: np.ndarray) -> Tree:
    t = est.tree_
    feature = t.feature.astype(np.int64)
    feature[t.children_left < 0] = -1
    leaves = est.apply(X)
    counts = np.zeros((t.node_count, 2), dtype=np.int64)
    np.add.at(counts, (leaves, y), 1)
    return Tree(feature, t.threshold.astype(np.float64), t.children_left.astype(np.int64),
                t.children_right.astype(np.int64), counts)


class _FlatForest:
    """All trees concatenated so a batch walks every tree in one loop."""

    def __init__(self, trees: Sequence[Tree]):
        offs = np.cumsum([0] + [t.n_nodes for t in trees[:-1]])
        self.roots = offs.astype(np.int64)
        self.feature = np.concatenate([t.feature for t in trees])
        self.threshold = np.concatenate([t.threshold for t in trees])
        self.left = np.concatenate([np.where(t.left >= 0, t.left + o, -1)
                                    for t, o in zip(trees, offs)])
        self.right = np.concatenate([np.where(t.right >= 0, t.right + o, -1)
                                     for t, o in zip(trees, offs)])
        self.proba = np.concatenate([t.leaf_proba() for t in trees])
        self.safe_feature = np.where(self.feature >= 0, self.feature, 0)

    def tree_proba(self, X: np.ndarray) -> np.ndarray:
        """(n_samples, n_trees) leaf AGD probabilities."""
        n = len(X)
        node = np.broadcast_to(self.roots, (n, len(self.roots))).copy()
        rows = np.arange(n)[:, None]
        while True:
            inner = self.feature[node] >= 0
            if not inner.any():
                break
            go_left = X[rows, self.safe_feature[node]] <= self.threshold[node]
            node = np.where(inner, np.where(go_left, self.left[node], self.right[node]), node)
        return self.proba[node]


def _as_tree_input(X) -> np.ndarray:
    # CART compares float32 copies of the features; predict on the same values
    return np.asarray(X, dtype=np.float32).astype(np.float64)


class DGAForestClassifier(ClassifierMixin, BaseEstimator):
    """Random forest over feature vectors, labels 0 = benign, 1 = AGD.

    Parameters
    ----------
    n_estimators : int, default=100
    max_features : {"sqrt", "log2"}, int, float or None, default="sqrt"
        Candidate features per split, as in scikit-learn.
    max_depth : int or None, default=None
        None grows trees until leaves are pure or cannot be split.
    min_samples_split : int, default=2
    bootstrap : bool, default=True
    random_state : int, default=0
    threshold : float, default=0.5
        Minimum mean AGD probability for an AGD label.
    voting : {"soft", "majority"}, default="soft"
        "soft" labels by the mean probability against ``threshold``. "majority"
        counts one vote per tree (leaf majority class) and falls back to the
        soft rule when the vote is tied.
    """

    def __init__(self, n_estimators=100, max_features="sqrt", max_depth=None,
                 min_samples_split=2, bootstrap=True, random_state=0, threshold=0.5,
                 voting="soft"):
        self.n_estimators = n_estimators
        self.max_features = max_features
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.bootstrap = bootstrap
        self.random_state = random_state
        self.threshold = threshold
        self.voting = voting

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=None)
        y = encode_labels(y)
        X = _as_tree_input(X)
        if len(y) < 2:
            raise TooFewSamples("need at least 2 samples")
        if len(np.unique(y)) < 2:
            raise SingleClass("training data contains one class only")
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be >= 1")
        if self.voting not in ("soft", "majority"):
            raise ValueError("voting must be 'soft' or 'majority'")
        n = len(y)
        trees = []
        for ss in np.random.SeedSequence(int(self.random_state)).spawn(self.n_estimators):
            rng = np.random.Generator(np.random.PCG64(ss))
            idx = rng.integers(0, n, size=n) if self.bootstrap else np.arange(n)
            est = DecisionTreeClassifier(
                criterion="gini", max_features=self.max_features, max_depth=self.max_depth,
                min_samples_split=self.min_samples_split,
                random_state=int(rng.integers(2 ** 31 - 1)))
            Xb, yb = X[idx], y[idx]
            est.fit(Xb, yb)
            trees.append(_from_sklearn(est, Xb, yb))
        self._set_trees(trees, X.shape[1])
        return self

    def _set_trees(self, trees: List[Tree], n_features: int):
        self.trees_ = trees
        self.n_features_in_ = n_features
        self.classes_ = np.array([0, 1])
        self._flat = _FlatForest(trees)

    @classmethod
    def from_trees(cls, trees: List[Tree], n_features: int, **params) -> "DGAForestClassifier":
        model = cls(n_estimators=len(trees), **params)
        model._set_trees(trees, n_features)
        return model

    def __getstate__(self):
        state = self.__dict__.copy()
        state.pop("_flat", None)
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)
        if "trees_" in state:
            self._flat = _FlatForest(self.trees_)

    def _check_input(self, X):
        check_is_fitted(self, "trees_")
        X = np.asarray(X)
        if X.ndim == 1:
            X = X[None, :]
        if X.ndim != 2 or X.shape[1] != self.n_features_in_:
            raise ArityMismatch(
                f"model expects {self.n_features_in_} features, got shape {X.shape}")
        return _as_tree_input(check_array(X, dtype=np.float64))

    def score_samples(self, X) -> np.ndarray:
        """Mean AGD probability across trees."""
        return self._flat.tree_proba(self._check_input(X)).mean(axis=1)

    def predict_proba(self, X) -> np.ndarray:
        s = self.score_samples(X)
        return np.column_stack([1.0 - s, s])

    def predict(self, X) -> np.ndarray:
        per_tree = self._flat.tree_proba(self._check_input(X))
        soft = per_tree.mean(axis=1) >= self.threshold
        if self.voting == "soft":
            return soft.astype(np.int64)
        votes = (per_tree > 0.5).sum(axis=1) - (per_tree < 0.5).sum(axis=1)
        return np.where(votes > 0, 1, np.where(votes < 0, 0, soft)).astype(np.int64)


# -- functional surface --------------------------------------------------------

@dataclass(frozen=True)
class LabeledSample:
    features: np.ndarray
    label: str
    family: Optional[str] = None

    def __post_init__(self):
        if self.label not in CLASS_NAMES:
            raise ClassifierError(f"label must be one of {CLASS_NAMES}")
        feats = self.features
        if hasattr(feats, "as_array"):
            feats = feats.as_array()
        object.__setattr__(self, "features", np.asarray(feats, dtype=np.float64))


def _stack(samples: Sequence[LabeledSample]) -> Tuple[np.ndarray, np.ndarray]:
    X = np.vstack([s.features for s in samples])
    y = encode_labels([s.label for s in samples])
    return X, y


def train(samples: Sequence[LabeledSample], n_trees: int = 100, seed: int = 0,
          **params) -> DGAForestClassifier:
    if len(samples) < 2:
        raise TooFewSamples("need at least 2 samples")
    X, y = _stack(samples)
    return DGAForestClassifier(n_estimators=n_trees, random_state=seed, **params).fit(X, y)


def predict(model: DGAForestClassifier, fv) -> Tuple[str, float]:
    """``(label, score)`` for one feature vector."""
    if hasattr(fv, "as_array"):
        fv = fv.as_array()
    fv = np.asarray(fv, dtype=np.float64)
    score = float(model.score_samples(fv)[0])
    return CLASS_NAMES[int(model.predict(fv)[0])], score


@dataclass
class EvalReport:
    precision: Dict[str, float]
    recall: Dict[str, float]
    f1: Dict[str, float]
    f1_std: float
    confusion: Dict[str, int]
    f1_runs: List[float] = field(default_factory=list)

    def row(self, name: str) -> Dict[str, object]:
        """Flat row with Prec/Recall/F1/sigma for the AGD class, in percent."""
        return {"class": name, "precision": round(100 * self.precision["agd"], 2),
                "recall": round(100 * self.recall["agd"], 2),
                "f1": round(100 * self.f1["agd"], 2), "f1_std": round(100 * self.f1_std, 2),
                "tp": self.confusion["tp"], "fp": self.confusion["fp"],
                "tn": self.confusion["tn"], "fn": self.confusion["fn"]}


def precision_recall_f1(tp, fp, fn):
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    f = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f


def cross_validate(X, y, folds: int = 10, repeats: int = 1, seed: int = 0,
                   estimator: Optional[DGAForestClassifier] = None) -> EvalReport:
    """Repeated stratified k-fold evaluation.

    Each repeat reshuffles the folds and pools its out-of-fold predictions;
    precision, recall and F1 are averaged over repeats and ``f1_std`` is the
    standard deviation of the per-repeat AGD F1.
    """
    if folds < 2:
        raise ValueError("folds must be >= 2")
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    X = np.asarray(X, dtype=np.float64)
    y = encode_labels(y)
    counts = np.bincount(y, minlength=2)
    if counts.min() < folds:
        raise TooFewSamplesPerFold(
            f"each class needs >= {folds} samples for {folds} stratified folds, got {counts.tolist()}")
    estimator = estimator if estimator is not None else DGAForestClassifier()
    rng = np.random.Generator(np.random.PCG64(seed))
    per = {c: [] for c in ("p1", "r1", "f1", "p0", "r0", "f0")}
    conf = dict(tp=0, fp=0, tn=0, fn=0)
    for _ in range(repeats):
        skf = StratifiedKFold(n_splits=folds, shuffle=True,
                              random_state=int(rng.integers(2 ** 31 - 1)))
        pred = np.empty_like(y)
        for tr, te in skf.split(X, y):
            model = clone(estimator).set_params(random_state=int(rng.integers(2 ** 31 - 1)))
            pred[te] = model.fit(X[tr], y[tr]).predict(X[te])
        tp = int(np.sum((pred == 1) & (y == 1)))
        fp = int(np.sum((pred == 1) & (y == 0)))
        tn = int(np.sum((pred == 0) & (y == 0)))
        fn = int(np.sum((pred == 0) & (y == 1)))
        for k, v in zip(("tp", "fp", "tn", "fn"), (tp, fp, tn, fn)):
            conf[k] += v
        for suffix, vals in (("1", precision_recall_f1(tp, fp, fn)),
                             ("0", precision_recall_f1(tn, fn, fp))):
            per["p" + suffix].append(vals[0])
            per["r" + suffix].append(vals[1])
            per["f" + suffix].append(vals[2])
    mean = {k: float(np.mean(v)) for k, v in per.items()}
    return EvalReport(
        precision={"benign": mean["p0"], "agd": mean["p1"]},
        recall={"benign": mean["r0"], "agd": mean["r1"]},
        f1={"benign": mean["f0"], "agd": mean["f1"]},
        f1_std=float(np.std(per["f1"])) if repeats > 1 else 0.0,
        confusion=conf,
        f1_runs=[float(v) for v in per["f1"]],
    )
