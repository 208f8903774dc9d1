"""Random-forest binary classifier built from scratch on numpy.

Trees are grown on bootstrap resamples with Gini impurity, considering a
random subset of features at each split. Leaves store the fraction of
positive bootstrap samples they hold and the forest probability is the mean
of those fractions over trees.

Trees are kept as flat node arrays (the layout scikit-learn uses): node
``i`` is a leaf when ``feature[i] == -1``; otherwise samples with
``x[feature[i]] <= threshold[i]`` go to ``left[i]`` and the rest to
``right[i]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .features import FeatureVector, LabeledExample, example_arrays

FORMAT_MAGIC = "gridpop-forest"
FORMAT_VERSION = 1


class ForestError(ValueError):
    pass


def gini(n_pos: int, n_neg: int) -> float:
    """Gini impurity of a binary node."""
    n = n_pos + n_neg
    if n < 1:
        raise ForestError("gini of an empty node")
    p = n_pos / n
    return 1.0 - p * p - (1.0 - p) * (1.0 - p)


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_depth: int | None = None
    min_samples_leaf: int = 1
    # None means ceil(sqrt(n_features))
    features_per_split: int | None = None

    def resolved_mtry(self, n_features: int) -> int:
        if self.features_per_split is None:
            return math.ceil(math.sqrt(n_features))
        return max(1, min(self.features_per_split, n_features))


@dataclass
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray

    @classmethod
    def leaf(cls, positive_fraction: float, n_samples: int = 1) -> Tree:
        return cls(
            np.array([-1]),
            np.array([0.0]),
            np.array([-1]),
            np.array([-1]),
            np.array([float(positive_fraction)]),
            np.array([n_samples]),
        )

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def n_splits(self) -> int:
        return int((self.feature >= 0).sum())

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Index of the leaf reached by each row of ``X``."""
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        active = self.feature[node] >= 0
        while active.any():
            r, nd = rows[active], node[active]
            go_left = X[r, self.feature[nd]] <= self.threshold[nd]
            node[r] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.feature[node] >= 0
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]


@dataclass
class ForestModel:
    trees: list[Tree]
    n_features: int
    params: ForestParams = field(default_factory=ForestParams)
    seed: int = 0
    importances: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.importances is None:
            self.importances = np.zeros(self.n_features)

    def predict_proba_matrix(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ForestError(f"expected {self.n_features} features, got shape {X.shape}")
        if not self.trees:
            raise ForestError("model has no trees")
        total = np.zeros(len(X))
        for tree in self.trees:
            total += tree.predict(X)
        return total / len(self.trees)


def predict_proba(model: ForestModel, features: FeatureVector | Sequence[float]) -> float:
    """Probability that one dataset is popular."""
    row = features.values() if isinstance(features, FeatureVector) else tuple(features)
    if len(row) != model.n_features:
        raise ForestError(f"expected {model.n_features} features, got {len(row)}")
    return float(model.predict_proba_matrix(np.array([row], dtype=float))[0])


def feature_importances(model: ForestModel) -> np.ndarray:
    return np.array(model.importances, dtype=float)


def _best_split(xs: np.ndarray, ys: np.ndarray, min_leaf: int) -> tuple[float, float] | None:
    """Best threshold on one feature as (score, threshold), or None.

    ``score`` is sum over children of (pos^2 + neg^2) / n, which is the node
    size minus the weighted child Gini, so larger is better. The first
    maximum in ascending threshold order wins.
    """
    order = np.argsort(xs, kind="stable")
    xs, ys = xs[order], ys[order]
    n = len(xs)
    n_left = np.arange(1, n)
    pos_left = np.cumsum(ys)[:-1]
    valid = xs[:-1] != xs[1:]
    if min_leaf > 1:
        valid &= (n_left >= min_leaf) & (n - n_left >= min_leaf)
    if not valid.any():
        return None
    n_right = n - n_left
    pos_right = ys.sum() - pos_left
    neg_left = n_left - pos_left
    neg_right = n_right - pos_right
    score = (pos_left**2 + neg_left**2) / n_left + (pos_right**2 + neg_right**2) / n_right
    score = np.where(valid, score, -np.inf)
    i = int(np.argmax(score))
    lo, hi = xs[i], xs[i + 1]
    thr = (lo + hi) / 2.0
    if not lo <= thr < hi:
        thr = lo
    return float(score[i]), float(thr)


def grow_tree(
    X: np.ndarray,
    y: np.ndarray,
    params: ForestParams,
    rng: np.random.Generator,
    sample: np.ndarray | None = None,
) -> tuple[Tree, np.ndarray]:
    """Grow one tree on the rows ``sample`` (a bootstrap draw from ``rng`` if None).

    Returns the tree and its per-feature impurity decrease, weighted by the
    share of the sample reaching each split.
    """
    n, n_features = X.shape
    mtry = params.resolved_mtry(n_features)
    min_leaf = params.min_samples_leaf
    max_depth = params.max_depth
    boot = rng.integers(0, n, size=n) if sample is None else np.asarray(sample)
    gains = np.zeros(n_features)

    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    value: list[float] = []
    count: list[int] = []

    def new_node(idx: np.ndarray) -> int:
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(float(y[idx].mean()))
        count.append(len(idx))
        return len(feature) - 1

    stack = [(new_node(boot), boot, 0)]
    while stack:
        node, idx, depth = stack.pop()
        m = len(idx)
        pos = int(y[idx].sum())
        if pos == 0 or pos == m or m < 2 * min_leaf:
            continue
        if max_depth is not None and depth >= max_depth:
            continue
        Xn = X[idx]
        yn = y[idx]
        splittable = np.flatnonzero(Xn.min(axis=0) < Xn.max(axis=0))
        if len(splittable) == 0:
            continue
        k = min(mtry, len(splittable))
        candidates = np.sort(rng.choice(splittable, size=k, replace=False))
        best = None
        for f in candidates:
            found = _best_split(Xn[:, f], yn, min_leaf)
            if found is not None and (best is None or found[0] > best[0]):
                best = (found[0], found[1], int(f))
        if best is None:
            continue
        score, thr, f = best
        gains[f] += max(0.0, score - (pos * pos + (m - pos) ** 2) / m)
        mask = Xn[:, f] <= thr
        feature[node] = f
        threshold[node] = thr
        li, ri = idx[mask], idx[~mask]
        left[node] = new_node(li)
        right[node] = new_node(ri)
        # right pushed first so the left subtree is numbered first
        stack.append((right[node], ri, depth + 1))
        stack.append((left[node], li, depth + 1))

    tree = Tree(
        np.array(feature, dtype=np.int64),
        np.array(threshold, dtype=float),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(value, dtype=float),
        np.array(count, dtype=np.int64),
    )
    return tree, gains / len(boot)


def fit_arrays(X: np.ndarray, y: np.ndarray, params: ForestParams, seed: int) -> ForestModel:
    """Train on a feature matrix and 0/1 labels."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or len(X) == 0:
        raise ForestError("training needs a non-empty 2-D feature matrix")
    if len(X) < 2:
        raise ForestError("training needs at least two examples")
    if len(y) != len(X):
        raise ForestError("feature rows and labels differ in length")
    if not np.isin(y, (0, 1)).all():
        raise ForestError("labels must be 0 or 1")
    if params.n_trees < 1 or params.min_samples_leaf < 1:
        raise ForestError("n_trees and min_samples_leaf must be >= 1")

    # Canonical row order makes the model independent of input order.
    order = np.lexsort((y,) + tuple(X[:, j] for j in reversed(range(X.shape[1]))))
    X, y = X[order], y[order]

    streams = np.random.SeedSequence(seed).spawn(params.n_trees)
    trees, gains = [], np.zeros(X.shape[1])
    for ss in streams:
        tree, g = grow_tree(X, y, params, np.random.default_rng(ss))
        trees.append(tree)
        gains += g
    gains /= params.n_trees
    total = gains.sum()
    importances = gains / total if total > 0 else np.zeros_like(gains)
    return ForestModel(trees, X.shape[1], params, seed, importances)


def train(examples: Sequence[LabeledExample], params: ForestParams | None = None, seed: int = 0) -> ForestModel:
    """Train a forest on labeled feature vectors."""
    if not examples:
        raise ForestError("no training examples")
    arity = {len(e.features.values()) for e in examples}
    if len(arity) != 1:
        raise ForestError("feature vectors of inconsistent arity")
    X, y = example_arrays(examples)
    return fit_arrays(X, y, params or ForestParams(), seed)


def save_model(model: ForestModel, path: str | Path, comment: str | None = None) -> None:
    """Write the model as a line-oriented text file (see docs/formats.md)."""
    p = model.params
    lines = []
    if comment:
        lines.append(f"# {comment}")
    lines += [
        f"{FORMAT_MAGIC} {FORMAT_VERSION}",
        f"n_features {model.n_features}",
        f"n_trees {p.n_trees}",
        f"max_depth {'none' if p.max_depth is None else p.max_depth}",
        f"min_samples_leaf {p.min_samples_leaf}",
        f"features_per_split {'auto' if p.features_per_split is None else p.features_per_split}",
        f"seed {model.seed}",
        "importances " + " ".join(repr(float(v)) for v in model.importances),
    ]
    for t, tree in enumerate(model.trees):
        lines.append(f"tree {t} {tree.n_nodes}")
        for i in range(tree.n_nodes):
            if tree.feature[i] < 0:
                lines.append(f"{i} leaf {float(tree.value[i])!r} {int(tree.n_samples[i])}")
            else:
                lines.append(
                    f"{i} split {int(tree.feature[i])} {float(tree.threshold[i])!r} "
                    f"{int(tree.left[i])} {int(tree.right[i])} {int(tree.n_samples[i])} "
                    f"{float(tree.value[i])!r}"
                )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> ForestModel:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"model not found: {path}")
    lines = [ln for ln in path.read_text(encoding="utf-8").splitlines() if ln and not ln.startswith("#")]
    it = iter(lines)
    try:
        magic, version = next(it).split()
        if magic != FORMAT_MAGIC or int(version) != FORMAT_VERSION:
            raise ForestError(f"{path}: not a {FORMAT_MAGIC} v{FORMAT_VERSION} file")
        header = {}
        for _ in range(7):
            key, *rest = next(it).split()
            header[key] = rest
        n_features = int(header["n_features"][0])
        depth = header["max_depth"][0]
        mtry = header["features_per_split"][0]
        params = ForestParams(
            n_trees=int(header["n_trees"][0]),
            max_depth=None if depth == "none" else int(depth),
            min_samples_leaf=int(header["min_samples_leaf"][0]),
            features_per_split=None if mtry == "auto" else int(mtry),
        )
        importances = np.array([float(v) for v in header["importances"]])
        trees = []
        for _ in range(params.n_trees):
            tag, _, n_nodes = next(it).split()
            if tag != "tree":
                raise ForestError(f"{path}: expected tree record")
            n_nodes = int(n_nodes)
            arrs = {
                "feature": np.full(n_nodes, -1, dtype=np.int64),
                "threshold": np.zeros(n_nodes),
                "left": np.full(n_nodes, -1, dtype=np.int64),
                "right": np.full(n_nodes, -1, dtype=np.int64),
                "value": np.zeros(n_nodes),
                "n_samples": np.zeros(n_nodes, dtype=np.int64),
            }
            for _ in range(n_nodes):
                parts = next(it).split()
                i = int(parts[0])
                if parts[1] == "leaf":
                    arrs["value"][i] = float(parts[2])
                    arrs["n_samples"][i] = int(parts[3])
                else:
                    arrs["feature"][i] = int(parts[2])
                    arrs["threshold"][i] = float(parts[3])
                    arrs["left"][i] = int(parts[4])
                    arrs["right"][i] = int(parts[5])
                    arrs["n_samples"][i] = int(parts[6])
                    arrs["value"][i] = float(parts[7])
            trees.append(Tree(**arrs))
    except (StopIteration, KeyError, ValueError, IndexError) as exc:
        if isinstance(exc, ForestError):
            raise
        raise ForestError(f"{path}: malformed model file ({exc})") from None
    return ForestModel(trees, n_features, params, int(header["seed"][0]), importances)
