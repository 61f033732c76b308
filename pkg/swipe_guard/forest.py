"""Random forest of Gini decision trees with bootstrap samples and sqrt(dim) features per split."""
from concurrent.futures import ThreadPoolExecutor
import logging
import math
from typing import Optional

import numpy as np

from .errors import EmptyTrainingSet, SingleClassTrainingSet

LOGGER = logging.getLogger('swg.forest')

LEAF = -1


class DecisionTree:
    """Nodes in flat arrays; a leaf has feature == -1 and stores its bot fraction."""

    def __init__(self, feature, threshold, left, right, value):
        self._feature = np.array(feature, dtype=np.int64)
        self._threshold = np.array(threshold, dtype=np.float64)
        self._left = np.array(left, dtype=np.int64)
        self._right = np.array(right, dtype=np.int64)
        self._value = np.array(value, dtype=np.float64)

    @property
    def node_count(self) -> int:
        return len(self._feature)

    @classmethod
    def fit(cls, X: np.ndarray, y: np.ndarray, max_features: int, rng: np.random.Generator,
            max_depth: Optional[int] = None) -> 'DecisionTree':
        feature, threshold, left, right, value = [], [], [], [], []

        def new_node(idx):
            feature.append(LEAF)
            threshold.append(0.0)
            left.append(LEAF)
            right.append(LEAF)
            value.append(float(y[idx].mean()))
            return len(feature) - 1

        root = new_node(np.arange(len(y)))
        stack = [(root, np.arange(len(y)), 0)]
        while stack:
            node, idx, depth = stack.pop()
            labels = y[idx]
            if labels.min() == labels.max() or (max_depth is not None and depth >= max_depth):
                continue
            split = best_split(X[idx], labels, max_features, rng)
            if split is None:
                continue
            feat, thr = split
            go_left = X[idx, feat] <= thr
            feature[node], threshold[node] = feat, thr
            left_node = new_node(idx[go_left])
            right_node = new_node(idx[~go_left])
            left[node], right[node] = left_node, right_node
            stack.append((right_node, idx[~go_left], depth + 1))
            stack.append((left_node, idx[go_left], depth + 1))
        return cls(feature, threshold, left, right, value)

    def predict_value(self, X: np.ndarray) -> np.ndarray:
        out = np.empty(len(X))
        for row, sample in enumerate(X):
            node = 0
            while self._feature[node] != LEAF:
                node = self._left[node] if sample[self._feature[node]] <= self._threshold[node] else self._right[node]
            out[row] = self._value[node]
        return out

    def to_dict(self) -> dict:
        return {'feature': self._feature.tolist(), 'threshold': self._threshold.tolist(), 'left': self._left.tolist(),
                'right': self._right.tolist(), 'value': self._value.tolist()}

    @classmethod
    def from_dict(cls, doc: dict) -> 'DecisionTree':
        return cls(doc['feature'], doc['threshold'], doc['left'], doc['right'], doc['value'])


def best_split(X: np.ndarray, y: np.ndarray, max_features: int, rng: np.random.Generator):
    """Lowest weighted Gini split over a random feature subset.

    Features that cannot separate the node are skipped and further features are
    drawn until one can, so an impure node splits whenever any feature varies.
    """
    n_features = X.shape[1]
    order = rng.permutation(n_features)
    best = None
    best_score = math.inf
    visited = 0
    for feat in order:
        if visited >= max_features and best is not None:
            break
        column = X[:, feat]
        sort = np.argsort(column, kind='stable')
        values, labels = column[sort], y[sort]
        distinct = values[1:] != values[:-1]
        if not distinct.any():
            continue
        visited += 1
        count = len(labels)
        left_n = np.arange(1, count)
        left_pos = np.cumsum(labels)[:-1]
        right_n = count - left_n
        right_pos = labels.sum() - left_pos
        # 2pq is symmetric in the two labels
        left_gini = 2.0 * (left_pos / left_n) * ((left_n - left_pos) / left_n)
        right_gini = 2.0 * (right_pos / right_n) * ((right_n - right_pos) / right_n)
        score = (left_n * left_gini + right_n * right_gini) / count
        score = np.where(distinct, score, math.inf)
        pos = int(np.argmin(score))
        if score[pos] < best_score:
            best_score = score[pos]
            best = (int(feat), float(values[pos]))
    return best


def leaf_vote(value: np.ndarray) -> np.ndarray:
    return np.where(value > 0.5, 1.0, np.where(value < 0.5, 0.0, 0.5))


class RandomForest:
    def __init__(self, trees: list):
        self._trees = list(trees)

    @property
    def trees(self) -> list:
        return list(self._trees)

    @classmethod
    def fit(cls, X: np.ndarray, is_bot: np.ndarray, n_trees: int, seed=None, max_depth: Optional[int] = None,
            workers: int = 1) -> 'RandomForest':
        if len(X) == 0:
            raise EmptyTrainingSet('random forest training set is empty')
        y = np.asarray(is_bot, dtype=np.float64)
        if y.min() == y.max():
            raise SingleClassTrainingSet('random forest training needs both human and bot samples')
        max_features = max(1, int(math.sqrt(X.shape[1])))
        tree_seeds = np.random.SeedSequence(seed).spawn(n_trees)

        def grow(tree_seed):
            rng = np.random.default_rng(tree_seed)
            boot = rng.integers(0, len(X), size=len(X))
            return DecisionTree.fit(X[boot], y[boot], max_features, rng, max_depth)

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                trees = list(pool.map(grow, tree_seeds))
        else:
            trees = [grow(ss) for ss in tree_seeds]
        LOGGER.debug('grew %d trees with %d nodes on average', n_trees,
                     int(np.mean([tt.node_count for tt in trees])))
        return cls(trees)

    def bot_votes(self, X: np.ndarray) -> np.ndarray:
        """Mean tree vote; a leaf votes 1 for a bot majority, 0 for a human one and 0.5 when balanced."""
        X = np.atleast_2d(X)
        votes = np.array([leaf_vote(tree.predict_value(X)) for tree in self._trees])
        return votes.mean(axis=0)

    def to_dict(self) -> dict:
        return {'trees': [tt.to_dict() for tt in self._trees]}

    @classmethod
    def from_dict(cls, doc: dict) -> 'RandomForest':
        return cls([DecisionTree.from_dict(tt) for tt in doc['trees']])
