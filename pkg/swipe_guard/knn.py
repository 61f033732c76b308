import numpy as np

from .errors import EmptyTrainingSet, KExceedsTrainingSize


class Knn:
    """k nearest neighbours by Euclidean distance; distance ties go to the lower training index."""

    def __init__(self, X, is_bot, k: int):
        self._X = np.array(X, dtype=np.float64)
        self._is_bot = np.array(is_bot, dtype=bool)
        self._k = int(k)
        if len(self._X) == 0:
            raise EmptyTrainingSet('KNN training set is empty')

    @property
    def k(self) -> int:
        return self._k

    def bot_fraction(self, X: np.ndarray) -> np.ndarray:
        if self._k > len(self._X):
            raise KExceedsTrainingSize(f'k={self._k} exceeds the {len(self._X)} training samples')
        X = np.atleast_2d(X)
        dist = np.sqrt(np.sum((X[:, None, :] - self._X[None, :, :]) ** 2, axis=2))
        nearest = np.argsort(dist, axis=1, kind='stable')[:, :self._k]
        return self._is_bot[nearest].mean(axis=1)

    def to_dict(self) -> dict:
        return {'X': self._X.tolist(), 'is_bot': self._is_bot.tolist(), 'k': self._k}

    @classmethod
    def from_dict(cls, doc: dict) -> 'Knn':
        return cls(np.array(doc['X']).reshape(len(doc['is_bot']), -1), doc['is_bot'], doc['k'])
