"""Global swipe features, accelerometer statistics, fusion and standardization.

Touch feature vector order: D, L, P, alpha, V, E. The accelerometer block
appends mean, median, rms and std for each of the x, y and z axes.
"""
from enum import Enum
import logging
from typing import NamedTuple, Optional, Sequence

import numpy as np
import pandas as pd

from .errors import (DegenerateTrace, EmptyTrace, EmptyTrainingSet, ModeMismatch, NonFiniteFeature,
                     ValidationError, ZeroDistance)
from .traces import AccelTrace, Corpus, Label, SwipeSample, TouchTrace

LOGGER = logging.getLogger('swg.features')

STD_FLOOR = 1e-9

TOUCH_COLUMNS = ('D', 'L', 'P', 'alpha', 'V', 'E')
ACCEL_COLUMNS = tuple(f'{stat}_{axis}' for axis in 'xyz' for stat in ('mean', 'median', 'rms', 'std'))


class FeatureMode(Enum):
    TOUCH_ONLY = 'touch'
    TOUCH_ACCEL = 'touch_accel'

    @property
    def dim(self) -> int:
        return 6 if self is FeatureMode.TOUCH_ONLY else 18

    @property
    def columns(self) -> tuple:
        return TOUCH_COLUMNS if self is FeatureMode.TOUCH_ONLY else TOUCH_COLUMNS + ACCEL_COLUMNS


class TouchFeatures(NamedTuple):
    duration: float
    distance: float
    displacement: float
    angle: float
    mean_velocity: float
    efficiency: float


class AccelFeatures(NamedTuple):
    mean_x: float
    median_x: float
    rms_x: float
    std_x: float
    mean_y: float
    median_y: float
    rms_y: float
    std_y: float
    mean_z: float
    median_z: float
    rms_z: float
    std_z: float


class FeatureVector(NamedTuple):
    mode: FeatureMode
    values: np.ndarray
    label: Optional[Label] = None

    @property
    def is_bot(self) -> bool:
        return self.label is not None and self.label.is_bot


def touch_features(trace: TouchTrace, zero_distance_efficiency: Optional[float] = None) -> TouchFeatures:
    """The six global features of a swipe.

    A swipe that ends where it started has no defined efficiency: it raises
    ZeroDistance unless `zero_distance_efficiency` supplies a sentinel.
    """
    x, y, t = trace.x, trace.y, trace.t
    if len(t) < 2 or np.any(np.diff(t) <= 0):
        raise DegenerateTrace('touch features need at least 2 points with increasing time')
    dx, dy, dt = np.diff(x), np.diff(y), np.diff(t)
    segments = np.hypot(dx, dy)
    duration = float(t[-1] - t[0])
    distance = float(np.hypot(x[-1] - x[0], y[-1] - y[0]))
    displacement = float(np.sum(segments))
    angle = float(np.arctan2(y[-1] - y[0], x[-1] - x[0]))
    mean_velocity = float(np.mean(segments / dt))
    if distance > 0:
        efficiency = displacement / distance
    elif zero_distance_efficiency is not None:
        efficiency = float(zero_distance_efficiency)
    else:
        raise ZeroDistance('swipe starts and ends at the same point')
    return TouchFeatures(duration, distance, displacement, angle, mean_velocity, efficiency)


def accel_features(trace: AccelTrace) -> AccelFeatures:
    if trace is None or len(trace) == 0:
        raise EmptyTrace('accelerometer features need at least one sample')
    stats = []
    for axis in (trace.ax, trace.ay, trace.az):
        stats.extend([float(np.mean(axis)), float(np.median(axis)), float(np.sqrt(np.mean(axis ** 2))),
                      float(np.std(axis))])
    return AccelFeatures(*stats)


def fuse_features(tf: TouchFeatures, af: Optional[AccelFeatures] = None, label: Optional[Label] = None
                  ) -> FeatureVector:
    values = list(tf) if af is None else list(tf) + list(af)
    arr = np.array(values, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise NonFiniteFeature(f'non-finite feature value in {arr.tolist()}')
    mode = FeatureMode.TOUCH_ONLY if af is None else FeatureMode.TOUCH_ACCEL
    arr.setflags(write=False)
    return FeatureVector(mode, arr, label)


def featurize_sample(sample: SwipeSample, mode: FeatureMode, zero_distance_efficiency: Optional[float] = None
                     ) -> FeatureVector:
    tf = touch_features(sample.touch, zero_distance_efficiency)
    af = None
    if mode is FeatureMode.TOUCH_ACCEL:
        if sample.accel is None:
            raise EmptyTrace('sample has no accelerometer trace')
        af = accel_features(sample.accel)
    return fuse_features(tf, af, sample.label)


def featurize_corpus(corpus: Corpus, mode: FeatureMode, zero_distance_efficiency: Optional[float] = None
                     ) -> tuple[list, list]:
    """Feature vectors of every usable sample plus the indices they came from."""
    vectors, kept = [], []
    rejected = 0
    for ii, sample in enumerate(corpus):
        try:
            vectors.append(featurize_sample(sample, mode, zero_distance_efficiency))
            kept.append(ii)
        except (ZeroDistance, EmptyTrace) as exc:
            rejected += 1
            LOGGER.debug('sample %d of "%s" rejected: %s', ii, corpus.provenance, exc)
    if rejected:
        LOGGER.warning('%d of %d samples of "%s" rejected during featurization', rejected, len(corpus),
                       corpus.provenance)
    return vectors, kept


class FeatureCache:
    """Feature matrices memoized per (corpus, mode)."""

    def __init__(self, zero_distance_efficiency: Optional[float] = None):
        self._zero_distance_efficiency = zero_distance_efficiency
        self._cache: dict = {}

    def matrix(self, corpus: Corpus, mode: FeatureMode) -> tuple[np.ndarray, np.ndarray]:
        return self._get_from_cache(self._cache, self._compute, corpus, mode)

    def _compute(self, corpus: Corpus, mode: FeatureMode) -> tuple[np.ndarray, np.ndarray]:
        vectors, kept = featurize_corpus(corpus, mode, self._zero_distance_efficiency)
        matrix = np.array([vv.values for vv in vectors]).reshape(len(vectors), mode.dim)
        return matrix, np.array(kept, dtype=np.int64)

    @staticmethod
    def _get_from_cache(cache: dict, func, *keys):
        key = tuple(id(kk) if isinstance(kk, Corpus) else kk for kk in keys)
        if key in cache:
            val = cache[key][1]
        else:
            val = func(*keys)
            # keep the corpus alive so its id is not reused
            cache[key] = (keys, val)
        return val


class Standardizer:
    def __init__(self, mode: FeatureMode, mean, std):
        self._mode = mode
        self._mean = np.array(mean, dtype=np.float64)
        self._std = np.maximum(np.array(std, dtype=np.float64), STD_FLOOR)
        if self._mean.shape != (mode.dim,) or self._std.shape != (mode.dim,):
            raise ModeMismatch(f'standardizer statistics must have {mode.dim} dimensions')
        self._mean.setflags(write=False)
        self._std.setflags(write=False)

    @property
    def mode(self) -> FeatureMode:
        return self._mode

    @property
    def mean(self) -> np.ndarray:
        return self._mean

    @property
    def std(self) -> np.ndarray:
        return self._std

    def transform(self, matrix: np.ndarray) -> np.ndarray:
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.shape[-1] != self._mode.dim:
            raise ModeMismatch(f'expected {self._mode.dim} features, got {matrix.shape[-1]}')
        return (matrix - self._mean) / self._std

    def to_dict(self) -> dict:
        return {'mode': self._mode.value, 'mean': self._mean.tolist(), 'std': self._std.tolist()}

    @classmethod
    def from_dict(cls, doc: dict) -> 'Standardizer':
        return cls(FeatureMode(doc['mode']), doc['mean'], doc['std'])


def fit_standardizer(train: Sequence[FeatureVector]) -> Standardizer:
    if not train:
        raise EmptyTrainingSet('cannot fit a standardizer on an empty training set')
    mode = train[0].mode
    if any(vv.mode is not mode for vv in train):
        raise ModeMismatch('training vectors mix feature modes')
    matrix = np.array([vv.values for vv in train])
    return Standardizer(mode, matrix.mean(axis=0), matrix.std(axis=0))


def fit_standardizer_matrix(mode: FeatureMode, matrix: np.ndarray) -> Standardizer:
    if len(matrix) == 0:
        raise EmptyTrainingSet('cannot fit a standardizer on an empty training set')
    return Standardizer(mode, matrix.mean(axis=0), matrix.std(axis=0))


def apply_standardizer(standardizer: Standardizer, vector: FeatureVector) -> FeatureVector:
    if vector.mode is not standardizer.mode:
        raise ModeMismatch(f'{vector.mode.value} vector given to a {standardizer.mode.value} standardizer')
    values = standardizer.transform(vector.values)
    values.setflags(write=False)
    return FeatureVector(vector.mode, values, vector.label)


def features_to_frame(vectors: Sequence[FeatureVector]) -> pd.DataFrame:
    if not vectors:
        raise ValidationError('no feature vectors to export')
    mode = vectors[0].mode
    if any(vv.mode is not mode for vv in vectors):
        raise ModeMismatch('cannot export vectors of mixed feature modes')
    frame = pd.DataFrame([vv.values for vv in vectors], columns=list(mode.columns))
    frame['label'] = [vv.label.value if vv.label is not None else '' for vv in vectors]
    return frame


def export_features_csv(vectors: Sequence[FeatureVector], path) -> None:
    features_to_frame(vectors).to_csv(path, index=False)
    LOGGER.info('wrote %d feature vectors to "%s"', len(vectors), path)
