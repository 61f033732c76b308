"""Human-vs-bot classifiers over standardized feature vectors.

Every model reports a bot score where higher means more bot-like. The binary
models decide bot at score >= 0.5; the one-class SVM reports an anomaly score
and decides bot above 0.
"""
from enum import Enum
import logging
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .errors import (ConfigContradiction, EmptyTrainingSet, ModeMismatch, NonFiniteFeature, SingleClassTrainingSet,
                     ValidationError, VersionMismatch)
from .features import FeatureMode, FeatureVector, Standardizer, fit_standardizer_matrix
from .forest import RandomForest
from .knn import Knn
from .lstm import sigmoid
from .settings import check_keys
from .svm import OneClassSvm, SvmRbf

LOGGER = logging.getLogger('swg.classifiers')

FORMAT_VERSION = 1


class ClassifierKind(Enum):
    KNN = 'knn'
    RANDOM_FOREST = 'random_forest'
    SVM_RBF = 'svm_rbf'
    ONE_CLASS_SVM = 'one_class_svm'
    GAN_DISCRIMINATOR = 'gan_discriminator'


class ClassifierSpec(NamedTuple):
    kind: ClassifierKind = ClassifierKind.KNN
    k: int = 10
    n_trees: int = 100
    max_depth: Optional[int] = None
    svm_C: float = 1.0
    # None means 1 / feature dimension
    rbf_gamma: Optional[float] = None
    ocsvm_nu: float = 0.1
    seed: int = 0
    workers: int = 1

    def validate(self) -> 'ClassifierSpec':
        if self.k < 1:
            raise ValidationError(f'k must be >= 1, got {self.k}')
        if self.n_trees < 1:
            raise ValidationError(f'n_trees must be >= 1, got {self.n_trees}')
        if self.max_depth is not None and self.max_depth < 1:
            raise ValidationError(f'max_depth must be >= 1, got {self.max_depth}')
        if not self.svm_C > 0:
            raise ValidationError(f'svm_C must be > 0, got {self.svm_C}')
        if self.rbf_gamma is not None and not self.rbf_gamma > 0:
            raise ValidationError(f'rbf_gamma must be > 0, got {self.rbf_gamma}')
        if not 0 < self.ocsvm_nu <= 1:
            raise ValidationError(f'ocsvm_nu must be in (0, 1], got {self.ocsvm_nu}')
        return self

    def gamma(self, dim: int) -> float:
        return self.rbf_gamma if self.rbf_gamma is not None else 1.0 / dim

    @classmethod
    def from_table(cls, table: dict) -> 'ClassifierSpec':
        check_keys('classifier', table, cls._fields)
        values = dict(table)
        if 'kind' in values:
            try:
                values['kind'] = ClassifierKind(values['kind'])
            except ValueError:
                raise ValidationError(f'unknown classifier kind "{values["kind"]}" '
                                      f'(choose from {", ".join(kk.value for kk in ClassifierKind)})')
        return cls(**values).validate()

    def to_dict(self) -> dict:
        doc = self._asdict()
        doc['kind'] = self.kind.value
        return doc


def tuning_grid(spec: ClassifierSpec, dim: int) -> list[ClassifierSpec]:
    """Candidate hyperparameters tried on the development split."""
    if spec.kind is ClassifierKind.KNN:
        return [spec._replace(k=kk) for kk in (5, 10, 20)]
    if spec.kind is ClassifierKind.RANDOM_FOREST:
        return [spec._replace(n_trees=nn) for nn in (50, 100, 200)]
    gammas = [scale / dim for scale in (0.1, 1.0, 10.0)]
    if spec.kind is ClassifierKind.SVM_RBF:
        return [spec._replace(svm_C=cc, rbf_gamma=gg) for cc in (0.1, 1.0, 10.0) for gg in gammas]
    if spec.kind is ClassifierKind.ONE_CLASS_SVM:
        return [spec._replace(rbf_gamma=gg) for gg in gammas]
    return [spec]


_PAYLOADS = {
    ClassifierKind.KNN: Knn,
    ClassifierKind.RANDOM_FOREST: RandomForest,
    ClassifierKind.SVM_RBF: SvmRbf,
    ClassifierKind.ONE_CLASS_SVM: OneClassSvm,
}


class ClassifierModel:
    def __init__(self, spec: ClassifierSpec, standardizer: Standardizer, payload):
        expected = _PAYLOADS.get(spec.kind)
        if expected is None or not isinstance(payload, expected):
            raise ValidationError(f'payload {type(payload).__name__} does not match classifier kind '
                                  f'{spec.kind.value}')
        self._spec = spec
        self._standardizer = standardizer
        self._payload = payload

    @property
    def spec(self) -> ClassifierSpec:
        return self._spec

    @property
    def kind(self) -> ClassifierKind:
        return self._spec.kind

    @property
    def mode(self) -> FeatureMode:
        return self._standardizer.mode

    @property
    def standardizer(self) -> Standardizer:
        return self._standardizer

    @property
    def payload(self):
        return self._payload

    @property
    def threshold(self) -> float:
        return 0.0 if self.kind is ClassifierKind.ONE_CLASS_SVM else 0.5

    def score_matrix(self, matrix: np.ndarray) -> np.ndarray:
        """Bot scores of raw (unstandardized) feature rows."""
        X = self._standardizer.transform(np.atleast_2d(matrix))
        if self.kind is ClassifierKind.KNN:
            return self._payload.bot_fraction(X)
        if self.kind is ClassifierKind.RANDOM_FOREST:
            return self._payload.bot_votes(X)
        if self.kind is ClassifierKind.SVM_RBF:
            return sigmoid(self._payload.decision(X))
        return self._payload.anomaly_score(X)

    def decide(self, matrix: np.ndarray) -> np.ndarray:
        """True where a row is classified bot."""
        scores = self.score_matrix(matrix)
        if self.kind is ClassifierKind.ONE_CLASS_SVM:
            return scores > self.threshold
        return scores >= self.threshold

    def probability(self, matrix: np.ndarray) -> np.ndarray:
        """Bot scores mapped into [0, 1] so a 0.5 threshold applies to every kind."""
        scores = self.score_matrix(matrix)
        if self.kind is ClassifierKind.ONE_CLASS_SVM:
            return sigmoid(scores)
        return scores

    def to_dict(self) -> dict:
        return {
            'format_version': FORMAT_VERSION,
            'kind': self.kind.value,
            'spec': self._spec.to_dict(),
            'standardizer': self._standardizer.to_dict(),
            'payload': self._payload.to_dict(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> 'ClassifierModel':
        if doc.get('format_version') != FORMAT_VERSION:
            raise VersionMismatch(f'classifier format version {doc.get("format_version")} is not {FORMAT_VERSION}')
        spec = ClassifierSpec.from_table(doc['spec'])
        payload = _PAYLOADS[spec.kind].from_dict(doc['payload'])
        return cls(spec, Standardizer.from_dict(doc['standardizer']), payload)


def _vectors_to_matrix(vectors: Sequence[FeatureVector]) -> tuple[FeatureMode, np.ndarray, np.ndarray]:
    if not vectors:
        raise EmptyTrainingSet('classifier training set is empty')
    mode = vectors[0].mode
    if any(vv.mode is not mode for vv in vectors):
        raise ModeMismatch('training vectors mix feature modes')
    if any(vv.label is None for vv in vectors):
        raise ValidationError('every training vector needs a label')
    matrix = np.array([vv.values for vv in vectors]).reshape(len(vectors), mode.dim)
    return mode, matrix, np.array([vv.is_bot for vv in vectors])


def fit_classifier_matrix(spec: ClassifierSpec, mode: FeatureMode, matrix: np.ndarray,
                          is_bot: np.ndarray) -> ClassifierModel:
    """Fit the standardizer on `matrix` and train the classifier named by `spec` on the standardized rows."""
    spec = spec.validate()
    if len(matrix) == 0:
        raise EmptyTrainingSet('classifier training set is empty')
    if not np.all(np.isfinite(matrix)):
        raise NonFiniteFeature('training matrix holds non-finite values')
    is_bot = np.asarray(is_bot, dtype=bool)
    standardizer = fit_standardizer_matrix(mode, matrix)
    X = standardizer.transform(matrix)
    if spec.kind is ClassifierKind.ONE_CLASS_SVM:
        if is_bot.any():
            raise ConfigContradiction('the one-class SVM trains on human samples only')
        payload = OneClassSvm.fit(X, spec.ocsvm_nu, spec.gamma(mode.dim))
    elif spec.kind is ClassifierKind.GAN_DISCRIMINATOR:
        raise ValidationError('the GAN discriminator is trained with train-gan, not as a feature classifier')
    else:
        if is_bot.all() or not is_bot.any():
            raise SingleClassTrainingSet(f'{spec.kind.value} training needs both human and bot samples')
        if spec.kind is ClassifierKind.KNN:
            payload = Knn(X, is_bot, spec.k)
        elif spec.kind is ClassifierKind.RANDOM_FOREST:
            payload = RandomForest.fit(X, is_bot, spec.n_trees, spec.seed, spec.max_depth, spec.workers)
        else:
            payload = SvmRbf.fit(X, is_bot, spec.svm_C, spec.gamma(mode.dim))
    LOGGER.debug('trained %s on %d %s vectors', spec.kind.value, len(matrix), mode.value)
    return ClassifierModel(spec, standardizer, payload)


def train_classifier(spec: ClassifierSpec, train: Sequence[FeatureVector]) -> ClassifierModel:
    mode, matrix, is_bot = _vectors_to_matrix(train)
    if spec.kind is ClassifierKind.ONE_CLASS_SVM:
        raise ValidationError('use train_one_class for the one-class SVM')
    return fit_classifier_matrix(spec, mode, matrix, is_bot)


def train_one_class(human_train: Sequence[FeatureVector], spec: ClassifierSpec = ClassifierSpec()
                    ) -> ClassifierModel:
    mode, matrix, is_bot = _vectors_to_matrix(human_train)
    return fit_classifier_matrix(spec._replace(kind=ClassifierKind.ONE_CLASS_SVM), mode, matrix, is_bot)


def predict_bot_score(model: ClassifierModel, vector: FeatureVector) -> float:
    if vector.mode is not model.mode:
        raise ModeMismatch(f'{vector.mode.value} vector given to a {model.mode.value} model')
    return float(model.score_matrix(vector.values)[0])


def predict_bot_scores(model: ClassifierModel, vectors: Sequence[FeatureVector]) -> np.ndarray:
    if any(vv.mode is not model.mode for vv in vectors):
        raise ModeMismatch(f'vectors do not match the {model.mode.value} model')
    if not vectors:
        return np.empty(0)
    return model.score_matrix(np.array([vv.values for vv in vectors]))
