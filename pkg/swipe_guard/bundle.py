"""Trained classifiers packaged for serving, and the per-request verification they back.

A bundle holds either one touch_accel model (feature concatenation) or a touch
model plus a touch_accel model whose bot scores are averaged. The fused score
is compared once against tau: bot iff score >= tau.
"""
from enum import Enum
import hashlib
import json
import logging
from pathlib import Path
from typing import NamedTuple, Optional

import numpy as np

from .classifiers import ClassifierModel
from .errors import (CorruptBundle, MalformedRequest, MissingPath, ModeMismatch, NonFiniteFeature, ValidationError,
                     VersionMismatch)
from .features import FeatureMode, accel_features, fuse_features, touch_features
from .traces import normalize_accel, normalize_touch

LOGGER = logging.getLogger('swg.bundle')

FORMAT_VERSION = 1


class FusionMode(Enum):
    FEATURE_CONCAT = 'feature_concat'
    SCORE_MEAN = 'score_mean'


class VerifyRequest(NamedTuple):
    touch: list
    screen: tuple
    accel: Optional[list] = None


class VerifyResponse(NamedTuple):
    bot_score: float
    decision: str
    tau: float
    model_version: str


def _checksum(doc: dict) -> str:
    return hashlib.sha256(json.dumps(doc, sort_keys=True).encode('utf-8')).hexdigest()


class ModelBundle:
    def __init__(self, models: dict, fusion_mode: FusionMode = FusionMode.FEATURE_CONCAT, tau: float = 0.5,
                 touch_weight: float = 0.5, zero_distance_efficiency: Optional[float] = None):
        if not models:
            raise ValidationError('a bundle needs at least one model')
        if not 0.0 <= tau <= 1.0:
            raise ValidationError(f'tau must be in [0, 1], got {tau}')
        if not 0.0 <= touch_weight <= 1.0:
            raise ValidationError(f'touch_weight must be in [0, 1], got {touch_weight}')
        if fusion_mode is FusionMode.SCORE_MEAN:
            if set(models) != {'touch', 'accel'}:
                raise ValidationError('score_mean fusion needs a "touch" and an "accel" model')
            touch_mode, accel_mode = models['touch'].mode, models['accel'].mode
            if touch_mode is not FeatureMode.TOUCH_ONLY or accel_mode is not FeatureMode.TOUCH_ACCEL:
                raise ModeMismatch('score_mean fusion needs a touch model and a touch_accel model')
        elif len(models) != 1:
            raise ValidationError('feature_concat fusion takes a single model')
        self._models = dict(models)
        self._fusion_mode = fusion_mode
        self._tau = float(tau)
        self._touch_weight = float(touch_weight)
        self._zero_distance_efficiency = zero_distance_efficiency
        self._version = None

    @property
    def models(self) -> dict:
        return dict(self._models)

    @property
    def fusion_mode(self) -> FusionMode:
        return self._fusion_mode

    @property
    def tau(self) -> float:
        return self._tau

    @property
    def touch_weight(self) -> float:
        return self._touch_weight

    @property
    def needs_accel(self) -> bool:
        return any(mm.mode is FeatureMode.TOUCH_ACCEL for mm in self._models.values())

    @property
    def model_version(self) -> str:
        if self._version is None:
            self._version = _checksum(self.to_dict())[:12]
        return self._version

    def with_tau(self, tau: float) -> 'ModelBundle':
        return ModelBundle(self._models, self._fusion_mode, tau, self._touch_weight, self._zero_distance_efficiency)

    def to_dict(self) -> dict:
        return {
            'fusion_mode': self._fusion_mode.value,
            'tau': self._tau,
            'touch_weight': self._touch_weight,
            'zero_distance_efficiency': self._zero_distance_efficiency,
            'models': {name: model.to_dict() for name, model in sorted(self._models.items())},
        }

    @classmethod
    def from_dict(cls, doc: dict) -> 'ModelBundle':
        models = {name: ClassifierModel.from_dict(mm) for name, mm in doc['models'].items()}
        return cls(models, FusionMode(doc['fusion_mode']), doc['tau'], doc.get('touch_weight', 0.5),
                   doc.get('zero_distance_efficiency'))

    def bot_score(self, request: VerifyRequest) -> float:
        touch = normalize_touch(request.touch, request.screen[0], request.screen[1])
        accel = None
        if self.needs_accel:
            if not request.accel:
                raise MalformedRequest('this bundle needs accelerometer samples')
            accel = normalize_accel(request.accel, request.touch[0][2], touch.duration)
            if accel is None:
                raise MalformedRequest('no usable accelerometer samples')
        tf = touch_features(touch, self._zero_distance_efficiency)
        scores = {}
        for name, model in self._models.items():
            vector = fuse_features(tf, accel_features(accel) if model.mode is FeatureMode.TOUCH_ACCEL else None)
            scores[name] = float(model.probability(vector.values)[0])
        if self._fusion_mode is FusionMode.SCORE_MEAN:
            score = self._touch_weight * scores['touch'] + (1.0 - self._touch_weight) * scores['accel']
        else:
            score = next(iter(scores.values()))
        if not np.isfinite(score):
            raise NonFiniteFeature('bot score is not finite')
        return score


def parse_request(body) -> VerifyRequest:
    """Check the shape of a JSON verification body."""
    if not isinstance(body, dict):
        raise MalformedRequest('request body must be a JSON object')
    touch, screen, accel = body.get('touch'), body.get('screen'), body.get('accel')
    if not isinstance(touch, list) or len(touch) < 2:
        raise MalformedRequest('"touch" must list at least 2 [x_px, y_px, t_ms] points')
    if not isinstance(screen, (list, tuple)) or len(screen) != 2:
        raise MalformedRequest('"screen" must be [width_px, height_px]')
    rows = [('touch', touch, 3)] + ([('accel', accel, 4)] if accel else [])
    for name, points, width in rows:
        if not isinstance(points, list):
            raise MalformedRequest(f'"{name}" must be a list')
        for point in points:
            if (not isinstance(point, (list, tuple)) or len(point) != width
                    or not all(isinstance(vv, (int, float)) and not isinstance(vv, bool) for vv in point)):
                raise MalformedRequest(f'every "{name}" entry must hold {width} numbers')
    return VerifyRequest(touch, tuple(screen), accel or None)


def verify(bundle: ModelBundle, request: VerifyRequest) -> VerifyResponse:
    score = bundle.bot_score(request)
    decision = 'bot' if score >= bundle.tau else 'human'
    return VerifyResponse(score, decision, bundle.tau, bundle.model_version)


def save_bundle(bundle: ModelBundle, path) -> None:
    doc = bundle.to_dict()
    envelope = {'format_version': FORMAT_VERSION, 'checksum': _checksum(doc), 'bundle': doc}
    Path(path).write_text(json.dumps(envelope, sort_keys=True), encoding='utf-8')
    LOGGER.info('saved %s bundle with %s to "%s"', bundle.fusion_mode.value, ', '.join(sorted(bundle.models)),
                path)


def load_bundle(path) -> ModelBundle:
    src = Path(path)
    if not src.is_file():
        raise MissingPath(f'bundle "{path}" does not exist')
    try:
        envelope = json.loads(src.read_text(encoding='utf-8'))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CorruptBundle(f'bundle "{path}" is not valid JSON: {exc}')
    if not isinstance(envelope, dict) or 'bundle' not in envelope or 'checksum' not in envelope:
        raise CorruptBundle(f'bundle "{path}" lacks its envelope')
    if envelope.get('format_version') != FORMAT_VERSION:
        raise VersionMismatch(f'bundle format version {envelope.get("format_version")} is not {FORMAT_VERSION}')
    if _checksum(envelope['bundle']) != envelope['checksum']:
        raise CorruptBundle(f'bundle "{path}" failed its checksum')
    return ModelBundle.from_dict(envelope['bundle'])
