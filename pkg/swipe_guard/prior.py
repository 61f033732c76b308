import json
import logging
from pathlib import Path
from typing import NamedTuple, Optional

import numpy as np

from .errors import EmptyCorpus, MissingPath, VersionMismatch, ZeroDistance
from .features import touch_features
from .traces import ACCEL_RATE_HZ, Corpus, Label

LOGGER = logging.getLogger('swg.prior')

FORMAT_VERSION = 1
DURATION_STD_FLOOR = 1e-6
QUANTILE_POINTS = 101


class Gaussian(NamedTuple):
    mean: float
    std: float


class HumanSwipePrior(NamedTuple):
    duration: Gaussian
    length_quantiles: np.ndarray
    angle_quantiles: np.ndarray
    start_histogram: np.ndarray
    accel: Optional[tuple]
    n_values: np.ndarray
    n_probs: np.ndarray
    accel_rate_hz: float = ACCEL_RATE_HZ

    @property
    def grid(self) -> int:
        return self.start_histogram.shape[0]

    def to_dict(self) -> dict:
        return {
            'format_version': FORMAT_VERSION,
            'duration': list(self.duration),
            'length_quantiles': self.length_quantiles.tolist(),
            'angle_quantiles': self.angle_quantiles.tolist(),
            'start_histogram': self.start_histogram.tolist(),
            'accel': [list(gg) for gg in self.accel] if self.accel is not None else None,
            'n_values': self.n_values.tolist(),
            'n_probs': self.n_probs.tolist(),
            'accel_rate_hz': self.accel_rate_hz,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> 'HumanSwipePrior':
        version = doc.get('format_version')
        if version != FORMAT_VERSION:
            raise VersionMismatch(f'prior format version {version} is not supported (expected {FORMAT_VERSION})')
        accel = doc.get('accel')
        return cls(
            duration=Gaussian(*doc['duration']),
            length_quantiles=np.array(doc['length_quantiles'], dtype=np.float64),
            angle_quantiles=np.array(doc['angle_quantiles'], dtype=np.float64),
            start_histogram=np.array(doc['start_histogram'], dtype=np.float64),
            accel=tuple(Gaussian(*gg) for gg in accel) if accel is not None else None,
            n_values=np.array(doc['n_values'], dtype=np.int64),
            n_probs=np.array(doc['n_probs'], dtype=np.float64),
            accel_rate_hz=float(doc.get('accel_rate_hz', ACCEL_RATE_HZ)),
        )


def quantile_table(values: np.ndarray, points: int = QUANTILE_POINTS) -> np.ndarray:
    return np.quantile(np.asarray(values, dtype=np.float64), np.linspace(0.0, 1.0, points))


def sample_quantile(table: np.ndarray, u: float) -> float:
    """Inverse-CDF draw from an empirical quantile table."""
    return float(np.interp(u, np.linspace(0.0, 1.0, len(table)), table))


def fit_prior(corpus: Corpus, grid: int = 20, accel_rate_hz: float = ACCEL_RATE_HZ) -> HumanSwipePrior:
    humans = [ss for ss in corpus if ss.label is Label.HUMAN]
    feats, starts, lengths_n = [], [], []
    for sample in humans:
        try:
            feats.append(touch_features(sample.touch))
        except ZeroDistance:
            continue
        starts.append((sample.touch.x[0], sample.touch.y[0]))
        lengths_n.append(len(sample.touch))
    if len(feats) < 2:
        raise EmptyCorpus(f'fitting a prior needs at least 2 human swipes that move, got {len(feats)}')

    durations = np.array([ff.duration for ff in feats])
    duration_std = float(np.std(durations))
    if duration_std < DURATION_STD_FLOOR:
        LOGGER.warning('degenerate prior: duration std %.3g floored at %g s', duration_std, DURATION_STD_FLOOR)
        duration_std = DURATION_STD_FLOOR

    starts = np.array(starts)
    hist, _, _ = np.histogram2d(starts[:, 0], starts[:, 1], bins=grid, range=[[0.0, 1.0], [0.0, 1.0]])
    hist = hist / hist.sum()

    n_values, n_counts = np.unique(np.array(lengths_n), return_counts=True)

    accel = None
    accel_samples = [ss.accel.channels for ss in humans if ss.accel is not None]
    if accel_samples:
        pooled = np.concatenate(accel_samples, axis=0)
        accel = tuple(Gaussian(float(np.mean(pooled[:, ax])), float(np.std(pooled[:, ax]))) for ax in range(3))
    else:
        LOGGER.warning('no accelerometer data in "%s"; the prior cannot synthesize accelerometer traces',
                       corpus.provenance)

    prior = HumanSwipePrior(
        duration=Gaussian(float(np.mean(durations)), duration_std),
        length_quantiles=quantile_table([ff.distance for ff in feats]),
        angle_quantiles=quantile_table([ff.angle for ff in feats]),
        start_histogram=hist,
        accel=accel,
        n_values=n_values.astype(np.int64),
        n_probs=n_counts / n_counts.sum(),
        accel_rate_hz=float(accel_rate_hz),
    )
    LOGGER.info('fitted prior on %d human swipes: duration %.3f +/- %.3f s', len(feats), prior.duration.mean,
                prior.duration.std)
    return prior


def save_prior(prior: HumanSwipePrior, path) -> None:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(prior.to_dict()), encoding='utf-8')


def load_prior(path) -> HumanSwipePrior:
    src = Path(path)
    if not src.is_file():
        raise MissingPath(f'prior "{path}" does not exist')
    return HumanSwipePrior.from_dict(json.loads(src.read_text(encoding='utf-8')))
