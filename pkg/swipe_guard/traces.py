"""Touch and accelerometer traces, the samples that pair them, and corpora."""
from enum import Enum
import logging
from typing import NamedTuple, Optional, Sequence, Union

import numpy as np

from .errors import DegenerateTrace, EmptyCorpus, EmptyTrace, ZeroScreen

LOGGER = logging.getLogger('swg.traces')

ACCEL_RATE_HZ = 200.0


class Label(Enum):
    HUMAN = 'human'
    HANDCRAFTED_BOT = 'handcrafted_bot'
    GAN_BOT = 'gan_bot'

    @property
    def is_bot(self) -> bool:
        return self is not Label.HUMAN


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    arr.setflags(write=False)
    return arr


class TouchTrace:
    """Normalized swipe: x and y as screen fractions, t in seconds from the first point."""

    def __init__(self, x, y, t):
        self._x = _frozen(x)
        self._y = _frozen(y)
        self._t = _frozen(t)
        if not (self._x.ndim == self._y.ndim == self._t.ndim == 1) or not (
                len(self._x) == len(self._y) == len(self._t)):
            raise DegenerateTrace('touch channels must be 1-D and of equal length')
        if len(self._t) < 2:
            raise DegenerateTrace(f'touch trace needs at least 2 points, got {len(self._t)}')
        if not (np.all(np.isfinite(self._x)) and np.all(np.isfinite(self._y)) and np.all(np.isfinite(self._t))):
            raise DegenerateTrace('touch trace contains non-finite values')
        if self._t[0] != 0.0:
            raise DegenerateTrace(f'touch trace must start at t=0, got {self._t[0]}')
        if np.any(np.diff(self._t) <= 0):
            raise DegenerateTrace('touch timestamps must be strictly increasing')
        if np.any((self._x < 0) | (self._x > 1) | (self._y < 0) | (self._y > 1)):
            raise DegenerateTrace('touch coordinates must lie in [0, 1]')

    def __len__(self):
        return len(self._t)

    def __repr__(self):
        return f'TouchTrace(n={len(self)}, duration={self.duration:.3f}s)'

    @property
    def x(self) -> np.ndarray:
        return self._x

    @property
    def y(self) -> np.ndarray:
        return self._y

    @property
    def t(self) -> np.ndarray:
        return self._t

    @property
    def duration(self) -> float:
        return float(self._t[-1] - self._t[0])

    @property
    def channels(self) -> np.ndarray:
        return np.stack([self._x, self._y], axis=1)


class AccelTrace:
    """Accelerometer samples in m/s^2, t in seconds on the paired touch trace's clock."""

    def __init__(self, ax, ay, az, t):
        self._ax = _frozen(ax)
        self._ay = _frozen(ay)
        self._az = _frozen(az)
        self._t = _frozen(t)
        if not (len(self._ax) == len(self._ay) == len(self._az) == len(self._t)):
            raise DegenerateTrace('accelerometer channels must be of equal length')
        if len(self._t) < 1:
            raise EmptyTrace('accelerometer trace is empty')
        if not np.all(np.isfinite(self.channels)) or not np.all(np.isfinite(self._t)):
            raise DegenerateTrace('accelerometer trace contains non-finite values')
        if np.any(np.diff(self._t) < 0):
            raise DegenerateTrace('accelerometer timestamps must be non-decreasing')

    def __len__(self):
        return len(self._t)

    def __repr__(self):
        return f'AccelTrace(n={len(self)})'

    @property
    def ax(self) -> np.ndarray:
        return self._ax

    @property
    def ay(self) -> np.ndarray:
        return self._ay

    @property
    def az(self) -> np.ndarray:
        return self._az

    @property
    def t(self) -> np.ndarray:
        return self._t

    @property
    def channels(self) -> np.ndarray:
        return np.stack([self._ax, self._ay, self._az], axis=1)


class SwipeMeta(NamedTuple):
    device_id: str = ''
    screen_w_px: Optional[int] = None
    screen_h_px: Optional[int] = None
    session_id: str = ''


class SwipeSample(NamedTuple):
    touch: TouchTrace
    accel: Optional[AccelTrace]
    label: Label
    meta: SwipeMeta = SwipeMeta()


class Corpus:
    def __init__(self, samples: Sequence[SwipeSample], provenance: str = '', warnings: Sequence[str] = ()):
        self._samples = tuple(samples)
        self._provenance = provenance
        self._warnings = tuple(warnings)

    def __len__(self):
        return len(self._samples)

    def __iter__(self):
        return iter(self._samples)

    def __getitem__(self, index):
        return self._samples[index]

    def __repr__(self):
        return f'Corpus({len(self)} samples from {self._provenance!r})'

    @property
    def samples(self) -> tuple:
        return self._samples

    @property
    def provenance(self) -> str:
        return self._provenance

    @property
    def warnings(self) -> tuple:
        return self._warnings

    def require_non_empty(self):
        if not self._samples:
            raise EmptyCorpus(f'corpus "{self._provenance}" has no samples')
        return self

    def by_label(self, label: Label) -> 'Corpus':
        return Corpus([ss for ss in self._samples if ss.label is label], f'{self._provenance}[{label.value}]')

    def with_accel(self) -> 'Corpus':
        kept = [ss for ss in self._samples if ss.accel is not None]
        if len(kept) < len(self._samples):
            LOGGER.warning('%d samples of "%s" have no accelerometer trace and were dropped',
                           len(self._samples) - len(kept), self._provenance)
        return Corpus(kept, self._provenance, self._warnings)

    def subset(self, indices) -> 'Corpus':
        return Corpus([self._samples[ii] for ii in indices], self._provenance)

    @staticmethod
    def concat(corpora: Sequence['Corpus']) -> 'Corpus':
        samples = [ss for corpus in corpora for ss in corpus]
        return Corpus(samples, '+'.join(cc.provenance for cc in corpora),
                      [ww for cc in corpora for ww in cc.warnings])


def normalize_touch(raw_points, screen_w_px, screen_h_px) -> TouchTrace:
    """Pixels and milliseconds to screen fractions and seconds re-based at the first point.

    Out-of-screen coordinates are clamped to [0, 1].
    """
    if not screen_w_px or not screen_h_px or screen_w_px <= 0 or screen_h_px <= 0:
        raise ZeroScreen(f'invalid screen size {screen_w_px}x{screen_h_px}')
    points = np.asarray(raw_points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 3:
        raise DegenerateTrace('touch points must be (x_px, y_px, t_ms) triples')
    if len(points) < 2:
        raise DegenerateTrace(f'touch trace needs at least 2 points, got {len(points)}')
    t_ms = points[:, 2]
    if np.any(np.diff(t_ms) <= 0):
        raise DegenerateTrace('touch timestamps must be strictly increasing')
    x = np.clip(points[:, 0] / screen_w_px, 0.0, 1.0)
    y = np.clip(points[:, 1] / screen_h_px, 0.0, 1.0)
    t = (t_ms - t_ms[0]) / 1000.0
    return TouchTrace(x, y, t)


def normalize_accel(raw_samples, t0_ms: float, window_s: Optional[float] = None, pad_s: float = 0.0
                    ) -> Optional[AccelTrace]:
    """Re-base accelerometer samples on the touch clock and crop them to the gesture window.

    Returns None when no sample falls inside the window.
    """
    samples = np.asarray(raw_samples, dtype=np.float64)
    if samples.size == 0:
        return None
    if samples.ndim != 2 or samples.shape[1] != 4:
        raise DegenerateTrace('accelerometer samples must be (ax, ay, az, t_ms) quadruples')
    t = (samples[:, 3] - t0_ms) / 1000.0
    order = np.argsort(t, kind='stable')
    samples, t = samples[order], t[order]
    if window_s is not None:
        keep = (t >= -pad_s) & (t <= window_s + pad_s)
        samples, t = samples[keep], t[keep]
    if len(t) == 0:
        return None
    return AccelTrace(samples[:, 0], samples[:, 1], samples[:, 2], t)


def resample_to_length(trace: Union[TouchTrace, AccelTrace], length: int) -> np.ndarray:
    """Linear interpolation of every channel at `length` uniformly spaced times.

    Returns a length x channels array whose first and last rows equal the trace's.
    """
    if length < 2:
        raise DegenerateTrace(f'resample length must be >= 2, got {length}')
    values = trace.channels
    t = trace.t
    if len(t) == 0:
        raise DegenerateTrace('cannot resample an empty trace')
    if t[-1] == t[0]:
        out = np.repeat(values[:1], length, axis=0)
        out[-1] = values[-1]
        return out
    grid = np.linspace(t[0], t[-1], length)
    out = np.empty((length, values.shape[1]), dtype=np.float64)
    for ch in range(values.shape[1]):
        out[:, ch] = np.interp(grid, t, values[:, ch])
    out[0] = values[0]
    out[-1] = values[-1]
    return out
