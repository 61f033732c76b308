"""Handcrafted bot swipes: straight lines with log-spaced points and i.i.d. Gaussian accelerometer noise."""
import logging
import math
from typing import Optional

import numpy as np

from .errors import NonPositiveDuration, PriorUnfit
from .prior import HumanSwipePrior, sample_quantile
from .traces import AccelTrace, Corpus, Label, SwipeMeta, SwipeSample, TouchTrace

LOGGER = logging.getLogger('swg.handcrafted')

MIN_LENGTH = 1e-6
MAX_REDRAWS = 100


def log_fractions(n: int, reverse: bool = False) -> np.ndarray:
    """Arc-length fractions ln(1 + i(e-1)/(n-1)); 0 and 1 at the ends, shrinking steps."""
    ii = np.arange(n, dtype=np.float64)
    fractions = np.log1p(ii * (math.e - 1.0) / (n - 1))
    fractions[0], fractions[-1] = 0.0, 1.0
    if reverse:
        fractions = 1.0 - fractions[::-1]
    return fractions


def max_length_inside(start: np.ndarray, direction: np.ndarray) -> float:
    """Longest step from `start` along `direction` that stays inside the unit square."""
    limit = math.inf
    for ss, dd in zip(start, direction):
        if dd > 0:
            limit = min(limit, (1.0 - ss) / dd)
        elif dd < 0:
            limit = min(limit, ss / -dd)
    return limit


def _check_prior(prior: HumanSwipePrior):
    if prior is None or len(prior.length_quantiles) == 0 or prior.start_histogram.size == 0:
        raise PriorUnfit('handcrafted synthesis needs a fitted prior')


def _draw_start(prior: HumanSwipePrior, rng: np.random.Generator) -> np.ndarray:
    grid = prior.grid
    cell = int(rng.choice(grid * grid, p=prior.start_histogram.ravel()))
    ix, iy = divmod(cell, grid)
    return np.array([(ix + rng.random()) / grid, (iy + rng.random()) / grid])


def _draw_duration(prior: HumanSwipePrior, rng: np.random.Generator) -> float:
    for _ in range(MAX_REDRAWS):
        duration = rng.normal(prior.duration.mean, prior.duration.std)
        if duration > 0:
            return float(duration)
    return max(prior.duration.mean, 1e-3)


def synth_handcrafted_touch(prior: HumanSwipePrior, rng_seed, reverse_profile: bool = False) -> TouchTrace:
    _check_prior(prior)
    rng = np.random.default_rng(rng_seed)
    angle = sample_quantile(prior.angle_quantiles, rng.random())
    direction = np.array([math.cos(angle), math.sin(angle)])
    length = sample_quantile(prior.length_quantiles, rng.random())
    for _ in range(MAX_REDRAWS):
        start = _draw_start(prior, rng)
        # shrink along the sampled angle instead of bending the line at the border
        usable = min(length, max_length_inside(start, direction))
        if usable > MIN_LENGTH:
            break
    else:
        start, usable = np.array([0.5, 0.5]), min(length, 0.5)
    duration = _draw_duration(prior, rng)
    n = int(rng.choice(prior.n_values, p=prior.n_probs))

    end = start + usable * direction
    fractions = log_fractions(n, reverse_profile)
    x = np.clip(start[0] + fractions * (end[0] - start[0]), 0.0, 1.0)
    y = np.clip(start[1] + fractions * (end[1] - start[1]), 0.0, 1.0)
    t = np.arange(n, dtype=np.float64) * duration / (n - 1)
    return TouchTrace(x, y, t)


def accel_sample_count(duration_s: float, rate_hz: float) -> int:
    return int(math.floor(duration_s * rate_hz + 1e-9)) + 1


def synth_handcrafted_accel(prior: HumanSwipePrior, duration_s: float, rng_seed) -> AccelTrace:
    if prior is None or prior.accel is None:
        raise PriorUnfit('the prior has no accelerometer statistics')
    if not duration_s > 0:
        raise NonPositiveDuration(f'duration must be positive, got {duration_s}')
    rng = np.random.default_rng(rng_seed)
    count = accel_sample_count(duration_s, prior.accel_rate_hz)
    means = np.array([gg.mean for gg in prior.accel])
    stds = np.array([gg.std for gg in prior.accel])
    values = rng.normal(means, stds, size=(count, 3))
    t = np.arange(count, dtype=np.float64) / prior.accel_rate_hz
    return AccelTrace(values[:, 0], values[:, 1], values[:, 2], t)


def synth_handcrafted_sample(prior: HumanSwipePrior, rng_seed, reverse_profile: bool = False,
                             session_id: str = '') -> SwipeSample:
    touch_seed, accel_seed = np.random.SeedSequence(rng_seed).spawn(2)
    touch = synth_handcrafted_touch(prior, touch_seed, reverse_profile)
    accel = synth_handcrafted_accel(prior, touch.duration, accel_seed) if prior.accel is not None else None
    return SwipeSample(touch, accel, Label.HANDCRAFTED_BOT, SwipeMeta('handcrafted', None, None, session_id))


def synth_handcrafted_corpus(prior: HumanSwipePrior, count: int, seed: Optional[int] = 0,
                             reverse_profile: bool = False) -> Corpus:
    seeds = np.random.SeedSequence(seed).spawn(count)
    samples = [synth_handcrafted_sample(prior, ss, reverse_profile, f'hc-{ii}') for ii, ss in enumerate(seeds)]
    LOGGER.info('synthesized %d handcrafted swipes (seed %s)', count, seed)
    return Corpus(samples, f'handcrafted(seed={seed})')
