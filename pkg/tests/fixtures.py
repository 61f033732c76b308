"""Synthetic corpora shared by the test modules."""
import numpy as np

from swipe_guard.traces import AccelTrace, Corpus, Label, SwipeMeta, SwipeSample, TouchTrace


def curved_swipe(rng: np.random.Generator) -> TouchTrace:
    """A bowed swipe inside the screen whose efficiency is well above 1."""
    n = int(rng.integers(5, 21))
    start = rng.uniform(0.35, 0.65, size=2)
    angle = rng.uniform(-np.pi, np.pi)
    length = rng.uniform(0.1, 0.25)
    direction = np.array([np.cos(angle), np.sin(angle)])
    normal = np.array([-direction[1], direction[0]])
    end = start + length * direction
    control = (start + end) / 2.0 + rng.choice([-1.0, 1.0]) * rng.uniform(0.1, 0.3) * length * normal
    s = np.linspace(0.0, 1.0, n)[:, None]
    points = (1 - s) ** 2 * start + 2 * (1 - s) * s * control + s ** 2 * end
    duration = rng.uniform(0.2, 0.8)
    return TouchTrace(points[:, 0], points[:, 1], np.linspace(0.0, duration, n))


def human_accel(rng: np.random.Generator, duration: float) -> AccelTrace:
    count = int(duration * 200) + 1
    t = np.arange(count) / 200.0
    wobble = np.sin(2 * np.pi * rng.uniform(1, 4) * t)
    return AccelTrace(0.3 * wobble + rng.normal(0.0, 0.05, count), rng.normal(0.5, 0.2, count),
                      9.8 + 0.4 * wobble + rng.normal(0.0, 0.1, count), t)


def human_corpus(count: int, seed: int = 0, accel: bool = True) -> Corpus:
    rng = np.random.default_rng(seed)
    samples = []
    for ii in range(count):
        touch = curved_swipe(rng)
        samples.append(SwipeSample(touch, human_accel(rng, touch.duration) if accel else None, Label.HUMAN,
                                   SwipeMeta('device', 1080, 1920, f'session-{ii}')))
    return Corpus(samples, f'humans(seed={seed})')


def straight_swipe(x0=0.1, y0=0.2, x1=0.7, y1=0.5, n=10, duration=0.5) -> TouchTrace:
    return TouchTrace(np.linspace(x0, x1, n), np.linspace(y0, y1, n), np.linspace(0.0, duration, n))


def verify_body(sample: SwipeSample, t0_ms: float = 1000.0, accel: bool = True) -> dict:
    """A /verify request body carrying `sample` in pixel and millisecond units on a 1080x1920 screen."""
    touch = [[float(x * 1080), float(y * 1920), float(t0_ms + t * 1000.0)]
             for x, y, t in zip(sample.touch.x, sample.touch.y, sample.touch.t)]
    body = {'touch': touch, 'screen': [1080, 1920]}
    if accel and sample.accel is not None:
        body['accel'] = [[float(ax), float(ay), float(az), float(t0_ms + t * 1000.0)]
                         for ax, ay, az, t in zip(sample.accel.ax, sample.accel.ay, sample.accel.az, sample.accel.t)]
    return body
