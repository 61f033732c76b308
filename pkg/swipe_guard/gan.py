"""Adversarial synthesis of touch (x, y) and accelerometer (x, y, z) sequences.

Generator and discriminator are both LSTM stacks with a dense head. The
generator reads a human sequence corrupted by Gaussian noise and emits a
sequence of the same shape; the discriminator scores whole sequences.
"""
import json
import logging
from pathlib import Path
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .errors import (InsufficientData, MissingPath, NonFiniteLoss, ShapeMismatch, UntrainedModel, ValidationError,
                     VersionMismatch)
from .lstm import Head, SequenceNet
from .optim import AdamState, adam_step, add_gradients, clip_gradients, compute_loss
from .traces import AccelTrace, Corpus, Label, SwipeMeta, SwipeSample, TouchTrace, resample_to_length
from .settings import check_keys

LOGGER = logging.getLogger('swg.gan')

FORMAT_VERSION = 1

TOUCH_CHANNELS = 2
ACCEL_CHANNELS = 3

OBJECTIVES = ('adversarial', 'reconstruction')

GAN_PRESETS = {
    'lstm-32-16': (32, 16),
    'lstm-16-8': (16, 8),
    'lstm-32': (32,),
    'lstm-16': (16,),
}


class GanConfig(NamedTuple):
    seq_len: int = 32
    lstm_sizes: tuple = (32, 16)
    noise_std: float = 0.1
    learning_rate: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8
    epochs: int = 50
    batch_size: int = 128
    seed: int = 0
    generator_objective: str = 'adversarial'
    clip_norm: Optional[float] = None
    forget_bias: float = 1.0

    def validate(self) -> 'GanConfig':
        if len(self.lstm_sizes) not in (1, 2) or any(int(ss) <= 0 for ss in self.lstm_sizes):
            raise ValidationError(f'lstm_sizes must hold 1 or 2 positive sizes, got {self.lstm_sizes}')
        for name in ('seq_len', 'epochs', 'batch_size'):
            if int(getattr(self, name)) <= 0:
                raise ValidationError(f'{name} must be positive')
        if self.seq_len < 2:
            raise ValidationError('seq_len must be >= 2')
        for name in ('learning_rate', 'beta1', 'beta2', 'eps'):
            if not getattr(self, name) > 0:
                raise ValidationError(f'{name} must be positive')
        if self.noise_std < 0:
            raise ValidationError('noise_std must be >= 0')
        if self.generator_objective not in OBJECTIVES:
            raise ValidationError(f'generator_objective must be one of {OBJECTIVES}')
        return self

    @classmethod
    def from_table(cls, table: dict, preset: Optional[str] = None) -> 'GanConfig':
        check_keys('gan', table, cls._fields + ('preset',))
        values = {key: val for key, val in table.items() if key != 'preset'}
        preset = preset or table.get('preset')
        if preset is not None:
            if preset not in GAN_PRESETS:
                raise ValidationError(f'unknown GAN preset "{preset}" (choose from {", ".join(GAN_PRESETS)})')
            values['lstm_sizes'] = GAN_PRESETS[preset]
        if 'lstm_sizes' in values:
            values['lstm_sizes'] = tuple(int(ss) for ss in values['lstm_sizes'])
        return cls(**values).validate()

    def to_dict(self) -> dict:
        doc = self._asdict()
        doc['lstm_sizes'] = list(self.lstm_sizes)
        return doc


class EpochLoss(NamedTuple):
    discriminator: float
    generator: float


class GanModel:
    def __init__(self, generator: SequenceNet, discriminator: SequenceNet, channels: int, config: GanConfig,
                 scale_mean=None, scale_std=None, duration_mean: float = 1.0, duration_std: float = 0.0,
                 training_log: Sequence[EpochLoss] = (), trained: bool = False):
        if channels not in (TOUCH_CHANNELS, ACCEL_CHANNELS):
            raise ShapeMismatch(f'a GAN models 2 or 3 channels, got {channels}')
        if generator.input_dim != channels or generator.output_dim != channels:
            raise ShapeMismatch('generator channels do not match the model')
        if discriminator.input_dim != channels or discriminator.head is not Head.SIGMOID:
            raise ShapeMismatch('discriminator must read the model channels and emit one score')
        self._generator = generator
        self._discriminator = discriminator
        self._channels = channels
        self._config = config
        self._scale_mean = np.zeros(channels) if scale_mean is None else np.array(scale_mean, dtype=np.float64)
        self._scale_std = np.ones(channels) if scale_std is None else np.array(scale_std, dtype=np.float64)
        self._duration_mean = float(duration_mean)
        self._duration_std = float(duration_std)
        self._training_log = list(training_log)
        self._trained = trained

    @property
    def generator(self) -> SequenceNet:
        return self._generator

    @property
    def discriminator(self) -> SequenceNet:
        return self._discriminator

    @property
    def channels(self) -> int:
        return self._channels

    @property
    def modality(self) -> str:
        return 'touch' if self._channels == TOUCH_CHANNELS else 'accel'

    @property
    def config(self) -> GanConfig:
        return self._config

    @property
    def training_log(self) -> list:
        return list(self._training_log)

    @property
    def trained(self) -> bool:
        return self._trained

    @property
    def duration(self) -> tuple[float, float]:
        return self._duration_mean, self._duration_std

    def scale(self, seqs: np.ndarray) -> np.ndarray:
        return (np.asarray(seqs, dtype=np.float64) - self._scale_mean) / self._scale_std

    def unscale(self, seqs: np.ndarray) -> np.ndarray:
        return np.asarray(seqs, dtype=np.float64) * self._scale_std + self._scale_mean

    def require_trained(self):
        if not self._trained:
            raise UntrainedModel('the GAN has not been trained')

    def to_dict(self) -> dict:
        return {
            'format_version': FORMAT_VERSION,
            'channels': self._channels,
            'config': self._config.to_dict(),
            'scale_mean': self._scale_mean.tolist(),
            'scale_std': self._scale_std.tolist(),
            'duration': [self._duration_mean, self._duration_std],
            'training_log': [list(ee) for ee in self._training_log],
            'trained': self._trained,
            'generator': self._generator.to_dict(),
            'discriminator': self._discriminator.to_dict(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> 'GanModel':
        version = doc.get('format_version')
        if version != FORMAT_VERSION:
            raise VersionMismatch(f'GAN model format version {version} is not supported')
        return cls(SequenceNet.from_dict(doc['generator']), SequenceNet.from_dict(doc['discriminator']),
                   int(doc['channels']), GanConfig.from_table(doc['config']), doc['scale_mean'], doc['scale_std'],
                   *doc['duration'], training_log=[EpochLoss(*ee) for ee in doc['training_log']],
                   trained=bool(doc['trained']))


def save_gan(model: GanModel, path) -> None:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(model.to_dict()), encoding='utf-8')


def load_gan(path) -> GanModel:
    src = Path(path)
    if not src.is_file():
        raise MissingPath(f'GAN model "{path}" does not exist')
    return GanModel.from_dict(json.loads(src.read_text(encoding='utf-8')))


def corpus_sequences(corpus: Corpus, modality: str, seq_len: int) -> tuple[np.ndarray, np.ndarray]:
    """Resampled training sequences of one modality and the matching touch durations."""
    seqs, durations = [], []
    for sample in corpus:
        if modality == 'touch':
            seqs.append(resample_to_length(sample.touch, seq_len))
        elif modality == 'accel':
            if sample.accel is None:
                continue
            seqs.append(resample_to_length(sample.accel, seq_len))
        else:
            raise ValidationError(f'unknown modality "{modality}"')
        durations.append(sample.touch.duration)
    channels = TOUCH_CHANNELS if modality == 'touch' else ACCEL_CHANNELS
    return np.array(seqs).reshape(len(seqs), seq_len, channels), np.array(durations)


def _apply(net: SequenceNet, grads: dict, state: AdamState, clip_norm: Optional[float]) -> AdamState:
    params, state = adam_step(net.parameters(), clip_gradients(grads, clip_norm), state)
    net.set_parameters(params)
    return state


def _check_frozen(net: SequenceNet, fingerprint: str, role: str):
    if net.fingerprint() != fingerprint:
        raise AssertionError(f'{role} parameters changed during the opposite update')


def train_gan(human_seqs, config: GanConfig = GanConfig(), durations=None, generator: Optional[SequenceNet] = None,
              update_generator: bool = True) -> GanModel:
    """Alternate discriminator (BCE, real=1 / fake=0) and generator updates.

    The adversarial generator objective is MSE between the discriminator's score
    of generated sequences and 1; the reconstruction objective is MSE between the
    generated and the human sequence. Accelerometer sequences are z-scored per
    channel over the training set. `update_generator=False` keeps the generator
    fixed and trains the discriminator alone.
    """
    config = config.validate()
    data = np.asarray(human_seqs, dtype=np.float64)
    if data.ndim != 3 or data.shape[2] not in (TOUCH_CHANNELS, ACCEL_CHANNELS):
        raise ShapeMismatch(f'expected (n, T, 2|3) sequences, got {data.shape}')
    if data.shape[1] != config.seq_len:
        raise ShapeMismatch(f'sequences have length {data.shape[1]}, config expects {config.seq_len}')
    if len(data) < config.batch_size:
        raise InsufficientData(f'{len(data)} sequences is fewer than one batch of {config.batch_size}')
    if not np.all(np.isfinite(data)):
        raise InsufficientData('training sequences contain non-finite values')
    channels = data.shape[2]

    if channels == ACCEL_CHANNELS:
        scale_mean = data.reshape(-1, channels).mean(axis=0)
        scale_std = np.maximum(data.reshape(-1, channels).std(axis=0), 1e-9)
    else:
        scale_mean, scale_std = np.zeros(channels), np.ones(channels)
    data = (data - scale_mean) / scale_std

    durations = np.ones(len(data)) if durations is None else np.asarray(durations, dtype=np.float64)
    seeds = np.random.SeedSequence(config.seed).spawn(3)
    rng = np.random.default_rng(seeds[2])
    if generator is None:
        generator = SequenceNet.create(channels, config.lstm_sizes, channels, Head.LINEAR, seeds[0],
                                       config.forget_bias)
    elif generator.input_dim != channels or generator.output_dim != channels:
        raise ShapeMismatch('supplied generator does not match the data channels')
    discriminator = SequenceNet.create(channels, config.lstm_sizes, 1, Head.SIGMOID, seeds[1], config.forget_bias)
    adam = dict(lr=config.learning_rate, beta1=config.beta1, beta2=config.beta2, eps=config.eps)
    g_state = AdamState.fresh(generator.parameters(), **adam)
    d_state = AdamState.fresh(discriminator.parameters(), **adam)

    log = []
    for epoch in range(config.epochs):
        order = rng.permutation(len(data))
        d_losses, g_losses = [], []
        for batch_no, start in enumerate(range(0, len(data), config.batch_size)):
            real = data[order[start:start + config.batch_size]]
            noisy = real + rng.normal(0.0, config.noise_std, size=real.shape)
            fake, g_cache = generator.forward(noisy)

            # discriminator step, generator frozen
            g_print = generator.fingerprint()
            p_real, real_cache = discriminator.forward(real)
            p_fake, fake_cache = discriminator.forward(fake)
            loss_real, grad_real = compute_loss('bce', p_real, 1.0)
            loss_fake, grad_fake = compute_loss('bce', p_fake, 0.0)
            d_grads_real, _ = discriminator.backward(real_cache, 0.5 * grad_real)
            d_grads_fake, _ = discriminator.backward(fake_cache, 0.5 * grad_fake)
            d_state = _apply(discriminator, add_gradients(d_grads_real, d_grads_fake), d_state, config.clip_norm)
            d_loss = 0.5 * (loss_real + loss_fake)
            _check_frozen(generator, g_print, 'generator')

            # generator step, discriminator frozen
            d_print = discriminator.fingerprint()
            if config.generator_objective == 'adversarial':
                p_gen, gen_cache = discriminator.forward(fake)
                g_loss, grad_p = compute_loss('mse', p_gen, 1.0)
                _, grad_fake_seq = discriminator.backward(gen_cache, grad_p)
            else:
                g_loss, grad_fake_seq = compute_loss('mse', fake, real)
            if update_generator:
                g_grads, _ = generator.backward(g_cache, grad_fake_seq)
                g_state = _apply(generator, g_grads, g_state, config.clip_norm)
            _check_frozen(discriminator, d_print, 'discriminator')

            if not (np.isfinite(d_loss) and np.isfinite(g_loss)):
                raise NonFiniteLoss('GAN training diverged', epoch, batch_no)
            d_losses.append(d_loss)
            g_losses.append(g_loss)
            LOGGER.debug('epoch %d batch %d: d_loss=%.5f g_loss=%.5f', epoch, batch_no, d_loss, g_loss)
        entry = EpochLoss(float(np.mean(d_losses)), float(np.mean(g_losses)))
        log.append(entry)
        LOGGER.info('epoch %d/%d: d_loss=%.5f g_loss=%.5f', epoch + 1, config.epochs, *entry)

    return GanModel(generator, discriminator, channels, config, scale_mean, scale_std, float(np.mean(durations)),
                    float(np.std(durations)), log, trained=True)


def gan_generate(model: GanModel, human_seq, rng_seed) -> np.ndarray:
    """One synthetic T x channels sequence in data units; touch values are clamped to [0, 1]."""
    model.require_trained()
    seq = np.asarray(human_seq, dtype=np.float64)
    if seq.shape != (model.config.seq_len, model.channels):
        raise ShapeMismatch(f'expected a ({model.config.seq_len}, {model.channels}) sequence, got {seq.shape}')
    rng = np.random.default_rng(rng_seed)
    noisy = model.scale(seq) + rng.normal(0.0, model.config.noise_std, size=seq.shape)
    out, _ = model.generator.forward(noisy)
    out = model.unscale(out)
    if model.channels == TOUCH_CHANNELS:
        out = np.clip(out, 0.0, 1.0)
    return out


def _draw_duration(model: GanModel, rng: np.random.Generator) -> float:
    mean, std = model.duration
    for _ in range(100):
        duration = rng.normal(mean, std)
        if duration > 0:
            return float(duration)
    return max(mean, 1e-3)


def gan_generate_trace(model: GanModel, human_seq, rng_seed, duration: Optional[float] = None):
    """Generated sequence as a trace with uniform timestamps over a Gaussian-drawn duration."""
    seq_seed, duration_seed = np.random.SeedSequence(rng_seed).spawn(2)
    seq = gan_generate(model, human_seq, seq_seed)
    if duration is None:
        duration = _draw_duration(model, np.random.default_rng(duration_seed))
    t = np.linspace(0.0, duration, len(seq))
    if model.channels == TOUCH_CHANNELS:
        return TouchTrace(seq[:, 0], seq[:, 1], t)
    return AccelTrace(seq[:, 0], seq[:, 1], seq[:, 2], t)


def gan_synthesize_corpus(touch_model: GanModel, humans: Corpus, count: int, seed: Optional[int] = 0,
                          accel_model: Optional[GanModel] = None) -> Corpus:
    """GAN bot samples seeded by randomly chosen human swipes."""
    touch_model.require_trained()
    if touch_model.channels != TOUCH_CHANNELS:
        raise ShapeMismatch('the touch model must have 2 channels')
    if accel_model is not None and accel_model.channels != ACCEL_CHANNELS:
        raise ShapeMismatch('the accelerometer model must have 3 channels')
    humans = humans.require_non_empty()
    pool = humans.with_accel() if accel_model is not None else humans
    pool.require_non_empty()
    rng = np.random.default_rng(seed)
    seeds = np.random.SeedSequence(seed).spawn(count)
    samples = []
    for ii in range(count):
        human = pool[int(rng.integers(len(pool)))]
        touch_seed, accel_seed = seeds[ii].spawn(2)
        touch = gan_generate_trace(touch_model, resample_to_length(human.touch, touch_model.config.seq_len),
                                   touch_seed)
        accel = None
        if accel_model is not None:
            accel = gan_generate_trace(accel_model, resample_to_length(human.accel, accel_model.config.seq_len),
                                       accel_seed, duration=touch.duration)
        samples.append(SwipeSample(touch, accel, Label.GAN_BOT, SwipeMeta('gan', None, None, f'gan-{ii}')))
    LOGGER.info('synthesized %d GAN swipes (seed %s)', count, seed)
    return Corpus(samples, f'gan(seed={seed})')


def discriminator_scores(model: GanModel, seqs) -> np.ndarray:
    """Human-likeness of a batch of sequences in data units."""
    model.require_trained()
    batch = np.asarray(seqs, dtype=np.float64)
    if batch.ndim != 3 or batch.shape[1:] != (model.config.seq_len, model.channels):
        raise ShapeMismatch(f'expected (n, {model.config.seq_len}, {model.channels}) sequences, got {batch.shape}')
    scores, _ = model.discriminator.forward(model.scale(batch))
    return scores


def discriminator_score(model: GanModel, seq) -> float:
    """Probability in (0, 1) that `seq` is human; below 0.5 reads as bot."""
    seq = np.asarray(seq, dtype=np.float64)
    if seq.ndim != 2:
        raise ShapeMismatch(f'expected a single (T, channels) sequence, got {seq.shape}')
    return float(discriminator_scores(model, seq[None])[0])
