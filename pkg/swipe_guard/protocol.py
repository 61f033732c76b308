"""Evaluation protocol: balanced splits, scenarios, repetitions, ablation and feature distributions.

A run pools the human corpus and the bot corpora into one index space
(humans first, then each training bot source, then each test-only bot
source) and draws per repetition a balanced 70/30 train/test split with the
training part divided 90/10 into development and validation sets.
"""
from concurrent.futures import ThreadPoolExecutor
from enum import Enum
import json
import logging
from pathlib import Path
from typing import NamedTuple, Optional, Sequence, Union

import numpy as np
import pandas as pd

from .classifiers import ClassifierKind, ClassifierSpec, fit_classifier_matrix, tuning_grid
from .errors import (ConfigContradiction, EmptyCorpus, InsufficientSamples, ModeMismatch, SingleClassEvalSet,
                     ValidationError)
from .features import TOUCH_COLUMNS, FeatureCache, FeatureMode
from .gan import discriminator_scores
from .metrics import METRIC_NAMES, Metrics, compute_metrics
from .settings import check_keys, validate_bool
from .traces import Corpus, resample_to_length

LOGGER = logging.getLogger('swg.protocol')

HISTOGRAM_BINS = 50
ABLATION_MIN = 70
ABLATION_MAX = 1400
ABLATION_POINTS = 8


class Scenario(Enum):
    MULTICLASS = 'multiclass'
    AGNOSTIC = 'agnostic'
    ONE_CLASS = 'one_class'
    GAN_DISCRIMINATOR = 'gan_discriminator'


class BotSource(Enum):
    HANDCRAFTED = 'handcrafted'
    GAN = 'gan'


class EvalConfig(NamedTuple):
    scenario: Scenario = Scenario.MULTICLASS
    modality: FeatureMode = FeatureMode.TOUCH_ONLY
    bot_sources_train: tuple = (BotSource.HANDCRAFTED,)
    bot_sources_test: tuple = (BotSource.HANDCRAFTED,)
    # total training samples, half human and half bot
    train_size: int = 1000
    train_fraction: float = 0.7
    dev_fraction: float = 0.9
    repetitions: int = 5
    seed: int = 0
    tune: bool = True
    workers: int = 1

    def validate(self) -> 'EvalConfig':
        if self.train_size < 2 or self.train_size % 2:
            raise ValidationError(f'train_size must be even and >= 2, got {self.train_size}')
        for name in ('train_fraction', 'dev_fraction'):
            if not 0.0 < getattr(self, name) < 1.0:
                raise ValidationError(f'{name} must be in (0, 1)')
        if self.repetitions < 1:
            raise ValidationError('repetitions must be >= 1')
        train_sources, test_sources = set(self.bot_sources_train), set(self.bot_sources_test)
        if not test_sources:
            raise ConfigContradiction('bot_sources_test must name at least one bot source')
        if self.scenario is Scenario.ONE_CLASS and train_sources:
            raise ConfigContradiction('the one-class scenario trains on human samples only; '
                                      'bot_sources_train must be empty')
        if self.scenario is Scenario.AGNOSTIC and train_sources & test_sources:
            raise ConfigContradiction('the agnostic scenario needs disjoint train and test bot sources')
        if self.scenario is Scenario.MULTICLASS and train_sources != test_sources:
            raise ConfigContradiction('the multiclass scenario trains and tests on the same bot sources')
        return self

    @property
    def separate_test_pool(self) -> bool:
        return self.scenario in (Scenario.AGNOSTIC, Scenario.ONE_CLASS) or not self.bot_sources_train

    @classmethod
    def from_table(cls, table: dict) -> 'EvalConfig':
        check_keys('eval', table, cls._fields)
        values = dict(table)
        try:
            if 'scenario' in values:
                values['scenario'] = Scenario(values['scenario'])
            if 'modality' in values:
                values['modality'] = FeatureMode(values['modality'])
            for key in ('bot_sources_train', 'bot_sources_test'):
                if key in values:
                    values[key] = tuple(BotSource(ss) for ss in values[key])
        except ValueError as exc:
            raise ValidationError(f'[eval]: {exc}')
        if 'tune' in values:
            values['tune'] = validate_bool(values['tune'])
        return cls(**values).validate()

    def to_dict(self) -> dict:
        doc = self._asdict()
        doc['scenario'] = self.scenario.value
        doc['modality'] = self.modality.value
        doc['bot_sources_train'] = [ss.value for ss in self.bot_sources_train]
        doc['bot_sources_test'] = [ss.value for ss in self.bot_sources_test]
        return doc


class Split(NamedTuple):
    train: np.ndarray
    dev: np.ndarray
    val: np.ndarray
    test: np.ndarray


def _as_corpora(bots) -> list:
    if bots is None:
        return []
    if isinstance(bots, Corpus):
        return [bots]
    return list(bots)


def _even_counts(total: int, parts: int) -> list:
    return [total // parts + (1 if ii < total % parts else 0) for ii in range(parts)]


def make_splits(human: Corpus, bots: Union[Corpus, Sequence[Corpus]], config: EvalConfig, repetition_index: int,
                test_bots: Union[Corpus, Sequence[Corpus], None] = None) -> Split:
    """Balanced, disjoint index sets over the pooled corpora.

    Without `test_bots` the test bots come from the bots not drawn for
    training; with it they come from `test_bots` alone. Bot counts are spread
    evenly across the given sources. Human training indices come first in
    every set, followed by the bots.
    """
    train_corpora, test_corpora = _as_corpora(bots), _as_corpora(test_bots)
    if not test_corpora and not train_corpora:
        raise InsufficientSamples('no bot corpus to split')
    half = config.train_size // 2
    test_half = int(round(half * (1.0 - config.train_fraction) / config.train_fraction))
    dev_half = int(round(half * config.dev_fraction))
    if dev_half in (0, half):
        raise InsufficientSamples(f'train_size {config.train_size} is too small for a development/validation split')
    rng = np.random.default_rng([config.seed, repetition_index])

    offsets, start = [], len(human)
    for corpus in train_corpora + test_corpora:
        offsets.append(start)
        start += len(corpus)

    if len(human) < half + test_half:
        raise InsufficientSamples(f'{len(human)} human samples, {half + test_half} needed')
    human_order = rng.permutation(len(human))
    human_train, human_test = human_order[:half], human_order[half:half + test_half]

    def draw(corpora, corpus_offsets, train_count, test_count):
        train, test = [], []
        if not corpora:
            return train, test
        for corpus, offset, n_train, n_test in zip(corpora, corpus_offsets, _even_counts(train_count, len(corpora)),
                                                   _even_counts(test_count, len(corpora))):
            if len(corpus) < n_train + n_test:
                raise InsufficientSamples(f'bot corpus "{corpus.provenance}" has {len(corpus)} samples, '
                                          f'{n_train + n_test} needed')
            order = rng.permutation(len(corpus)) + offset
            train.extend(order[:n_train])
            test.extend(order[n_train:n_train + n_test])
        return train, test

    if test_corpora:
        bot_train, _ = draw(train_corpora, offsets[:len(train_corpora)], half if train_corpora else 0, 0)
        _, bot_test = draw(test_corpora, offsets[len(train_corpora):], 0, test_half)
    else:
        bot_train, bot_test = draw(train_corpora, offsets, half, test_half)

    # dev/val balanced within each class
    human_dev, human_val = human_train[:dev_half], human_train[dev_half:]
    bot_train = rng.permutation(np.array(bot_train, dtype=np.int64))
    bot_dev_count = int(round(len(bot_train) * config.dev_fraction))
    bot_dev, bot_val = bot_train[:bot_dev_count], bot_train[bot_dev_count:]
    return Split(
        train=np.concatenate([human_train, bot_train]).astype(np.int64),
        dev=np.concatenate([human_dev, bot_dev]).astype(np.int64),
        val=np.concatenate([human_val, bot_val]).astype(np.int64),
        test=np.concatenate([human_test, np.array(bot_test, dtype=np.int64)]).astype(np.int64),
    )


class EvalReport:
    def __init__(self, config: EvalConfig, spec: ClassifierSpec, repetitions: Sequence[Metrics],
                 chosen_specs: Sequence[ClassifierSpec] = (), tuned: Sequence[bool] = ()):
        self._config = config
        self._spec = spec
        self._repetitions = list(repetitions)
        self._chosen_specs = list(chosen_specs)
        self._tuned = [bool(tt) for tt in tuned]

    @property
    def config(self) -> EvalConfig:
        return self._config

    @property
    def spec(self) -> ClassifierSpec:
        return self._spec

    @property
    def repetitions(self) -> list:
        return list(self._repetitions)

    @property
    def chosen_specs(self) -> list:
        return list(self._chosen_specs)

    @property
    def tuned(self) -> list:
        """Per repetition, whether hyperparameters were tuned or the defaults used."""
        return list(self._tuned)

    @property
    def used_defaults(self) -> bool:
        return not self._tuned or not all(self._tuned)

    def _table(self) -> np.ndarray:
        return np.array([mm.values() for mm in self._repetitions], dtype=np.float64)

    @property
    def mean(self) -> dict:
        return dict(zip(METRIC_NAMES, self._table().mean(axis=0).tolist()))

    @property
    def std(self) -> dict:
        return dict(zip(METRIC_NAMES, self._table().std(axis=0).tolist()))

    @property
    def confusion(self) -> dict:
        return {name: int(sum(getattr(mm, name) for mm in self._repetitions)) for name in ('tp', 'fp', 'tn', 'fn')}

    @property
    def classifier_name(self) -> str:
        if self._config.scenario is Scenario.GAN_DISCRIMINATOR:
            return ClassifierKind.GAN_DISCRIMINATOR.value
        return self._spec.kind.value

    def to_dict(self) -> dict:
        return {
            'config': self._config.to_dict(),
            'spec': self._spec.to_dict(),
            'repetitions': [mm._asdict() for mm in self._repetitions],
            'chosen_specs': [ss.to_dict() for ss in self._chosen_specs],
            'tuned': self._tuned,
            'mean': self.mean,
            'std': self.std,
            'confusion': self.confusion,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> 'EvalReport':
        return cls(EvalConfig.from_table(doc['config']), ClassifierSpec.from_table(doc['spec']),
                   [Metrics(**mm) for mm in doc['repetitions']],
                   [ClassifierSpec.from_table(ss) for ss in doc.get('chosen_specs', [])],
                   doc.get('tuned', []))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_text(self) -> str:
        return format_reports([self])


def format_reports(reports: Sequence[EvalReport]) -> str:
    """Aligned text table, one mean +/- std row per report, followed by the summed confusion matrices."""
    header = ['Scenario', 'Bots', 'Classifier', 'Modality', 'AUC', 'Acc', 'Re', 'Pre', 'F1']
    rows = []
    for report in reports:
        mean, std = report.mean, report.std
        sources = '+'.join(ss.value for ss in report.config.bot_sources_test)
        rows.append([report.config.scenario.value, sources, report.classifier_name, report.config.modality.value]
                    + [f'{mean[name]:.1f} ± {std[name]:.1f}' for name in ('auc', 'acc', 'recall', 'precision', 'f1')])
    widths = [max(len(str(row[col])) for row in [header] + rows) for col in range(len(header))]
    lines = ['  '.join(str(cell).ljust(width) for cell, width in zip(row, widths)).rstrip()
             for row in [header] + rows]
    lines.insert(1, '  '.join('-' * width for width in widths))
    lines.append('')
    for report in reports:
        cm = report.confusion
        lines.append(f'{report.config.scenario.value}/{report.classifier_name}/{report.config.modality.value}: '
                     f'predicted bot [bot {cm["tp"]}, human {cm["fp"]}]  '
                     f'predicted human [bot {cm["fn"]}, human {cm["tn"]}]')
        if report.config.scenario is not Scenario.GAN_DISCRIMINATOR and report.used_defaults:
            defaults = report.tuned.count(False) if report.tuned else len(report.repetitions)
            lines.append(f'{report.config.scenario.value}/{report.classifier_name}/{report.config.modality.value}: '
                         f'default hyperparameters in {defaults} of {len(report.repetitions)} repetitions')
    return '\n'.join(lines) + '\n'


def write_report(report: EvalReport, path) -> None:
    Path(path).write_text(report.to_json() + '\n', encoding='utf-8')
    LOGGER.info('wrote report to "%s"', path)


def read_report(path) -> EvalReport:
    return EvalReport.from_dict(json.loads(Path(path).read_text(encoding='utf-8')))


def tune_hyperparameters(spec: ClassifierSpec, mode: FeatureMode, dev_X: np.ndarray, dev_is_bot: np.ndarray,
                         val_X: np.ndarray, val_is_bot: np.ndarray) -> ClassifierSpec:
    """Grid candidate with the best validation accuracy; ties keep the earlier candidate."""
    best_spec, best_acc = spec, -1.0
    for candidate in tuning_grid(spec, mode.dim):
        if candidate.kind is ClassifierKind.KNN and candidate.k > len(dev_X):
            continue
        if candidate.kind is ClassifierKind.ONE_CLASS_SVM:
            model = fit_classifier_matrix(candidate, mode, dev_X[~dev_is_bot], dev_is_bot[~dev_is_bot])
        else:
            model = fit_classifier_matrix(candidate, mode, dev_X, dev_is_bot)
        acc = float(np.mean(model.decide(val_X) == val_is_bot))
        LOGGER.debug('candidate %s: validation accuracy %.4f', candidate.to_dict(), acc)
        if acc > best_acc:
            best_spec, best_acc = candidate, acc
    return best_spec


class _Pool(NamedTuple):
    human: Corpus
    train_bots: list
    test_bots: list
    matrix: Optional[np.ndarray]
    is_bot: np.ndarray


def _source_corpora(sources, handcrafted: Optional[Corpus], gan: Optional[Corpus]) -> list:
    corpora = []
    for source in sources:
        corpus = handcrafted if source is BotSource.HANDCRAFTED else gan
        if corpus is None or len(corpus) == 0:
            raise EmptyCorpus(f'no {source.value} bot corpus given')
        corpora.append(corpus)
    return corpora


def _build_pool(human: Corpus, handcrafted: Optional[Corpus], gan: Optional[Corpus], config: EvalConfig,
                cache: FeatureCache) -> _Pool:
    train_bots = _source_corpora(config.bot_sources_train, handcrafted, gan)
    test_bots = _source_corpora(config.bot_sources_test, handcrafted, gan) if config.separate_test_pool else []
    corpora = [human] + train_bots + test_bots
    if config.modality is FeatureMode.TOUCH_ACCEL:
        corpora = [cc.with_accel() for cc in corpora]
    if config.scenario is Scenario.GAN_DISCRIMINATOR:
        matrix = None
    else:
        # keep only featurizable samples so pooled indices address matrix rows
        parts, kept_corpora = [], []
        for corpus in corpora:
            part, kept = cache.matrix(corpus, config.modality)
            parts.append(part)
            kept_corpora.append(corpus.subset(kept))
        corpora = kept_corpora
        matrix = np.concatenate(parts, axis=0)
    is_bot = np.concatenate([np.zeros(len(corpora[0]), dtype=bool)] + [np.ones(len(cc), dtype=bool)
                                                                         for cc in corpora[1:]])
    ntrain = len(train_bots)
    return _Pool(corpora[0], corpora[1:1 + ntrain], corpora[1 + ntrain:], matrix, is_bot)


def _discriminator_bot_scores(pool_corpora: list, indices: np.ndarray, modality: FeatureMode,
                              discriminators: dict) -> np.ndarray:
    samples = []
    for index in indices:
        for corpus in pool_corpora:
            if index < len(corpus):
                samples.append(corpus[int(index)])
                break
            index -= len(corpus)
    touch = discriminators['touch']
    touch_seqs = [resample_to_length(ss.touch, touch.config.seq_len) for ss in samples]
    scores = 1.0 - discriminator_scores(touch, touch_seqs)
    if modality is FeatureMode.TOUCH_ACCEL:
        accel = discriminators.get('accel')
        if accel is None:
            raise ModeMismatch('touch_accel discriminator evaluation needs an accelerometer discriminator')
        accel_seqs = [resample_to_length(ss.accel, accel.config.seq_len) for ss in samples]
        scores = 0.5 * (scores + 1.0 - discriminator_scores(accel, accel_seqs))
    return scores


def _run_repetition(pool: _Pool, spec: ClassifierSpec, config: EvalConfig, rep: int,
                    discriminators: Optional[dict]) -> tuple[Metrics, ClassifierSpec, bool]:
    split = make_splits(pool.human, pool.train_bots, config, rep, pool.test_bots or None)
    y_test = pool.is_bot[split.test]
    train_bots = int(pool.is_bot[split.train].sum())
    if y_test.sum() * 2 != len(y_test) or (train_bots and train_bots * 2 != len(split.train)):
        raise AssertionError('unbalanced split')
    chosen, tuned = spec, False
    if config.scenario is Scenario.GAN_DISCRIMINATOR:
        corpora = [pool.human] + pool.train_bots + pool.test_bots
        scores = _discriminator_bot_scores(corpora, split.test, config.modality, discriminators)
        threshold = 0.5
    else:
        train = split.train
        dev, val = split.dev, split.val
        if config.scenario is Scenario.ONE_CLASS:
            train, dev = train[~pool.is_bot[train]], dev[~pool.is_bot[dev]]
        if config.tune and pool.is_bot[val].any():
            chosen = tune_hyperparameters(spec, config.modality, pool.matrix[dev], pool.is_bot[dev],
                                          pool.matrix[val], pool.is_bot[val])
            tuned = True
        elif config.tune:
            LOGGER.info('repetition %d: no bots in the validation split, using default hyperparameters', rep)
        model = fit_classifier_matrix(chosen, config.modality, pool.matrix[train], pool.is_bot[train])
        scores = model.score_matrix(pool.matrix[split.test])
        threshold = model.threshold
        if model.kind is ClassifierKind.ONE_CLASS_SVM:
            # outside the learned region means bot
            threshold = np.nextafter(threshold, np.inf)
    try:
        metrics = compute_metrics(scores, y_test, threshold)
    except SingleClassEvalSet as exc:
        LOGGER.warning('repetition %d: %s', rep, exc)
        metrics = exc.metrics
    LOGGER.info('repetition %d: auc=%.2f acc=%.2f precision=%.2f recall=%.2f f1=%.2f', rep, *metrics.values())
    return metrics, chosen, tuned


def run_scenario(human: Corpus, handcrafted: Optional[Corpus], gan: Optional[Corpus], spec: ClassifierSpec,
                 config: EvalConfig, discriminators: Optional[dict] = None,
                 cache: Optional[FeatureCache] = None) -> EvalReport:
    """Split, train, score and measure for every repetition.

    `discriminators` maps 'touch' (and 'accel' for touch_accel) to trained
    GanModels; it is only read by the GAN discriminator scenario, which scores
    1 - D(sequence) on resampled raw sequences.
    """
    config = config.validate()
    spec = spec.validate()
    if config.scenario is Scenario.ONE_CLASS:
        spec = spec._replace(kind=ClassifierKind.ONE_CLASS_SVM)
    elif config.scenario is Scenario.GAN_DISCRIMINATOR:
        if not discriminators or 'touch' not in discriminators:
            raise ConfigContradiction('the GAN discriminator scenario needs a trained touch discriminator')
    elif spec.kind in (ClassifierKind.ONE_CLASS_SVM, ClassifierKind.GAN_DISCRIMINATOR):
        raise ConfigContradiction(f'classifier {spec.kind.value} does not fit the {config.scenario.value} scenario')
    human.require_non_empty()
    pool = _build_pool(human, handcrafted, gan, config, cache or FeatureCache())
    LOGGER.info('%s scenario, %s, %s: %d humans, %d training bots, %d test-only bots', config.scenario.value,
                spec.kind.value, config.modality.value, len(pool.human), sum(len(cc) for cc in pool.train_bots),
                sum(len(cc) for cc in pool.test_bots))

    def run(rep):
        return _run_repetition(pool, spec, config, rep, discriminators)

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as executor:
            results = list(executor.map(run, range(config.repetitions)))
    else:
        results = [run(rep) for rep in range(config.repetitions)]
    return EvalReport(config, spec, [rr[0] for rr in results], [rr[1] for rr in results], [rr[2] for rr in results])


class AblationPoint(NamedTuple):
    train_size: int
    acc_mean: Optional[float]
    acc_std: Optional[float]

    @property
    def missing(self) -> bool:
        return self.acc_mean is None


def default_ablation_grid() -> list[int]:
    return [int(2 * round(vv / 2)) for vv in np.linspace(ABLATION_MIN, ABLATION_MAX, ABLATION_POINTS)]


def ablation_curve(human: Corpus, handcrafted: Optional[Corpus], gan: Optional[Corpus], spec: ClassifierSpec,
                   config: EvalConfig, train_sizes: Optional[Sequence[int]] = None,
                   discriminators: Optional[dict] = None) -> list[AblationPoint]:
    """Mean accuracy against the number of training samples; points without enough data are marked missing."""
    sizes = default_ablation_grid() if train_sizes is None else [int(mm) for mm in train_sizes]
    odd = [mm for mm in sizes if mm < 2 or mm % 2]
    if odd:
        raise ValidationError(f'training sizes must be even and >= 2: {odd}')
    cache = FeatureCache()
    points = []
    for size in sorted(sizes):
        try:
            report = run_scenario(human, handcrafted, gan, spec, config._replace(train_size=size), discriminators,
                                  cache)
        except InsufficientSamples as exc:
            LOGGER.warning('ablation point %d skipped: %s', size, exc)
            points.append(AblationPoint(size, None, None))
            continue
        points.append(AblationPoint(size, report.mean['acc'], report.std['acc']))
    return points


def ablation_to_frame(points: Sequence[AblationPoint]) -> pd.DataFrame:
    return pd.DataFrame([pp._asdict() for pp in points], columns=list(AblationPoint._fields))


class Histogram(NamedTuple):
    edges: np.ndarray
    probabilities: np.ndarray


def feature_distribution_report(corpora: dict, bins: int = HISTOGRAM_BINS, cache: Optional[FeatureCache] = None
                                ) -> dict:
    """Normalized histograms of the six touch features, per source over the pooled range.

    Returns {feature: {source: Histogram}}.
    """
    if not corpora:
        raise EmptyCorpus('no corpora to describe')
    cache = cache or FeatureCache()
    matrices = {}
    for source, corpus in corpora.items():
        corpus.require_non_empty()
        matrix, _ = cache.matrix(corpus, FeatureMode.TOUCH_ONLY)
        if len(matrix) == 0:
            raise EmptyCorpus(f'corpus "{source}" has no featurizable swipes')
        matrices[source] = matrix
    report = {}
    for col, feature in enumerate(TOUCH_COLUMNS):
        pooled = np.concatenate([mm[:, col] for mm in matrices.values()])
        low, high = float(pooled.min()), float(pooled.max())
        if low == high:
            low, high = low - 0.5, high + 0.5
        report[feature] = {}
        for source, matrix in matrices.items():
            counts, edges = np.histogram(matrix[:, col], bins=bins, range=(low, high))
            report[feature][source] = Histogram(edges, counts / counts.sum())
    return report


def distribution_to_frame(report: dict) -> pd.DataFrame:
    rows = []
    for feature, per_source in report.items():
        for source, hist in per_source.items():
            for left, right, prob in zip(hist.edges[:-1], hist.edges[1:], hist.probabilities):
                rows.append({'feature': feature, 'source': source, 'bin_left': left, 'bin_right': right,
                             'probability': prob})
    return pd.DataFrame(rows, columns=['feature', 'source', 'bin_left', 'bin_right', 'probability'])
