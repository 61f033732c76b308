"""Rank AUC and thresholded confusion metrics, Bot as the positive class, in percent."""
import math
from typing import NamedTuple, Sequence

import numpy as np
from scipy.stats import rankdata

from .errors import ShapeMismatch, SingleClassEvalSet, ValidationError
from .traces import Label

METRIC_NAMES = ('auc', 'acc', 'precision', 'recall', 'f1')


class Metrics(NamedTuple):
    auc: float
    acc: float
    precision: float
    recall: float
    f1: float
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def values(self) -> tuple:
        return tuple(getattr(self, name) for name in METRIC_NAMES)


def labels_to_is_bot(labels: Sequence) -> np.ndarray:
    out = []
    for label in labels:
        if isinstance(label, Label):
            out.append(label.is_bot)
        elif isinstance(label, str):
            try:
                out.append(Label(label).is_bot)
            except ValueError:
                if label not in ('bot', 'human'):
                    raise ValidationError(f'unknown label "{label}"')
                out.append(label == 'bot')
        else:
            out.append(bool(label))
    return np.array(out, dtype=bool)


def rank_auc(scores: np.ndarray, is_bot: np.ndarray) -> float:
    """Mann-Whitney AUC in percent; tied pairs count one half."""
    n_pos = int(is_bot.sum())
    n_neg = len(is_bot) - n_pos
    ranks = rankdata(scores, method='average')
    return 100.0 * (ranks[is_bot].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def compute_metrics(bot_scores: Sequence[float], true_labels: Sequence, threshold: float = 0.5) -> Metrics:
    scores = np.asarray(bot_scores, dtype=np.float64)
    is_bot = labels_to_is_bot(true_labels)
    if scores.shape != is_bot.shape:
        raise ShapeMismatch(f'{len(scores)} scores for {len(is_bot)} labels')
    if len(scores) == 0:
        raise ValidationError('cannot compute metrics of an empty set')
    predicted = scores >= threshold
    tp = int(np.sum(predicted & is_bot))
    fp = int(np.sum(predicted & ~is_bot))
    tn = int(np.sum(~predicted & ~is_bot))
    fn = int(np.sum(~predicted & is_bot))
    acc = 100.0 * (tp + tn) / len(scores)
    precision = 100.0 * tp / (tp + fp) if tp + fp else 0.0
    recall = 100.0 * tp / (tp + fn) if tp + fn else 0.0
    f1 = 2.0 * precision * recall / (precision + recall) if precision + recall else 0.0
    if is_bot.all() or not is_bot.any():
        partial = Metrics(math.nan, acc, precision, recall, f1, tp, fp, tn, fn)
        raise SingleClassEvalSet('AUC is undefined when only one class is present', partial)
    return Metrics(rank_auc(scores, is_bot), acc, precision, recall, f1, tp, fp, tn, fn)
