"""Adam, gradient clipping and the two training losses."""
from collections import OrderedDict
import logging
from typing import NamedTuple, Optional

import numpy as np

from .errors import ShapeMismatch, ValidationError

LOGGER = logging.getLogger('swg.optim')

BCE_CLAMP = 1e-7


class AdamState(NamedTuple):
    m: OrderedDict
    v: OrderedDict
    step: int = 0
    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def fresh(cls, params: dict, lr: float = 2e-4, beta1: float = 0.5, beta2: float = 0.999,
              eps: float = 1e-8) -> 'AdamState':
        zeros = OrderedDict((name, np.zeros_like(value, dtype=np.float64)) for name, value in params.items())
        return cls(zeros, OrderedDict((name, vv.copy()) for name, vv in zeros.items()), 0, lr, beta1, beta2, eps)


def adam_step(params: dict, grads: dict, state: AdamState) -> tuple[OrderedDict, AdamState]:
    """One bias-corrected Adam update; inputs are left untouched."""
    if state.step < 0:
        raise ValidationError('Adam step counter must be >= 0')
    step = state.step + 1
    new_params, new_m, new_v = OrderedDict(), OrderedDict(), OrderedDict()
    for name, value in params.items():
        grad = grads.get(name)
        if grad is None or np.shape(grad) != np.shape(value) or state.m[name].shape != np.shape(value):
            raise ShapeMismatch(f'gradient or moment shape mismatch for "{name}"')
        m = state.beta1 * state.m[name] + (1.0 - state.beta1) * grad
        v = state.beta2 * state.v[name] + (1.0 - state.beta2) * grad * grad
        m_hat = m / (1.0 - state.beta1 ** step)
        v_hat = v / (1.0 - state.beta2 ** step)
        new_params[name] = value - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
        new_m[name], new_v[name] = m, v
    return new_params, state._replace(m=new_m, v=new_v, step=step)


def clip_gradients(grads: dict, max_norm: Optional[float]) -> dict:
    """Rescale all gradients together so their global L2 norm is at most `max_norm`."""
    if not max_norm:
        return grads
    norm = float(np.sqrt(sum(float(np.sum(gg * gg)) for gg in grads.values())))
    if norm <= max_norm:
        return grads
    scale = max_norm / norm
    LOGGER.debug('clipping gradient norm %.4g to %.4g', norm, max_norm)
    return OrderedDict((name, gg * scale) for name, gg in grads.items())


def add_gradients(first: dict, second: dict) -> OrderedDict:
    return OrderedDict((name, first[name] + second[name]) for name in first)


def compute_loss(kind: str, prediction, target) -> tuple[float, np.ndarray]:
    """Mean loss over all elements and its gradient w.r.t. the prediction.

    `bce` clamps predictions to [1e-7, 1 - 1e-7] and has zero gradient where the
    clamp is active; `mse` is the mean squared error.
    """
    pred = np.asarray(prediction, dtype=np.float64)
    tgt = np.broadcast_to(np.asarray(target, dtype=np.float64), pred.shape) if np.ndim(target) == 0 \
        else np.asarray(target, dtype=np.float64)
    if pred.shape != tgt.shape:
        raise ShapeMismatch(f'prediction shape {pred.shape} does not match target shape {tgt.shape}')
    count = max(pred.size, 1)
    if kind == 'bce':
        p = np.clip(pred, BCE_CLAMP, 1.0 - BCE_CLAMP)
        loss = -np.mean(tgt * np.log(p) + (1.0 - tgt) * np.log(1.0 - p))
        grad = (-tgt / p + (1.0 - tgt) / (1.0 - p)) / count
        grad = np.where(p == pred, grad, 0.0)
    elif kind == 'mse':
        diff = pred - tgt
        loss = np.mean(diff * diff)
        grad = 2.0 * diff / count
    else:
        raise ValidationError(f'unknown loss "{kind}"')
    return float(loss), grad
