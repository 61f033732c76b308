"""LSTM layers and a dense head with backpropagation through time.

Gate layout of the stacked weight matrices: rows [0:h] input gate, [h:2h]
forget gate, [2h:3h] output gate, [3h:4h] cell candidate. Sequences are
batched as (batch, time, channels).
"""
from collections import OrderedDict
from enum import Enum
import hashlib
import itertools
import logging
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .errors import NonFiniteInput, ShapeMismatch, StaleCache, VersionMismatch

LOGGER = logging.getLogger('swg.lstm')

FORMAT_VERSION = 1
INIT_SCALE = 0.08

_VERSIONS = itertools.count(1)


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class Head(Enum):
    SIGMOID = 'sigmoid'
    LINEAR = 'linear'


class LstmLayerParams(NamedTuple):
    W: np.ndarray  # (4h, d_in)
    U: np.ndarray  # (4h, h)
    b: np.ndarray  # (4h,)

    @property
    def input_dim(self) -> int:
        return self.W.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.U.shape[1]


class LayerCache(NamedTuple):
    x: np.ndarray
    h: np.ndarray  # (B, T+1, H), h[:, 0] is the initial state
    c: np.ndarray
    gates: np.ndarray  # (B, T, 4H) after activation
    tanh_c: np.ndarray


class ForwardCache(NamedTuple):
    net_id: int
    version: int
    layers: tuple
    top: np.ndarray
    output: np.ndarray
    squeeze: bool


def init_layer(input_dim: int, hidden_dim: int, rng: np.random.Generator, forget_bias: float = 1.0,
               scale: float = INIT_SCALE) -> LstmLayerParams:
    W = rng.uniform(-scale, scale, size=(4 * hidden_dim, input_dim))
    U = rng.uniform(-scale, scale, size=(4 * hidden_dim, hidden_dim))
    b = np.zeros(4 * hidden_dim)
    b[hidden_dim:2 * hidden_dim] = forget_bias
    return LstmLayerParams(W, U, b)


def layer_forward(params: LstmLayerParams, x: np.ndarray) -> tuple[np.ndarray, LayerCache]:
    batch, steps, _ = x.shape
    hid = params.hidden_dim
    h = np.zeros((batch, steps + 1, hid))
    c = np.zeros((batch, steps + 1, hid))
    gates = np.empty((batch, steps, 4 * hid))
    tanh_c = np.empty((batch, steps, hid))
    # input projections for all steps at once
    xw = x @ params.W.T + params.b
    for tt in range(steps):
        z = xw[:, tt] + h[:, tt] @ params.U.T
        gates[:, tt, :3 * hid] = sigmoid(z[:, :3 * hid])
        gates[:, tt, 3 * hid:] = np.tanh(z[:, 3 * hid:])
        ig, fg, og, gg = (gates[:, tt, kk * hid:(kk + 1) * hid] for kk in range(4))
        c[:, tt + 1] = fg * c[:, tt] + ig * gg
        tanh_c[:, tt] = np.tanh(c[:, tt + 1])
        h[:, tt + 1] = og * tanh_c[:, tt]
    return h[:, 1:], LayerCache(x, h, c, gates, tanh_c)


def layer_backward(params: LstmLayerParams, cache: LayerCache, dh_seq: np.ndarray
                   ) -> tuple[np.ndarray, LstmLayerParams]:
    batch, steps, _ = cache.x.shape
    hid = params.hidden_dim
    dW = np.zeros_like(params.W)
    dU = np.zeros_like(params.U)
    db = np.zeros_like(params.b)
    dx = np.zeros_like(cache.x)
    dh_next = np.zeros((batch, hid))
    dc_next = np.zeros((batch, hid))
    for tt in reversed(range(steps)):
        ig, fg, og, gg = (cache.gates[:, tt, kk * hid:(kk + 1) * hid] for kk in range(4))
        tc = cache.tanh_c[:, tt]
        dh = dh_seq[:, tt] + dh_next
        dc = dh * og * (1.0 - tc ** 2) + dc_next
        dz = np.concatenate([
            dc * gg * ig * (1.0 - ig),
            dc * cache.c[:, tt] * fg * (1.0 - fg),
            dh * tc * og * (1.0 - og),
            dc * ig * (1.0 - gg ** 2),
        ], axis=1)
        dc_next = dc * fg
        h_prev = cache.h[:, tt]
        dW += dz.T @ cache.x[:, tt]
        dU += dz.T @ h_prev
        db += dz.sum(axis=0)
        dx[:, tt] = dz @ params.W
        dh_next = dz @ params.U
    return dx, LstmLayerParams(dW, dU, db)


class SequenceNet:
    """One or two LSTM layers followed by a dense head.

    The sigmoid head reads the last hidden state and emits one probability per
    sequence; the linear head maps every timestep to `output_dim` values.
    """

    def __init__(self, layers: Sequence[LstmLayerParams], dense_W: np.ndarray, dense_b: np.ndarray, head: Head):
        if not 1 <= len(layers) <= 2:
            raise ShapeMismatch(f'a sequence net has 1 or 2 LSTM layers, got {len(layers)}')
        for lower, upper in zip(layers, layers[1:]):
            if upper.input_dim != lower.hidden_dim:
                raise ShapeMismatch(f'layer input {upper.input_dim} does not match hidden size {lower.hidden_dim}')
        for layer in layers:
            hid = layer.hidden_dim
            if layer.W.shape[0] != 4 * hid or layer.U.shape != (4 * hid, hid) or layer.b.shape != (4 * hid,):
                raise ShapeMismatch('LSTM parameter shapes are inconsistent')
        if dense_W.shape[1] != layers[-1].hidden_dim or dense_b.shape != (dense_W.shape[0],):
            raise ShapeMismatch('dense head does not match the last LSTM layer')
        if head is Head.SIGMOID and dense_W.shape[0] != 1:
            raise ShapeMismatch('the sigmoid head emits a single score')
        self._layers = [LstmLayerParams(*(np.array(pp, dtype=np.float64) for pp in ll)) for ll in layers]
        self._dense_W = np.array(dense_W, dtype=np.float64)
        self._dense_b = np.array(dense_b, dtype=np.float64)
        self._head = head
        self._version = next(_VERSIONS)

    @classmethod
    def create(cls, input_dim: int, hidden_sizes: Sequence[int], output_dim: int, head: Head,
               seed=None, forget_bias: float = 1.0) -> 'SequenceNet':
        rng = np.random.default_rng(seed)
        layers = []
        dim = input_dim
        for hid in hidden_sizes:
            layers.append(init_layer(dim, hid, rng, forget_bias))
            dim = hid
        dense_W = rng.uniform(-INIT_SCALE, INIT_SCALE, size=(output_dim, dim))
        return cls(layers, dense_W, np.zeros(output_dim), head)

    @property
    def head(self) -> Head:
        return self._head

    @property
    def input_dim(self) -> int:
        return self._layers[0].input_dim

    @property
    def output_dim(self) -> int:
        return self._dense_W.shape[0]

    @property
    def hidden_sizes(self) -> list[int]:
        return [ll.hidden_dim for ll in self._layers]

    @property
    def version(self) -> int:
        return self._version

    def parameters(self) -> OrderedDict:
        params = OrderedDict()
        for ii, layer in enumerate(self._layers):
            params[f'lstm{ii}.W'] = layer.W
            params[f'lstm{ii}.U'] = layer.U
            params[f'lstm{ii}.b'] = layer.b
        params['dense.W'] = self._dense_W
        params['dense.b'] = self._dense_b
        return params

    def set_parameters(self, params: dict):
        current = self.parameters()
        for name, value in params.items():
            if name not in current or current[name].shape != np.shape(value):
                raise ShapeMismatch(f'parameter "{name}" does not match the network')
        layers = []
        for ii in range(len(self._layers)):
            layers.append(LstmLayerParams(*(np.array(params.get(f'lstm{ii}.{kk}', current[f'lstm{ii}.{kk}']),
                                                     dtype=np.float64) for kk in 'WUb')))
        self._layers = layers
        self._dense_W = np.array(params.get('dense.W', self._dense_W), dtype=np.float64)
        self._dense_b = np.array(params.get('dense.b', self._dense_b), dtype=np.float64)
        self._version = next(_VERSIONS)

    def parameter_count(self) -> int:
        return sum(pp.size for pp in self.parameters().values())

    def fingerprint(self) -> str:
        digest = hashlib.sha256()
        for name, value in self.parameters().items():
            digest.update(name.encode())
            digest.update(np.ascontiguousarray(value).tobytes())
        return digest.hexdigest()

    def forward(self, seq: np.ndarray) -> tuple[np.ndarray, ForwardCache]:
        x = np.asarray(seq, dtype=np.float64)
        squeeze = x.ndim == 2
        if squeeze:
            x = x[None]
        if x.ndim != 3 or x.shape[1] < 1 or x.shape[2] != self.input_dim:
            raise ShapeMismatch(f'expected (batch, T, {self.input_dim}) input, got {np.shape(seq)}')
        if not np.all(np.isfinite(x)):
            raise NonFiniteInput('network input contains non-finite values')
        caches = []
        h = x
        for layer in self._layers:
            h, cache = layer_forward(layer, h)
            caches.append(cache)
        if self._head is Head.SIGMOID:
            out = sigmoid(h[:, -1] @ self._dense_W.T + self._dense_b)[:, 0]
        else:
            out = h @ self._dense_W.T + self._dense_b
        cache = ForwardCache(id(self), self._version, tuple(caches), h, out, squeeze)
        return (out[0] if squeeze else out), cache

    def backward(self, cache: ForwardCache, grad_output) -> tuple[OrderedDict, np.ndarray]:
        """Parameter gradients and the gradient w.r.t. the input sequence."""
        if cache.net_id != id(self) or cache.version != self._version:
            raise StaleCache('forward cache does not belong to the current parameters')
        dout = np.asarray(grad_output, dtype=np.float64)
        if cache.squeeze:
            dout = dout[None]
        if dout.shape != cache.output.shape:
            raise ShapeMismatch(f'output gradient shape {dout.shape} does not match {cache.output.shape}')
        top = cache.top
        dh = np.zeros_like(top)
        if self._head is Head.SIGMOID:
            p = cache.output
            dz = (dout * p * (1.0 - p))[:, None]
            last = top[:, -1]
            dW_dense = dz.T @ last
            db_dense = dz.sum(axis=0)
            dh[:, -1] = dz @ self._dense_W
        else:
            dW_dense = np.einsum('bto,bth->oh', dout, top)
            db_dense = dout.sum(axis=(0, 1))
            dh = dout @ self._dense_W
        grads = OrderedDict()
        layer_grads = []
        for layer, layer_cache in zip(reversed(self._layers), reversed(cache.layers)):
            dh, lg = layer_backward(layer, layer_cache, dh)
            layer_grads.append(lg)
        for ii, lg in enumerate(reversed(layer_grads)):
            grads[f'lstm{ii}.W'] = lg.W
            grads[f'lstm{ii}.U'] = lg.U
            grads[f'lstm{ii}.b'] = lg.b
        grads['dense.W'] = dW_dense
        grads['dense.b'] = db_dense
        return grads, (dh[0] if cache.squeeze else dh)

    def to_dict(self) -> dict:
        return {
            'format_version': FORMAT_VERSION,
            'head': self._head.value,
            'parameters': {name: {'shape': list(value.shape), 'values': value.ravel().tolist()}
                           for name, value in self.parameters().items()},
        }

    @classmethod
    def from_dict(cls, doc: dict) -> 'SequenceNet':
        version = doc.get('format_version')
        if version != FORMAT_VERSION:
            raise VersionMismatch(f'network format version {version} is not supported')
        params = {name: np.array(entry['values'], dtype=np.float64).reshape(entry['shape'])
                  for name, entry in doc['parameters'].items()}
        n_layers = sum(1 for name in params if name.endswith('.U'))
        layers = [LstmLayerParams(params[f'lstm{ii}.W'], params[f'lstm{ii}.U'], params[f'lstm{ii}.b'])
                  for ii in range(n_layers)]
        return cls(layers, params['dense.W'], params['dense.b'], Head(doc['head']))


def lstm_parameter_count(input_dim: int, hidden_dim: int) -> int:
    return 4 * (input_dim * hidden_dim + hidden_dim ** 2 + hidden_dim)


def net_forward(net: SequenceNet, seq: np.ndarray):
    return net.forward(seq)


def net_backward(net: SequenceNet, cache: ForwardCache, output_gradient) -> OrderedDict:
    grads, _ = net.backward(cache, output_gradient)
    return grads


def zero_net(input_dim: int, hidden_sizes: Sequence[int], output_dim: int, head: Head,
             dense_bias: Optional[float] = None) -> SequenceNet:
    """All-zero network; a linear head then emits `dense_bias` everywhere."""
    layers = []
    dim = input_dim
    for hid in hidden_sizes:
        layers.append(LstmLayerParams(np.zeros((4 * hid, dim)), np.zeros((4 * hid, hid)), np.zeros(4 * hid)))
        dim = hid
    bias = np.full(output_dim, dense_bias if dense_bias is not None else 0.0)
    return SequenceNet(layers, np.zeros((output_dim, dim)), bias, head)
