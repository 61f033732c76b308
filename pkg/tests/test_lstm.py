import logging
import unittest

import numpy as np

from swipe_guard.errors import NonFiniteInput, ShapeMismatch, StaleCache, VersionMismatch
from swipe_guard.lstm import Head, SequenceNet, lstm_parameter_count, net_backward, net_forward, sigmoid, zero_net
from swipe_guard.optim import compute_loss

logging.basicConfig(level=logging.INFO,
                    format='%(asctime)s|%(name)s|%(levelname)s|%(message)s')

EPS = 1e-6


def scaled_net(hidden_sizes, head, output_dim, seed=0, scale=5.0):
    net = SequenceNet.create(3, hidden_sizes, output_dim, head, seed=seed)
    net.set_parameters({name: value * scale for name, value in net.parameters().items()})
    return net


def loss_of(net, x, kind, target):
    out, _ = net.forward(x)
    return compute_loss(kind, out, target)[0]


def relative_error(analytic, numeric):
    return np.linalg.norm(analytic - numeric) / max(np.linalg.norm(analytic) + np.linalg.norm(numeric), 1e-12)


class TestGradients(unittest.TestCase):
    def _check(self, hidden_sizes, head, kind, output_dim=1):
        rng = np.random.default_rng(len(hidden_sizes) * 10 + output_dim)
        net = scaled_net(hidden_sizes, head, output_dim)
        x = rng.normal(size=(2, 6, 3))
        if head is Head.SIGMOID:
            target = np.array([1.0, 0.0])
        else:
            target = rng.normal(size=(2, 6, output_dim))
        out, cache = net.forward(x)
        _, grad_out = compute_loss(kind, out, target)
        grads, dx = net.backward(cache, grad_out)

        params = net.parameters()
        for name, value in params.items():
            numeric = np.zeros_like(value)
            for idx in np.ndindex(value.shape):
                bumped = {nn: vv.copy() for nn, vv in params.items()}
                bumped[name][idx] = value[idx] + EPS
                net.set_parameters(bumped)
                up = loss_of(net, x, kind, target)
                bumped[name][idx] = value[idx] - EPS
                net.set_parameters(bumped)
                down = loss_of(net, x, kind, target)
                numeric[idx] = (up - down) / (2 * EPS)
            net.set_parameters(params)
            self.assertLess(relative_error(grads[name], numeric), 1e-4, name)

        numeric_dx = np.zeros_like(x)
        for idx in np.ndindex(x.shape):
            xp, xm = x.copy(), x.copy()
            xp[idx] += EPS
            xm[idx] -= EPS
            numeric_dx[idx] = (loss_of(net, xp, kind, target) - loss_of(net, xm, kind, target)) / (2 * EPS)
        self.assertLess(relative_error(dx, numeric_dx), 1e-4)

    def test_one_layer_sigmoid_bce(self):
        self._check([4], Head.SIGMOID, 'bce')

    def test_two_layers_sigmoid_bce(self):
        self._check([4, 4], Head.SIGMOID, 'bce')

    def test_one_layer_sigmoid_mse(self):
        self._check([4], Head.SIGMOID, 'mse')

    def test_one_layer_linear_mse(self):
        self._check([4], Head.LINEAR, 'mse', output_dim=2)

    def test_two_layers_linear_mse(self):
        self._check([4, 4], Head.LINEAR, 'mse', output_dim=2)


class TestSequenceNet(unittest.TestCase):
    def test_shapes(self):
        net = SequenceNet.create(2, [8, 4], 2, Head.LINEAR, seed=1)
        out, _ = net.forward(np.zeros((5, 7, 2)))
        self.assertEqual(out.shape, (5, 7, 2))
        single, _ = net.forward(np.zeros((7, 2)))
        self.assertEqual(single.shape, (7, 2))
        score, _ = SequenceNet.create(2, [8], 1, Head.SIGMOID, seed=1).forward(np.zeros((3, 7, 2)))
        self.assertEqual(score.shape, (3,))

    def test_parameter_count(self):
        net = SequenceNet.create(2, [32, 16], 2, Head.LINEAR, seed=1)
        expected = lstm_parameter_count(2, 32) + lstm_parameter_count(32, 16) + 16 * 2 + 2
        self.assertEqual(net.parameter_count(), expected)

    def test_forget_bias(self):
        net = SequenceNet.create(2, [4], 1, Head.SIGMOID, seed=1, forget_bias=1.0)
        np.testing.assert_array_equal(net.parameters()['lstm0.b'][4:8], 1.0)

    def test_bad_input(self):
        net = SequenceNet.create(2, [4], 1, Head.SIGMOID, seed=1)
        with self.assertRaises(ShapeMismatch):
            net.forward(np.zeros((1, 5, 3)))
        bad = np.zeros((1, 5, 2))
        bad[0, 2, 1] = np.nan
        with self.assertRaises(NonFiniteInput):
            net.forward(bad)

    def test_too_many_layers(self):
        with self.assertRaises(ShapeMismatch):
            SequenceNet.create(2, [4, 4, 4], 1, Head.SIGMOID)

    def test_stale_cache(self):
        net = SequenceNet.create(2, [4], 1, Head.SIGMOID, seed=1)
        out, cache = net.forward(np.zeros((1, 5, 2)))
        net.set_parameters(net.parameters())
        with self.assertRaises(StaleCache):
            net.backward(cache, np.ones_like(out))
        other = SequenceNet.create(2, [4], 1, Head.SIGMOID, seed=1)
        _, cache = other.forward(np.zeros((1, 5, 2)))
        with self.assertRaises(StaleCache):
            net.backward(cache, np.ones(1))

    def test_round_trip(self):
        net = SequenceNet.create(2, [6, 3], 2, Head.LINEAR, seed=4)
        again = SequenceNet.from_dict(net.to_dict())
        self.assertEqual(again.fingerprint(), net.fingerprint())
        x = np.random.default_rng(0).normal(size=(2, 5, 2))
        np.testing.assert_array_equal(again.forward(x)[0], net.forward(x)[0])

    def test_function_api(self):
        net = SequenceNet.create(2, [4], 1, Head.SIGMOID, seed=2)
        x = np.random.default_rng(1).normal(size=(3, 5, 2))
        out, cache = net_forward(net, x)
        grads = net_backward(net, cache, np.ones_like(out))
        expected, _ = net.backward(net.forward(x)[1], np.ones_like(out))
        self.assertEqual(sorted(grads), sorted(net.parameters()))
        for name in grads:
            np.testing.assert_array_equal(grads[name], expected[name])

    def test_backward_is_linear_in_output_gradient(self):
        for head, out_dim in ((Head.SIGMOID, 1), (Head.LINEAR, 2)):
            net = SequenceNet.create(2, [4, 3], out_dim, head, seed=5)
            x = np.random.default_rng(6).normal(size=(3, 5, 2))
            out, cache = net_forward(net, x)
            grad_out = np.random.default_rng(7).normal(size=out.shape)
            zero = net_backward(net, cache, np.zeros_like(out))
            single = net_backward(net, cache, grad_out)
            double = net_backward(net, cache, 2.0 * grad_out)
            for name in single:
                np.testing.assert_array_equal(zero[name], 0.0)
                np.testing.assert_allclose(double[name], 2.0 * single[name], rtol=1e-12, atol=1e-12)

    def test_version_mismatch(self):
        doc = dict(SequenceNet.create(2, [4], 1, Head.SIGMOID).to_dict(), format_version=0)
        with self.assertRaises(VersionMismatch):
            SequenceNet.from_dict(doc)

    def test_zero_net(self):
        net = zero_net(2, [4], 2, Head.LINEAR, dense_bias=0.1)
        out, _ = net.forward(np.ones((3, 4, 2)))
        np.testing.assert_array_equal(out, 0.1)
        disc = zero_net(2, [4], 1, Head.SIGMOID)
        np.testing.assert_allclose(disc.forward(np.ones((3, 4, 2)))[0], 0.5)

    def test_sigmoid_is_stable(self):
        values = sigmoid(np.array([-1000.0, 0.0, 1000.0]))
        np.testing.assert_array_equal(values, [0.0, 0.5, 1.0])
