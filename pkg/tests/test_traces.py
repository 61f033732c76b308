import logging
import unittest

import numpy as np

from swipe_guard.errors import DegenerateTrace, EmptyCorpus, EmptyTrace, ZeroScreen
from swipe_guard.traces import (AccelTrace, Corpus, Label, SwipeSample, TouchTrace, normalize_accel, normalize_touch,
                                resample_to_length)

from fixtures import curved_swipe, human_corpus, straight_swipe

logging.basicConfig(level=logging.INFO,
                    format='%(asctime)s|%(name)s|%(levelname)s|%(message)s')


class TestTouchTrace(unittest.TestCase):
    def test_valid(self):
        trace = straight_swipe(n=5, duration=0.4)
        self.assertEqual(len(trace), 5)
        self.assertAlmostEqual(trace.duration, 0.4)
        self.assertEqual(trace.channels.shape, (5, 2))

    def test_immutable(self):
        trace = straight_swipe()
        with self.assertRaises(ValueError):
            trace.x[0] = 0.5

    def test_single_point(self):
        with self.assertRaises(DegenerateTrace):
            TouchTrace([0.1], [0.1], [0.0])

    def test_time_must_start_at_zero(self):
        with self.assertRaises(DegenerateTrace):
            TouchTrace([0.1, 0.2], [0.1, 0.2], [0.1, 0.2])

    def test_time_must_increase(self):
        with self.assertRaises(DegenerateTrace):
            TouchTrace([0.1, 0.2, 0.3], [0.1, 0.2, 0.3], [0.0, 0.1, 0.1])

    def test_out_of_screen(self):
        with self.assertRaises(DegenerateTrace):
            TouchTrace([0.1, 1.2], [0.1, 0.2], [0.0, 0.1])


class TestAccelTrace(unittest.TestCase):
    def test_empty(self):
        with self.assertRaises(EmptyTrace):
            AccelTrace([], [], [], [])

    def test_decreasing_time(self):
        with self.assertRaises(DegenerateTrace):
            AccelTrace([0, 0], [0, 0], [9.8, 9.8], [0.1, 0.0])

    def test_equal_times_allowed(self):
        trace = AccelTrace([0, 1], [0, 1], [9.8, 9.7], [0.1, 0.1])
        self.assertEqual(trace.channels.shape, (2, 3))


class TestNormalize(unittest.TestCase):
    def test_touch(self):
        trace = normalize_touch([[108, 192, 1000], [540, 960, 1100], [1200, -5, 1250]], 1080, 1920)
        np.testing.assert_allclose(trace.x, [0.1, 0.5, 1.0])
        np.testing.assert_allclose(trace.y, [0.1, 0.5, 0.0])
        np.testing.assert_allclose(trace.t, [0.0, 0.1, 0.25])

    def test_touch_unit_screen_is_identity(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            trace = curved_swipe(rng)
            again = normalize_touch(np.stack([trace.x, trace.y, trace.t * 1000.0], axis=1), 1, 1)
            np.testing.assert_array_equal(again.x, trace.x)
            np.testing.assert_array_equal(again.y, trace.y)
            np.testing.assert_allclose(again.t, trace.t, rtol=1e-12, atol=1e-15)

    def test_zero_screen(self):
        with self.assertRaises(ZeroScreen):
            normalize_touch([[1, 1, 0], [2, 2, 10]], 0, 1920)

    def test_touch_needs_two_points(self):
        with self.assertRaises(DegenerateTrace):
            normalize_touch([[1, 1, 0]], 1080, 1920)

    def test_accel_crop(self):
        raw = [[0.0, 0.0, 9.8, 900], [1.0, 0.0, 9.8, 1000], [2.0, 0.0, 9.8, 1100], [3.0, 0.0, 9.8, 1400]]
        trace = normalize_accel(raw, 1000, window_s=0.2)
        np.testing.assert_allclose(trace.ax, [1.0, 2.0])
        np.testing.assert_allclose(trace.t, [0.0, 0.1])
        padded = normalize_accel(raw, 1000, window_s=0.2, pad_s=0.1)
        np.testing.assert_allclose(padded.ax, [0.0, 1.0, 2.0])

    def test_accel_outside_window(self):
        self.assertIsNone(normalize_accel([[0.0, 0.0, 9.8, 5000]], 1000, window_s=0.2))
        self.assertIsNone(normalize_accel([], 1000))

    def test_accel_sorted(self):
        trace = normalize_accel([[2.0, 0, 0, 1100], [1.0, 0, 0, 1000]], 1000)
        np.testing.assert_allclose(trace.ax, [1.0, 2.0])


class TestResample(unittest.TestCase):
    def test_endpoints_and_length(self):
        trace = TouchTrace([0.1, 0.4, 0.2], [0.3, 0.3, 0.9], [0.0, 0.05, 0.3])
        out = resample_to_length(trace, 7)
        self.assertEqual(out.shape, (7, 2))
        np.testing.assert_array_equal(out[0], trace.channels[0])
        np.testing.assert_array_equal(out[-1], trace.channels[-1])

    def test_linear_trace_resamples_linearly(self):
        trace = straight_swipe(0.0, 0.0, 1.0, 0.5, n=4, duration=0.3)
        out = resample_to_length(trace, 11)
        np.testing.assert_allclose(out[:, 0], np.linspace(0.0, 1.0, 11), atol=1e-12)
        np.testing.assert_allclose(out[:, 1], np.linspace(0.0, 0.5, 11), atol=1e-12)

    def test_accel(self):
        trace = AccelTrace([0, 1], [0, 2], [0, 3], [0.0, 1.0])
        out = resample_to_length(trace, 3)
        np.testing.assert_allclose(out[1], [0.5, 1.0, 1.5])

    def test_too_short(self):
        with self.assertRaises(DegenerateTrace):
            resample_to_length(straight_swipe(), 1)


class TestCorpus(unittest.TestCase):
    def test_with_accel_and_by_label(self):
        humans = human_corpus(4, seed=1)
        bare = SwipeSample(straight_swipe(), None, Label.HANDCRAFTED_BOT)
        corpus = Corpus.concat([humans, Corpus([bare], 'bots')])
        self.assertEqual(len(corpus), 5)
        self.assertEqual(len(corpus.with_accel()), 4)
        self.assertEqual(len(corpus.by_label(Label.HANDCRAFTED_BOT)), 1)
        self.assertEqual(len(corpus.by_label(Label.GAN_BOT)), 0)

    def test_require_non_empty(self):
        with self.assertRaises(EmptyCorpus):
            Corpus([], 'nothing').require_non_empty()

    def test_subset(self):
        corpus = human_corpus(5, seed=2)
        sub = corpus.subset([4, 0])
        self.assertIs(sub[0], corpus[4])
        self.assertIs(sub[1], corpus[0])
