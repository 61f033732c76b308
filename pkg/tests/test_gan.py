import logging
from pathlib import Path
import tempfile
import unittest

import numpy as np

from swipe_guard.errors import InsufficientData, ShapeMismatch, UntrainedModel, ValidationError
from swipe_guard.features import touch_features
from swipe_guard.gan import (GanConfig, GanModel, corpus_sequences, discriminator_score, discriminator_scores,
                             gan_generate, gan_generate_trace, gan_synthesize_corpus, load_gan, save_gan, train_gan)
from swipe_guard.lstm import Head, SequenceNet, zero_net
from swipe_guard.metrics import rank_auc
from swipe_guard.traces import Label, TouchTrace

from fixtures import human_corpus

logging.basicConfig(level=logging.INFO,
                    format='%(asctime)s|%(name)s|%(levelname)s|%(message)s')

SMALL = GanConfig(seq_len=8, lstm_sizes=(8,), batch_size=16, epochs=5, learning_rate=5e-3, seed=3)
HUMANS = human_corpus(64, seed=31)


def fixed_model(dense_bias, channels=2, trained=True, config=SMALL):
    generator = zero_net(channels, list(config.lstm_sizes), channels, Head.LINEAR, dense_bias=dense_bias)
    discriminator = SequenceNet.create(channels, list(config.lstm_sizes), 1, Head.SIGMOID, seed=0)
    return GanModel(generator, discriminator, channels, config, duration_mean=0.4, duration_std=0.1,
                    trained=trained)


class TestGanConfig(unittest.TestCase):
    def test_preset(self):
        config = GanConfig.from_table({'epochs': 3}, preset='lstm-16')
        self.assertEqual(config.lstm_sizes, (16,))
        self.assertEqual(config.epochs, 3)

    def test_invalid(self):
        with self.assertRaises(ValidationError):
            GanConfig.from_table({'epoch': 3})
        with self.assertRaises(ValidationError):
            GanConfig.from_table({}, preset='lstm-64')
        with self.assertRaises(ValidationError):
            GanConfig(generator_objective='wasserstein').validate()
        with self.assertRaises(ValidationError):
            GanConfig(lstm_sizes=(8, 8, 8)).validate()


class TestTraining(unittest.TestCase):
    def test_corpus_sequences(self):
        seqs, durations = corpus_sequences(HUMANS, 'touch', 8)
        self.assertEqual(seqs.shape, (64, 8, 2))
        self.assertEqual(durations.shape, (64,))
        accel, _ = corpus_sequences(human_corpus(3, seed=1, accel=False), 'accel', 8)
        self.assertEqual(accel.shape, (0, 8, 3))

    def test_reconstruction_lowers_loss(self):
        seqs, durations = corpus_sequences(HUMANS, 'touch', 8)
        config = SMALL._replace(generator_objective='reconstruction', epochs=40, learning_rate=1e-2)
        model = train_gan(seqs, config, durations)
        self.assertTrue(model.trained)
        self.assertEqual(len(model.training_log), 40)
        self.assertLess(model.training_log[-1].generator, 0.5 * model.training_log[0].generator)

    def test_deterministic(self):
        seqs, _ = corpus_sequences(HUMANS, 'touch', 8)
        first = train_gan(seqs, SMALL._replace(epochs=2))
        second = train_gan(seqs, SMALL._replace(epochs=2))
        self.assertEqual(first.generator.fingerprint(), second.generator.fingerprint())
        self.assertEqual(first.discriminator.fingerprint(), second.discriminator.fingerprint())

    def test_discriminator_separates_frozen_generator(self):
        seqs, _ = corpus_sequences(HUMANS, 'touch', 8)
        generator = zero_net(2, [8], 2, Head.LINEAR, dense_bias=0.1)
        before = generator.fingerprint()
        model = train_gan(seqs, SMALL._replace(epochs=40), generator=generator, update_generator=False)
        self.assertEqual(model.generator.fingerprint(), before)
        held_out, _ = corpus_sequences(human_corpus(64, seed=32), 'touch', 8)
        real = discriminator_scores(model, held_out)
        fake = discriminator_scores(model, np.full_like(held_out, 0.1))
        scores = np.concatenate([1.0 - real, 1.0 - fake])
        is_fake = np.concatenate([np.zeros(len(real), bool), np.ones(len(fake), bool)])
        self.assertGreaterEqual(rank_auc(scores, is_fake), 95.0)

    def test_constant_corpus(self):
        seqs = np.full((128, 8, 2), 0.5)
        model = train_gan(seqs, SMALL._replace(epochs=50))
        rng = np.random.default_rng(0)
        generated = np.array([gan_generate(model, seqs[0], int(rng.integers(1 << 30))) for _ in range(20)])
        self.assertAlmostEqual(float(generated.mean()), 0.5, delta=0.15)

    def test_accel_is_scaled(self):
        seqs, _ = corpus_sequences(HUMANS, 'accel', 8)
        model = train_gan(seqs, SMALL._replace(epochs=1))
        scaled = model.scale(seqs).reshape(-1, 3)
        np.testing.assert_allclose(scaled.mean(axis=0), 0.0, atol=1e-9)
        np.testing.assert_allclose(model.unscale(model.scale(seqs)), seqs, atol=1e-9)

    def test_insufficient_data(self):
        seqs, _ = corpus_sequences(human_corpus(10, seed=2), 'touch', 8)
        with self.assertRaises(InsufficientData):
            train_gan(seqs, SMALL)

    def test_wrong_length(self):
        seqs, _ = corpus_sequences(HUMANS, 'touch', 6)
        with self.assertRaises(ShapeMismatch):
            train_gan(seqs, SMALL)


class TestGeneration(unittest.TestCase):
    def test_untrained(self):
        model = fixed_model(0.5, trained=False)
        with self.assertRaises(UntrainedModel):
            gan_generate(model, np.zeros((8, 2)), 1)
        with self.assertRaises(UntrainedModel):
            discriminator_score(model, np.zeros((8, 2)))

    def test_touch_is_clamped(self):
        high = gan_generate(fixed_model(5.0), np.full((8, 2), 0.5), 1)
        np.testing.assert_array_equal(high, 1.0)
        low = gan_generate(fixed_model(-5.0), np.full((8, 2), 0.5), 1)
        np.testing.assert_array_equal(low, 0.0)

    def test_trace(self):
        trace = gan_generate_trace(fixed_model(0.3), np.full((8, 2), 0.5), 2, duration=0.6)
        self.assertIsInstance(trace, TouchTrace)
        self.assertEqual(len(trace), 8)
        self.assertAlmostEqual(trace.duration, 0.6)
        drawn = gan_generate_trace(fixed_model(0.3), np.full((8, 2), 0.5), 2)
        self.assertGreater(drawn.duration, 0.0)

    def test_shape_checked(self):
        with self.assertRaises(ShapeMismatch):
            gan_generate(fixed_model(0.5), np.zeros((5, 2)), 1)

    def test_synthesize_corpus(self):
        touch_model = fixed_model(0.3)
        accel_model = fixed_model(0.0, channels=3)
        corpus = gan_synthesize_corpus(touch_model, HUMANS, 5, seed=4, accel_model=accel_model)
        self.assertEqual(len(corpus), 5)
        for sample in corpus:
            self.assertIs(sample.label, Label.GAN_BOT)
            self.assertAlmostEqual(sample.accel.t[-1], sample.touch.duration)
        again = gan_synthesize_corpus(touch_model, HUMANS, 5, seed=4, accel_model=accel_model)
        np.testing.assert_array_equal(again[0].touch.t, corpus[0].touch.t)

    def test_generated_swipes_are_curved(self):
        seqs, durations = corpus_sequences(HUMANS, 'touch', 8)
        model = train_gan(seqs, SMALL, durations)
        corpus = gan_synthesize_corpus(model, HUMANS, 1000, seed=5)
        curved = sum(touch_features(ss.touch, zero_distance_efficiency=1.0).efficiency > 1.0 for ss in corpus)
        self.assertGreater(curved, 500)

    def test_save_load(self):
        seqs, durations = corpus_sequences(HUMANS, 'touch', 8)
        model = train_gan(seqs, SMALL._replace(epochs=1), durations)
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'models' / 'touch.json'
            save_gan(model, path)
            again = load_gan(path)
        self.assertEqual(again.generator.fingerprint(), model.generator.fingerprint())
        self.assertEqual(again.config, model.config)
        self.assertEqual(again.duration, model.duration)
        self.assertAlmostEqual(discriminator_score(again, seqs[0]), discriminator_score(model, seqs[0]))
