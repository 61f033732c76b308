import logging
import os
from pathlib import Path
import tempfile
import unittest
from unittest import mock

from swipe_guard.errors import MissingPath, ValidationError
from swipe_guard.settings import (Config, ServiceSettings, SynthSettings, check_keys, get_service_settings,
                                  load_config, validate_bool, validate_port, validate_tau)

logging.basicConfig(level=logging.INFO,
                    format='%(asctime)s|%(name)s|%(levelname)s|%(message)s')


def write_config(text: str) -> str:
    tmp = tempfile.NamedTemporaryFile('w', suffix='.toml', delete=False, encoding='utf-8')
    with tmp:
        tmp.write(text)
    return tmp.name


class TestValidators(unittest.TestCase):
    def test_bool(self):
        for val in ('true', 'T', '1', True, 1):
            self.assertTrue(validate_bool(val), val)
        for val in ('false', 'F', '0', False, 0, None):
            self.assertFalse(validate_bool(val), val)
        with self.assertRaises(ValidationError):
            validate_bool('yes')

    def test_tau(self):
        self.assertIsNone(validate_tau(None))
        self.assertEqual(validate_tau('0.25'), 0.25)
        self.assertEqual(validate_tau(1), 1.0)
        for val in ('abc', -0.1, 1.5):
            with self.assertRaises(ValidationError):
                validate_tau(val)

    def test_port(self):
        self.assertEqual(validate_port('8080'), 8080)
        for val in ('http', 0, 70000):
            with self.assertRaises(ValidationError):
                validate_port(val)

    def test_check_keys(self):
        self.assertEqual(check_keys('synth', {'grid': 10}, SynthSettings._fields), {'grid': 10})
        with self.assertRaises(ValidationError):
            check_keys('synth', {'gird': 10}, SynthSettings._fields)


class TestLoadConfig(unittest.TestCase):
    def tearDown(self):
        for path in getattr(self, 'paths', []):
            os.unlink(path)

    def config_file(self, text: str) -> str:
        path = write_config(text)
        self.paths = getattr(self, 'paths', []) + [path]
        return path

    def test_defaults(self):
        config = load_config(None)
        self.assertEqual(config, Config())
        self.assertEqual(config.synth.grid, 20)
        self.assertIsNone(config.features.zero_distance_efficiency)

    def test_sections(self):
        path = self.config_file('[synth]\ngrid = 30\nreverse_profile = "true"\n\n'
                                '[classifier]\nkind = "knn"\nk = 7\n\n'
                                '[service]\nport = 9000\ntau = 0.3\n')
        config = load_config(path)
        self.assertEqual(config.synth.grid, 30)
        self.assertIs(config.synth.reverse_profile, True)
        self.assertEqual(config.classifier, {'kind': 'knn', 'k': 7})
        self.assertEqual(config.service.port, 9000)
        self.assertEqual(config.service.tau, 0.3)

    def test_unknown_keys(self):
        with self.assertRaises(ValidationError):
            load_config(self.config_file('[synth]\ngird = 30\n'))
        with self.assertRaises(ValidationError):
            load_config(self.config_file('[telemetry]\nenabled = true\n'))

    def test_bad_values(self):
        with self.assertRaises(ValidationError):
            load_config(self.config_file('[service]\ntau = 2.0\n'))
        with self.assertRaises(ValidationError):
            load_config(self.config_file('[synth\n'))

    def test_missing(self):
        with self.assertRaises(MissingPath):
            load_config(str(Path(tempfile.gettempdir()) / 'no-such-swipe-guard.toml'))


class TestServiceSettings(unittest.TestCase):
    def test_env_overrides_config(self):
        config = Config(service=ServiceSettings(bundle='config.json', port=9000))
        env = {'SWIPE_GUARD_BUNDLE': 'env.json', 'SWIPE_GUARD_PORT': '9100', 'SWIPE_GUARD_TAU': '0.8'}
        with mock.patch.dict(os.environ, env):
            settings = get_service_settings(config)
        self.assertEqual(settings.bundle, 'env.json')
        self.assertEqual(settings.port, 9100)
        self.assertEqual(settings.tau, 0.8)
        self.assertEqual(settings.host, '0.0.0.0')

    def test_config_only(self):
        config = Config(service=ServiceSettings(bundle='config.json'))
        with mock.patch.dict(os.environ, {}, clear=True):
            settings = get_service_settings(config)
        self.assertEqual(settings, ServiceSettings(bundle='config.json'))

    def test_env_zero_tau(self):
        config = Config(service=ServiceSettings(bundle='config.json', tau=0.7))
        with mock.patch.dict(os.environ, {'SWIPE_GUARD_TAU': '0'}):
            self.assertEqual(get_service_settings(config).tau, 0.0)
        with mock.patch.dict(os.environ, {'SWIPE_GUARD_TAU': '0.0'}):
            self.assertEqual(get_service_settings(config).tau, 0.0)

    def test_empty_env_ignored(self):
        config = Config(service=ServiceSettings(bundle='config.json', port=9000, tau=0.7))
        env = {'SWIPE_GUARD_TAU': '', 'SWIPE_GUARD_PORT': ' ', 'SWIPE_GUARD_BUNDLE': ''}
        with mock.patch.dict(os.environ, env):
            settings = get_service_settings(config)
        self.assertEqual(settings, config.service)

    def test_invalid_env(self):
        config = Config(service=ServiceSettings(bundle='config.json'))
        with mock.patch.dict(os.environ, {'SWIPE_GUARD_TAU': 'high'}):
            with self.assertRaises(ValidationError):
                get_service_settings(config)

    def test_missing_bundle_exits(self):
        with mock.patch.dict(os.environ, {}, clear=True):
            with self.assertRaises(SystemExit) as ctx:
                get_service_settings(Config())
        self.assertEqual(ctx.exception.code, 1)
