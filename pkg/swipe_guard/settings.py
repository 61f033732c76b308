import logging
import os
try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, NamedTuple, Optional

from .errors import MissingPath, ValidationError

LOGGER = logging.getLogger('swg.settings')

TRUES = {'true', 'True', 'TRUE', 't', 'T', '1', True, 1}
FALSES = {'false', 'False', 'FALSE', 'f', 'F', '0', False, 0, None}

SECTIONS = ('ingest', 'features', 'synth', 'gan', 'classifier', 'eval', 'service')


class IngestSettings(NamedTuple):
    accel_pad_s: float = 0.0
    workers: int = 4


class FeatureSettings(NamedTuple):
    # None rejects zero-distance swipes; a number is used as their efficiency
    zero_distance_efficiency: Optional[float] = None


class SynthSettings(NamedTuple):
    grid: int = 20
    accel_rate_hz: float = 200.0
    reverse_profile: bool = False


class ServiceSettings(NamedTuple):
    bundle: Optional[str] = None
    host: str = '0.0.0.0'
    port: int = 8080
    tau: Optional[float] = None


class Config(NamedTuple):
    ingest: IngestSettings = IngestSettings()
    features: FeatureSettings = FeatureSettings()
    synth: SynthSettings = SynthSettings()
    gan: dict = {}
    classifier: dict = {}
    eval: dict = {}
    service: ServiceSettings = ServiceSettings()


def validate_bool(val: Any) -> bool:
    if val in TRUES:
        return True
    if val in FALSES:
        return False
    raise ValidationError(f'invalid boolean value: "{val}"')


def validate_tau(val: Any) -> Optional[float]:
    if val is None:
        return None
    try:
        tau = float(val)
    except (TypeError, ValueError):
        raise ValidationError(f'invalid tau value: "{val}"')
    if not 0.0 <= tau <= 1.0:
        raise ValidationError(f'tau must be in [0, 1], got {tau}')
    return tau


def validate_port(val: Any) -> int:
    try:
        port = int(val)
    except (TypeError, ValueError):
        raise ValidationError(f'invalid port: "{val}"')
    if not 0 < port < 65536:
        raise ValidationError(f'port out of range: {port}')
    return port


def check_keys(section: str, table: dict, allowed) -> dict:
    unknown = sorted(set(table) - set(allowed))
    if unknown:
        raise ValidationError(f'unknown key(s) in [{section}]: {", ".join(unknown)}')
    return table


def section_to_tuple(section: str, table: dict, cls):
    check_keys(section, table, cls._fields)
    values = {}
    for key, val in table.items():
        default = cls._field_defaults.get(key)
        if isinstance(default, bool):
            val = validate_bool(val)
        values[key] = val
    return cls(**values)


def load_config(path: Optional[str]) -> Config:
    """Read a TOML config; a None path gives the defaults."""
    if path is None:
        return Config()
    config_path = Path(path)
    if not config_path.is_file():
        raise MissingPath(f'config file "{path}" does not exist')
    with config_path.open('rb') as fp:
        try:
            doc = tomllib.load(fp)
        except tomllib.TOMLDecodeError as exc:
            raise ValidationError(f'{path}: {exc}')
    check_keys('top level', doc, SECTIONS)
    LOGGER.debug('loaded config "%s" with sections %s', path, ', '.join(doc))
    service = section_to_tuple('service', doc.get('service', {}), ServiceSettings)
    return Config(
        ingest=section_to_tuple('ingest', doc.get('ingest', {}), IngestSettings),
        features=section_to_tuple('features', doc.get('features', {}), FeatureSettings),
        synth=section_to_tuple('synth', doc.get('synth', {}), SynthSettings),
        gan=dict(doc.get('gan', {})),
        classifier=dict(doc.get('classifier', {})),
        eval=dict(doc.get('eval', {})),
        service=service._replace(tau=validate_tau(service.tau)),
    )


def get_service_settings(config: Config) -> ServiceSettings:
    """Service settings from the config file, overridden by SWIPE_GUARD_* environment variables."""
    settings = config.service
    env = {}
    for key, validate in (('bundle', str), ('host', str), ('port', validate_port), ('tau', validate_tau)):
        raw = os.environ.get(f'SWIPE_GUARD_{key.upper()}', '').strip()
        # unset and empty variables leave the config value alone
        if raw != '':
            env[key] = validate(raw)
    settings = settings._replace(**env)
    if not settings.bundle:
        LOGGER.critical('no model bundle configured (set SWIPE_GUARD_BUNDLE or [service].bundle)')
        raise SystemExit(1)
    return settings
