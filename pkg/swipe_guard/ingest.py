"""Corpus ingestion.

Canonical layout: `<root>/<user_id>/<session_id>.jsonl`, one JSON record per line:

    {"label": "human", "session": "s1", "device": "d1", "screen": [1080, 1920],
     "touch": [[x_px, y_px, t_ms], ...], "accel": [[ax, ay, az, t_ms], ...]}

The HuMIdb adapter reads the drag-and-drop channel of a session directory
(`<root>/<user_id>/<session_id>/`) and builds the same records.
"""
from concurrent.futures import ThreadPoolExecutor
import json
import logging
from pathlib import Path
from typing import Iterable, Optional

import numpy as np
import pandas as pd

from .errors import DataError, EmptyCorpus, MissingPath, SchemaViolation, ValidationError
from .traces import Corpus, Label, SwipeMeta, SwipeSample, normalize_accel, normalize_touch

LOGGER = logging.getLogger('swg.ingest')

FORMATS = ('canonical', 'humidb_adapter')

SYNTH_SCREEN = (1080, 1920)

# HuMIdb export names; adjust here if a release renames them
HUMIDB_INFO_FILE = 'info.json'
HUMIDB_TOUCH_FILE = 'drag_touch.csv'
HUMIDB_ACCEL_FILE = 'drag_accel.csv'
HUMIDB_TOUCH_COLUMNS = ('x', 'y', 'p', 't')
HUMIDB_ACCEL_COLUMNS = ('x', 'y', 'z', 't')


def _check_points(name: str, value, width: int, path: str, line: int) -> list:
    if not isinstance(value, list):
        raise SchemaViolation(f'"{name}" must be a list', path, line)
    for point in value:
        if not isinstance(point, list) or len(point) != width:
            raise SchemaViolation(f'"{name}" entries must have {width} fields', path, line)
        for vv in point:
            if isinstance(vv, bool) or not isinstance(vv, (int, float)):
                raise SchemaViolation(f'"{name}" entries must be numbers', path, line)
    return value


def parse_label(value: str, path: str = None, line: int = None) -> Label:
    try:
        return Label(value)
    except ValueError:
        raise SchemaViolation(f'unknown label "{value}"', path, line)


def parse_record(record: dict, path: str = '<memory>', line: int = 0, accel_pad_s: float = 0.0) -> SwipeSample:
    if not isinstance(record, dict):
        raise SchemaViolation('record must be a JSON object', path, line)
    for key in ('screen', 'touch'):
        if key not in record:
            raise SchemaViolation(f'missing field "{key}"', path, line)
    screen = record['screen']
    if (not isinstance(screen, list) or len(screen) != 2
            or not all(isinstance(vv, int) and not isinstance(vv, bool) for vv in screen)):
        raise SchemaViolation('"screen" must be [width_px, height_px] integers', path, line)
    touch_points = _check_points('touch', record['touch'], 3, path, line)
    accel_points = _check_points('accel', record.get('accel') or [], 4, path, line)
    label = parse_label(record.get('label', Label.HUMAN.value), path, line)
    try:
        touch = normalize_touch(touch_points, screen[0], screen[1])
        t0_ms = touch_points[0][2]
        accel = normalize_accel(accel_points, t0_ms, touch.duration, accel_pad_s) if accel_points else None
    except (DataError, ValidationError) as exc:
        raise SchemaViolation(str(exc), path, line)
    meta = SwipeMeta(str(record.get('device', '')), screen[0], screen[1], str(record.get('session', '')))
    return SwipeSample(touch, accel, label, meta)


def read_canonical_file(path: Path, accel_pad_s: float = 0.0) -> tuple[list, list]:
    samples, warnings = [], []
    with path.open('r', encoding='utf-8') as fp:
        for line_no, line in enumerate(fp, start=1):
            if not line.strip():
                continue
            try:
                try:
                    record = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise SchemaViolation(f'invalid JSON: {exc.msg}', str(path), line_no)
                samples.append(parse_record(record, str(path), line_no, accel_pad_s))
            except SchemaViolation as exc:
                LOGGER.warning('%s', exc)
                warnings.append(str(exc))
    return samples, warnings


def humidb_session_to_record(session_dir: Path) -> dict:
    """Map one HuMIdb session directory to a canonical record."""
    info_path = session_dir / HUMIDB_INFO_FILE
    touch_path = session_dir / HUMIDB_TOUCH_FILE
    if not touch_path.is_file() or not info_path.is_file():
        raise SchemaViolation('missing drag-and-drop touch or info file', str(session_dir))
    with info_path.open('r', encoding='utf-8') as fp:
        try:
            info = json.load(fp)
        except json.JSONDecodeError as exc:
            raise SchemaViolation(f'invalid JSON: {exc.msg}', str(info_path))
    touch_df = pd.read_csv(touch_path)
    missing = [cc for cc in HUMIDB_TOUCH_COLUMNS if cc not in touch_df.columns and cc != 'p']
    if missing:
        raise SchemaViolation(f'missing columns {missing}', str(touch_path))
    # pressure is discarded
    record = {
        'label': Label.HUMAN.value,
        'session': session_dir.name,
        'device': str(info.get('device', '')),
        'screen': [int(vv) for vv in info.get('screen', [0, 0])],
        'touch': touch_df[['x', 'y', 't']].astype(float).values.tolist(),
        'accel': [],
    }
    accel_path = session_dir / HUMIDB_ACCEL_FILE
    if accel_path.is_file():
        accel_df = pd.read_csv(accel_path)
        if all(cc in accel_df.columns for cc in HUMIDB_ACCEL_COLUMNS):
            record['accel'] = accel_df[list(HUMIDB_ACCEL_COLUMNS)].astype(float).values.tolist()
        else:
            LOGGER.warning('%s: unexpected accelerometer columns, channel skipped', accel_path)
    return record


def read_humidb_session(session_dir: Path, accel_pad_s: float = 0.0) -> tuple[list, list]:
    try:
        record = humidb_session_to_record(session_dir)
        return [parse_record(record, str(session_dir), None, accel_pad_s)], []
    except SchemaViolation as exc:
        LOGGER.warning('%s', exc)
        return [], [str(exc)]
    except (OSError, ValueError, pd.errors.ParserError) as exc:
        LOGGER.warning('%s: %s', session_dir, exc)
        return [], [f'{session_dir}: {exc}']


def _read_canonical_safe(path: Path, accel_pad_s: float) -> tuple[list, list]:
    try:
        return read_canonical_file(path, accel_pad_s)
    except (OSError, UnicodeDecodeError) as exc:
        LOGGER.warning('%s: %s', path, exc)
        return [], [f'{path}: {exc}']


def _find_units(root: Path, format_tag: str) -> list[Path]:
    if format_tag == 'canonical':
        if root.is_file():
            return [root]
        return sorted(root.rglob('*.jsonl'))
    return sorted(pp.parent for pp in root.rglob(HUMIDB_TOUCH_FILE))


def ingest_corpus(root_path, format_tag: str = 'canonical', accel_pad_s: float = 0.0,
                  workers: int = 4) -> Corpus:
    """Read every parseable sample under `root_path`.

    Unparseable records and files become warnings; the call fails only when
    nothing parses.
    """
    if format_tag not in FORMATS:
        raise ValidationError(f'unknown corpus format "{format_tag}"')
    root = Path(root_path)
    if not root.exists():
        raise MissingPath(f'corpus path "{root}" does not exist')
    units = _find_units(root, format_tag)
    reader = _read_canonical_safe if format_tag == 'canonical' else read_humidb_session
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(lambda unit: reader(unit, accel_pad_s), units))
    samples = [ss for found, _ in results for ss in found]
    warnings = [ww for _, found in results for ww in found]
    if not samples:
        raise EmptyCorpus(f'no valid sample under "{root}" ({len(warnings)} warnings)')
    LOGGER.info('ingested %d samples from %d files under "%s" (%d warnings)', len(samples), len(units), root,
                len(warnings))
    return Corpus(samples, str(root), warnings)


def sample_to_record(sample: SwipeSample) -> dict:
    meta = sample.meta
    width, height = (meta.screen_w_px, meta.screen_h_px) if meta.screen_w_px else SYNTH_SCREEN
    touch = np.stack([sample.touch.x * width, sample.touch.y * height, sample.touch.t * 1000.0], axis=1)
    record = {
        'label': sample.label.value,
        'session': meta.session_id,
        'device': meta.device_id,
        'screen': [int(width), int(height)],
        'touch': touch.tolist(),
        'accel': [],
    }
    if sample.accel is not None:
        accel = np.concatenate([sample.accel.channels, sample.accel.t[:, None] * 1000.0], axis=1)
        record['accel'] = accel.tolist()
    return record


def write_corpus(samples: Iterable[SwipeSample], path) -> int:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with out.open('w', encoding='utf-8') as fp:
        for sample in samples:
            fp.write(json.dumps(sample_to_record(sample)))
            fp.write('\n')
            count += 1
    LOGGER.info('wrote %d records to "%s"', count, out)
    return count


def load_corpora(paths: Optional[Iterable[str]], accel_pad_s: float = 0.0) -> Corpus:
    corpora = [ingest_corpus(pp, 'canonical', accel_pad_s) for pp in (paths or [])]
    if not corpora:
        raise EmptyCorpus('no corpus path given')
    return Corpus.concat(corpora)
