import json
import logging
from pathlib import Path
import tempfile
import unittest

import numpy as np

from swipe_guard.errors import EmptyCorpus, MissingPath, SchemaViolation, ValidationError
from swipe_guard.ingest import ingest_corpus, parse_record, write_corpus
from swipe_guard.traces import Label

from fixtures import human_corpus

logging.basicConfig(level=logging.INFO,
                    format='%(asctime)s|%(name)s|%(levelname)s|%(message)s')

valid_record = {
    'label': 'human',
    'session': 's1',
    'device': 'pixel',
    'screen': [1080, 1920],
    'touch': [[100, 200, 5000], [300, 260, 5050], [600, 400, 5120]],
    'accel': [[0.1, 0.2, 9.8, 4990], [0.2, 0.1, 9.7, 5000], [0.0, 0.3, 9.9, 5100], [0.5, 0.5, 9.0, 6000]],
}


class TestParseRecord(unittest.TestCase):
    def test_valid(self):
        sample = parse_record(valid_record)
        self.assertIs(sample.label, Label.HUMAN)
        self.assertAlmostEqual(sample.touch.duration, 0.12)
        # accel cropped to the gesture window
        self.assertEqual(len(sample.accel), 2)
        self.assertEqual(sample.meta.device_id, 'pixel')

    def test_missing_field(self):
        record = dict(valid_record)
        del record['screen']
        with self.assertRaises(SchemaViolation):
            parse_record(record, 'file.jsonl', 3)

    def test_bad_point(self):
        record = dict(valid_record, touch=[[1, 2], [3, 4]])
        with self.assertRaises(SchemaViolation) as ctx:
            parse_record(record, 'file.jsonl', 7)
        self.assertEqual(ctx.exception.line, 7)
        self.assertEqual(ctx.exception.path, 'file.jsonl')

    def test_zero_screen_is_schema_violation(self):
        with self.assertRaises(SchemaViolation):
            parse_record(dict(valid_record, screen=[0, 1920]))

    def test_unknown_label(self):
        with self.assertRaises(SchemaViolation):
            parse_record(dict(valid_record, label='robot'))

    def test_no_accel(self):
        sample = parse_record(dict(valid_record, accel=[]))
        self.assertIsNone(sample.accel)


class TestIngestCorpus(unittest.TestCase):
    def test_skips_bad_lines(self):
        with tempfile.TemporaryDirectory() as tmp:
            user = Path(tmp) / 'user1'
            user.mkdir()
            lines = [json.dumps(valid_record), '{not json', json.dumps(dict(valid_record, touch=[[1, 1, 0]])),
                     '', json.dumps(valid_record)]
            (user / 'session1.jsonl').write_text('\n'.join(lines) + '\n', encoding='utf-8')
            corpus = ingest_corpus(tmp)
        self.assertEqual(len(corpus), 2)
        self.assertEqual(len(corpus.warnings), 2)
        self.assertIn(':2:', corpus.warnings[0])

    def test_all_bad(self):
        with tempfile.TemporaryDirectory() as tmp:
            (Path(tmp) / 'bad.jsonl').write_text('{nope\n', encoding='utf-8')
            with self.assertRaises(EmptyCorpus):
                ingest_corpus(tmp)

    def test_missing_path(self):
        with self.assertRaises(MissingPath):
            ingest_corpus('/nonexistent/corpus/root')

    def test_unknown_format(self):
        with self.assertRaises(ValidationError):
            ingest_corpus('.', 'parquet')

    def test_written_corpus_reads_back(self):
        corpus = human_corpus(6, seed=3)
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'out' / 'humans.jsonl'
            self.assertEqual(write_corpus(corpus, path), 6)
            again = ingest_corpus(path)
        self.assertEqual(len(again), 6)
        for before, after in zip(corpus, again):
            self.assertIs(after.label, Label.HUMAN)
            np.testing.assert_allclose(after.touch.x, before.touch.x, atol=1e-9)
            np.testing.assert_allclose(after.touch.t, before.touch.t, atol=1e-9)
            # the last sample may fall just outside the re-read window
            self.assertLessEqual(len(before.accel) - len(after.accel), 1)

    def test_humidb_adapter(self):
        with tempfile.TemporaryDirectory() as tmp:
            session = Path(tmp) / 'user7' / 'session3'
            session.mkdir(parents=True)
            (session / 'info.json').write_text(json.dumps({'device': 'phone', 'screen': [1000, 2000]}),
                                               encoding='utf-8')
            (session / 'drag_touch.csv').write_text('x,y,p,t\n100,200,0.5,0\n300,400,0.6,50\n500,800,0.4,120\n',
                                                    encoding='utf-8')
            (session / 'drag_accel.csv').write_text('x,y,z,t\n0.1,0.2,9.8,0\n0.2,0.3,9.7,60\n',
                                                    encoding='utf-8')
            broken = Path(tmp) / 'user8' / 'session1'
            broken.mkdir(parents=True)
            (broken / 'drag_touch.csv').write_text('x,y,p,t\n1,1,1,0\n', encoding='utf-8')
            corpus = ingest_corpus(tmp, 'humidb_adapter')
        self.assertEqual(len(corpus), 1)
        self.assertEqual(len(corpus.warnings), 1)
        sample = corpus[0]
        np.testing.assert_allclose(sample.touch.x, [0.1, 0.3, 0.5])
        np.testing.assert_allclose(sample.touch.y, [0.1, 0.2, 0.4])
        self.assertEqual(len(sample.accel), 2)
        self.assertEqual(sample.meta.session_id, 'session3')
