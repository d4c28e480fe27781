import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from apps.survival.dataset import (
    CsvSchema,
    SurvivalDataset,
    read_csv,
    split_train_validation,
    write_csv,
)
from apps.survival.exceptions import DatasetError


def random_dataset(n=40, p=3, seed=0, strata=False):
    rng = np.random.default_rng(seed)
    labels = [f"s{k}" for k in rng.integers(0, 3, size=n)] if strata else None
    return SurvivalDataset.from_arrays(
        time=rng.exponential(10.0, size=n),
        event=rng.integers(0, 4, size=n),
        covariates=rng.normal(size=(n, p)),
        strata=labels,
    )


class ReadWriteCsvTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def _write(self, name, text):
        path = self.dir / name
        path.write_text(text)
        return path

    def test_reads_simple_file(self):
        path = self._write('d.csv', "time,event,x1\n1.5,1,0.2\n2.0,0,-1\n3.25,2,4\n")
        dataset = read_csv(path)
        self.assertEqual(dataset.n, 3)
        self.assertEqual(dataset.p, 1)
        self.assertEqual(dataset.feature_names, ('x1',))
        self.assertEqual(dataset.event.tolist(), [1, 0, 2])
        self.assertEqual(dataset.time.tolist(), [1.5, 2.0, 3.25])

    def test_event_code_out_of_range_names_row(self):
        path = self._write('d.csv', "time,event,x1\n1,1,0\n2,4,0\n")
        with self.assertRaises(DatasetError) as ctx:
            read_csv(path)
        self.assertEqual(ctx.exception.row, 2)
        self.assertIn('row 2', str(ctx.exception))

    def test_negative_time_rejected(self):
        path = self._write('d.csv', "time,event,x1\n-1,1,0\n")
        with self.assertRaises(DatasetError):
            read_csv(path)

    def test_unparseable_cell_reports_row_and_column(self):
        path = self._write('d.csv', "time,event,x1\n1,1,0\n2,0,abc\n")
        with self.assertRaises(DatasetError) as ctx:
            read_csv(path)
        self.assertEqual((ctx.exception.row, ctx.exception.column), (2, 'x1'))

    def test_missing_covariate_rejected(self):
        path = self._write('d.csv', "time,event,x1\n1,1,\n")
        with self.assertRaises(DatasetError):
            read_csv(path)

    def test_missing_column(self):
        path = self._write('d.csv', "t,event,x1\n1,1,0\n")
        with self.assertRaises(DatasetError):
            read_csv(path)

    def test_custom_schema(self):
        path = self._write('d.csv', "T,D,a,b,grp\n1,1,0,5,u\n2,3,1,6,v\n")
        dataset = read_csv(path, CsvSchema(time='T', event='D', stratum='grp', features=['b']))
        self.assertEqual(dataset.feature_names, ('b',))
        self.assertEqual(dataset.strata, ('u', 'v'))
        self.assertEqual(dataset.covariates[:, 0].tolist(), [5.0, 6.0])

    def test_empty_dataset_writes_header_only(self):
        dataset = SurvivalDataset.from_arrays([], [], np.empty((0, 2)), feature_names=['x1', 'x2'])
        path = self.dir / 'empty.csv'
        write_csv(dataset, path)
        self.assertEqual(path.read_text().strip(), 'time,event,x1,x2')

    def test_stratum_column_emitted(self):
        dataset = random_dataset(n=5, strata=True)
        path = self.dir / 's.csv'
        write_csv(dataset, path)
        self.assertTrue(path.read_text().startswith('time,event,stratum,x1'))

    def test_round_trip_identity(self):
        for strata in (False, True):
            dataset = random_dataset(n=60, strata=strata, seed=3)
            path = self.dir / 'rt.csv'
            write_csv(dataset, path)
            again = read_csv(path)
            self.assertEqual(again, dataset)
            self.assertEqual(again.records, dataset.records)

    def test_round_trip_is_byte_stable(self):
        dataset = random_dataset(n=25, seed=9)
        first, second = self.dir / 'a.csv', self.dir / 'b.csv'
        write_csv(dataset, first)
        write_csv(read_csv(first), second)
        self.assertEqual(first.read_bytes(), second.read_bytes())


class SplitTests(SimpleTestCase):
    def test_half_split(self):
        train, validation = split_train_validation(random_dataset(n=10), 0.5, seed=1)
        self.assertEqual((train.n, validation.n), (5, 5))

    def test_deterministic(self):
        dataset = random_dataset(n=31)
        a = split_train_validation(dataset, 0.3, seed=7)
        b = split_train_validation(dataset, 0.3, seed=7)
        self.assertEqual(a[0], b[0])
        self.assertEqual(a[1], b[1])

    def test_partition_identity(self):
        dataset = random_dataset(n=23)
        for fraction in (0.2, 0.5, 0.9):
            train, validation = split_train_validation(dataset, fraction, seed=11)
            combined = sorted(train.time.tolist() + validation.time.tolist())
            self.assertEqual(combined, sorted(dataset.time.tolist()))
            self.assertEqual(train.n + validation.n, dataset.n)

    def test_fraction_bounds(self):
        for fraction in (0.0, 1.0, -0.1):
            with self.assertRaises(DatasetError):
                split_train_validation(random_dataset(n=4), fraction, seed=0)

    def test_requires_two_records(self):
        with self.assertRaises(DatasetError):
            split_train_validation(random_dataset(n=1), 0.5, seed=0)


class DatasetValidationTests(SimpleTestCase):
    def test_rejects_non_finite_covariate(self):
        with self.assertRaises(DatasetError):
            SurvivalDataset.from_arrays([1.0], [1], [[np.nan]])

    def test_metadata_counts(self):
        dataset = SurvivalDataset.from_arrays([1, 2, 3, 4], [0, 1, 1, 2], np.zeros((4, 1)))
        meta = dataset.metadata()
        self.assertEqual(meta['n'], 4)
        self.assertEqual(meta['event_counts'], {'0': 1, '1': 2, '2': 1, '3': 0})

    def test_require_events(self):
        dataset = SurvivalDataset.from_arrays([1, 2], [0, 0], np.zeros((2, 1)))
        with self.assertRaises(DatasetError):
            dataset.require_events()
