import tempfile
from pathlib import Path

import numpy as np
import pandas as pd
from django.test import SimpleTestCase

from apps.survival.dataset import SurvivalDataset
from apps.survival.estimators import (
    StepFunction,
    aalen_johansen,
    compute_pseudo,
    kaplan_meier,
    naive_pseudo_observations,
    pseudo_observations,
    stratified_pseudo_observations,
)
from apps.survival.exceptions import DatasetError, EstimatorError


def make_dataset(time, event, strata=None):
    return SurvivalDataset.from_arrays(time, event, np.zeros((len(time), 1)), strata=strata)


MIXED = make_dataset([1, 2, 3, 3, 4], [1, 0, 2, 1, 0])


def censored_dataset(n=20, seed=0, causes=(1, 2, 3)):
    rng = np.random.default_rng(seed)
    time = np.round(rng.exponential(5.0, size=n), 1) + 0.1
    event = rng.choice((0,) + tuple(causes), size=n)
    return make_dataset(time, event)


def tied_datasets(count, seed, censoring=True):
    """Between 2 and 50 records on a half-unit time lattice, so ties are common."""
    rng = np.random.default_rng(seed)
    for _ in range(count):
        n = int(rng.integers(2, 51))
        time = rng.integers(1, 13, size=n) * 0.5
        event = rng.integers(0 if censoring else 1, 4, size=n)
        yield make_dataset(time, event)


class StepFunctionTests(SimpleTestCase):
    def test_right_continuous(self):
        step = StepFunction(np.array([1.0, 2.0]), np.array([0.5, 0.25]), 1.0)
        self.assertEqual(step(0.5), 1.0)
        self.assertEqual(step(1.0), 0.5)
        self.assertEqual(step.left_limit(1.0), 1.0)
        self.assertEqual(step(10.0), 0.25)

    def test_rejects_unsorted_jumps(self):
        with self.assertRaises(EstimatorError):
            StepFunction(np.array([2.0, 1.0]), np.array([0.1, 0.2]))


class KaplanMeierTests(SimpleTestCase):
    def test_no_censoring(self):
        km = kaplan_meier(make_dataset([1, 2, 3], [1, 1, 1]))
        np.testing.assert_allclose(km([0.5, 1, 2, 3]), [1, 2 / 3, 1 / 3, 0], atol=1e-15)

    def test_all_censored(self):
        km = kaplan_meier(make_dataset([1, 2, 3], [0, 0, 0]))
        np.testing.assert_array_equal(km([0, 1, 5]), [1, 1, 1])

    def test_mixed_fixture(self):
        km = kaplan_meier(MIXED)
        np.testing.assert_allclose(km([0.5, 1, 2, 2.9, 3, 4, 9]),
                                   [1, 0.8, 0.8, 0.8, 0.8 / 3, 0.8 / 3, 0.8 / 3], atol=1e-15)

    def test_empty(self):
        with self.assertRaises(DatasetError):
            kaplan_meier(make_dataset([], []))


class AalenJohansenTests(SimpleTestCase):
    def test_mixed_fixture(self):
        cif1 = aalen_johansen(MIXED, 1)
        cif2 = aalen_johansen(MIXED, 2)
        np.testing.assert_allclose(cif1([0.5, 1, 2, 3, 4]), [0, 0.2, 0.2, 0.2 + 0.8 / 3, 0.2 + 0.8 / 3])
        np.testing.assert_allclose(cif2([0.5, 1, 2, 3, 4]), [0, 0, 0, 0.8 / 3, 0.8 / 3])

    def test_empirical_without_censoring(self):
        dataset = make_dataset([1, 2, 3, 4, 5], [1, 2, 1, 1, 2])
        cif = aalen_johansen(dataset, 1)
        grid = np.array([0.5, 1, 2.5, 3, 4.5, 6])
        expected = [np.mean((dataset.time <= t) & (dataset.event == 1)) for t in grid]
        np.testing.assert_allclose(cif(grid), expected, atol=1e-15)

    def test_single_cause_complements_survival(self):
        dataset = make_dataset([1, 2, 2, 4, 5, 7], [1, 0, 1, 1, 0, 1])
        grid = np.linspace(0, 8, 33)
        np.testing.assert_allclose(aalen_johansen(dataset, 1)(grid), 1 - kaplan_meier(dataset)(grid), atol=1e-12)

    def test_unobserved_cause_is_zero(self):
        cif = aalen_johansen(MIXED, 3)
        np.testing.assert_array_equal(cif([1, 10]), [0, 0])

    def test_invalid_cause(self):
        with self.assertRaises(EstimatorError):
            aalen_johansen(MIXED, 4)

    def test_sum_identity(self):
        grid = np.arange(0.0, 7.0, 0.25)
        for dataset in tied_datasets(500, seed=101):
            total = kaplan_meier(dataset)(grid) + sum(aalen_johansen(dataset, c)(grid) for c in (1, 2, 3))
            np.testing.assert_allclose(total, 1.0, rtol=0, atol=1e-12)


class PseudoObservationTests(SimpleTestCase):
    def test_three_records(self):
        pseudo = pseudo_observations(make_dataset([1, 2, 3], [1, 1, 1]), [1], [2.5])
        np.testing.assert_allclose(pseudo.column(1, 2.5), [1, 1, 0], atol=1e-12)

    def test_indicators_without_censoring(self):
        dataset = make_dataset([1, 2, 3, 4, 5, 6, 7], [1, 2, 3, 1, 1, 2, 1])
        grid = [1.5, 3.5, 5, 8]
        pseudo = pseudo_observations(dataset, [1, 2], grid)
        for t in grid:
            for cause in (1, 2):
                expected = ((dataset.time <= t) & (dataset.event == cause)).astype(float)
                np.testing.assert_allclose(pseudo.column(cause, t), expected, atol=1e-12)
            np.testing.assert_allclose(pseudo.survival_at(t), (dataset.time > t).astype(float), atol=1e-12)

    def test_indicators_without_censoring_on_tied_data(self):
        grid = [0.5, 1.75, 3.0, 4.5, 6.0]
        for dataset in tied_datasets(500, seed=202, censoring=False):
            pseudo = pseudo_observations(dataset, [1, 2, 3], grid)
            for t in grid:
                for cause in (1, 2, 3):
                    expected = ((dataset.time <= t) & (dataset.event == cause)).astype(float)
                    np.testing.assert_allclose(pseudo.column(cause, t), expected, rtol=0, atol=1e-12)

    def test_matches_naive_oracle(self):
        grid = [0.5, 1.25, 2.0, 3.5, 5.0, 30.0]
        for dataset in tied_datasets(100, seed=303):
            pseudo = pseudo_observations(dataset, [1, 2, 3], grid)
            for cause in (1, 2, 3):
                oracle = naive_pseudo_observations(dataset, cause, grid)
                np.testing.assert_allclose(pseudo.values[:, :, pseudo.cause_index(cause)], oracle,
                                           rtol=0, atol=1e-12)

    def test_matches_naive_oracle_on_continuous_times(self):
        for seed in range(6):
            dataset = censored_dataset(n=20 + 6 * seed, seed=seed)
            grid = [1.0, 2.5, 4.0, 7.5, 30.0]
            pseudo = pseudo_observations(dataset, [1, 2, 3], grid)
            oracle = naive_pseudo_observations(dataset, 2, grid)
            np.testing.assert_allclose(pseudo.values[:, :, pseudo.cause_index(2)], oracle, rtol=0, atol=1e-12)

    def test_survival_identity_is_exact(self):
        pseudo = pseudo_observations(censored_dataset(seed=4), [1, 2, 3], [2.0, 5.0])
        np.testing.assert_array_equal(pseudo.survival_pseudo, 1.0 - pseudo.values.sum(axis=2))

    def test_survival_pseudo_covers_unrequested_causes(self):
        dataset = censored_dataset(n=30, seed=2)
        only_one = pseudo_observations(dataset, [1], [3.0])
        every = pseudo_observations(dataset, [1, 2, 3], [3.0])
        np.testing.assert_allclose(only_one.survival_pseudo, every.survival_pseudo, atol=1e-12)

    def test_mean_identity(self):
        # continuous times; grid below the second-largest observation
        rng = np.random.default_rng(12)
        dataset = make_dataset(rng.exponential(5.0, size=45), rng.integers(0, 4, size=45))
        upper = np.sort(dataset.time)[-2]
        grid = np.linspace(0.2, 0.95 * upper, 7)
        pseudo = pseudo_observations(dataset, [1, 2, 3], grid)
        for cause in (1, 2, 3):
            full = aalen_johansen(dataset, cause)(grid)
            np.testing.assert_allclose(pseudo.values[:, :, pseudo.cause_index(cause)].mean(axis=0), full,
                                       atol=1e-12)

    def test_mean_identity_on_tied_data(self):
        for dataset in tied_datasets(500, seed=404):
            upper = np.sort(dataset.time)[-2]
            grid = upper * np.array([0.3, 0.6, 0.95])
            pseudo = pseudo_observations(dataset, [1, 2, 3], grid)
            for cause in (1, 2, 3):
                full = aalen_johansen(dataset, cause)(grid)
                np.testing.assert_allclose(pseudo.values[:, :, pseudo.cause_index(cause)].mean(axis=0), full,
                                           rtol=0, atol=1e-12)

    def test_block_boundary(self):
        dataset = censored_dataset(n=300, seed=8)
        pseudo = pseudo_observations(dataset, [1], [4.0])
        self.assertEqual(pseudo.values.shape, (300, 1, 1))
        np.testing.assert_allclose(pseudo.values[:, :, 0], naive_pseudo_observations(dataset, 1, [4.0]), atol=1e-12)

    def test_grid_beyond_last_time_carries_forward(self):
        pseudo = pseudo_observations(MIXED, [1], [4.0, 100.0])
        np.testing.assert_array_equal(pseudo.column(1, 4.0), pseudo.column(1, 100.0))

    def test_requires_two_records(self):
        with self.assertRaises(EstimatorError):
            pseudo_observations(make_dataset([1], [1]), [1], [1.0])

    def test_rejects_bad_grid(self):
        with self.assertRaises(EstimatorError):
            pseudo_observations(MIXED, [1], [0.0])
        with self.assertRaises(EstimatorError):
            pseudo_observations(MIXED, [1], [])

    def test_unknown_time_lookup(self):
        pseudo = pseudo_observations(MIXED, [1], [2.0])
        with self.assertRaises(EstimatorError):
            pseudo.column(1, 3.0)

    def test_csv_export(self):
        pseudo = pseudo_observations(MIXED, [1, 2], [2.0, 3.5])
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'pseudo.csv'
            pseudo.write_csv(path)
            frame = pd.read_csv(path)
        self.assertEqual(list(frame.columns), ['subject_id', 'time', 'cause', 'pseudo'])
        self.assertEqual(len(frame), 5 * 2 * 3)
        row = frame[(frame.subject_id == 3) & (frame.time == 3.5) & (frame.cause == 1)]
        self.assertAlmostEqual(float(row.pseudo.iloc[0]), pseudo.column(1, 3.5)[3], places=12)


class StratifiedPseudoTests(SimpleTestCase):
    def test_single_stratum_matches_unstratified(self):
        dataset = censored_dataset(n=25, seed=5)
        labelled = SurvivalDataset.from_arrays(dataset.time, dataset.event, dataset.covariates,
                                               strata=['a'] * 25)
        grid = [1.0, 3.0, 6.0]
        np.testing.assert_allclose(stratified_pseudo_observations(labelled, [1, 2], grid).values,
                                   pseudo_observations(dataset, [1, 2], grid).values, atol=1e-12)

    def test_uncensored_strata_give_indicators(self):
        dataset = make_dataset([1, 2, 3, 1.5, 2.5, 3.5], [1, 2, 1, 1, 1, 2], strata=list('aaabbb'))
        pseudo = compute_pseudo(dataset, [1], [2.2], stratified=True)
        np.testing.assert_allclose(pseudo.column(1, 2.2), [1, 0, 0, 1, 0, 0], atol=1e-12)

    def test_short_stratum_carries_forward(self):
        dataset = make_dataset([1, 2, 3, 1, 4, 6, 8], [1, 0, 1, 2, 1, 0, 1], strata=list('aaabbbb'))
        pseudo = stratified_pseudo_observations(dataset, [1], [5.0])
        short = dataset.subset([0, 1, 2])
        oracle = naive_pseudo_observations(short, 1, [3.0])
        np.testing.assert_allclose(pseudo.column(1, 5.0)[:3], oracle[:, 0], atol=1e-12)

    def test_rows_in_input_order(self):
        dataset = make_dataset([1, 4, 2, 5, 3, 6], [1, 1, 0, 2, 1, 1], strata=list('ababab'))
        pseudo = stratified_pseudo_observations(dataset, [1], [3.5])
        a = pseudo_observations(dataset.subset([0, 2, 4]), [1], [3.5])
        np.testing.assert_allclose(pseudo.column(1, 3.5)[[0, 2, 4]], a.column(1, 3.5), atol=1e-12)

    def test_singleton_stratum(self):
        dataset = make_dataset([1, 2, 3], [1, 1, 0], strata=['a', 'a', 'b'])
        with self.assertRaises(EstimatorError):
            stratified_pseudo_observations(dataset, [1], [2.0])

    def test_missing_stratum(self):
        with self.assertRaises(DatasetError):
            stratified_pseudo_observations(make_dataset([1, 2, 3], [1, 1, 0], strata=['a', '', 'a']), [1], [2.0])
        with self.assertRaises(DatasetError):
            stratified_pseudo_observations(MIXED, [1], [2.0])
