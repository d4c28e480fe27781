import io
import unittest

import numpy as np
from django.test import SimpleTestCase

from apps.bench.exceptions import BenchError
from apps.bench.services import (
    BenchReport,
    MethodSummary,
    evaluate_predictions,
    read_report_csv,
    render_csv,
    render_markdown,
    run_bench,
    true_binary_outcome,
)
from apps.learners.catalogue import BINARY
from apps.learners.services import make_learner
from apps.simulation.services import ScenarioConfig, TruthRecord, generate_scenario
from apps.survival.conf import pseudolearn_setting

slow = unittest.skipUnless(pseudolearn_setting('SLOW_TESTS'), "set PSEUDOLEARN_SLOW_TESTS=True")


class TrueBinaryOutcomeTests(SimpleTestCase):
    def test_cases_and_controls(self):
        truth = [
            TruthRecord(0, 5.0, 9.0, 20.0, 0.3),   # case
            TruthRecord(1, 12.0, 4.0, 20.0, 0.1),  # competing event first: neither
            TruthRecord(2, 15.0, 30.0, 1.0, 0.2),  # event-free at t*
            TruthRecord(3, 9.0, 8.0, 20.0, 0.2),   # competing event first: neither
        ]
        cases, controls = true_binary_outcome(truth, 10.0)
        self.assertEqual(cases.tolist(), [True, False, False, False])
        self.assertEqual(controls.tolist(), [False, False, True, False])


class EvaluatePredictionsTests(SimpleTestCase):
    def setUp(self):
        self.draw = generate_scenario(ScenarioConfig(scenario='A', n=200, seed=21))
        self.truth = np.array([record.true_cif for record in self.draw.validation_truth])

    def test_constant_scores(self):
        evaluation = evaluate_predictions('pseudo', self.draw.validation, np.full(200, 0.2), 26.5)
        self.assertAlmostEqual(evaluation.result.pauc, 0.5, places=12)
        self.assertIsNone(evaluation.result.tbauc)
        self.assertEqual(len(evaluation.predictiveness.bin_sizes), 10)

    def test_truth_fills_every_field(self):
        predictions = self.truth + 0.05
        result = evaluate_predictions('binary', self.draw.validation, predictions, 26.5,
                                      self.draw.validation_truth).result
        for name in ('pauc', 'tbauc', 'bias', 'sd_pred', 'mse'):
            self.assertTrue(np.isfinite(getattr(result, name)), name)
        self.assertAlmostEqual(result.bias, 0.05, places=12)
        self.assertAlmostEqual(result.mse, float(np.mean((predictions - self.truth) ** 2)), places=15)
        self.assertAlmostEqual(result.sd_pred, float(np.std(predictions, ddof=1)), places=15)

    def test_true_scores_have_no_error(self):
        result = evaluate_predictions('true', self.draw.validation, self.truth, 26.5,
                                      self.draw.validation_truth).result
        self.assertEqual((result.bias, result.mse), (0.0, 0.0))

    def test_length_mismatch(self):
        with self.assertRaises(BenchError):
            evaluate_predictions('true', self.draw.validation, self.truth[:10], 26.5)


class RunBenchTests(SimpleTestCase):
    def setUp(self):
        self.config = ScenarioConfig(scenario='A', n=120, seed=31)

    def test_true_method_over_two_replicates(self):
        report = run_bench(self.config, 2, ['true'], threads=1)
        self.assertEqual((report.replicates, report.completed, report.failures), (2, 2, ()))
        summary = report.methods[0]
        self.assertEqual((summary.method, summary.n), ('true', 2))
        self.assertIsNotNone(summary.sd_tbauc)
        self.assertEqual((summary.bias, summary.mse), (0.0, 0.0))
        self.assertEqual(report.schema_version, 1)

    def test_independent_of_worker_count(self):
        one = run_bench(self.config, 3, ['true'], threads=1)
        two = run_bench(self.config, 3, ['true'], threads=2)
        self.assertEqual(one.to_dict(), two.to_dict())

    def test_every_method_runs(self):
        report = run_bench(
            ScenarioConfig(scenario='A', n=150, seed=32), 1, ['pseudo', 'pseudo.single', 'binary', 'true'],
            folds=3, threads=1,
            pseudo_library=[make_learner('mean'), make_learner('ridge')],
            binary_library=[make_learner('logistic', BINARY), make_learner('cart', BINARY)],
        )
        self.assertEqual(report.failures, ())
        self.assertEqual([s.method for s in report.methods], ['pseudo', 'pseudo.single', 'binary', 'true'])
        self.assertEqual(report.config['pseudo_library'], ['mean', 'ridge'])

    def test_failed_replicates_are_counted(self):
        report = run_bench(self.config, 2, ['pseudo'], grid=[10.0], folds=3, threads=1,
                           pseudo_library=[make_learner('mean')])
        self.assertEqual((report.completed, len(report.failures)), (0, 2))
        self.assertEqual(report.methods[0].n, 0)
        self.assertIsNone(report.methods[0].mean_pauc)

    def test_rejects_bad_requests(self):
        for methods, replicates in (([], 1), (['coxboost'], 1), (['true', 'true'], 1), (['true'], 0)):
            with self.assertRaises(BenchError):
                run_bench(self.config, replicates, methods)

    @slow
    def test_true_method_reaches_reference_auc(self):
        report = run_bench(ScenarioConfig(scenario='A', censoring_target=0.2, seed=2018), 100, ['true'])
        summary = report.methods[0]
        self.assertAlmostEqual(summary.mean_tbauc, 0.747, delta=0.03)
        self.assertLessEqual(abs(summary.mean_pauc - summary.mean_tbauc), 0.01)

    @slow
    def test_null_scenario_has_no_signal(self):
        report = run_bench(
            ScenarioConfig(scenario='S0', seed=7), 50, ['pseudo', 'binary'], folds=5,
            pseudo_library=[make_learner('ridge'), make_learner('cart')],
            binary_library=[make_learner('logistic', BINARY), make_learner('cart', BINARY)],
        )
        self.assertEqual(report.completed, 50)
        for summary in report.methods:
            self.assertAlmostEqual(summary.mean_pauc, 0.5, delta=0.05, msg=summary.method)

    @slow
    def test_reduced_library_beats_its_worst_member(self):
        names = ('ols_screen', 'lasso', 'cart', 'xgb_200_2_0.1')
        config = ScenarioConfig(scenario='A', censoring_target=0.2, seed=2018)
        ensemble = run_bench(config, 25, ['pseudo'], pseudo_library=[make_learner(name) for name in names])
        singles = [
            run_bench(config, 25, ['pseudo'], pseudo_library=[make_learner(name)]).methods[0].mean_pauc
            for name in names
        ]
        pauc = ensemble.methods[0].mean_pauc
        self.assertGreaterEqual(pauc, 0.68)
        self.assertGreaterEqual(pauc, min(singles))

    @slow
    def test_scenario_c_true_auc_band(self):
        # the cosine term dominates the scale, so C separates far better than A
        report = run_bench(ScenarioConfig(scenario='C', censoring_target=0.2, seed=2018), 50, ['true'])
        self.assertTrue(0.94 <= report.methods[0].mean_tbauc <= 0.995, report.methods[0].mean_tbauc)


class RenderTests(SimpleTestCase):
    def setUp(self):
        self.report = BenchReport(
            config={'scenario': {'scenario': 'B', 'censoring_target': 0.5}},
            replicates=3,
            methods=(
                MethodSummary('pseudo', 3, 0.71234, 0.031, 0.70999, 0.04, -0.012, 0.11, 0.0123456789),
                MethodSummary('true', 3, 0.75, 0.02, 0.748, 0.03, 0.0, 0.12, 0.0),
                MethodSummary('binary', 0, None, None, None, None, None, None, None),
            ),
        )

    def test_markdown_has_one_row_per_method(self):
        lines = render_markdown(self.report).splitlines()
        rows = [line for line in lines if line.startswith('| ') and not line.startswith('| method')]
        self.assertEqual([row.split(' | ')[0] for row in rows], ['| pseudo', '| true', '| binary'])
        self.assertIn('CoxBoost', lines[-1])

    def test_csv_round_trip(self):
        parsed = read_report_csv(io.StringIO(render_csv(self.report)))
        self.assertEqual(parsed, self.report.methods)

    def test_empty_methods(self):
        empty = BenchReport(config={}, replicates=1, methods=())
        with self.assertRaises(BenchError):
            render_markdown(empty)
        with self.assertRaises(BenchError):
            render_csv(empty)

    def test_json_round_trip(self):
        self.assertEqual(BenchReport.from_dict(self.report.to_dict()), self.report)
