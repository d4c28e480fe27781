"""
Replicate harness: simulate, fit every method, score it on the independent
validation split and aggregate the results into the comparison table.
"""

import dataclasses
import io
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from apps.ensemble.services import (
    PSEUDO_AUC,
    EnsembleModel,
    fit_superlearner_binary,
    fit_superlearner_pseudo,
    predict_ensemble,
)
from apps.learners.catalogue import BINARY, PSEUDO
from apps.learners.services import Learner, builtin_library
from apps.metrics.services import (
    PredictivenessCurve,
    RocCurve,
    auc_pseudo,
    auc_true_binary,
    predictiveness_curve,
    roc_pseudo,
)
from apps.simulation.services import ScenarioConfig, TruthRecord, generate_scenario
from apps.survival.conf import pseudolearn_setting
from apps.survival.dataset import SurvivalDataset
from apps.survival.estimators import compute_pseudo
from apps.survival.rng import spawn_seeds

from .exceptions import BenchError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

PSEUDO_METHOD = 'pseudo'
PSEUDO_SINGLE = 'pseudo.single'
BINARY_METHOD = 'binary'
TRUE_METHOD = 'true'
METHODS = (PSEUDO_METHOD, PSEUDO_SINGLE, BINARY_METHOD, TRUE_METHOD)
ABSENT_METHODS = ('CoxBoost', 'rfsrc')

SUMMARY_COLUMNS = ('method', 'n', 'mean_tbauc', 'sd_tbauc', 'mean_pauc', 'sd_pauc', 'bias', 'sd_pred', 'mse')


@dataclass(frozen=True)
class MethodResult:
    method: str
    pauc: float
    tbauc: Optional[float] = None
    bias: Optional[float] = None
    sd_pred: Optional[float] = None
    mse: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class Evaluation:
    result: MethodResult
    roc: RocCurve
    predictiveness: PredictivenessCurve


@dataclass(frozen=True)
class MethodSummary:
    method: str
    n: int
    mean_tbauc: Optional[float]
    sd_tbauc: Optional[float]
    mean_pauc: Optional[float]
    sd_pauc: Optional[float]
    bias: Optional[float]
    sd_pred: Optional[float]
    mse: Optional[float]

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class BenchReport:
    config: Dict[str, Any]
    replicates: int
    methods: Tuple[MethodSummary, ...]
    results: Tuple[Tuple[MethodResult, ...], ...] = ()
    failures: Tuple[Dict[str, Any], ...] = ()
    schema_version: int = 1

    @property
    def completed(self) -> int:
        return len(self.results)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'schema_version': self.schema_version,
            'config': self.config,
            'replicates': self.replicates,
            'completed': self.completed,
            'failures': list(self.failures),
            'absent_methods': list(ABSENT_METHODS),
            'methods': [summary.to_dict() for summary in self.methods],
            'results': [[result.to_dict() for result in replicate] for replicate in self.results],
        }

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> 'BenchReport':
        try:
            return cls(
                config=payload.get('config', {}),
                replicates=int(payload['replicates']),
                methods=tuple(MethodSummary(**item) for item in payload['methods']),
                results=tuple(tuple(MethodResult(**item) for item in replicate)
                              for replicate in payload.get('results', [])),
                failures=tuple(payload.get('failures', [])),
                schema_version=int(payload.get('schema_version', 1)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise BenchError(f"malformed bench report: {exc}")


def _finite(value: float) -> Optional[float]:
    return float(value) if value is not None and math.isfinite(value) else None


def true_binary_outcome(truth: Sequence[TruthRecord], t_star: float) -> Tuple[np.ndarray, np.ndarray]:
    """Latent cases (cause 1 by t*) and controls (event-free at t*); earlier competing events are neither."""
    t1 = np.array([record.t1 for record in truth])
    t2 = np.array([record.t2 for record in truth])
    cases = (t1 <= t_star) & (t1 < t2)
    controls = np.minimum(t1, t2) > t_star
    return cases, controls


def evaluate_predictions(
    method: str,
    validation: SurvivalDataset,
    predictions,
    t_star: float,
    truth: Optional[Sequence[TruthRecord]] = None,
    cause: int = 1,
    bins: int = 10,
) -> Evaluation:
    predictions = np.asarray(predictions, dtype=float).reshape(-1)
    if predictions.size != len(validation):
        raise BenchError(f"{predictions.size} predictions for {len(validation)} validation records")
    pseudo = compute_pseudo(validation, [cause], [t_star])
    roc = roc_pseudo(pseudo, predictions, t_star, cause)
    curve = predictiveness_curve(pseudo, predictions, t_star, cause, bins=bins)
    result = MethodResult(method=method, pauc=auc_pseudo(roc))
    if truth is not None:
        if len(truth) != len(validation):
            raise BenchError(f"truth covers {len(truth)} subjects, validation has {len(validation)}")
        cases, controls = true_binary_outcome(truth, t_star)
        keep = cases | controls
        true_cif = np.array([record.true_cif for record in truth])
        error = predictions - true_cif
        result = dataclasses.replace(
            result,
            tbauc=auc_true_binary(cases[keep].astype(int), predictions[keep]),
            bias=float(error.mean()),
            sd_pred=float(predictions.std(ddof=1)) if predictions.size > 1 else None,
            mse=float(np.mean(error ** 2)),
        )
    return Evaluation(result, roc, curve)


def method_for(model: EnsembleModel) -> str:
    if model.mode == PSEUDO_AUC:
        return PSEUDO_SINGLE if len(model.grid) == 1 else PSEUDO_METHOD
    return BINARY_METHOD


def evaluate_ensemble(model: EnsembleModel, validation: SurvivalDataset,
                      truth: Optional[Sequence[TruthRecord]] = None) -> Evaluation:
    if tuple(validation.feature_names) != tuple(model.feature_names):
        raise BenchError(
            f"validation covariates {list(validation.feature_names)} do not match the model's "
            f"{list(model.feature_names)}"
        )
    predictions = predict_ensemble(model, validation.covariates)
    return evaluate_predictions(method_for(model), validation, predictions, model.t_star, truth, model.cause)


@dataclass(frozen=True)
class BenchSettings:
    methods: Tuple[str, ...]
    grid: Tuple[float, ...]
    lam: float
    folds: int
    pseudo_library: Tuple[Learner, ...] = field(default_factory=tuple)
    binary_library: Tuple[Learner, ...] = field(default_factory=tuple)


def _replicate_seed(sequence: np.random.SeedSequence) -> int:
    return int(sequence.generate_state(1)[0])


def _predict_method(method: str, draw, settings: BenchSettings, seed: int) -> np.ndarray:
    config = draw.config
    if method == TRUE_METHOD:
        return np.array([record.true_cif for record in draw.validation_truth])
    if method in (PSEUDO_METHOD, PSEUDO_SINGLE):
        grid = settings.grid if method == PSEUDO_METHOD else (config.t_star,)
        model = fit_superlearner_pseudo(draw.train, grid, config.t_star, settings.pseudo_library, V=settings.folds,
                                        lam=settings.lam, seed=seed, threads=1)
    elif method == BINARY_METHOD:
        model = fit_superlearner_binary(draw.train, config.t_star, settings.binary_library, V=settings.folds,
                                        seed=seed, threads=1)
    else:
        raise BenchError(f"unknown method {method!r}; expected one of {METHODS}")
    return predict_ensemble(model, draw.validation.covariates)


def run_replicate(index: int, config: ScenarioConfig, settings: BenchSettings) -> Dict[str, Any]:
    """One replicate; every method sees the same training and validation draw."""
    try:
        draw = generate_scenario(config)
        results = []
        for method in settings.methods:
            predictions = _predict_method(method, draw, settings, config.seed)
            evaluation = evaluate_predictions(method, draw.validation, predictions, config.t_star,
                                              draw.validation_truth)
            results.append(evaluation.result)
        logger.info("Replicate %d done (seed %d)", index, config.seed)
        return {'index': index, 'results': tuple(results), 'error': None}
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        logger.warning("Replicate %d failed (seed %d): %s", index, config.seed, exc, exc_info=True)
        return {'index': index, 'results': (), 'error': f"{type(exc).__name__}: {exc}"}


def _mean(values: List[float]) -> Optional[float]:
    return _finite(float(np.mean(values))) if values else None


def _sd(values: List[float]) -> Optional[float]:
    return _finite(float(np.std(values, ddof=1))) if len(values) > 1 else None


def summarize(methods: Sequence[str], results: Sequence[Sequence[MethodResult]]) -> Tuple[MethodSummary, ...]:
    summaries = []
    for method in methods:
        rows = [result for replicate in results for result in replicate if result.method == method]

        def column(name: str) -> List[float]:
            return [getattr(row, name) for row in rows if getattr(row, name) is not None]

        summaries.append(MethodSummary(
            method=method,
            n=len(rows),
            mean_tbauc=_mean(column('tbauc')),
            sd_tbauc=_sd(column('tbauc')),
            mean_pauc=_mean(column('pauc')),
            sd_pauc=_sd(column('pauc')),
            bias=_mean(column('bias')),
            sd_pred=_mean(column('sd_pred')),
            mse=_mean(column('mse')),
        ))
    return tuple(summaries)


def run_bench(
    config: ScenarioConfig,
    replicates: int,
    methods: Sequence[str],
    grid: Optional[Sequence[float]] = None,
    lam: Optional[float] = None,
    folds: Optional[int] = None,
    threads: Optional[int] = None,
    pseudo_library: Optional[Sequence[Learner]] = None,
    binary_library: Optional[Sequence[Learner]] = None,
) -> BenchReport:
    """
    Run `replicates` independent replicates of a scenario.

    Replicate seeds are spawned from config.seed, so the report does not
    depend on how many replicates run in parallel. Failed replicates are
    counted and left out of the aggregates.
    """
    if replicates < 1:
        raise BenchError(f"need at least one replicate, got {replicates}")
    methods = tuple(methods)
    if not methods:
        raise BenchError("no methods to run")
    unknown = [m for m in methods if m not in METHODS]
    if unknown:
        raise BenchError(f"unknown method(s) {unknown}; expected a subset of {METHODS}")
    if len(set(methods)) != len(methods):
        raise BenchError("methods must not repeat")

    settings = BenchSettings(
        methods=methods,
        grid=tuple(float(t) for t in (pseudolearn_setting('GRID') if grid is None else grid)),
        lam=float(pseudolearn_setting('LAMBDA') if lam is None else lam),
        folds=int(pseudolearn_setting('FOLDS') if folds is None else folds),
        pseudo_library=tuple(pseudo_library or builtin_library(PSEUDO)),
        binary_library=tuple(binary_library or builtin_library(BINARY)),
    )
    n_jobs = int(pseudolearn_setting('THREADS') if threads is None else threads)
    configs = [
        dataclasses.replace(config, seed=_replicate_seed(child))
        for child in spawn_seeds(config.seed, replicates)
    ]
    logger.info("Bench: scenario %s, %d replicates, methods %s, %d worker(s)",
                config.scenario, replicates, ', '.join(methods), n_jobs)
    outcomes = Parallel(n_jobs=n_jobs)(
        delayed(run_replicate)(index, replica, settings) for index, replica in enumerate(configs)
    )
    outcomes = sorted(outcomes, key=lambda outcome: outcome['index'])
    results = tuple(outcome['results'] for outcome in outcomes if outcome['error'] is None)
    failures = tuple(
        {'replicate': outcome['index'], 'seed': configs[outcome['index']].seed, 'error': outcome['error']}
        for outcome in outcomes if outcome['error'] is not None
    )
    if failures:
        logger.warning("%d of %d replicates failed", len(failures), replicates)

    echo = {
        'scenario': config.to_dict(),
        'methods': list(methods),
        'grid': list(settings.grid),
        'lambda': settings.lam,
        'folds': settings.folds,
        'pseudo_library': [learner.name for learner in settings.pseudo_library],
        'binary_library': [learner.name for learner in settings.binary_library],
    }
    return BenchReport(
        config=echo,
        replicates=replicates,
        methods=summarize(methods, results),
        results=results,
        failures=failures,
        schema_version=pseudolearn_setting('SCHEMA_VERSION'),
    )


def write_report_json(report: BenchReport, path: PathLike) -> Path:
    path = Path(path)
    path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + '\n')
    return path


def load_report_json(path: PathLike) -> BenchReport:
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise BenchError(f"cannot read bench report {path}: {exc}")
    return BenchReport.from_dict(payload)


def _check_renderable(report: BenchReport) -> None:
    if not report.methods:
        raise BenchError("bench report has no methods to render")


def render_csv(report: BenchReport) -> str:
    _check_renderable(report)
    frame = pd.DataFrame([summary.to_dict() for summary in report.methods], columns=list(SUMMARY_COLUMNS))
    buffer = io.StringIO()
    frame.to_csv(buffer, index=False, float_format='%.17g', lineterminator='\n')
    return buffer.getvalue()


def read_report_csv(source: Union[PathLike, io.StringIO]) -> Tuple[MethodSummary, ...]:
    frame = pd.read_csv(source)
    missing = [column for column in SUMMARY_COLUMNS if column not in frame.columns]
    if missing:
        raise BenchError(f"report CSV is missing column(s): {', '.join(missing)}")
    summaries = []
    for row in frame.to_dict(orient='records'):
        values = {name: _finite(row[name]) for name in SUMMARY_COLUMNS[2:]}
        summaries.append(MethodSummary(method=str(row['method']), n=int(row['n']), **values))
    return tuple(summaries)


def _cell(value: Optional[float]) -> str:
    return '' if value is None else f"{value:.3f}"


def render_markdown(report: BenchReport) -> str:
    _check_renderable(report)
    scenario = report.config.get('scenario', {})
    lines = [
        f"Scenario {scenario.get('scenario', '?')}, censoring {scenario.get('censoring_target', '?')}: "
        f"{report.completed} of {report.replicates} replicates completed",
        '',
        '| method | mean.tbauc | sd.tbauc | mean.pauc | sd.pauc | bias | sd | mse |',
        '|---|---|---|---|---|---|---|---|',
    ]
    for s in report.methods:
        cells = [s.mean_tbauc, s.sd_tbauc, s.mean_pauc, s.sd_pauc, s.bias, s.sd_pred, s.mse]
        lines.append(f"| {s.method} | " + ' | '.join(_cell(c) for c in cells) + ' |')
    lines += [
        '',
        f"Not implemented: {', '.join(ABSENT_METHODS)}. mse is printed unscaled.",
    ]
    return '\n'.join(lines) + '\n'
