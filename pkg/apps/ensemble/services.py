"""
Cross-validated stacking of the learner library.

Pseudo mode: pseudo-observations on a time grid are stacked into one row per
(subject, grid time), every learner is cross-validated with all of a
subject's rows held out together, and the stacking weights maximise the
pseudo-AUC of the combined out-of-fold predictions at t*.

Binary mode: the outcome I(y <= t*, delta = cause) is modelled directly on
subjects with a positive IPCW weight, and the weights minimise the weighted
negative log-likelihood over the probability simplex.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import joblib
import numpy as np
from joblib import Parallel, delayed

from apps.learners.catalogue import BINARY, PSEUDO
from apps.learners.exceptions import LearnerError
from apps.learners.services import FittedModel, Learner, fit, predict
from apps.metrics.exceptions import MetricsError
from apps.metrics.services import binary_outcome, ipcw_weights, nn_loglik, pseudo_auc
from apps.survival.conf import pseudolearn_setting
from apps.survival.dataset import SurvivalDataset
from apps.survival.estimators import GRID_TOLERANCE, PseudoMatrix, compute_pseudo
from apps.survival.rng import make_rng

from .exceptions import EnsembleError
from .optimize import optimize_auc_weights as _optimize_auc_direction
from .optimize import optimize_nnloglik_weights

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

PSEUDO_AUC = 'pseudo-auc'
BINARY_NNLOGLIK = 'binary-nnloglik'


def _threads(threads: Optional[int]) -> int:
    return int(pseudolearn_setting('THREADS') if threads is None else threads)


def make_folds(n: int, V: int, seed: int) -> np.ndarray:
    """Fold label per subject: contiguous blocks of a seeded permutation, sizes differing by at most 1."""
    if V < 2:
        raise EnsembleError(f"need at least 2 folds, got {V}")
    if V > n:
        raise EnsembleError(f"cannot split {n} subjects into {V} folds")
    order = make_rng(seed).permutation(n)
    folds = np.empty(n, dtype=int)
    for v, block in enumerate(np.array_split(order, V)):
        folds[block] = v
    return folds


@dataclass(frozen=True)
class StackedDesign:
    """Subject-major rows: row i*m + l holds subject i at grid time l, time as the last column."""

    rows: np.ndarray
    outcome: np.ndarray
    subject_index: np.ndarray
    time_index: np.ndarray
    times: np.ndarray

    @property
    def n_subjects(self) -> int:
        return int(self.subject_index.max()) + 1 if self.subject_index.size else 0

    @property
    def m(self) -> int:
        return int(self.times.size)


def stack_time_grid(dataset: SurvivalDataset, pseudo: PseudoMatrix, cause: int = 1) -> StackedDesign:
    if pseudo.n != len(dataset):
        raise EnsembleError(f"pseudo-observations cover {pseudo.n} subjects, dataset has {len(dataset)}")
    n, m = len(dataset), pseudo.times.size
    j = pseudo.cause_index(cause)
    subject_index = np.repeat(np.arange(n), m)
    time_index = np.tile(np.arange(m), n)
    rows = np.column_stack([dataset.covariates[subject_index], pseudo.times[time_index]])
    outcome = pseudo.values[subject_index, time_index, j]
    return StackedDesign(rows, outcome, subject_index, time_index, pseudo.times.copy())


def with_time_column(X: np.ndarray, t: float) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return np.column_stack([X, np.full(X.shape[0], float(t))])


@dataclass(frozen=True)
class CvPredictions:
    matrix: np.ndarray
    learners: Tuple[str, ...]
    failures: Dict[str, str] = field(default_factory=dict)

    @property
    def usable(self) -> np.ndarray:
        return np.array([name not in self.failures for name in self.learners])


def _fit_and_predict(learner: Learner, X, y, weights, X_new, seed: int):
    try:
        model = fit(learner, X, y, weights=weights, seed=seed)
        return predict(model, X_new), None
    except (LearnerError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        return None, f"{type(exc).__name__}: {exc}"


def _cross_validate(
    library: Sequence[Learner],
    rows: np.ndarray,
    outcome: np.ndarray,
    row_subject: np.ndarray,
    row_weights: Optional[np.ndarray],
    folds: np.ndarray,
    subject_design: np.ndarray,
    seed: int,
    threads: Optional[int],
) -> CvPredictions:
    n, k = folds.size, len(library)
    n_folds = int(folds.max()) + 1
    tasks = []
    for v in range(n_folds):
        held_out = np.flatnonzero(folds == v)
        train_rows = np.flatnonzero(folds[row_subject] != v)
        if np.intersect1d(row_subject[train_rows], held_out).size:
            raise EnsembleError(f"fold {v}: held-out subjects leak into the training rows")
        if train_rows.size == 0:
            raise EnsembleError(f"fold {v} leaves no training rows")
        for j, learner in enumerate(library):
            weights = None if row_weights is None else row_weights[train_rows]
            tasks.append((v, j, held_out, learner, rows[train_rows], outcome[train_rows], weights))

    results = Parallel(n_jobs=_threads(threads), prefer='threads')(
        delayed(_fit_and_predict)(learner, X, y, w, subject_design[held_out], seed)
        for (_, _, held_out, learner, X, y, w) in tasks
    )

    matrix = np.full((n, k), np.nan)
    failures: Dict[str, str] = {}
    for (v, j, held_out, learner, *_), (values, error) in zip(tasks, results):
        if error is not None:
            failures.setdefault(learner.name, f"fold {v}: {error}")
            continue
        matrix[held_out, j] = values
    names = [learner.name for learner in library]
    for name, error in failures.items():
        logger.warning("Learner %s failed during cross-validation and is dropped (%s)", name, error)
        matrix[:, names.index(name)] = np.nan
    return CvPredictions(matrix, tuple(learner.name for learner in library), failures)


def cv_base_predictions(
    library: Sequence[Learner],
    stacked: StackedDesign,
    folds: np.ndarray,
    t_star: float,
    seed: int = 0,
    threads: Optional[int] = None,
) -> CvPredictions:
    """Out-of-fold prediction for every subject at (X_i, t*); all m rows of a subject share its fold."""
    n = stacked.n_subjects
    if folds.size != n:
        raise EnsembleError(f"fold labels for {folds.size} subjects, stacked design has {n}")
    covariates = stacked.rows[stacked.time_index == 0, :-1]
    return _cross_validate(
        library, stacked.rows, stacked.outcome, stacked.subject_index, None, folds,
        with_time_column(covariates, t_star), seed, threads,
    )


def optimize_auc_weights(
    cv: np.ndarray, pseudo: PseudoMatrix, lam: float, t_star: float, cause: int = 1, seed: int = 0, **options
):
    """Pseudo-AUC stacking weights for an n x K out-of-fold prediction matrix."""
    return _optimize_auc_direction(cv, pseudo.column(cause, t_star), pseudo.survival_at(t_star), lam,
                                   seed=seed, **options)


@dataclass
class EnsembleModel:
    learners: Tuple[Learner, ...]
    models: Tuple[Optional[FittedModel], ...]
    alpha_raw: np.ndarray
    alpha_star: np.ndarray
    mode: str
    t_star: float
    grid: Tuple[float, ...]
    cause: int
    feature_names: Tuple[str, ...]
    cv_report: Dict[str, Any]
    folds: int
    seed: int
    schema_version: int = 1

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'schema_version': self.schema_version,
            'mode': self.mode,
            't_star': self.t_star,
            'grid': list(self.grid),
            'cause': self.cause,
            'feature_names': list(self.feature_names),
            'folds': self.folds,
            'seed': self.seed,
            'learners': [learner.to_dict() for learner in self.learners],
            'alpha_raw': [float(a) for a in self.alpha_raw],
            'alpha_star': [float(a) for a in self.alpha_star],
            'cv_report': self.cv_report,
        }


def predict_ensemble(model: EnsembleModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.shape[1] != model.n_features:
        raise EnsembleError(f"expected {model.n_features} covariates, got {X.shape[1]}")
    design = with_time_column(X, model.t_star) if model.mode == PSEUDO_AUC else X
    out = np.zeros(X.shape[0])
    for weight, fitted in zip(model.alpha_star, model.models):
        if fitted is None or weight == 0:
            continue
        out += weight * predict(fitted, design)
    return out


def _refit(library, X, y, weights, usable, seed, threads) -> Tuple[Optional[FittedModel], ...]:
    jobs = [j for j in range(len(library)) if usable[j]]
    fitted = Parallel(n_jobs=_threads(threads), prefer='threads')(
        delayed(fit)(library[j], X, y, weights=weights, seed=seed) for j in jobs
    )
    models: List[Optional[FittedModel]] = [None] * len(library)
    for j, model in zip(jobs, fitted):
        models[j] = model
    return tuple(models)


def _check_library(library: Sequence[Learner], mode: str) -> None:
    if not library:
        raise EnsembleError("learner library is empty")
    names = [learner.name for learner in library]
    if len(set(names)) != len(names):
        raise EnsembleError("learner names must be unique within a library")
    for learner in library:
        if learner.mode != mode:
            raise EnsembleError(f"learner {learner.name!r} is configured for {learner.mode} mode, not {mode}")


def _grid_with(grid: Sequence[float], t_star: float) -> np.ndarray:
    grid = np.asarray(grid, dtype=float).reshape(-1)
    if not np.any(np.abs(grid - t_star) <= GRID_TOLERANCE):
        raise EnsembleError(f"t* = {t_star} must be one of the grid times {grid.tolist()}")
    return grid


def fit_superlearner_pseudo(
    dataset: SurvivalDataset,
    grid: Sequence[float],
    t_star: float,
    library: Sequence[Learner],
    V: Optional[int] = None,
    lam: Optional[float] = None,
    seed: Optional[int] = None,
    cause: int = 1,
    stratified: bool = False,
    threads: Optional[int] = None,
) -> EnsembleModel:
    V = pseudolearn_setting('FOLDS') if V is None else V
    lam = pseudolearn_setting('LAMBDA') if lam is None else lam
    seed = pseudolearn_setting('SEED') if seed is None else seed
    _check_library(library, PSEUDO)
    grid = _grid_with(grid, t_star)
    dataset.require_events()

    pseudo = compute_pseudo(dataset, [cause], grid, stratified=stratified)
    folds = make_folds(len(dataset), V, seed)
    stacked = stack_time_grid(dataset, pseudo, cause)
    logger.info("Pseudo SuperLearner: n=%d, grid=%s, t*=%s, K=%d, V=%d", len(dataset), grid.tolist(), t_star,
                len(library), V)
    cv = cv_base_predictions(library, stacked, folds, t_star, seed=seed, threads=threads)
    usable = cv.usable
    if not usable.any():
        raise EnsembleError(f"every learner failed during cross-validation: {cv.failures}")

    case, control = pseudo.column(cause, t_star), pseudo.survival_at(t_star)
    weights = optimize_auc_weights(cv.matrix[:, usable], pseudo, lam, t_star, cause=cause, seed=seed)
    alpha_raw = np.zeros(len(library))
    alpha_star = np.zeros(len(library))
    alpha_raw[usable] = weights.alpha_raw
    alpha_star[usable] = weights.alpha_star

    report = {'objective': 'pseudo_auc', 'lambda': lam, 'ensemble_auc': weights.auc, 'learners': {}}
    for j, learner in enumerate(library):
        entry = {'alpha_raw': float(alpha_raw[j]), 'alpha_star': float(alpha_star[j])}
        if usable[j]:
            try:
                entry['cv_auc'] = pseudo_auc(case, control, cv.matrix[:, j])
            except MetricsError:
                entry['cv_auc'] = None
        else:
            entry['failed'] = cv.failures[learner.name]
        report['learners'][learner.name] = entry

    models = _refit(library, stacked.rows, stacked.outcome, None, usable, seed, threads)
    return EnsembleModel(
        learners=tuple(library),
        models=models,
        alpha_raw=alpha_raw,
        alpha_star=alpha_star,
        mode=PSEUDO_AUC,
        t_star=float(t_star),
        grid=tuple(float(t) for t in grid),
        cause=cause,
        feature_names=dataset.feature_names,
        cv_report=report,
        folds=V,
        seed=seed,
        schema_version=pseudolearn_setting('SCHEMA_VERSION'),
    )


def fit_superlearner_binary(
    dataset: SurvivalDataset,
    t_star: float,
    library: Sequence[Learner],
    V: Optional[int] = None,
    stratified_weights: bool = False,
    seed: Optional[int] = None,
    cause: int = 1,
    threads: Optional[int] = None,
) -> EnsembleModel:
    V = pseudolearn_setting('FOLDS') if V is None else V
    seed = pseudolearn_setting('SEED') if seed is None else seed
    _check_library(library, BINARY)

    ipcw = ipcw_weights(dataset, t_star, stratified=stratified_weights)
    usable_subjects = np.flatnonzero(ipcw.weights > 0)
    if usable_subjects.size == 0:
        raise EnsembleError(f"no usable subjects: everyone is censored before t* = {t_star}")
    X = dataset.covariates[usable_subjects]
    labels = binary_outcome(dataset, t_star, cause)[usable_subjects].astype(float)
    weights = ipcw.weights[usable_subjects]
    logger.info("Binary SuperLearner: %d of %d subjects usable at t*=%s, K=%d, V=%d",
                usable_subjects.size, len(dataset), t_star, len(library), V)

    folds = make_folds(usable_subjects.size, V, seed)
    cv = _cross_validate(library, X, labels, np.arange(usable_subjects.size), weights, folds, X, seed, threads)
    usable = cv.usable
    if not usable.any():
        raise EnsembleError(f"every learner failed during cross-validation: {cv.failures}")
    alpha = np.zeros(len(library))
    alpha[usable] = optimize_nnloglik_weights(cv.matrix[:, usable], labels, weights)

    report = {'objective': 'nn_loglik', 'usable_subjects': int(usable_subjects.size), 'learners': {}}
    report['ensemble_risk'] = nn_loglik(labels, cv.matrix[:, usable] @ alpha[usable], weights)
    for j, learner in enumerate(library):
        entry = {'alpha': float(alpha[j])}
        if usable[j]:
            entry['cv_risk'] = nn_loglik(labels, cv.matrix[:, j], weights)
        else:
            entry['failed'] = cv.failures[learner.name]
        report['learners'][learner.name] = entry

    models = _refit(library, X, labels, weights, usable, seed, threads)
    return EnsembleModel(
        learners=tuple(library),
        models=models,
        alpha_raw=alpha.copy(),
        alpha_star=alpha,
        mode=BINARY_NNLOGLIK,
        t_star=float(t_star),
        grid=(float(t_star),),
        cause=cause,
        feature_names=dataset.feature_names,
        cv_report=report,
        folds=V,
        seed=seed,
        schema_version=pseudolearn_setting('SCHEMA_VERSION'),
    )


def artifact_path(path: PathLike) -> Path:
    return Path(path).with_suffix('.joblib')


def save_ensemble(model: EnsembleModel, path: PathLike) -> Path:
    """Write the JSON description to `path` and the fitted base models next to it."""
    path = Path(path)
    artifact = artifact_path(path)
    joblib.dump(list(model.models), artifact)
    payload = model.to_dict()
    payload['artifact'] = artifact.name
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + '\n')
    logger.info("Saved ensemble to %s (+ %s)", path, artifact.name)
    return path


def ensemble_from_payload(payload: Dict[str, Any], artifact: PathLike) -> EnsembleModel:
    artifact = Path(artifact)
    if not artifact.exists():
        raise EnsembleError(f"fitted models {artifact} are missing")
    models = tuple(joblib.load(artifact))
    learners = tuple(Learner.from_dict(item) for item in payload['learners'])
    if len(models) != len(learners):
        raise EnsembleError(f"{artifact} holds {len(models)} models for {len(learners)} learners")
    return EnsembleModel(
        learners=learners,
        models=models,
        alpha_raw=np.asarray(payload['alpha_raw'], dtype=float),
        alpha_star=np.asarray(payload['alpha_star'], dtype=float),
        mode=payload['mode'],
        t_star=float(payload['t_star']),
        grid=tuple(payload['grid']),
        cause=int(payload.get('cause', 1)),
        feature_names=tuple(payload['feature_names']),
        cv_report=payload.get('cv_report', {}),
        folds=int(payload.get('folds', 0)),
        seed=int(payload.get('seed', 0)),
        schema_version=int(payload.get('schema_version', 1)),
    )


def load_ensemble(path: PathLike) -> EnsembleModel:
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise EnsembleError(f"cannot read ensemble {path}: {exc}")
    return ensemble_from_payload(payload, path.parent / payload.get('artifact', artifact_path(path).name))
