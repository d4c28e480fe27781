import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.stats import pearsonr
from sklearn.dummy import DummyClassifier
from sklearn.linear_model import Ridge

from apps.survival.conf import pseudolearn_setting

from .catalogue import (
    BINARY,
    CATALOGUE,
    BINARY_LIBRARY,
    MODES,
    PSEUDO,
    PSEUDO_LIBRARY,
    REGRESSION,
    SINGULAR_RIDGE_ALPHA,
    LearnerSpec,
)
from .exceptions import LearnerError

logger = logging.getLogger(__name__)

PROBABILITY_EPS = 1e-8
SINGULAR_FALLBACK = 'singular_design_ridge'
SINGLE_CLASS = 'single_class_prior'


@dataclass(frozen=True)
class Learner:
    name: str
    kind: str
    hyperparameters: Dict[str, Any] = field(default_factory=dict)
    screening: Optional[float] = None
    mode: str = PSEUDO

    @property
    def spec(self) -> LearnerSpec:
        try:
            return CATALOGUE[self.name]
        except KeyError:
            raise LearnerError(f"unknown learner {self.name!r}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            'name': self.name,
            'kind': self.kind,
            'hyperparameters': dict(self.hyperparameters),
            'screening': self.screening,
            'mode': self.mode,
        }

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> 'Learner':
        return cls(
            name=payload['name'],
            kind=payload['kind'],
            hyperparameters=dict(payload.get('hyperparameters') or {}),
            screening=payload.get('screening'),
            mode=payload.get('mode', PSEUDO),
        )


@dataclass(frozen=True)
class FittedModel:
    learner: Learner
    estimator: Any
    features: Tuple[int, ...]
    n_features: int
    flags: Tuple[str, ...] = ()

    @property
    def name(self) -> str:
        return self.learner.name


def make_learner(name: str, mode: str = PSEUDO, hyperparameters: Optional[Mapping[str, Any]] = None,
                 screening: Any = ...) -> Learner:
    """Learner for a catalogue name; `screening=...` keeps the catalogue default."""
    if mode not in MODES:
        raise LearnerError(f"mode must be one of {MODES}, got {mode!r}")
    spec = CATALOGUE.get(name)
    if spec is None:
        raise LearnerError(f"unknown learner {name!r}; available: {', '.join(sorted(CATALOGUE))}")
    if not spec.supports(mode):
        raise LearnerError(f"learner {name!r} ({spec.kind}) cannot be used in {mode} mode")
    if screening is ...:
        screening = pseudolearn_setting('SCREEN_P') if spec.screening is not None else None
    return Learner(name=name, kind=spec.kind, hyperparameters=dict(hyperparameters or {}),
                   screening=screening, mode=mode)


def builtin_library(mode: str) -> List[Learner]:
    names = PSEUDO_LIBRARY if mode == PSEUDO else BINARY_LIBRARY
    return [make_learner(name, mode) for name in names]


def load_library(source: Union[str, Path, Mapping[str, Any]], mode: str) -> List[Learner]:
    """Library from a JSON document: {"learners": [{"name", "hyperparameters", "screening"}]}."""
    from .serializers import LibraryConfigSerializer

    payload = json.loads(Path(source).read_text()) if isinstance(source, (str, Path)) else source
    serializer = LibraryConfigSerializer(data=payload, context={'mode': mode})
    if not serializer.is_valid():
        raise LearnerError(f"invalid learner library: {serializer.errors}")
    library = []
    for item in serializer.validated_data['learners']:
        screening = item['screening'] if 'screening' in item else ...
        library.append(make_learner(item['name'], mode, item.get('hyperparameters'), screening))
    return library


def library_to_dict(library: Sequence[Learner]) -> Dict[str, Any]:
    return {'learners': [
        {'name': learner.name, 'hyperparameters': dict(learner.hyperparameters), 'screening': learner.screening}
        for learner in library
    ]}


def resolve_hyperparameters(learner: Learner) -> Dict[str, Any]:
    spec = learner.spec
    unknown = set(learner.hyperparameters) - set(spec.defaults)
    if unknown:
        raise LearnerError(
            f"learner {learner.name!r} has no hyperparameter(s) {sorted(unknown)}; "
            f"accepted: {sorted(spec.defaults)}"
        )
    return {**spec.defaults, **learner.hyperparameters}


def correlation_screen(X, y, p_threshold: float) -> Tuple[int, ...]:
    """Features whose Pearson test against y has p < threshold; never empty."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    n, p = X.shape
    if n < 3:
        raise LearnerError(f"correlation screening needs at least 3 records, got {n}")
    if p == 0:
        raise LearnerError("no features to screen")
    pvalues = np.ones(p)
    if np.ptp(y) > 0:
        for j in range(p):
            if np.ptp(X[:, j]) > 0:
                pvalues[j] = pearsonr(X[:, j], y).pvalue
    pvalues = np.nan_to_num(pvalues, nan=1.0)
    selected = tuple(int(j) for j in np.flatnonzero(pvalues < p_threshold))
    if not selected:
        selected = (int(np.argmin(pvalues)),)
    return selected


def _check_matrix(X, n_features: Optional[int] = None) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2:
        raise LearnerError("covariates must be a 2-d matrix")
    if n_features is not None and X.shape[1] != n_features:
        raise LearnerError(f"expected {n_features} columns, got {X.shape[1]}")
    if not np.all(np.isfinite(X)):
        raise LearnerError("covariates must be finite")
    return X


def _checked_weights(weights, n: int) -> np.ndarray:
    weights = np.asarray(weights, dtype=float).reshape(-1)
    if weights.size != n:
        raise LearnerError(f"expected {n} weights, got {weights.size}")
    if np.any(~np.isfinite(weights)) or np.any(weights < 0):
        raise LearnerError("weights must be finite and nonnegative")
    if not np.any(weights > 0):
        raise LearnerError("weights are all zero")
    return weights


def _is_singular(X: np.ndarray) -> bool:
    design = np.column_stack([np.ones(X.shape[0]), X])
    return np.linalg.matrix_rank(design) < design.shape[1]


def fit(learner: Learner, X, y, weights=None, seed: int = 0) -> FittedModel:
    spec = learner.spec
    X = _check_matrix(X)
    y = np.asarray(y, dtype=float).reshape(-1)
    n, p = X.shape
    if y.size != n:
        raise LearnerError(f"expected {n} outcomes, got {y.size}")
    if n < 2:
        raise LearnerError(f"fitting needs at least 2 records, got {n}")
    if not np.all(np.isfinite(y)):
        raise LearnerError("outcomes must be finite")
    if learner.mode == BINARY and not np.all(np.isin(y, (0.0, 1.0))):
        raise LearnerError(f"learner {learner.name!r} in binary mode needs 0/1 outcomes")
    params = resolve_hyperparameters(learner)

    if weights is not None:
        if spec.kind == REGRESSION:
            raise LearnerError(f"learner {learner.name!r} does not accept weights")
        weights = _checked_weights(weights, n)
        # zero-weight records carry no information for any learner
        keep = weights > 0
        X, y, weights = X[keep], y[keep], weights[keep]
        weights = weights / weights.mean()

    features = tuple(range(p))
    if learner.screening is not None:
        features = correlation_screen(X, y, learner.screening)
    design = X[:, list(features)]

    estimator = spec.build(params, learner.mode, seed)
    flags: List[str] = []
    if learner.name == 'knn' and estimator.n_neighbors > design.shape[0]:
        estimator.set_params(n_neighbors=design.shape[0])
    if learner.name == 'lasso' and params['alpha'] is None and estimator.cv > design.shape[0]:
        estimator.set_params(cv=design.shape[0])
    if learner.name == 'ols_screen' and _is_singular(design):
        logger.warning("Singular design for %s; falling back to ridge (alpha=%g)", learner.name, SINGULAR_RIDGE_ALPHA)
        estimator = Ridge(alpha=SINGULAR_RIDGE_ALPHA)
        flags.append(SINGULAR_FALLBACK)
    if learner.mode == BINARY and np.unique(y).size < 2:
        logger.warning("Only one outcome class for %s; predicting the weighted prior", learner.name)
        estimator = DummyClassifier(strategy='prior')
        flags.append(SINGLE_CLASS)

    if weights is None:
        estimator.fit(design, y)
    else:
        estimator.fit(design, y, sample_weight=weights)
    return FittedModel(learner=learner, estimator=estimator, features=features, n_features=p, flags=tuple(flags))


def predict(model: FittedModel, X) -> np.ndarray:
    X = _check_matrix(X, model.n_features)
    design = X[:, list(model.features)]
    if model.learner.mode == BINARY:
        classes = list(model.estimator.classes_)
        proba = model.estimator.predict_proba(design)
        if 1.0 in classes:
            out = proba[:, classes.index(1.0)]
        else:
            out = np.zeros(design.shape[0])
        out = np.clip(out, PROBABILITY_EPS, 1 - PROBABILITY_EPS)
    else:
        out = np.asarray(model.estimator.predict(design), dtype=float).reshape(-1)
    if not np.all(np.isfinite(out)):
        raise LearnerError(f"learner {model.name!r} produced non-finite predictions")
    return out
