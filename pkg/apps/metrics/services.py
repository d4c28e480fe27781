"""
Prediction-accuracy measures estimated from pseudo-observations, plus the
inverse-probability-of-censoring weights used by the binary ensemble.
"""

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from scipy.integrate import trapezoid
from scipy.stats import rankdata
from sklearn.metrics import roc_auc_score

from apps.survival.conf import pseudolearn_setting
from apps.survival.dataset import SurvivalDataset
from apps.survival.estimators import PseudoMatrix, product_limit
from apps.survival.exceptions import DatasetError

from .exceptions import MetricsError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

PROBABILITY_EPS = 1e-8
DEFAULT_BINS = 10
SMOOTH_GRID_SIZE = 101
MASS_TOLERANCE = 1e-12


@dataclass(frozen=True)
class RocPoint:
    cutoff: float
    fp: float
    tp: float


@dataclass(frozen=True)
class RocCurve:
    """Points ordered by decreasing cutoff; the last point has cutoff -inf and sits at (1, 1)."""

    points: Tuple[RocPoint, ...]
    time: float

    @property
    def fp(self) -> np.ndarray:
        return np.array([p.fp for p in self.points])

    @property
    def tp(self) -> np.ndarray:
        return np.array([p.tp for p in self.points])

    def to_dict(self) -> Dict[str, Any]:
        return {
            'time': self.time,
            'points': [
                {'cutoff': p.cutoff if math.isfinite(p.cutoff) else None, 'fp': p.fp, 'tp': p.tp}
                for p in self.points
            ],
        }

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            'time': self.time,
            'cutoff': [p.cutoff for p in self.points],
            'fp': self.fp,
            'tp': self.tp,
        })

    def write_csv(self, path: PathLike) -> None:
        self.to_frame().to_csv(path, index=False, lineterminator='\n', float_format='%.17g')

    def write_json(self, path: PathLike) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + '\n')


@dataclass(frozen=True)
class PredictivenessCurve:
    binned: Tuple[Tuple[float, float], ...]
    smoothed: Tuple[Tuple[float, float], ...]
    marginal: float
    time: float
    bin_sizes: Tuple[int, ...] = ()

    def to_dict(self) -> Dict[str, Any]:
        return {
            'time': self.time,
            'marginal': self.marginal,
            'binned': [{'percentile': x, 'mean_pseudo': y, 'count': c}
                       for (x, y), c in zip(self.binned, self.bin_sizes or (None,) * len(self.binned))],
            'smoothed': [{'percentile': x, 'fitted': y} for x, y in self.smoothed],
        }

    def to_frame(self) -> pd.DataFrame:
        binned = pd.DataFrame(self.binned, columns=['percentile', 'value']).assign(component='binned')
        smoothed = pd.DataFrame(self.smoothed, columns=['percentile', 'value']).assign(component='smoothed')
        frame = pd.concat([binned, smoothed], ignore_index=True)
        return frame[['component', 'percentile', 'value']]

    def write_csv(self, path: PathLike) -> None:
        self.to_frame().to_csv(path, index=False, lineterminator='\n', float_format='%.17g')

    def write_json(self, path: PathLike) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + '\n')


@dataclass(frozen=True)
class IpcwWeights:
    weights: np.ndarray
    t_star: float


def _check_scores(scores, n: int) -> np.ndarray:
    scores = np.asarray(scores, dtype=float).reshape(-1)
    if scores.size != n:
        raise MetricsError(f"expected {n} scores, got {scores.size}")
    if not np.all(np.isfinite(scores)):
        raise MetricsError("scores must be finite")
    return scores


def roc_arrays(case_mass: np.ndarray, control_mass: np.ndarray, scores: np.ndarray):
    """Cutoffs (decreasing, ending at -inf) with their FP and TP fractions."""
    cutoffs, group = np.unique(-scores, return_inverse=True)
    cutoffs = -cutoffs
    # mass strictly above each cutoff: groups are visited from the highest score down
    tp_above = np.concatenate(([0.0], np.cumsum(np.bincount(group, weights=case_mass, minlength=cutoffs.size))))
    fp_above = np.concatenate(([0.0], np.cumsum(np.bincount(group, weights=control_mass, minlength=cutoffs.size))))
    tp_total, fp_total = tp_above[-1], fp_above[-1]
    if abs(tp_total) <= MASS_TOLERANCE:
        raise MetricsError("no incidence mass; TP is undefined")
    if abs(fp_total) <= MASS_TOLERANCE:
        raise MetricsError("no event-free mass; FP is undefined")
    return np.concatenate((cutoffs, [-np.inf])), fp_above / fp_total, tp_above / tp_total


def _trapezoid_area(fp: np.ndarray, tp: np.ndarray) -> float:
    order = np.argsort(fp, kind='stable')
    return float(trapezoid(tp[order], fp[order]))


def pseudo_auc(case_mass, control_mass, scores) -> float:
    """Area under the pseudo-observation ROC without materialising the curve."""
    _, fp, tp = roc_arrays(np.asarray(case_mass, dtype=float), np.asarray(control_mass, dtype=float),
                           _check_scores(scores, len(case_mass)))
    return _trapezoid_area(fp, tp)


def roc_pseudo(pseudo: PseudoMatrix, scores, t: float, cause: int = 1) -> RocCurve:
    """Pseudo-observation ROC: cause-`cause` pseudo-values weight the cases, event-free ones the controls."""
    scores = _check_scores(scores, pseudo.n)
    try:
        cutoffs, fp, tp = roc_arrays(pseudo.column(cause, t), pseudo.survival_at(t), scores)
    except MetricsError as exc:
        raise MetricsError(f"cause {cause} at t={t}: {exc}")
    points = tuple(RocPoint(float(c), float(x), float(y)) for c, x, y in zip(cutoffs, fp, tp))
    return RocCurve(points=points, time=float(t))


def auc_pseudo(roc: RocCurve) -> float:
    """Trapezoidal area under the curve; may fall slightly outside [0, 1] with signed pseudo-values."""
    return _trapezoid_area(roc.fp, roc.tp)


def auc_true_binary(labels, scores) -> float:
    labels = np.asarray(labels).astype(bool).reshape(-1)
    scores = _check_scores(scores, labels.size)
    if labels.all() or not labels.any():
        raise MetricsError("AUC needs at least one positive and one negative label")
    return float(roc_auc_score(labels, scores))


def _percentiles(scores: np.ndarray) -> np.ndarray:
    return (rankdata(scores) - 0.5) / scores.size


def smooth_predictiveness(
    outcome, scores, span: Optional[float] = None, grid_size: int = SMOOTH_GRID_SIZE
) -> List[Tuple[float, float]]:
    """Tricube-weighted running mean of the outcome against score percentiles."""
    outcome = np.asarray(outcome, dtype=float).reshape(-1)
    scores = _check_scores(scores, outcome.size)
    n = outcome.size
    if n < 2:
        raise MetricsError("smoothing needs at least 2 records")
    span = pseudolearn_setting('SMOOTHER_SPAN') if span is None else span
    if not 0 < span <= 1:
        raise MetricsError(f"span must lie in (0, 1], got {span}")

    percentile = _percentiles(scores)
    neighbours = min(n, max(2, int(math.ceil(span * n))))
    grid = np.linspace(0.0, 1.0, grid_size)
    distance = np.abs(percentile[None, :] - grid[:, None])
    bandwidth = np.partition(distance, neighbours - 1, axis=1)[:, neighbours - 1]
    bandwidth = bandwidth * (1 + 1e-10) + 1e-12
    ratio = np.clip(distance / bandwidth[:, None], 0.0, 1.0)
    weight = (1.0 - ratio ** 3) ** 3
    fitted = weight @ outcome / weight.sum(axis=1)
    return [(float(g), float(f)) for g, f in zip(grid, fitted)]


def predictiveness_curve(
    pseudo: PseudoMatrix,
    scores,
    t: float,
    cause: int = 1,
    bins: int = DEFAULT_BINS,
    span: Optional[float] = None,
) -> PredictivenessCurve:
    scores = _check_scores(scores, pseudo.n)
    outcome = pseudo.column(cause, t)
    n = outcome.size
    if n < bins:
        raise MetricsError(f"decile binning needs at least {bins} records, got {n}")

    # ties straddling a bin edge are split by input order
    order = np.argsort(scores, kind='stable')
    groups = np.array_split(order, bins)
    binned = tuple(((k + 0.5) / bins, float(outcome[g].mean())) for k, g in enumerate(groups))
    return PredictivenessCurve(
        binned=binned,
        smoothed=tuple(smooth_predictiveness(outcome, scores, span=span)),
        marginal=float(outcome.mean()),
        time=float(t),
        bin_sizes=tuple(int(g.size) for g in groups),
    )


def binary_outcome(dataset: SurvivalDataset, t_star: float, cause: int = 1) -> np.ndarray:
    """Observed I(y <= t*, delta = cause); meaningful only where the IPCW weight is positive."""
    return (dataset.time <= t_star) & (dataset.event == cause)


def _censoring_weights(
    time: np.ndarray, event: np.ndarray, t_star: float, subjects: np.ndarray, label: str = ''
) -> np.ndarray:
    # event records at a tied time leave before the censorings there
    censoring = product_limit(time, event == 0, leaves_first=event != 0)
    weights = np.zeros(time.size)
    observed = (time >= t_star) | (event != 0)
    at = np.minimum(time, t_star)
    survival = np.atleast_1d(censoring.left_limit(at))
    for i in np.flatnonzero(observed):
        if survival[i] <= 0:
            where = f" in stratum {label!r}" if label else ""
            raise MetricsError(
                f"censoring survival is 0 at t={at[i]} for subject {int(subjects[i])}{where}; weight is infinite"
            )
        weights[i] = 1.0 / survival[i]
    return weights


def ipcw_weights(dataset: SurvivalDataset, t_star: float, stratified: bool = False) -> IpcwWeights:
    if len(dataset) == 0:
        raise DatasetError("dataset is empty")
    if not stratified:
        weights = _censoring_weights(dataset.time, dataset.event, t_star, np.arange(len(dataset)))
    else:
        if not dataset.has_strata or any(s is None for s in dataset.strata):
            raise DatasetError("stratified weights need a stratum label on every record", column='stratum')
        weights = np.zeros(len(dataset))
        labels = np.asarray(dataset.strata, dtype=object)
        for label in sorted(set(dataset.strata)):
            members = np.flatnonzero(labels == label)
            part = _censoring_weights(dataset.time[members], dataset.event[members], t_star, members, label=label)
            weights[members] = part
    logger.debug("IPCW weights at t*=%s: %d of %d positive", t_star, int(np.sum(weights > 0)), len(dataset))
    return IpcwWeights(weights=weights, t_star=float(t_star))


def nn_loglik(labels, predictions, weights=None) -> float:
    """Weighted negative log-likelihood of binary labels, averaged by total weight."""
    labels = np.asarray(labels, dtype=float).reshape(-1)
    predictions = np.clip(np.asarray(predictions, dtype=float).reshape(-1), PROBABILITY_EPS, 1 - PROBABILITY_EPS)
    weights = np.ones_like(labels) if weights is None else np.asarray(weights, dtype=float).reshape(-1)
    if not (labels.size == predictions.size == weights.size):
        raise MetricsError("labels, predictions and weights must have the same length")
    total = weights.sum()
    if total <= 0:
        raise MetricsError("weights are all zero")
    loss = labels * np.log(predictions) + (1 - labels) * np.log1p(-predictions)
    return float(-np.dot(weights, loss) / total)
