"""
Stacking weight optimisers.

The pseudo-AUC optimiser searches directions on the unit L1 sphere: a raw
vector theta maps to alpha = theta / |theta|_1, and only directions with a
positive coefficient sum are feasible so that alpha / sum(alpha) keeps the
orientation the AUC was measured on. AUC is piecewise constant in alpha,
so the search is a Nelder-Mead multistart seeded at every single-learner
corner and the barycenter. Lambda weighs the L1 norm of the normalised
weights, which only separates directions with equal AUC.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from apps.metrics.exceptions import MetricsError
from apps.metrics.services import nn_loglik, pseudo_auc
from apps.survival.conf import pseudolearn_setting
from apps.survival.rng import make_rng

from .exceptions import EnsembleError

logger = logging.getLogger(__name__)

FEASIBLE_SUM = 1e-6
INFEASIBLE_VALUE = 1.0
SIMPLEX_STEP = 0.1
AUC_TIE = 1e-12
IMPROVEMENT = 1e-12
MAX_SWEEPS = 200


@dataclass(frozen=True)
class AucWeights:
    alpha_raw: np.ndarray
    alpha_star: np.ndarray
    auc: float
    penalty: float
    starts: int


def sign_penalty(alpha: np.ndarray) -> float:
    """|alpha*|_1 - 1 for alpha* = alpha / sum(alpha): zero unless the weights change sign."""
    return float((np.abs(alpha).sum() - abs(alpha.sum())) / abs(alpha.sum()))


def _support(alpha: np.ndarray) -> int:
    return int(np.sum(np.abs(alpha) > 1e-12))


def _direction(theta: np.ndarray) -> Optional[np.ndarray]:
    norm = np.abs(theta).sum()
    if norm == 0 or not np.isfinite(norm):
        return None
    alpha = theta / norm
    if alpha.sum() < FEASIBLE_SUM:
        return None
    return alpha


def _starting_points(k: int, total: int, rng: np.random.Generator) -> List[np.ndarray]:
    starts = [row for row in np.eye(k)]
    starts.append(np.full(k, 1.0 / k))
    while len(starts) < total:
        theta = rng.normal(size=k)
        if theta.sum() < 0:
            theta = -theta
        if _direction(theta) is not None:
            starts.append(theta / np.abs(theta).sum())
    return starts


def optimize_auc_weights(
    predictions: np.ndarray,
    case_mass: np.ndarray,
    control_mass: np.ndarray,
    lam: float,
    seed: int = 0,
    multistarts: Optional[int] = None,
    max_evaluations: Optional[int] = None,
) -> AucWeights:
    """Weights maximising the pseudo-AUC of predictions @ alpha; predictions is n x K."""
    predictions = np.asarray(predictions, dtype=float)
    if predictions.ndim != 2 or predictions.shape[1] == 0:
        raise EnsembleError("no learner predictions to combine")
    if lam < 0:
        raise EnsembleError(f"lambda must be nonnegative, got {lam}")
    k = predictions.shape[1]
    multistarts = pseudolearn_setting('MULTISTARTS') if multistarts is None else multistarts
    max_evaluations = pseudolearn_setting('MAX_EVALUATIONS') if max_evaluations is None else max_evaluations

    def auc_of(alpha: np.ndarray) -> float:
        return pseudo_auc(case_mass, control_mass, predictions @ alpha)

    try:
        if k == 1:
            one = np.ones(1)
            return AucWeights(one, one.copy(), auc_of(one), sign_penalty(one), 0)
        auc_of(np.full(k, 1.0 / k))
    except MetricsError as exc:
        raise EnsembleError(f"degenerate pseudo-observations at t*: {exc}")

    def objective(theta: np.ndarray) -> float:
        alpha = _direction(theta)
        if alpha is None:
            return INFEASIBLE_VALUE
        return -auc_of(alpha)

    rng = make_rng(seed)
    starts = _starting_points(k, max(multistarts, k + 1), rng)
    candidates: List[Tuple[float, float, int, int, np.ndarray]] = []
    for index, start in enumerate(starts):
        simplex = np.vstack([start, start + SIMPLEX_STEP * np.eye(k)])
        result = minimize(objective, start, method='Nelder-Mead',
                          options={'initial_simplex': simplex, 'maxfev': max_evaluations,
                                   'xatol': 1e-8, 'fatol': 1e-12})
        for theta in (start, result.x):
            alpha = _direction(theta)
            if alpha is not None:
                candidates.append((auc_of(alpha), lam * sign_penalty(alpha), _support(alpha), index, alpha))
        logger.debug("Start %d/%d: AUC %.6f after %d evaluations", index + 1, len(starts), -result.fun, result.nfev)

    best_auc = max(c[0] for c in candidates)
    tied = [c for c in candidates if c[0] >= best_auc - AUC_TIE]
    # ties: smallest penalty, then fewest learners, then earliest start
    auc, penalty, _, _, alpha = min(tied, key=lambda c: (c[1], c[2], c[3]))
    alpha_star = alpha / alpha.sum()
    logger.info("Pseudo-AUC weights: AUC %.6f over %d starts, alpha*=%s", auc, len(starts), np.round(alpha_star, 4))
    return AucWeights(alpha, alpha_star, auc, penalty, len(starts))


def _project(alpha: np.ndarray) -> np.ndarray:
    alpha = np.clip(alpha, 0.0, None)
    return alpha / alpha.sum()


def optimize_nnloglik_weights(probabilities: np.ndarray, labels, weights) -> np.ndarray:
    """Simplex weights minimising the weighted negative log-likelihood by coordinate moves toward or away from each vertex."""
    probabilities = np.asarray(probabilities, dtype=float)
    labels = np.asarray(labels, dtype=float).reshape(-1)
    weights = np.asarray(weights, dtype=float).reshape(-1)
    usable = weights > 0
    if not np.any(usable):
        raise EnsembleError("no usable subjects: every IPCW weight is zero")
    probabilities, labels, weights = probabilities[usable], labels[usable], weights[usable]
    k = probabilities.shape[1]
    if k == 0:
        raise EnsembleError("no learner predictions to combine")
    if k == 1:
        return np.ones(1)

    def loss(alpha: np.ndarray) -> float:
        return nn_loglik(labels, probabilities @ alpha, weights)

    alpha = np.full(k, 1.0 / k)
    current = loss(alpha)
    for sweep in range(MAX_SWEEPS):
        improved = False
        for j in range(k):
            vertex = np.eye(k)[j]
            # s > 0 moves toward vertex j, s < 0 away from it until alpha_j hits zero
            lower = -alpha[j] / (1.0 - alpha[j]) if alpha[j] < 1.0 else 0.0

            def along(s: float, alpha=alpha, vertex=vertex) -> float:
                return loss(_project((1.0 - s) * alpha + s * vertex))

            result = minimize_scalar(along, bounds=(lower, 1.0), method='bounded', options={'xatol': 1e-10})
            options = [(result.fun, result.x), (along(lower), lower), (along(1.0), 1.0)]
            value, step = min(options, key=lambda o: o[0])
            if value < current - IMPROVEMENT:
                alpha = _project((1.0 - step) * alpha + step * vertex)
                current = value
                improved = True
        if not improved:
            break
    logger.info("NNloglik weights after %d sweeps: risk %.6f, alpha=%s", sweep + 1, current, np.round(alpha, 4))
    return alpha
