"""
Nonparametric estimators for competing-risks data and their jackknife
pseudo-observations.

Conventions:
- events are processed before censorings that share a timestamp (a record
  censored at u is still in the risk set at u);
- events of different causes at the same time share R(u) and S(u-);
- beyond the last jump every estimate is carried forward.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .dataset import SurvivalDataset
from .exceptions import DatasetError, EstimatorError

logger = logging.getLogger(__name__)

# Subjects processed per vectorised leave-one-out block.
LOO_BLOCK_SIZE = 256
GRID_TOLERANCE = 1e-9


@dataclass(frozen=True)
class StepFunction:
    """Right-continuous step function: value at t is the value of the last jump <= t."""

    jump_times: np.ndarray
    values: np.ndarray
    value_at_zero: float = 0.0

    def __post_init__(self):
        if np.any(np.diff(self.jump_times) <= 0):
            raise EstimatorError("jump times must be strictly increasing")

    def _lookup(self, idx: np.ndarray):
        if self.values.size == 0:
            out = np.full(idx.shape, self.value_at_zero, dtype=float)
        else:
            out = np.where(idx == 0, self.value_at_zero, self.values[np.maximum(idx - 1, 0)])
        return float(out) if out.ndim == 0 else out

    def __call__(self, t):
        return self._lookup(np.searchsorted(self.jump_times, np.asarray(t, dtype=float), side='right'))

    def left_limit(self, t):
        return self._lookup(np.searchsorted(self.jump_times, np.asarray(t, dtype=float), side='left'))


def _event_table(time: np.ndarray, event: np.ndarray, codes: Sequence[int]):
    """Distinct times u, at-risk counts R(u) = #{y >= u}, and per-code event counts d_c(u)."""
    times = np.unique(time)
    position = np.searchsorted(times, time)
    leaving = np.bincount(position, minlength=times.size)
    at_risk = time.size - np.concatenate(([0], np.cumsum(leaving)[:-1]))
    counts = np.column_stack([
        np.bincount(position, weights=(event == code).astype(float), minlength=times.size)
        for code in codes
    ]) if codes else np.zeros((times.size, 0))
    return times, at_risk.astype(float), counts


def _safe_ratio(numerator: np.ndarray, denominator: np.ndarray) -> np.ndarray:
    return np.divide(numerator, denominator, out=np.zeros_like(numerator, dtype=float), where=denominator > 0)


def product_limit(time: np.ndarray, indicator: np.ndarray, leaves_first=None) -> StepFunction:
    """
    Kaplan-Meier curve for a 0/1 event indicator.

    Records flagged in `leaves_first` drop out of the risk set just before the
    jumps at their own time; the censoring curve uses this for event records.
    """
    time = np.asarray(time, dtype=float)
    indicator = np.asarray(indicator).astype(int)
    if time.size == 0:
        raise DatasetError("dataset is empty")
    times, at_risk, counts = _event_table(time, indicator, [1])
    if leaves_first is not None:
        early = np.asarray(leaves_first, dtype=bool) & (indicator == 0)
        at_risk = at_risk - np.bincount(np.searchsorted(times, time), weights=early.astype(float),
                                        minlength=times.size)
    deaths = counts[:, 0]
    survival = np.cumprod(1.0 - _safe_ratio(deaths, at_risk))
    jumps = deaths > 0
    return StepFunction(times[jumps], survival[jumps], 1.0)


def kaplan_meier(dataset: SurvivalDataset) -> StepFunction:
    """Overall event-free survival with every cause pooled as an event."""
    if len(dataset) == 0:
        raise DatasetError("dataset is empty")
    return product_limit(dataset.time, dataset.event != 0)


def _aalen_johansen_curves(time: np.ndarray, event: np.ndarray, causes: Sequence[int]):
    times, at_risk, counts = _event_table(time, event, list(causes))
    all_events = np.bincount(np.searchsorted(times, time), weights=(event != 0).astype(float), minlength=times.size)
    survival = np.cumprod(1.0 - _safe_ratio(all_events, at_risk))
    survival_minus = np.concatenate(([1.0], survival[:-1]))
    increments = survival_minus[:, None] * _safe_ratio(counts, at_risk[:, None])
    return times, np.cumsum(increments, axis=0), counts


def aalen_johansen(dataset: SurvivalDataset, cause: int) -> StepFunction:
    if len(dataset) == 0:
        raise DatasetError("dataset is empty")
    if cause not in (1, 2, 3):
        raise EstimatorError(f"cause must be one of 1, 2, 3, got {cause}")
    times, cif, counts = _aalen_johansen_curves(dataset.time, dataset.event, [cause])
    jumps = counts[:, 0] > 0
    return StepFunction(times[jumps], cif[jumps, 0], 0.0)


@dataclass(frozen=True)
class PseudoMatrix:
    times: np.ndarray
    causes: Tuple[int, ...]
    values: np.ndarray
    survival_pseudo: np.ndarray

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    def time_index(self, t: float) -> int:
        hits = np.flatnonzero(np.abs(self.times - t) <= GRID_TOLERANCE)
        if hits.size == 0:
            raise EstimatorError(f"time {t} is not on the pseudo-observation grid {self.times.tolist()}")
        return int(hits[0])

    def cause_index(self, cause: int) -> int:
        try:
            return self.causes.index(cause)
        except ValueError:
            raise EstimatorError(f"cause {cause} was not computed (have {list(self.causes)})")

    def column(self, cause: int, t: float) -> np.ndarray:
        return self.values[:, self.time_index(t), self.cause_index(cause)]

    def survival_at(self, t: float) -> np.ndarray:
        return self.survival_pseudo[:, self.time_index(t)]

    def subset(self, indices) -> 'PseudoMatrix':
        indices = np.asarray(indices, dtype=int)
        return PseudoMatrix(self.times, self.causes, self.values[indices], self.survival_pseudo[indices])

    def to_frame(self) -> pd.DataFrame:
        """Long format; the event-free pseudo-value is reported under cause code 0."""
        n, m, k = self.values.shape
        subject = np.repeat(np.arange(n), m * (k + 1))
        time = np.tile(np.repeat(self.times, k + 1), n)
        cause = np.tile(np.array((0,) + tuple(self.causes)), n * m)
        stacked = np.concatenate([self.survival_pseudo[:, :, None], self.values], axis=2)
        return pd.DataFrame({
            'subject_id': subject,
            'time': time,
            'cause': cause,
            'pseudo': stacked.reshape(-1),
        })

    def write_csv(self, path: Union[str, Path]) -> None:
        self.to_frame().to_csv(path, index=False, lineterminator='\n', float_format='%.17g')


def _check_grid(times: Sequence[float]) -> np.ndarray:
    grid = np.asarray(times, dtype=float).reshape(-1)
    if grid.size == 0:
        raise EstimatorError("time grid is empty")
    if np.any(~np.isfinite(grid)) or np.any(grid <= 0):
        raise EstimatorError("grid times must be positive and finite")
    return grid


def _jackknife(time: np.ndarray, event: np.ndarray, causes: Sequence[int], grid: np.ndarray) -> np.ndarray:
    """Exact leave-one-out jackknife of the Aalen-Johansen CIFs: returns n x m x len(causes)."""
    n = time.size
    causes = list(causes)
    times, at_risk, counts = _event_table(time, event, causes)
    all_events = np.bincount(np.searchsorted(times, time), weights=(event != 0).astype(float), minlength=times.size)
    _, full_cif, _ = _aalen_johansen_curves(time, event, causes)

    grid_index = np.searchsorted(times, grid, side='right') - 1
    before_first = grid_index < 0
    grid_index = np.maximum(grid_index, 0)

    full_at_grid = np.where(before_first[:, None], 0.0, full_cif[grid_index])
    pseudo = np.empty((n, grid.size, len(causes)))

    for start in range(0, n, LOO_BLOCK_SIZE):
        block = slice(start, min(start + LOO_BLOCK_SIZE, n))
        t_block = time[block, None]
        e_block = event[block, None]
        same_time = t_block == times[None, :]
        r_loo = at_risk[None, :] - (t_block >= times[None, :])
        d_all_loo = all_events[None, :] - (same_time & (e_block != 0))
        survival = np.cumprod(1.0 - _safe_ratio(d_all_loo, r_loo), axis=1)
        survival_minus = np.hstack([np.ones((survival.shape[0], 1)), survival[:, :-1]])
        for j, cause in enumerate(causes):
            d_loo = counts[None, :, j] - (same_time & (e_block == cause))
            cif_loo = np.cumsum(survival_minus * _safe_ratio(d_loo, r_loo), axis=1)
            loo_at_grid = np.where(before_first[None, :], 0.0, cif_loo[:, grid_index])
            pseudo[block, :, j] = n * full_at_grid[None, :, j] - (n - 1) * loo_at_grid
    return pseudo


def pseudo_observations(dataset: SurvivalDataset, causes: Sequence[int], times: Sequence[float]) -> PseudoMatrix:
    n = len(dataset)
    if n < 2:
        raise EstimatorError(f"pseudo-observations need at least 2 records, got {n}")
    grid = _check_grid(times)
    causes = tuple(int(c) for c in causes)
    if not causes or any(c not in (1, 2, 3) for c in causes):
        raise EstimatorError(f"causes must be a non-empty subset of 1, 2, 3, got {list(causes)}")

    # the event-free pseudo-value needs every cause present, requested or not
    all_causes = sorted(set(causes) | set(dataset.causes()))
    pseudo_all = _jackknife(dataset.time, dataset.event, all_causes, grid)
    survival = 1.0 - pseudo_all.sum(axis=2)
    values = pseudo_all[:, :, [all_causes.index(c) for c in causes]]
    logger.debug("Computed pseudo-observations: n=%d, grid=%s, causes=%s", n, grid.tolist(), list(causes))
    return PseudoMatrix(grid, causes, values, survival)


def stratified_pseudo_observations(
    dataset: SurvivalDataset, causes: Sequence[int], times: Sequence[float]
) -> PseudoMatrix:
    """Pseudo-observations computed independently within each stratum, rows kept in input order."""
    if not dataset.has_strata or any(label is None for label in dataset.strata):
        missing = 1 if not dataset.has_strata else dataset.strata.index(None) + 1
        raise DatasetError("every record needs a stratum label", row=missing, column='stratum')
    grid = _check_grid(times)
    causes = tuple(int(c) for c in causes)
    labels = np.asarray(dataset.strata, dtype=object)

    values = np.empty((len(dataset), grid.size, len(causes)))
    survival = np.empty((len(dataset), grid.size))
    groups: Dict[str, List[int]] = {}
    for i, label in enumerate(labels):
        groups.setdefault(label, []).append(i)
    for label in sorted(groups):
        members = np.asarray(groups[label])
        if members.size < 2:
            raise EstimatorError(f"stratum {label!r} has a single record")
        part = pseudo_observations(dataset.subset(members), causes, grid)
        values[members] = part.values
        survival[members] = part.survival_pseudo
    logger.debug("Computed stratified pseudo-observations over %d strata", len(groups))
    return PseudoMatrix(grid, causes, values, survival)


def compute_pseudo(
    dataset: SurvivalDataset, causes: Sequence[int], times: Sequence[float], stratified: bool = False
) -> PseudoMatrix:
    if stratified:
        return stratified_pseudo_observations(dataset, causes, times)
    return pseudo_observations(dataset, causes, times)


def naive_pseudo_observations(dataset: SurvivalDataset, cause: int, times: Sequence[float]) -> np.ndarray:
    """Literal n-fold leave-one-out recomputation; n x m. Slow, kept as a cross-check."""
    grid = _check_grid(times)
    n = len(dataset)
    full = np.asarray(aalen_johansen(dataset, cause)(grid))
    out = np.empty((n, grid.size))
    everyone = np.arange(n)
    for i in range(n):
        loo = np.asarray(aalen_johansen(dataset.subset(everyone[everyone != i]), cause)(grid))
        out[i] = n * full - (n - 1) * loo
    return out
