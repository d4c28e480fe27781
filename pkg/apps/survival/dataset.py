"""
Right-censored competing-risks data: the in-memory dataset and its CSV form.

Event codes follow the usual convention: 0 is censoring, 1 is the primary
cause, 2 and 3 are competing causes.
"""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .exceptions import DatasetError
from .rng import make_rng

logger = logging.getLogger(__name__)

EVENT_CODES = (0, 1, 2, 3)
TIME_COLUMN = 'time'
EVENT_COLUMN = 'event'
STRATUM_COLUMN = 'stratum'

PathLike = Union[str, Path]


@dataclass(frozen=True)
class SurvivalRecord:
    y: float
    delta: int
    x: Tuple[float, ...]
    stratum: Optional[str] = None


@dataclass(frozen=True)
class CsvSchema:
    """Column mapping for read_csv. `features=None` takes every other column in header order."""

    time: str = TIME_COLUMN
    event: str = EVENT_COLUMN
    stratum: Optional[str] = None
    features: Optional[Sequence[str]] = None


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class SurvivalDataset:
    time: np.ndarray
    event: np.ndarray
    covariates: np.ndarray
    feature_names: Tuple[str, ...]
    strata: Optional[Tuple[Optional[str], ...]] = None

    @classmethod
    def from_arrays(
        cls,
        time: Iterable[float],
        event: Iterable[int],
        covariates,
        feature_names: Optional[Sequence[str]] = None,
        strata: Optional[Sequence[Optional[str]]] = None,
    ) -> 'SurvivalDataset':
        time = np.asarray(list(time) if not isinstance(time, np.ndarray) else time, dtype=float)
        event_raw = np.asarray(list(event) if not isinstance(event, np.ndarray) else event)
        n = time.shape[0]
        covariates = np.asarray(covariates, dtype=float)
        if covariates.size == 0:
            covariates = covariates.reshape(n, 0 if feature_names is None else len(feature_names))
        if covariates.ndim == 1:
            covariates = covariates.reshape(n, -1)
        p = covariates.shape[1]
        if feature_names is None:
            feature_names = [f"x{j + 1}" for j in range(p)]

        if event_raw.shape[0] != n or covariates.shape[0] != n:
            raise DatasetError("time, event and covariates must have the same number of records")
        if len(feature_names) != p:
            raise DatasetError(f"expected {p} feature names, got {len(feature_names)}")
        if np.issubdtype(event_raw.dtype, np.floating) and not np.all(event_raw == np.round(event_raw)):
            raise DatasetError("event codes must be integers")
        event = event_raw.astype(int)

        for i in range(n):
            if not math.isfinite(time[i]):
                raise DatasetError("time must be finite", row=i + 1, column=TIME_COLUMN)
            if time[i] < 0:
                raise DatasetError(f"negative time {time[i]!r}", row=i + 1, column=TIME_COLUMN)
            if event[i] not in EVENT_CODES:
                raise DatasetError(f"event code {event[i]} outside {{0,1,2,3}}", row=i + 1, column=EVENT_COLUMN)
        bad = np.argwhere(~np.isfinite(covariates))
        if bad.size:
            row, col = bad[0]
            raise DatasetError("covariates must be finite (missing values are not imputed)",
                               row=int(row) + 1, column=feature_names[col])

        if strata is not None:
            if len(strata) != n:
                raise DatasetError("one stratum label per record is required")
            strata = tuple(None if s is None or s == '' else str(s) for s in strata)

        return cls(
            time=_frozen(time),
            event=_frozen(event),
            covariates=_frozen(covariates),
            feature_names=tuple(str(name) for name in feature_names),
            strata=strata,
        )

    @classmethod
    def from_records(cls, records: Sequence[SurvivalRecord], feature_names: Sequence[str]) -> 'SurvivalDataset':
        has_strata = any(r.stratum is not None for r in records)
        return cls.from_arrays(
            time=[r.y for r in records],
            event=[r.delta for r in records],
            covariates=np.array([r.x for r in records], dtype=float).reshape(len(records), len(feature_names)),
            feature_names=feature_names,
            strata=[r.stratum for r in records] if has_strata else None,
        )

    def __len__(self) -> int:
        return int(self.time.shape[0])

    def __eq__(self, other: Any) -> bool:
        if not isinstance(other, SurvivalDataset):
            return NotImplemented
        return (
            self.feature_names == other.feature_names
            and self.strata == other.strata
            and np.array_equal(self.time, other.time)
            and np.array_equal(self.event, other.event)
            and np.array_equal(self.covariates, other.covariates)
        )

    __hash__ = None

    @property
    def n(self) -> int:
        return len(self)

    @property
    def p(self) -> int:
        return int(self.covariates.shape[1])

    @property
    def has_strata(self) -> bool:
        return self.strata is not None

    @property
    def records(self) -> List[SurvivalRecord]:
        strata = self.strata or (None,) * len(self)
        return [
            SurvivalRecord(float(self.time[i]), int(self.event[i]), tuple(self.covariates[i].tolist()), strata[i])
            for i in range(len(self))
        ]

    def causes(self) -> List[int]:
        return sorted(int(c) for c in np.unique(self.event) if c != 0)

    def subset(self, indices) -> 'SurvivalDataset':
        indices = np.asarray(indices, dtype=int)
        return SurvivalDataset(
            time=_frozen(self.time[indices]),
            event=_frozen(self.event[indices]),
            covariates=_frozen(self.covariates[indices]),
            feature_names=self.feature_names,
            strata=tuple(self.strata[i] for i in indices) if self.strata is not None else None,
        )

    def require_events(self) -> None:
        if len(self) == 0:
            raise DatasetError("dataset is empty")
        if not np.any(self.event != 0):
            raise DatasetError("at least one non-censored record is required")

    def event_counts(self) -> Dict[str, int]:
        return {str(code): int(np.sum(self.event == code)) for code in EVENT_CODES}

    def metadata(self) -> Dict[str, Any]:
        return {
            'n': self.n,
            'p': self.p,
            'event_counts': self.event_counts(),
            'censored_fraction': float(np.mean(self.event == 0)) if len(self) else 0.0,
            'feature_names': list(self.feature_names),
            'stratified': self.has_strata,
        }


def _parse_cells(values: Sequence[str], column: str, parser, what: str) -> List[Any]:
    parsed = []
    for row, raw in enumerate(values, start=1):
        text = raw.strip()
        if text == '':
            raise DatasetError(f"missing {what}", row=row, column=column)
        try:
            parsed.append(parser(text))
        except ValueError:
            raise DatasetError(f"cannot parse {raw!r} as {what}", row=row, column=column)
    return parsed


def read_csv(path: PathLike, schema: Optional[CsvSchema] = None) -> SurvivalDataset:
    schema = schema or CsvSchema()
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    header = list(frame.columns)

    required = [schema.time, schema.event] + ([schema.stratum] if schema.stratum else [])
    if schema.features is not None:
        required += list(schema.features)
    missing = [name for name in required if name not in header]
    if missing:
        raise DatasetError(f"missing column(s): {', '.join(missing)}")

    if schema.features is not None:
        features = list(schema.features)
    else:
        reserved = {schema.time, schema.event, schema.stratum or STRATUM_COLUMN}
        features = [name for name in header if name not in reserved]

    time = _parse_cells(frame[schema.time].tolist(), schema.time, float, 'time')
    for row, value in enumerate(time, start=1):
        if not math.isfinite(value) or value < 0:
            raise DatasetError(f"time must be a nonnegative real, got {value!r}", row=row, column=schema.time)
    event = _parse_cells(frame[schema.event].tolist(), schema.event, int, 'event code')
    for row, value in enumerate(event, start=1):
        if value not in EVENT_CODES:
            raise DatasetError(f"event code {value} outside {{0,1,2,3}}", row=row, column=schema.event)

    columns = [_parse_cells(frame[name].tolist(), name, float, 'covariate') for name in features]
    covariates = np.array(columns, dtype=float).T.reshape(len(frame), len(features))

    stratum_column = schema.stratum
    if stratum_column is None and STRATUM_COLUMN in header:
        stratum_column = STRATUM_COLUMN
    strata = frame[stratum_column].tolist() if stratum_column else None

    dataset = SurvivalDataset.from_arrays(time, event, covariates, feature_names=features, strata=strata)
    logger.debug("Read %d records (%d covariates) from %s", dataset.n, dataset.p, path)
    return dataset


def write_csv(dataset: SurvivalDataset, path: PathLike) -> None:
    """Canonical CSV: time,event[,stratum],features... with shortest round-trip float text."""
    columns: Dict[str, List[str]] = {
        TIME_COLUMN: [repr(float(v)) for v in dataset.time],
        EVENT_COLUMN: [str(int(v)) for v in dataset.event],
    }
    if dataset.has_strata:
        columns[STRATUM_COLUMN] = ['' if s is None else s for s in dataset.strata]
    for j, name in enumerate(dataset.feature_names):
        columns[name] = [repr(float(v)) for v in dataset.covariates[:, j]]
    frame = pd.DataFrame(columns, columns=list(columns))
    frame.to_csv(path, index=False, lineterminator='\n')


def split_train_validation(
    dataset: SurvivalDataset, fraction: float, seed: int
) -> Tuple[SurvivalDataset, SurvivalDataset]:
    if not 0 < fraction < 1:
        raise DatasetError(f"fraction must lie in (0, 1), got {fraction}")
    n = len(dataset)
    if n < 2:
        raise DatasetError("at least two records are needed to split")
    n_train = min(max(int(round(fraction * n)), 1), n - 1)
    order = make_rng(seed).permutation(n)
    train = np.sort(order[:n_train])
    validation = np.sort(order[n_train:])
    return dataset.subset(train), dataset.subset(validation)
