"""
Competing-risks data generator for the benchmark scenarios.

Twenty correlated normal covariates drive the Weibull scale of the time to
the primary event (cause 1); the competing event (cause 2) depends on X2
only. Both scale vectors are rescaled by their mean ratio to the
Weibull target scales, then shifted by common multipliers so that the
average cumulative incidence at t* under competition is 0.20 for cause 1
and 0.07 for cause 2. Censoring is added and the true cause-1 incidence
at t* is computed per subject by quadrature.
"""

import json
import logging
import math
import warnings
from dataclasses import asdict, dataclass
from functools import partial
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.integrate import IntegrationWarning, quad
from scipy.interpolate import BSpline
from numpy.polynomial.legendre import leggauss
from scipy.optimize import brentq

from apps.survival.dataset import SurvivalDataset, write_csv
from apps.survival.rng import make_rng

from .exceptions import SimulationError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

SCENARIOS = ('S0', 'A', 'B', 'C', 'D')
N_COVARIATES = 20
FEATURE_NAMES = tuple(f"x{j + 1}" for j in range(N_COVARIATES))

CAUSE1_TARGET = 0.80
CAUSE1_INCIDENCE = 0.20
CAUSE2_INCIDENCE = 0.07
INCIDENCE_NODES = 128
INCIDENCE_SWEEPS = 50
INCIDENCE_TOLERANCE = 1e-9
LOG_MULTIPLIER_BOUND = 20.0
CAUSE2_TARGET = 0.93
STANDARD = 'standard'
PRINTED = 'printed'
QUANTILE_CONVENTIONS = (STANDARD, PRINTED)

BETA_B = np.array([0.75, 0.5, 6.1, 1.02, -2.03, 1, 2, 1, 0.6, 0.1, 3])
BETA_C = np.array([1.1, 1.4, -2.1, -1.2, -2.3, -1.5, 6.7, 0.5]) / 4
ALPHA_D = np.array([1.1, 1.4, -2.1, -1.2, -2.3, -1.5, 6.7, 0.5])[:5] / 3
SPLINE_DEGREE = 3
SPLINE_COLUMNS = 4
SPLINE_KNOT_QUANTILES = (0.25, 0.5, 0.75)
CENSORING_LOWER_QUANTILE = 0.05
QUAD_EPSREL = 1e-8

TRUTH_COLUMNS = ('subject', 't1', 't2', 'censor', 'true_cif')


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str = 'A'
    n: int = 500
    censoring_target: float = 0.2
    t_star: float = 26.5
    gamma2: float = 3.5
    kappa2: float = 2.5
    seed: int = 2018
    quantile_convention: str = STANDARD
    rescale_censoring: bool = False
    calibrate_incidence: bool = True

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise SimulationError(f"unknown scenario {self.scenario!r}; expected one of {SCENARIOS}")
        if self.n < 1:
            raise SimulationError(f"n must be positive, got {self.n}")
        if not 0 < self.censoring_target < 1:
            raise SimulationError(f"censoring_target must lie in (0, 1), got {self.censoring_target}")
        if self.t_star <= 0 or self.gamma2 <= 0 or self.kappa2 <= 0:
            raise SimulationError("t_star and the Weibull shapes must be positive")
        if self.quantile_convention not in QUANTILE_CONVENTIONS:
            raise SimulationError(f"quantile_convention must be one of {QUANTILE_CONVENTIONS}")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class TruthRecord:
    subject: int
    t1: float
    t2: float
    censor: float
    true_cif: float


@dataclass(frozen=True)
class ScenarioDraw:
    config: ScenarioConfig
    train: SurvivalDataset
    validation: SurvivalDataset
    train_truth: Tuple[TruthRecord, ...]
    validation_truth: Tuple[TruthRecord, ...]


def load_scenario_config(source: Union[PathLike, Dict[str, Any]]) -> ScenarioConfig:
    from .serializers import ScenarioConfigSerializer

    payload = json.loads(Path(source).read_text()) if isinstance(source, (str, Path)) else source
    serializer = ScenarioConfigSerializer(data=payload)
    if not serializer.is_valid():
        raise SimulationError(f"invalid scenario config: {serializer.errors}")
    return ScenarioConfig(**serializer.validated_data)


def gen_covariates(n: int, rng: np.random.Generator) -> np.ndarray:
    """n x 20 design in four blocks of five; each block loads on the sum of the previous one."""
    if n < 1:
        raise SimulationError(f"n must be positive, got {n}")
    X = np.empty((n, N_COVARIATES))
    X[:, 0:5] = rng.normal(0.0, 0.1, size=(n, 5))
    for start, loading, sd in ((5, 0.25, 0.1), (10, 0.15, 0.5), (15, 0.05, 0.65)):
        parent = X[:, start - 5:start].sum(axis=1, keepdims=True)
        X[:, start:start + 5] = loading * parent + rng.normal(0.0, sd, size=(n, 5))
    return X


def spline_knots(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    lo, hi = x.min(), x.max()
    if not hi > lo:
        raise SimulationError("cannot build a spline basis on a constant covariate")
    inner = np.quantile(x, SPLINE_KNOT_QUANTILES)
    return np.r_[[lo] * (SPLINE_DEGREE + 1), inner, [hi] * (SPLINE_DEGREE + 1)]


def bspline_basis(x: np.ndarray, knots: np.ndarray, columns: int = SPLINE_COLUMNS) -> np.ndarray:
    """Cubic B-spline basis without the intercept column, first `columns` functions."""
    basis = BSpline.design_matrix(np.asarray(x, dtype=float), knots, SPLINE_DEGREE).toarray()
    return basis[:, 1:1 + columns]


def _scenario_c(X: np.ndarray) -> np.ndarray:
    x1, x6, x11, x16, x20 = X[:, 0], X[:, 5], X[:, 10], X[:, 15], X[:, 19]
    Z = np.column_stack([x1, x6, x11, x16, x20, x1 * x6, np.cos(x11 / 0.1), x16 * (x16 < 0)])
    return np.exp(Z @ BETA_C)


def scale_model(scenario: str, X: np.ndarray, rng: Optional[np.random.Generator] = None
                ) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """Cause-1 Weibull scale per subject, plus the censoring scale in scenario D."""
    X = np.asarray(X, dtype=float)
    if scenario == 'S0':
        if rng is None:
            raise SimulationError("scenario S0 draws its scales and needs a generator")
        return np.exp(rng.normal(0.0, 0.35, size=X.shape[0])), None
    if scenario == 'A':
        return np.exp(-2 + 2.5 * X[:, 0]), None
    if scenario == 'B':
        x1, x6 = X[:, 0], X[:, 5]
        Z = np.column_stack([
            x1, x6, x1 * x6,
            bspline_basis(x1, spline_knots(x1)),
            bspline_basis(x6, spline_knots(x6)),
        ])
        return np.exp(6 + Z @ BETA_B), None
    if scenario == 'C':
        return _scenario_c(X), None
    if scenario == 'D':
        delta1 = np.exp(X[:, [0, 5, 10, 15, 19]] @ ALPHA_D)
        return _scenario_c(X), delta1
    raise SimulationError(f"unknown scenario {scenario!r}; expected one of {SCENARIOS}")


def competing_scale(X: np.ndarray) -> np.ndarray:
    return np.exp(2.5 * np.asarray(X, dtype=float)[:, 1])


def target_scale(t_star: float, shape: float, survival: float, convention: str = STANDARD) -> float:
    """Weibull scale s with F(t*) = 1 - survival; 'printed' keeps the sign of the exponent as published."""
    if convention == STANDARD:
        return t_star / (-math.log(survival)) ** (1.0 / shape)
    if convention == PRINTED:
        return t_star / (-math.log(survival)) ** (-shape)
    raise SimulationError(f"quantile_convention must be one of {QUANTILE_CONVENTIONS}")


def rescale_scales(gamma1: np.ndarray, kappa1: np.ndarray, config: ScenarioConfig) -> Tuple[np.ndarray, np.ndarray]:
    gamma1 = np.asarray(gamma1, dtype=float)
    kappa1 = np.asarray(kappa1, dtype=float)
    if np.any(gamma1 <= 0) or np.any(kappa1 <= 0):
        raise SimulationError("Weibull scales must be positive")
    c_gamma = target_scale(config.t_star, config.gamma2, CAUSE1_TARGET, config.quantile_convention)
    c_kappa = target_scale(config.t_star, config.kappa2, CAUSE2_TARGET, config.quantile_convention)
    return gamma1 * np.mean(c_gamma / gamma1), kappa1 * np.mean(c_kappa / kappa1)


def mean_incidences(gamma_star: np.ndarray, kappa_star: np.ndarray, config: ScenarioConfig) -> Tuple[float, float]:
    """Sample means of the cause-1 and cause-2 cumulative incidences at t*, by Gauss-Legendre quadrature."""
    nodes, weights = leggauss(INCIDENCE_NODES)
    x = 0.5 * config.t_star * (nodes + 1.0)
    w = 0.5 * config.t_star * weights
    gamma = np.asarray(gamma_star, dtype=float)[:, None]
    kappa = np.asarray(kappa_star, dtype=float)[:, None]
    z = x / kappa
    f1 = -np.expm1(-(x / gamma) ** config.gamma2)
    density2 = config.kappa2 / kappa * z ** (config.kappa2 - 1.0) * np.exp(-(z ** config.kappa2))
    # P(T1 <= T2 <= t*)
    head = (f1 * density2) @ w
    f1_star = -np.expm1(-(config.t_star / gamma[:, 0]) ** config.gamma2)
    s2_star = np.exp(-(config.t_star / kappa[:, 0]) ** config.kappa2)
    cif1 = head + f1_star * s2_star
    cif2 = (1.0 - s2_star) - head
    return float(cif1.mean()), float(cif2.mean())


def calibrate_incidence(gamma_star: np.ndarray, kappa_star: np.ndarray, config: ScenarioConfig
                        ) -> Tuple[np.ndarray, np.ndarray]:
    """Common multipliers on both scales so the mean incidences at t* are 0.20 and 0.07 under competition."""
    gamma_star = np.asarray(gamma_star, dtype=float)
    kappa_star = np.asarray(kappa_star, dtype=float)
    bound = LOG_MULTIPLIER_BOUND

    def cause1(a: float, b: float) -> float:
        return mean_incidences(gamma_star * math.exp(a), kappa_star * math.exp(b), config)[0]

    def cause2(a: float, b: float) -> float:
        return mean_incidences(gamma_star * math.exp(a), kappa_star * math.exp(b), config)[1]

    a = b = 0.0
    for sweep in range(1, INCIDENCE_SWEEPS + 1):
        try:
            new_a = _calibrate(partial(cause1, b=b), -bound, bound, CAUSE1_INCIDENCE)
            new_b = _calibrate(partial(cause2, new_a), -bound, bound, CAUSE2_INCIDENCE)
        except ValueError as exc:
            raise SimulationError(f"cannot calibrate the incidences: {exc}")
        moved = max(abs(new_a - a), abs(new_b - b))
        a, b = new_a, new_b
        if moved < INCIDENCE_TOLERANCE:
            logger.debug("Incidence multipliers %.4g and %.4g after %d sweep(s)", math.exp(a), math.exp(b), sweep)
            return gamma_star * math.exp(a), kappa_star * math.exp(b)
    raise SimulationError(f"incidence calibration did not settle after {INCIDENCE_SWEEPS} sweeps")


def sample_times(gamma_star: np.ndarray, kappa_star: np.ndarray, config: ScenarioConfig,
                 rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """Latent times with F(t) = 1 - exp(-(t / scale) ** shape)."""
    t1 = np.asarray(gamma_star) * rng.weibull(config.gamma2, size=len(gamma_star))
    t2 = np.asarray(kappa_star) * rng.weibull(config.kappa2, size=len(kappa_star))
    return t1, t2


def _calibrate(fraction, lo: float, hi: float, target: float) -> float:
    return brentq(lambda v: fraction(v) - target, lo, hi, xtol=1e-12, maxiter=500)


def gen_censoring(scenario: str, event_times: np.ndarray, delta1: Optional[np.ndarray], censoring_target: float,
                  rng: np.random.Generator, rescale_censoring: bool = False) -> np.ndarray:
    event_times = np.asarray(event_times, dtype=float)
    n = event_times.size

    if scenario == 'D':
        if delta1 is None:
            raise SimulationError("scenario D needs the censoring scales")
        draws = np.asarray(delta1) * rng.exponential(1.0, size=n)
        if not rescale_censoring:
            return draws

        def censored(log_multiplier: float) -> float:
            return float(np.mean(np.exp(log_multiplier) * draws < event_times))

        return np.exp(_calibrate(censored, -50.0, 50.0, censoring_target)) * draws

    lower = float(np.quantile(event_times, CENSORING_LOWER_QUANTILE))
    upper = float(event_times.max())
    if not upper > lower:
        raise SimulationError("degenerate event-time distribution: no spread above the 5% quantile")
    u = rng.uniform(size=n)

    def censored(bound: float) -> float:
        return float(np.mean(lower + u * (bound - lower) < event_times))

    if censored(lower) < censoring_target:
        raise SimulationError(f"censoring_target {censoring_target} exceeds the reachable fraction {censored(lower):.3f}")
    while censored(upper) > censoring_target:
        upper *= 2.0
    bound = _calibrate(censored, lower, upper, censoring_target)
    logger.debug("Uniform censoring on (%.4g, %.4g): %.3f censored", lower, bound, censored(bound))
    return lower + u * (bound - lower)


def _weibull_cdf(x: float, scale: float, shape: float) -> float:
    return -math.expm1(-((x / scale) ** shape))


def _weibull_pdf(x: float, scale: float, shape: float) -> float:
    z = x / scale
    return shape / scale * z ** (shape - 1) * math.exp(-(z ** shape))


def true_cif(gamma_i: float, gamma2: float, kappa_i: float, kappa2: float, t_star: float) -> float:
    """P(T1 <= t*, T1 < T2) for independent Weibull latent times."""
    if min(gamma_i, gamma2, kappa_i, kappa2, t_star) <= 0:
        raise SimulationError("true_cif needs positive parameters")
    with warnings.catch_warnings():
        warnings.simplefilter('error', IntegrationWarning)
        try:
            head, _ = quad(lambda x: _weibull_cdf(x, gamma_i, gamma2) * _weibull_pdf(x, kappa_i, kappa2),
                           0.0, t_star, epsrel=QUAD_EPSREL, limit=200)
        except IntegrationWarning as exc:
            raise SimulationError(f"quadrature did not converge: {exc}")
    tail = _weibull_cdf(t_star, gamma_i, gamma2) * (1.0 - _weibull_cdf(t_star, kappa_i, kappa2))
    return float(head + tail)


def _observe(t1: np.ndarray, t2: np.ndarray, censor: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    first = np.minimum(t1, t2)
    time = np.minimum(first, censor)
    # an event and a censoring at the same time count as the event
    event = np.where(censor < first, 0, np.where(t1 <= t2, 1, 2))
    return time, event


def _draw_split(config: ScenarioConfig, seed) -> Tuple[SurvivalDataset, Tuple[TruthRecord, ...]]:
    rng = make_rng(seed)
    X = gen_covariates(config.n, rng)
    gamma1, delta1 = scale_model(config.scenario, X, rng)
    gamma_star, kappa_star = rescale_scales(gamma1, competing_scale(X), config)
    if config.calibrate_incidence:
        gamma_star, kappa_star = calibrate_incidence(gamma_star, kappa_star, config)
    t1, t2 = sample_times(gamma_star, kappa_star, config, rng)
    censor = gen_censoring(config.scenario, np.minimum(t1, t2), delta1, config.censoring_target, rng,
                           rescale_censoring=config.rescale_censoring)
    time, event = _observe(t1, t2, censor)
    truth = tuple(
        TruthRecord(i, float(t1[i]), float(t2[i]), float(censor[i]),
                    true_cif(gamma_star[i], config.gamma2, kappa_star[i], config.kappa2, config.t_star))
        for i in range(config.n)
    )
    dataset = SurvivalDataset.from_arrays(time, event, X, feature_names=FEATURE_NAMES)
    return dataset, truth


def generate_scenario(config: ScenarioConfig) -> ScenarioDraw:
    """Independent training and validation draws; the same seed reproduces both bit for bit."""
    train_seed, validation_seed = np.random.SeedSequence(config.seed).spawn(2)
    train, train_truth = _draw_split(config, train_seed)
    validation, validation_truth = _draw_split(config, validation_seed)
    logger.info("Scenario %s (n=%d, censoring %.2f): train events %s, %.1f%% censored",
                config.scenario, config.n, config.censoring_target, train.event_counts(),
                100 * train.metadata()['censored_fraction'])
    return ScenarioDraw(config, train, validation, train_truth, validation_truth)


def write_truth_csv(truth: Sequence[TruthRecord], path: PathLike) -> None:
    frame = pd.DataFrame([asdict(record) for record in truth], columns=list(TRUTH_COLUMNS))
    frame.to_csv(path, index=False, float_format='%.17g', lineterminator='\n')


def read_truth_csv(path: PathLike) -> List[TruthRecord]:
    try:
        frame = pd.read_csv(path)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise SimulationError(f"cannot read truth file {path}: {exc}")
    missing = [column for column in TRUTH_COLUMNS if column not in frame.columns]
    if missing:
        raise SimulationError(f"truth file {path} is missing column(s): {', '.join(missing)}")
    return [
        TruthRecord(int(row.subject), float(row.t1), float(row.t2), float(row.censor), float(row.true_cif))
        for row in frame.itertuples(index=False)
    ]


def write_draw(draw: ScenarioDraw, out_dir: PathLike) -> Dict[str, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = {
        'train': out_dir / 'train.csv',
        'validation': out_dir / 'validation.csv',
        'train_truth': out_dir / 'train.truth.csv',
        'validation_truth': out_dir / 'validation.truth.csv',
        'config': out_dir / 'config.json',
    }
    write_csv(draw.train, files['train'])
    write_csv(draw.validation, files['validation'])
    write_truth_csv(draw.train_truth, files['train_truth'])
    write_truth_csv(draw.validation_truth, files['validation_truth'])
    files['config'].write_text(json.dumps(draw.config.to_dict(), indent=2, sort_keys=True) + '\n')
    return files


def truth_path(dataset_path: PathLike) -> Path:
    """Side-file that write_draw pairs with a dataset CSV."""
    path = Path(dataset_path)
    return path.with_name(f"{path.stem}.truth.csv")
