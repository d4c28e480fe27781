"""Argument helpers shared by the management commands."""

from pathlib import Path
from typing import List, Optional

from django.core.management.base import CommandError

from apps.survival.conf import pseudolearn_setting

DOMAIN_ERRORS = (ValueError, OSError)


def parse_floats(text: Optional[str], name: str) -> Optional[List[float]]:
    if text is None:
        return None
    try:
        values = [float(part) for part in text.split(',') if part.strip()]
    except ValueError:
        raise CommandError(f"--{name} must be a comma-separated list of numbers, got {text!r}")
    if not values:
        raise CommandError(f"--{name} is empty")
    return values


def parse_names(text: Optional[str]) -> Optional[List[str]]:
    if text is None:
        return None
    return [part.strip() for part in text.split(',') if part.strip()]


def out_dir(option: Optional[str]) -> Path:
    path = Path(option or pseudolearn_setting('OUT_DIR'))
    path.mkdir(parents=True, exist_ok=True)
    return path


def add_run_arguments(parser) -> None:
    parser.add_argument('--grid', help="comma-separated time grid (default: settings GRID)")
    parser.add_argument('--t-star', type=float, dest='t_star', help="time of interest (default: settings T_STAR)")
    parser.add_argument('--lambda', type=float, dest='lam', help="sign penalty weight for the AUC weights")
    parser.add_argument('--folds', type=int, help="cross-validation folds")
    parser.add_argument('--seed', type=int, help="master seed")
    parser.add_argument('--threads', type=int, help="parallel workers (env PSEUDOLEARN_THREADS)")
    parser.add_argument('--out', help="output location (env PSEUDOLEARN_OUT)")


def add_scenario_arguments(parser) -> None:
    parser.add_argument('--config', help="scenario config JSON")
    parser.add_argument('--scenario', default='A', help="S0, A, B, C or D (ignored with --config)")
    parser.add_argument('--censoring', type=float, default=0.2, choices=[0.2, 0.5])
    parser.add_argument('--rescale-censoring', action='store_true', dest='rescale_censoring',
                        help="Scenario D: scale the censoring draws to hit --censoring")
    parser.add_argument('--n', type=int, default=500)


def scenario_options(options, seed: int) -> dict:
    return {
        'scenario': options['scenario'],
        'n': options['n'],
        'censoring_target': options['censoring'],
        'rescale_censoring': options['rescale_censoring'],
        'seed': seed,
    }


def censoring_notice(config) -> Optional[str]:
    """Scenario D draws its own censoring unless asked to rescale it."""
    if config.scenario == 'D' and not config.rescale_censoring:
        return (f"Scenario D keeps its own censoring mechanism, so censoring_target {config.censoring_target} "
                f"is not applied; pass --rescale-censoring to calibrate it")
    return None
