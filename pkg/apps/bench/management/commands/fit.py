import logging
from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from apps.bench.cli import DOMAIN_ERRORS, add_run_arguments, out_dir, parse_floats
from apps.ensemble.services import fit_superlearner_binary, fit_superlearner_pseudo, save_ensemble
from apps.learners.catalogue import BINARY, PSEUDO
from apps.learners.services import builtin_library, load_library
from apps.survival.conf import pseudolearn_setting
from apps.survival.dataset import CsvSchema, read_csv

logger = logging.getLogger(__name__)

MODES = ('pseudo', 'pseudo-single', 'binary')


class Command(BaseCommand):
    help = 'Fit a SuperLearner on a training CSV and save it as JSON plus a joblib artefact'

    def add_arguments(self, parser):
        parser.add_argument('train', help="training CSV (time,event[,stratum],covariates...)")
        parser.add_argument('--mode', choices=MODES, default='pseudo')
        parser.add_argument('--library', help="learner library JSON (default: built-in library for the mode)")
        parser.add_argument('--cause', type=int, default=1)
        parser.add_argument('--stratified', action='store_true',
                            help="stratified pseudo-values / censoring weights (needs a stratum column)")
        parser.add_argument('--record', action='store_true', help="store the fitted ensemble in the database")
        parser.add_argument('--name', help="name for the recorded ensemble")
        add_run_arguments(parser)

    def handle(self, *args, **options):
        mode = options['mode']
        t_star = pseudolearn_setting('T_STAR') if options['t_star'] is None else options['t_star']
        grid = parse_floats(options['grid'], 'grid') or pseudolearn_setting('GRID')
        if mode == 'pseudo-single':
            grid = [t_star]
        path = Path(options['out']) if options['out'] else out_dir(None) / 'model.json'
        path.parent.mkdir(parents=True, exist_ok=True)

        try:
            dataset = read_csv(options['train'], CsvSchema())
            learner_mode = BINARY if mode == 'binary' else PSEUDO
            library = load_library(options['library'], learner_mode) if options['library'] \
                else builtin_library(learner_mode)
            if mode == 'binary':
                model = fit_superlearner_binary(
                    dataset, t_star, library, V=options['folds'], stratified_weights=options['stratified'],
                    seed=options['seed'], cause=options['cause'], threads=options['threads'],
                )
            else:
                model = fit_superlearner_pseudo(
                    dataset, grid, t_star, library, V=options['folds'], lam=options['lam'], seed=options['seed'],
                    cause=options['cause'], stratified=options['stratified'], threads=options['threads'],
                )
            save_ensemble(model, path)
        except DOMAIN_ERRORS as exc:
            raise CommandError(str(exc))

        for name, weight in zip((learner.name for learner in model.learners), model.alpha_star):
            self.stdout.write(f"  {name:<16} {weight: .4f}")
        if options['record']:
            from apps.ensemble.models import FittedEnsemble

            record = FittedEnsemble.record(options['name'] or path.stem, model, path.with_suffix('.joblib'))
            self.stdout.write(f"Recorded as ensemble {record.pk}")
        self.stdout.write(self.style.SUCCESS(f'Model written to {path}'))
