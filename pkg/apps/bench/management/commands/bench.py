import logging

from django.core.management.base import BaseCommand, CommandError

from apps.bench.cli import (
    DOMAIN_ERRORS,
    add_run_arguments,
    add_scenario_arguments,
    censoring_notice,
    out_dir,
    parse_floats,
    parse_names,
    scenario_options,
)
from apps.bench.services import METHODS, render_markdown, run_bench, write_report_json
from apps.learners.catalogue import BINARY, PSEUDO
from apps.learners.services import load_library
from apps.simulation.services import load_scenario_config
from apps.survival.conf import pseudolearn_setting

logger = logging.getLogger(__name__)


class Command(BaseCommand):
    help = 'Run simulation replicates and compare the methods on independent validation data'

    def add_arguments(self, parser):
        add_scenario_arguments(parser)
        parser.add_argument('--replicates', type=int, default=100)
        parser.add_argument('--methods', default=','.join(METHODS), help=f"subset of {', '.join(METHODS)}")
        parser.add_argument('--library', help="learner library JSON for the pseudo methods")
        parser.add_argument('--binary-library', dest='binary_library', help="learner library JSON for binary")
        parser.add_argument('--record', action='store_true', help="store the report in the database")
        add_run_arguments(parser)

    def handle(self, *args, **options):
        seed = pseudolearn_setting('SEED') if options['seed'] is None else options['seed']
        try:
            if options['config']:
                config = load_scenario_config(options['config'])
                if options['seed'] is not None:
                    config = load_scenario_config({**config.to_dict(), 'seed': seed})
            else:
                config = load_scenario_config(scenario_options(options, seed))
            if options['t_star'] is not None:
                config = load_scenario_config({**config.to_dict(), 't_star': options['t_star']})
            notice = censoring_notice(config)
            if notice:
                self.stdout.write(self.style.WARNING(notice))
            report = run_bench(
                config,
                options['replicates'],
                parse_names(options['methods']),
                grid=parse_floats(options['grid'], 'grid'),
                lam=options['lam'],
                folds=options['folds'],
                threads=options['threads'],
                pseudo_library=load_library(options['library'], PSEUDO) if options['library'] else None,
                binary_library=load_library(options['binary_library'], BINARY) if options['binary_library'] else None,
            )
            path = write_report_json(report, out_dir(options['out']) / 'bench.json')
        except DOMAIN_ERRORS as exc:
            raise CommandError(str(exc))

        self.stdout.write(render_markdown(report))
        if report.failures:
            self.stdout.write(self.style.WARNING(f'{len(report.failures)} replicate(s) failed'))
        if options['record']:
            from apps.bench.models import BenchRun

            run = BenchRun.record(report)
            self.stdout.write(f"Recorded as bench run {run.pk}")
        self.stdout.write(self.style.SUCCESS(f'Report written to {path}'))
