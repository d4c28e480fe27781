import logging

from django.core.management.base import BaseCommand, CommandError

from apps.bench.cli import DOMAIN_ERRORS, add_scenario_arguments, censoring_notice, out_dir, scenario_options
from apps.simulation.services import generate_scenario, load_scenario_config, write_draw
from apps.survival.conf import pseudolearn_setting

logger = logging.getLogger(__name__)


class Command(BaseCommand):
    help = 'Draw a training and a validation dataset for one simulation scenario'

    def add_arguments(self, parser):
        add_scenario_arguments(parser)
        parser.add_argument('--seed', type=int, help="seed (default: settings SEED)")
        parser.add_argument('--out', help="output directory (env PSEUDOLEARN_OUT)")

    def handle(self, *args, **options):
        try:
            if options['config']:
                config = load_scenario_config(options['config'])
            else:
                seed = pseudolearn_setting('SEED') if options['seed'] is None else options['seed']
                config = load_scenario_config(scenario_options(options, seed))
            notice = censoring_notice(config)
            if notice:
                self.stdout.write(self.style.WARNING(notice))
            draw = generate_scenario(config)
            files = write_draw(draw, out_dir(options['out']))
        except DOMAIN_ERRORS as exc:
            raise CommandError(str(exc))

        for split, dataset in (('train', draw.train), ('validation', draw.validation)):
            counts = dataset.event_counts()
            self.stdout.write(
                f"{split}: n={len(dataset)}, censored={counts['0']}, cause 1={counts['1']}, cause 2={counts['2']}"
            )
        for name, path in files.items():
            self.stdout.write(f"  {name}: {path}")
        self.stdout.write(self.style.SUCCESS(f'Scenario {config.scenario} written'))
