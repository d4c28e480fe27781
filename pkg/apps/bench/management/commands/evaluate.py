import json
import logging
from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from apps.bench.cli import DOMAIN_ERRORS, out_dir
from apps.bench.services import evaluate_ensemble
from apps.ensemble.services import load_ensemble
from apps.simulation.services import read_truth_csv, truth_path
from apps.survival.conf import pseudolearn_setting
from apps.survival.dataset import read_csv

logger = logging.getLogger(__name__)


class Command(BaseCommand):
    help = 'Score a fitted model on a validation CSV: pseudo-AUC, ROC and predictiveness curves'

    def add_arguments(self, parser):
        parser.add_argument('model', help="model JSON written by `fit`")
        parser.add_argument('validation', help="validation CSV")
        parser.add_argument('--truth', help="truth side-file (default: <validation>.truth.csv when present)")
        parser.add_argument('--out', help="output directory (env PSEUDOLEARN_OUT)")

    def handle(self, *args, **options):
        truth_file = Path(options['truth']) if options['truth'] else truth_path(options['validation'])
        try:
            model = load_ensemble(options['model'])
            validation = read_csv(options['validation'])
            truth = read_truth_csv(truth_file) if truth_file.exists() else None
            evaluation = evaluate_ensemble(model, validation, truth)
            target = out_dir(options['out'])
            evaluation.roc.write_csv(target / 'roc.csv')
            evaluation.predictiveness.write_csv(target / 'predictiveness.csv')
            payload = {
                'schema_version': pseudolearn_setting('SCHEMA_VERSION'),
                'model': str(options['model']),
                'validation': str(options['validation']),
                't_star': model.t_star,
                'result': evaluation.result.to_dict(),
            }
            (target / 'evaluation.json').write_text(json.dumps(payload, indent=2, sort_keys=True) + '\n')
        except DOMAIN_ERRORS as exc:
            raise CommandError(str(exc))

        for key, value in evaluation.result.to_dict().items():
            self.stdout.write(f"  {key}: {value}")
        self.stdout.write(self.style.SUCCESS(f'Evaluation written to {target}'))
