from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from apps.bench.cli import DOMAIN_ERRORS
from apps.bench.services import load_report_json, render_csv, render_markdown


class Command(BaseCommand):
    help = 'Render a bench report as a CSV or markdown table'

    def add_arguments(self, parser):
        parser.add_argument('input', help="bench.json written by `bench`")
        parser.add_argument('--format', choices=['csv', 'markdown'], default='markdown')
        parser.add_argument('--out', help="file to write (default: stdout)")

    def handle(self, *args, **options):
        if not Path(options['input']).exists():
            raise CommandError(f"bench report {options['input']} does not exist")
        try:
            report = load_report_json(options['input'])
            text = render_csv(report) if options['format'] == 'csv' else render_markdown(report)
            if options['out']:
                Path(options['out']).write_text(text)
        except DOMAIN_ERRORS as exc:
            raise CommandError(str(exc))
        if options['out']:
            self.stdout.write(self.style.SUCCESS(f"Report written to {options['out']}"))
        else:
            self.stdout.write(text, ending='')
