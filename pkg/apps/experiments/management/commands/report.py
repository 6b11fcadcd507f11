"""
Management command to compare communication cost across finished runs.
"""
from django.core.management.base import BaseCommand, CommandError

from apps.experiments.reporting import render_report_table, report_table


class Command(BaseCommand):
    help = 'Total and to-target communication cost per algorithm with reductions against a baseline'

    def add_arguments(self, parser):
        parser.add_argument('run_dirs', nargs='+', help='Run directories')
        parser.add_argument('--baseline', type=str, default='dsgd', help='Reference algorithm')
        parser.add_argument('--target', type=float, help="Target accuracy (default: the baseline's final accuracy)")
        parser.add_argument('--csv', type=str, help='Also write the table to this CSV file')

    def handle(self, *args, **options):
        try:
            table = report_table(options['run_dirs'], baseline=options['baseline'], target=options['target'])
        except (ValueError, FileNotFoundError) as e:
            raise CommandError(str(e))

        self.stdout.write(render_report_table(table, baseline=options['baseline']))
        if options['csv']:
            table.to_csv(options['csv'], index=False)
            self.stdout.write(self.style.SUCCESS(f'Table written to {options["csv"]}'))
