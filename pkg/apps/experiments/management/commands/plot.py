"""
Management command to render SVG charts from run directories.
"""
from django.core.management.base import BaseCommand, CommandError

from apps.experiments.plots import plot_runs


class Command(BaseCommand):
    help = 'Render accuracy, cost and attention-weight charts as SVG'

    def add_arguments(self, parser):
        parser.add_argument('run_dirs', nargs='*', help='Run directories')
        parser.add_argument('--node', type=int, help='Agent whose attention weights are plotted')
        parser.add_argument('--out-dir', type=str, help='Output directory (default: the first run directory)')

    def handle(self, *args, **options):
        run_dirs = options['run_dirs']
        out_dir = options['out_dir'] or (run_dirs[0] if run_dirs else None)
        if out_dir is None:
            raise CommandError('--out-dir is required when no run directory is given')
        try:
            written = plot_runs(run_dirs, out_dir, node=options['node'])
        except (ValueError, FileNotFoundError) as e:
            raise CommandError(str(e))
        for path in written:
            self.stdout.write(f'Wrote {path}')
        self.stdout.write(self.style.SUCCESS(f'{len(written)} chart(s) rendered'))
