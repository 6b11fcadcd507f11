"""
Management command to run every algorithm of a config over several trial seeds.
"""
from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from apps.experiments.config import load_config
from apps.experiments.exceptions import ConfigError
from apps.experiments.reporting import accuracy_table, render_accuracy_table
from apps.experiments.services import ExperimentService


class Command(BaseCommand):
    help = 'Run each algorithm x trial and print mean accuracy with 95% confidence half-widths'

    def add_arguments(self, parser):
        parser.add_argument('--config', type=str, required=True, help='TOML or JSON experiment config')
        parser.add_argument('--out-dir', type=str, help='Sweep directory (default: SIM_OUTPUT_DIR/sweep-<hash>)')
        parser.add_argument('--trials', type=int, help='Trials per algorithm (default: [run] trials)')
        parser.add_argument('--parallel', type=int, help='Worker processes (default: SIM_DEFAULT_PARALLEL)')
        parser.add_argument('--seed-base', type=int, default=0, help='Offset added to every trial seed')

    def handle(self, *args, **options):
        try:
            config = load_config(options['config'], sweep=True)
        except ConfigError as e:
            raise CommandError('Invalid config:\n  ' + '\n  '.join(e.lines()))
        if options['trials'] is not None and options['trials'] < 1:
            raise CommandError('--trials must be at least 1')

        out_dir = options['out_dir'] or Path(settings.SIM_OUTPUT_DIR) / f"sweep-{config.config_hash[:8]}"
        self.stdout.write(f'Sweeping {", ".join(config.run.algorithms)} into {out_dir}...')
        result = ExperimentService().sweep(
            config, out_dir, trials=options['trials'], parallel=options['parallel'],
            seed_base=options['seed_base'],
        )

        self.stdout.write(render_accuracy_table(accuracy_table(result.final_accuracies)))
        self.stdout.write(f'Table written to {result.table_path}')
        if result.failures:
            for path in result.failures:
                self.stdout.write(self.style.ERROR(f'Trial failed: {path}'))
            raise CommandError(f'{len(result.failures)} trial(s) failed')
        self.stdout.write(self.style.SUCCESS(f'Sweep {result.sweep_id} completed!'))
