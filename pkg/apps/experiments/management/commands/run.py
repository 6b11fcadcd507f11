"""
Management command to run one experiment from a config file.
"""
from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from apps.experiments.config import load_config
from apps.experiments.exceptions import ConfigError
from apps.experiments.services import ExperimentService


class Command(BaseCommand):
    help = 'Run K rounds of one algorithm and write metrics, ledger and metadata'

    def add_arguments(self, parser):
        parser.add_argument('--config', type=str, required=True, help='TOML or JSON experiment config')
        parser.add_argument('--out-dir', type=str, help='Run directory (default: SIM_OUTPUT_DIR/<algorithm>-<hash>)')
        parser.add_argument('--seed-base', type=int, default=0, help='Offset added to every seed')

    def handle(self, *args, **options):
        try:
            config = load_config(options['config']).for_trial(0, options['seed_base'])
        except ConfigError as e:
            raise CommandError('Invalid config:\n  ' + '\n  '.join(e.lines()))

        out_dir = options['out_dir'] or Path(settings.SIM_OUTPUT_DIR) / f"{config.name}-{config.config_hash[:8]}"
        self.stdout.write(f'Running {config.name} for {config.run.rounds} rounds into {out_dir}...')
        try:
            result = ExperimentService().run(config, out_dir)
        except (ValueError, FileNotFoundError) as e:
            raise CommandError(f'Run failed: {e}')

        for message in result.report['warnings']:
            self.stdout.write(self.style.WARNING(message))
        self.stdout.write(
            self.style.SUCCESS(
                f'Run completed: final accuracy {result.final_accuracy:.4f}, '
                f'{result.totals["parameter_scalars"]} scalars sent, {result.wall_clock_seconds:.1f}s'
            )
        )
