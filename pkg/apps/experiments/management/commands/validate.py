"""
Management command to check a config against the convergence conditions
before spending time on a run.
"""
from django.core.management.base import BaseCommand, CommandError

from apps.experiments.config import load_config, sweep_algorithms
from apps.experiments.exceptions import ConfigError
from apps.experiments.runner import prepare_trial
from apps.theory.validation import render_report, validation_report


class Command(BaseCommand):
    help = 'Print the spectral-gap check, learning-rate gate and per-agent fusion bounds'

    def add_arguments(self, parser):
        parser.add_argument('--config', type=str, required=True, help='TOML or JSON experiment config')

    def handle(self, *args, **options):
        try:
            config = load_config(options['config'], sweep=True)
        except ConfigError as e:
            raise CommandError('Invalid config:\n  ' + '\n  '.join(e.lines()))

        algorithms = sweep_algorithms(config)
        attention = [name for name in algorithms if name in ('gatta', 'ce_gatta')]
        config = config.for_algorithm(attention[0] if attention else algorithms[0])
        try:
            # a gapless matrix is reported, not rejected
            setup = prepare_trial(config, require_gap=False)
            report = validation_report(
                setup.mixing, config.algorithm.eta, setup.local_steps, config.run.rounds,
                mu=config.algorithm.mu if config.uses_attention else None,
                agents=setup.agents if config.uses_attention else None,
                L=config.theory.L, c=config.theory.c,
            )
        except (ValueError, FileNotFoundError) as e:
            raise CommandError(str(e))

        self.stdout.write(render_report(report))
        if not report['passed']:
            raise CommandError('; '.join(report['hard_failures']))
        self.stdout.write(self.style.SUCCESS('Configuration passed validation'))
