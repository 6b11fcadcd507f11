"""
Management command to generate a communication graph as an edge list.
"""
from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from apps.experiments.config import TopologySpec
from apps.experiments.runner import build_graph
from apps.experiments.serializers import TopologySerializer
from apps.topology.graphs import write_edge_list
from apps.topology.mixing import metropolis_weights


class Command(BaseCommand):
    help = 'Generate an Erdos-Renyi, ring or complete graph and write it as an `i j` edge list'

    def add_arguments(self, parser):
        parser.add_argument('--kind', type=str, choices=[k for k in settings.TOPOLOGY_KINDS if k != 'edge_list'],
                            default='erdos_renyi', help='Graph family')
        parser.add_argument('--n', type=int, required=True, help='Number of agents')
        parser.add_argument('--p', type=float, help='Edge probability (erdos_renyi)')
        parser.add_argument('--seed', type=int, help='Graph seed (erdos_renyi)')
        parser.add_argument('--out', type=str, required=True, help='Edge list path')

    def handle(self, *args, **options):
        serializer = TopologySerializer(data={
            key: options[key] for key in ('kind', 'n', 'p', 'seed') if options[key] is not None
        })
        if not serializer.is_valid():
            raise CommandError(f'Invalid topology: {serializer.errors}')
        try:
            graph = build_graph(TopologySpec(**serializer.validated_data))
            mixing = metropolis_weights(graph, lazy=True)
        except ValueError as e:
            raise CommandError(str(e))

        write_edge_list(graph, options['out'])
        self.stdout.write(f'{graph.n} agents, {graph.edge_count} edges, degrees {graph.degrees.min()}..{graph.degrees.max()}')
        self.stdout.write(f'Lazy Metropolis rho {mixing.rho:.6f} (gap {mixing.spectral_gap:.6f})')
        self.stdout.write(self.style.SUCCESS(f'Edge list written to {options["out"]}'))
