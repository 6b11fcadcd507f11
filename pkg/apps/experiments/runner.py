"""
Single-trial execution: builds the graph, shards, model and agents from a
config, runs the configured protocol round by round and writes the run
directory (metrics.jsonl, ledger.csv, alphas.csv, meta.json).

Nothing here touches the database, so trials can run in worker processes.
"""
import json
import logging
import time
import traceback
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import django
import numpy as np
import pandas as pd
from django.apps import apps as django_apps
from django.conf import settings

from apps.datagen.datasets import ShardAssignment, gen_gaussian_mixture
from apps.datagen.idx import load_idx
from apps.datagen.partition import partition_feature_skew, partition_label_skew
from apps.netsim.bus import MessageBus
from apps.netsim.costs import BOOTSTRAP, expected_cost_per_round
from apps.netsim.exceptions import DeliveryError
from apps.nn_core.layout import ParamLayout
from apps.protocols import rounds as protocol
from apps.protocols.state import AgentState, build_agents, tau_for
from apps.theory.estimates import GradientTrace, check_rate, collect_gradient_trace, estimate_constants
from apps.theory.exceptions import TheoryError
from apps.theory.validation import validation_report
from apps.topology.graphs import Graph, gen_complete, gen_erdos_renyi, gen_ring, read_edge_list
from apps.topology.mixing import MixingMatrix, metropolis_weights

from .config import DataSpec, ExperimentConfig, TopologySpec, canonical_json

logger = logging.getLogger(__name__)

METRICS_FILE = 'metrics.jsonl'
LEDGER_FILE = 'ledger.csv'
ALPHAS_FILE = 'alphas.csv'
META_FILE = 'meta.json'


def build_graph(spec: TopologySpec) -> Graph:
    if spec.kind == 'erdos_renyi':
        return gen_erdos_renyi(spec.n, spec.p, seed=spec.seed)
    if spec.kind == 'ring':
        return gen_ring(spec.n)
    if spec.kind == 'complete':
        return gen_complete(spec.n)
    return read_edge_list(spec.path, n=spec.n)


def build_shards(spec: DataSpec, n_agents: int) -> ShardAssignment:
    if spec.regime == 'label_skew':
        data = gen_gaussian_mixture(spec.n_classes, spec.n_features, spec.per_class, spec.separation, spec.seed)
        return partition_label_skew(data, n_agents, spec.labels_per_agent, spec.test_frac, spec.seed)
    if spec.regime == 'feature_skew':
        base = gen_gaussian_mixture(spec.n_classes, spec.n_features, spec.per_class, spec.separation, spec.seed)
        return partition_feature_skew(
            base, n_agents, spec.writers_per_agent, spec.n_writers, spec.test_frac, spec.seed,
            identity_transforms=spec.identity_transforms,
        )
    data = load_idx(spec.images_path, spec.labels_path)
    return partition_label_skew(data, n_agents, spec.labels_per_agent, spec.test_frac, spec.seed)


@dataclass
class TrialSetup:
    config: ExperimentConfig
    graph: Graph
    mixing: MixingMatrix
    shards: ShardAssignment
    layout: ParamLayout
    agents: List[AgentState]
    bus: MessageBus
    plan: protocol.TrainingPlan

    @property
    def local_steps(self) -> int:
        """T: the largest number of local steps any agent takes per round."""
        if self.config.name == 'gt_dsgd':
            return 1
        return max(self.plan.steps_for(agent) for agent in self.agents)

    @property
    def taus(self) -> Dict[int, float]:
        algorithm = self.config.algorithm
        return {
            agent.agent_id: tau_for(algorithm.tau_rule, len(agent.neighbors), algorithm.tau_value)
            for agent in self.agents
        }


def prepare_trial(config: ExperimentConfig, require_gap: bool = True) -> TrialSetup:
    """Everything a trial needs before round 1, including the round-0 head exchange."""
    graph = build_graph(config.topology)
    mixing = metropolis_weights(graph, lazy=config.topology.lazy, require_gap=require_gap)
    shards = build_shards(config.data, graph.n)
    for row in shards.summary():
        logger.info(f"Shard {row}")

    n_classes = shards.train[0].n_classes
    layout = ParamLayout.of([shards.train[0].n_features, *config.model.hidden, n_classes])
    agents = build_agents(shards, graph, layout, seed=config.run.seed, mu=config.algorithm.mu)
    bus = MessageBus(graph, allow_server=config.name == 'fl')
    plan = protocol.TrainingPlan(
        eta=config.algorithm.eta, batch_size=config.run.batch_size, local_steps=config.run.local_steps,
    )
    if config.uses_attention:
        protocol.bootstrap_heads(agents, bus)
        _check_ledger(bus, 0, BOOTSTRAP, graph, layout)
    return TrialSetup(config, graph, mixing, shards, layout, agents, bus, plan)


def _check_ledger(bus: MessageBus, round_index: int, algorithm: str, graph: Graph, layout: ParamLayout,
                  active_out=None, fine_tuning: bool = False) -> None:
    expected = expected_cost_per_round(algorithm, graph, layout, active_out=active_out, fine_tuning=fine_tuning)
    observed = bus.ledger.round_totals(round_index).parameter_scalars
    if observed != expected:
        raise DeliveryError(
            f"Round {round_index} of {algorithm}: ledger holds {observed} scalars, closed form gives {expected}"
        )


def _round_step(setup: TrialSetup):
    config, agents, mixing, bus, plan = setup.config, setup.agents, setup.mixing, setup.bus, setup.plan
    name = config.name
    if name == 'gatta':
        return lambda k: protocol.round_gatta(agents, mixing, bus, plan, k)
    if name == 'ce_gatta':
        taus = setup.taus
        return lambda k: protocol.round_ce_gatta(agents, mixing, bus, plan, k, taus)
    if name == 'dsgd':
        return lambda k: protocol.round_dsgd(agents, mixing, bus, plan, k)
    if name == 'repdl':
        return lambda k: protocol.round_repdl(agents, mixing, bus, plan, k)
    if name == 'il':
        return lambda k: protocol.round_il(agents, plan, k, bus=bus)
    if name == 'fl':
        return lambda k: protocol.round_fl(agents, bus, plan, k)
    if name == 'dsgd_ft':
        consensus = config.run.rounds - _ft_epochs(config)
        return lambda k: protocol.round_dsgd_ft(agents, mixing, bus, plan, k, consensus)
    if name == 'gt_dsgd':
        scale = config.algorithm.gt_step_scale
        return lambda k: protocol.round_gt_dsgd(agents, mixing, bus, k, step_scale=scale)
    raise ValueError(f"Unknown algorithm {name!r}")


def _ft_epochs(config: ExperimentConfig) -> int:
    ft = config.algorithm.ft_epochs
    ft = settings.SIMULATION['DSGD_FT_EPOCHS'] if ft is None else ft
    return min(ft, config.run.rounds)


@dataclass
class RunResult:
    run_dir: Path
    algorithm: str
    config_hash: str
    rounds: int
    local_steps: int
    final_accuracy: float
    totals: dict
    report: dict
    wall_clock_seconds: float
    theory: dict = field(default_factory=dict)


def _write_jsonl(records: List[dict], path: Path) -> None:
    with path.open('w', encoding='utf-8') as handle:
        for record in records:
            handle.write(json.dumps(record, sort_keys=True) + '\n')


def _theory_summary(setup: TrialSetup, trace: GradientTrace, trace_rounds: List[int]) -> dict:
    config, T = setup.config, setup.local_steps
    theory = config.theory
    summary = {'trace_rounds': trace_rounds, 'grad_norms': trace.grad_norms}
    try:
        constants = estimate_constants(trace, T=T, eta=config.algorithm.eta, K=config.run.rounds, c=theory.c)
    except TheoryError as e:
        logger.warning(f"Constants could not be estimated: {e}")
        summary['error'] = str(e)
        return summary
    summary['constants'] = constants.as_dict()
    summary['report'] = validation_report(
        setup.mixing, config.algorithm.eta, T, config.run.rounds, constants=constants,
        c=constants.c, F0=theory.F0, F_star=theory.F_star,
    )
    if len(trace.grad_norms) >= 2:
        try:
            summary['rate_slope'] = check_rate(trace.grad_norms, rounds=trace_rounds).slope
        except TheoryError as e:
            logger.warning(f"Rate fit skipped: {e}")
    return summary


def execute_trial(config: ExperimentConfig, out_dir) -> RunResult:
    """Run every round of one trial and write its run directory."""
    started = time.perf_counter()
    run_dir = Path(out_dir)
    run_dir.mkdir(parents=True, exist_ok=True)

    setup = prepare_trial(config)
    T = setup.local_steps
    K = config.run.rounds
    report = validation_report(
        setup.mixing, config.algorithm.eta, T, K,
        mu=config.algorithm.mu if config.uses_attention else None,
        agents=setup.agents if config.uses_attention else None,
        L=config.theory.L, c=config.theory.c,
    )

    step = _round_step(setup)
    consensus = K - _ft_epochs(config) if config.name == 'dsgd_ft' else K
    records, alpha_rows = [], []
    trace, trace_rounds = GradientTrace(), []
    for k in range(1, K + 1):
        records.extend(step(k))
        active_out = {agent.agent_id: agent.active_out for agent in setup.agents}
        _check_ledger(setup.bus, k, config.name, setup.graph, setup.layout,
                      active_out=active_out, fine_tuning=k > consensus)
        if config.uses_attention and config.run.record_alphas:
            for agent in setup.agents:
                for j, alpha in sorted(agent.last_alphas.items()):
                    alpha_rows.append({'round': k, 'i': agent.agent_id, 'j': j, 'alpha': alpha})
        if config.theory.estimate and k % config.theory.cadence == 0:
            collect_gradient_trace(setup.agents, trace, batch_size=config.run.batch_size, seed=config.run.seed + k)
            trace_rounds.append(k)
        if k % 10 == 0 or k == K:
            last = [r['test_acc'] for r in records[-len(setup.agents):]]
            logger.info(f"{config.name} round {k}/{K}: mean test accuracy {np.mean(last):.4f}")

    _write_jsonl(records, run_dir / METRICS_FILE)
    setup.bus.ledger.export_csv(run_dir / LEDGER_FILE)
    if alpha_rows:
        pd.DataFrame(alpha_rows, columns=['round', 'i', 'j', 'alpha']).to_csv(run_dir / ALPHAS_FILE, index=False)

    theory = _theory_summary(setup, trace, trace_rounds) if trace_rounds else {}
    totals = setup.bus.ledger.totals()
    final = [r['test_acc'] for r in records if r['round'] == K]
    result = RunResult(
        run_dir=run_dir,
        algorithm=config.name,
        config_hash=config.config_hash,
        rounds=K,
        local_steps=T,
        final_accuracy=float(np.mean(final)),
        totals={
            'global_scalars': totals.global_scalars,
            'head_scalars': totals.head_scalars,
            'control_messages': totals.control_messages,
            'parameter_scalars': totals.parameter_scalars,
        },
        report=report,
        wall_clock_seconds=time.perf_counter() - started,
        theory=theory,
    )
    meta = {
        'config': json.loads(canonical_json(config.to_dict())),
        'config_hash': result.config_hash,
        'algorithm': result.algorithm,
        'rounds': K,
        'T': T,
        'n_agents': setup.graph.n,
        'layout': list(setup.layout.layer_sizes),
        'final_accuracy': result.final_accuracy,
        'totals': result.totals,
        'validation': report,
        'theory': theory,
        'wall_clock_seconds': result.wall_clock_seconds,
    }
    (run_dir / META_FILE).write_text(json.dumps(meta, indent=2, sort_keys=True), encoding='utf-8')
    logger.info(f"Run {config.name} finished in {result.wall_clock_seconds:.1f}s -> {run_dir}")
    return result


def trial_worker(config: ExperimentConfig, out_dir) -> Tuple[Optional[RunResult], str]:
    """Sweep entry point for worker processes; failures come back as a traceback."""
    if not django_apps.ready:
        django.setup()
    try:
        return execute_trial(config, out_dir), ''
    except Exception:
        return None, traceback.format_exc()
