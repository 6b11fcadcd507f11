import math

import numpy as np
import pytest

from apps.datagen.datasets import gen_gaussian_mixture
from apps.datagen.partition import partition_label_skew
from apps.netsim.bus import MessageBus
from apps.netsim.costs import BOOTSTRAP, expected_cost_per_round
from apps.nn_core.layout import ParamLayout
from apps.protocols.exceptions import ProtocolError
from apps.protocols.rounds import (
    TrainingPlan, bootstrap_heads, gt_step_size, round_ce_gatta, round_dsgd, round_fl, round_gatta,
    round_gt_dsgd, round_il, round_repdl, run_dsgd_ft,
)
from apps.protocols.state import build_agents, tau_for
from apps.topology.graphs import gen_complete, gen_erdos_renyi, gen_ring
from apps.topology.mixing import identity_mixing, metropolis_weights, spectral_diagnostics, uniform_averaging

LAYOUT = ParamLayout.of([5, 6, 4])
PLAN = TrainingPlan(eta=0.01, batch_size=16)


def _setup(graph=None, seed=0, mu=0.9, allow_server=False):
    graph = graph or gen_ring(4)
    data = gen_gaussian_mixture(n_classes=4, n_features=5, per_class=24, separation=2.0, seed=1)
    shards = partition_label_skew(data, n_agents=graph.n, labels_per_agent=2, test_frac=0.25, seed=2)
    agents = build_agents(shards, graph, LAYOUT, seed=seed, mu=mu)
    return graph, agents, MessageBus(graph, allow_server=allow_server)


def _stack(agents, part='data'):
    return np.stack([getattr(agent.params, part) for agent in agents])


class TestBuildAgents:
    def test_common_initial_parameters(self):
        _, agents, _ = _setup()
        for agent in agents[1:]:
            assert np.array_equal(agent.params.data, agents[0].params.data)
        assert np.array_equal(agents[0].w_lu, agents[0].params.head)

    def test_beta_initial_range(self):
        _, agents, _ = _setup()
        for agent in agents:
            assert agent.beta.shape == (2 * LAYOUT.head_size,)
            assert np.abs(agent.beta).max() <= 0.1

    def test_tau_rules(self):
        assert tau_for('quarter_deg', 4) == 1 / 16
        assert tau_for('inv_deg', 5) == 0.2
        assert tau_for('scaled_deg', 2, 3.0) == 1.5
        assert tau_for('fixed', 7, 0.05) == 0.05
        with pytest.raises(ProtocolError):
            tau_for('median', 3)


class TestGatta:
    def test_bootstrap_is_round_zero(self):
        graph, agents, bus = _setup()
        bootstrap_heads(agents, bus)
        assert bus.ledger.round_totals(0).head_scalars == expected_cost_per_round(BOOTSTRAP, graph, LAYOUT)
        for agent in agents:
            assert sorted(agent.neighbor_heads) == agent.neighbors

    def test_round_needs_bootstrap(self):
        graph, agents, bus = _setup()
        with pytest.raises(ProtocolError):
            round_gatta(agents, metropolis_weights(graph), bus, PLAN, 1)

    def test_ledger_matches_closed_form(self):
        graph, agents, bus = _setup(gen_erdos_renyi(6, 0.5, seed=3))
        mixing = metropolis_weights(graph)
        bootstrap_heads(agents, bus)
        for k in range(1, 4):
            round_gatta(agents, mixing, bus, PLAN, k)
            assert bus.ledger.round_totals(k).parameter_scalars == expected_cost_per_round('gatta', graph, LAYOUT)

    def test_two_agents_averaging_agree_on_global_part(self):
        graph, agents, bus = _setup(gen_complete(2))
        bootstrap_heads(agents, bus)
        round_gatta(agents, uniform_averaging(2), bus, PLAN, 1)
        assert np.array_equal(agents[0].params.global_part, agents[1].params.global_part)

    def test_alphas_recorded_and_normalized(self):
        graph, agents, bus = _setup()
        bootstrap_heads(agents, bus)
        round_gatta(agents, metropolis_weights(graph), bus, PLAN, 1)
        for agent in agents:
            assert sorted(agent.last_alphas) == agent.neighbors
            assert abs(sum(agent.last_alphas.values()) - 1.0) < 1e-12

    def test_zero_steps_only_refinalizes_head(self):
        graph, agents, bus = _setup()
        bootstrap_heads(agents, bus)
        before = _stack(agents, 'global_part').copy()
        round_gatta(agents, identity_mixing(4), bus, TrainingPlan(eta=0.1, local_steps=0), 1)
        assert np.array_equal(_stack(agents, 'global_part'), before)

    def test_mu_one_matches_repdl(self):
        graph, gatta_agents, gatta_bus = _setup(mu=1.0)
        _, repdl_agents, repdl_bus = _setup(mu=1.0)
        mixing = metropolis_weights(graph)
        bootstrap_heads(gatta_agents, gatta_bus)
        for k in range(1, 4):
            gatta_metrics = round_gatta(gatta_agents, mixing, gatta_bus, PLAN, k)
            repdl_metrics = round_repdl(repdl_agents, mixing, repdl_bus, PLAN, k)
            for a, b in zip(gatta_metrics, repdl_metrics):
                assert a['train_loss'] == pytest.approx(b['train_loss'], abs=1e-12)
        assert np.allclose(_stack(gatta_agents), _stack(repdl_agents), atol=1e-12, rtol=0)


class TestCeGatta:
    def test_zero_threshold_is_bit_identical_to_gatta(self):
        graph, gatta_agents, gatta_bus = _setup()
        _, ce_agents, ce_bus = _setup()
        mixing = metropolis_weights(graph)
        bootstrap_heads(gatta_agents, gatta_bus)
        bootstrap_heads(ce_agents, ce_bus)
        tau = {i: 0.0 for i in range(graph.n)}
        for k in range(1, 31):
            assert round_gatta(gatta_agents, mixing, gatta_bus, PLAN, k) == \
                round_ce_gatta(ce_agents, mixing, ce_bus, PLAN, k, tau)
        assert np.array_equal(_stack(gatta_agents), _stack(ce_agents))

    def test_quarter_degree_pruning_is_monotone(self):
        graph, agents, bus = _setup(gen_erdos_renyi(8, 0.6, seed=1))
        mixing = metropolis_weights(graph)
        tau = {i: tau_for('quarter_deg', len(graph.neighbors(i))) for i in range(graph.n)}
        bootstrap_heads(agents, bus)
        previous_sets = [set(agent.active_in) for agent in agents]
        previous_cost = None
        for k in range(1, 21):
            round_ce_gatta(agents, mixing, bus, PLAN, k, tau)
            active_out = {agent.agent_id: agent.active_out for agent in agents}
            totals = bus.ledger.round_totals(k)
            assert totals.parameter_scalars == expected_cost_per_round('ce_gatta', graph, LAYOUT, active_out)
            for agent, before in zip(agents, previous_sets):
                assert agent.active_in
                assert agent.active_in <= before
            if previous_cost is not None:
                assert totals.head_scalars <= previous_cost
            previous_sets = [set(agent.active_in) for agent in agents]
            previous_cost = totals.head_scalars

    def test_unreachable_threshold_keeps_previous_set(self):
        graph, agents, bus = _setup()
        bootstrap_heads(agents, bus)
        round_ce_gatta(agents, metropolis_weights(graph), bus, PLAN, 1, {i: 2.0 for i in range(4)})
        for agent in agents:
            assert agent.active_in == set(agent.neighbors)
        assert bus.ledger.round_totals(1).control_messages == 0

    def test_pruned_sender_is_notified(self):
        graph, agents, bus = _setup(gen_complete(3))
        bootstrap_heads(agents, bus)
        F = LAYOUT.head_size
        agents[0].beta[:] = np.concatenate([np.zeros(F), np.full(F, 0.5)])
        agents[0].neighbor_heads[1] = np.ones(F)
        agents[0].neighbor_heads[2] = -np.ones(F)
        frozen = TrainingPlan(eta=0.0, local_steps=0)
        round_ce_gatta(agents, metropolis_weights(graph), bus, frozen, 1, {0: 0.3, 1: 0.0, 2: 0.0})
        assert agents[0].active_in == {1}
        assert agents[2].active_out == {1}
        assert bus.ledger.round_totals(1).control_messages == 1
        assert bus.ledger.round_totals(1).head_scalars == 5 * F


class TestFullVectorProtocols:
    def test_dsgd_ledger_and_consensus_contraction(self):
        graph, agents, bus = _setup()
        mixing = metropolis_weights(graph)
        rng = np.random.default_rng(0)
        for agent in agents:
            agent.params.data[:] += rng.standard_normal(LAYOUT.total)
        start = _stack(agents).copy()
        mean = start.mean(axis=0)
        frozen = TrainingPlan(eta=0.0, local_steps=0)
        deviation = np.linalg.norm(start - mean)
        for k in range(1, 11):
            round_dsgd(agents, mixing, bus, frozen, k)
            current = _stack(agents)
            assert np.allclose(current.mean(axis=0), mean, atol=1e-12)
            new_deviation = np.linalg.norm(current - mean)
            assert new_deviation / deviation == pytest.approx(1 / 3, rel=0.05)
            deviation = new_deviation
            assert bus.ledger.round_totals(k).global_scalars == expected_cost_per_round('dsgd', graph, LAYOUT)

    def test_dsgd_matches_matrix_power_oracle(self):
        graph, agents, bus = _setup(gen_erdos_renyi(10, 0.4, seed=5))
        mixing = metropolis_weights(graph)
        rng = np.random.default_rng(1)
        for agent in agents:
            agent.params.data[:] = rng.standard_normal(LAYOUT.total)
        start = _stack(agents).copy()
        for k in range(1, 11):
            round_dsgd(agents, mixing, bus, TrainingPlan(eta=0.0, local_steps=0), k)
        expected = np.linalg.matrix_power(mixing.weights, 10) @ start
        assert np.allclose(_stack(agents), expected, atol=1e-10)

    def test_erdos_renyi_consensus_contracts_at_rho(self):
        graph, agents, bus = _setup(gen_erdos_renyi(10, 0.4, seed=5))
        mixing = metropolis_weights(graph)
        rho, _, _ = spectral_diagnostics(mixing)
        values, vectors = np.linalg.eigh(mixing.weights)
        slowest = vectors[:, np.argmin(np.abs(np.abs(values) - rho))]
        rng = np.random.default_rng(2)
        direction = rng.standard_normal(LAYOUT.total)
        offset = rng.standard_normal(LAYOUT.total)
        for agent, weight in zip(agents, slowest):
            agent.params.data[:] = offset + weight * direction
        frozen = TrainingPlan(eta=0.0, local_steps=0)

        def spread(stack):
            return np.linalg.norm(stack - stack.mean(axis=0), axis=1).max()

        deviation = spread(_stack(agents))
        for k in range(1, 11):
            round_dsgd(agents, mixing, bus, frozen, k)
            new_deviation = spread(_stack(agents))
            assert new_deviation / deviation == pytest.approx(rho, rel=0.05)
            deviation = new_deviation

    def test_erdos_renyi_contraction_never_beats_rho_bound(self):
        graph, agents, bus = _setup(gen_erdos_renyi(10, 0.4, seed=5))
        mixing = metropolis_weights(graph)
        rho, _, _ = spectral_diagnostics(mixing)
        rng = np.random.default_rng(3)
        for agent in agents:
            agent.params.data[:] = rng.standard_normal(LAYOUT.total)
        deviation = np.linalg.norm(_stack(agents) - _stack(agents).mean(axis=0))
        for k in range(1, 11):
            round_dsgd(agents, mixing, bus, TrainingPlan(eta=0.0, local_steps=0), k)
            current = _stack(agents)
            new_deviation = np.linalg.norm(current - current.mean(axis=0))
            assert new_deviation <= rho * deviation * (1 + 1e-9)
            deviation = new_deviation

    def test_identical_shards_keep_agents_identical(self):
        graph, agents, bus = _setup()
        for agent in agents[1:]:
            agent.train = agents[0].train
            agent.batch_rng = np.random.default_rng(42)
        agents[0].batch_rng = np.random.default_rng(42)
        round_dsgd(agents, metropolis_weights(graph), bus, PLAN, 1)
        for agent in agents[1:]:
            assert np.allclose(agent.params.data, agents[0].params.data, atol=1e-14)

    def test_il_is_silent_and_matches_dsgd_without_mixing(self):
        graph, il_agents, il_bus = _setup()
        _, dsgd_agents, dsgd_bus = _setup()
        for k in range(1, 4):
            metrics = round_il(il_agents, PLAN, k, bus=il_bus)
            round_dsgd(dsgd_agents, identity_mixing(4), dsgd_bus, PLAN, k)
            assert all(m['comm_global'] == m['comm_head'] == 0 for m in metrics)
        assert il_bus.ledger.totals().parameter_scalars == 0
        assert np.array_equal(_stack(il_agents), _stack(dsgd_agents))

    def test_repdl_never_sends_heads(self):
        graph, agents, bus = _setup()
        round_repdl(agents, metropolis_weights(graph), bus, PLAN, 1)
        totals = bus.ledger.round_totals(1)
        assert totals.head_scalars == 0
        assert totals.global_scalars == expected_cost_per_round('repdl', graph, LAYOUT)

    def test_fl_single_agent_is_local_training(self):
        _, fl_agents, _ = _setup(gen_complete(2))
        _, il_agents, _ = _setup(gen_complete(2))
        bus = MessageBus(None, allow_server=True, n_agents=1)
        round_fl(fl_agents[:1], bus, PLAN, 1)
        round_il(il_agents[:1], PLAN, 1)
        assert np.array_equal(fl_agents[0].params.data, il_agents[0].params.data)

    def test_fl_weights_by_sample_count(self):
        graph, agents, _ = _setup(gen_complete(3))
        bus = MessageBus(graph, allow_server=True)
        for value, agent in enumerate(agents, start=1):
            agent.params.data[:] = float(value)
        counts = np.array([agent.n_samples for agent in agents], dtype=float)
        expected = (counts * np.array([1.0, 2.0, 3.0])).sum() / counts.sum()
        round_fl(agents, bus, TrainingPlan(eta=0.0, local_steps=0), 1)
        for agent in agents:
            assert np.allclose(agent.params.data, expected, atol=1e-12)
        assert bus.ledger.round_totals(1).global_scalars == expected_cost_per_round('fl', graph, LAYOUT)

    def test_fl_needs_server(self):
        graph, agents, bus = _setup()
        with pytest.raises(ProtocolError):
            round_fl(agents, bus, PLAN, 1)

    def test_dsgd_ft_degenerate_schedules(self):
        graph, ft_agents, ft_bus = _setup()
        _, dsgd_agents, dsgd_bus = _setup()
        mixing = metropolis_weights(graph)
        run_dsgd_ft(ft_agents, mixing, ft_bus, PLAN, rounds=3, ft_epochs=0)
        for k in range(1, 4):
            round_dsgd(dsgd_agents, mixing, dsgd_bus, PLAN, k)
        assert np.array_equal(_stack(ft_agents), _stack(dsgd_agents))

        _, ft_agents, ft_bus = _setup()
        _, il_agents, _ = _setup()
        run_dsgd_ft(ft_agents, mixing, ft_bus, PLAN, rounds=0, ft_epochs=2)
        for k in range(1, 3):
            round_il(il_agents, PLAN, k)
        assert np.array_equal(_stack(ft_agents), _stack(il_agents))
        assert ft_bus.ledger.totals().parameter_scalars == 0


class TestGradientTracking:
    def test_step_size_rule(self):
        assert gt_step_size(90, scale=1.0) == 1.0 / (10 + math.sqrt(90))

    def test_tracking_identity_and_convergence_on_quadratic(self):
        graph, agents, bus = _setup(gen_erdos_renyi(6, 0.5, seed=2))
        mixing = metropolis_weights(graph)
        rng = np.random.default_rng(3)
        target = rng.standard_normal(LAYOUT.total)
        for agent in agents:
            agent.params.data[:] = rng.standard_normal(LAYOUT.total)

        def grad_fn(agent_id, x):
            return x - target

        for k in range(1, 201):
            round_gt_dsgd(agents, mixing, bus, k, grad_fn=grad_fn, step_scale=1.0)
            trackers = np.stack([agent.tracker.y for agent in agents])
            grads = np.stack([grad_fn(a.agent_id, a.params.data) for a in agents])
            assert np.allclose(trackers.sum(axis=0), grads.sum(axis=0), atol=1e-10)
            assert bus.ledger.round_totals(k).global_scalars == expected_cost_per_round('gt_dsgd', graph, LAYOUT)

        common = grads.mean(axis=0)
        assert np.abs(trackers - common).max() < 1e-4

    def test_default_oracle_uses_training_loss(self):
        graph, agents, bus = _setup()
        metrics = round_gt_dsgd(agents, metropolis_weights(graph), bus, 1)
        assert all(np.isfinite(m['train_loss']) for m in metrics)


def test_runs_are_deterministic():
    streams = []
    for _ in range(2):
        graph, agents, bus = _setup()
        bootstrap_heads(agents, bus)
        mixing = metropolis_weights(graph)
        streams.append([round_gatta(agents, mixing, bus, PLAN, k) for k in range(1, 4)])
    assert streams[0] == streams[1]


@pytest.mark.parametrize('protocol', ['gatta', 'repdl'])
def test_frozen_mixing_keeps_the_global_mean(protocol):
    graph, agents, bus = _setup(gen_erdos_renyi(6, 0.5, seed=3))
    mixing = metropolis_weights(graph)
    rng = np.random.default_rng(4)
    for agent in agents:
        agent.params.global_part[:] += rng.standard_normal(agent.params.global_part.shape)
    mean = _stack(agents, 'global_part').mean(axis=0)
    frozen = TrainingPlan(eta=0.0, local_steps=0)
    if protocol == 'gatta':
        bootstrap_heads(agents, bus)
    for k in range(1, 6):
        if protocol == 'gatta':
            round_gatta(agents, mixing, bus, frozen, k)
        else:
            round_repdl(agents, mixing, bus, frozen, k)
        assert np.allclose(_stack(agents, 'global_part').mean(axis=0), mean, atol=1e-12)
