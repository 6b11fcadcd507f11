import json
from io import StringIO

import pandas as pd
import pytest
from django.core.management import call_command
from django.core.management.base import CommandError

from apps.experiments.config import parse_config
from apps.experiments.models import ExperimentRun
from apps.experiments.services import ExperimentService
from apps.topology.graphs import read_edge_list

from .factories import ExperimentConfigFactory


def _config_file(tmp_path, payload=None, name='experiment.json'):
    path = tmp_path / name
    path.write_text(json.dumps(payload if payload is not None else ExperimentConfigFactory()))
    return path


def _call(*args, **kwargs):
    out = StringIO()
    call_command(*args, stdout=out, **kwargs)
    return out.getvalue()


@pytest.mark.django_db
class TestRunCommand:
    def test_writes_run_directory_and_index_row(self, tmp_path):
        out_dir = tmp_path / 'run'
        output = _call('run', config=str(_config_file(tmp_path)), out_dir=str(out_dir))
        assert 'Run completed' in output
        for name in ('metrics.jsonl', 'ledger.csv', 'alphas.csv', 'meta.json'):
            assert (out_dir / name).exists()

        record = ExperimentRun.objects.get()
        assert record.run_id.startswith('RUN')
        assert record.run_status == 'COMPLETED'
        assert record.algorithm == 'gatta'
        assert record.output_dir == str(out_dir)
        assert record.global_scalars > 0
        assert record.validation_report['passed'] is True

    def test_invalid_config_lists_fields(self, tmp_path):
        payload = ExperimentConfigFactory(algorithm__tau_rule='inv_deg')
        with pytest.raises(CommandError, match='algorithm.tau_rule'):
            _call('run', config=str(_config_file(tmp_path, payload)), out_dir=str(tmp_path / 'run'))
        assert not ExperimentRun.objects.exists()

    def test_seed_base_changes_the_trajectory(self, tmp_path):
        path = _config_file(tmp_path)
        _call('run', config=str(path), out_dir=str(tmp_path / 'a'))
        _call('run', config=str(path), out_dir=str(tmp_path / 'b'), seed_base=5)
        first = (tmp_path / 'a' / 'metrics.jsonl').read_bytes()
        assert first != (tmp_path / 'b' / 'metrics.jsonl').read_bytes()


@pytest.mark.django_db
def test_failed_run_is_recorded(tmp_path):
    payload = ExperimentConfigFactory(
        data__regime='idx', data__images_path=str(tmp_path / 'missing-images'),
        data__labels_path=str(tmp_path / 'missing-labels'),
    )
    config = parse_config(payload)
    with pytest.raises(FileNotFoundError):
        ExperimentService().run(config, tmp_path / 'run')
    record = ExperimentRun.objects.get()
    assert record.run_status == 'FAILED'
    assert 'FileNotFoundError' in record.error_logs


def test_recording_can_be_disabled(tmp_path, settings):
    settings.SIM_RECORD_RUNS = False
    config = parse_config(ExperimentConfigFactory(algorithm__name='il', run__rounds=1))
    result = ExperimentService().run(config, tmp_path / 'run')
    assert result.totals['parameter_scalars'] == 0


@pytest.mark.django_db
class TestSweepCommand:
    def test_table_and_trial_directories(self, tmp_path):
        payload = ExperimentConfigFactory(run__algorithms=['gatta', 'dsgd'], run__rounds=2)
        out_dir = tmp_path / 'sweep'
        output = _call('sweep', config=str(_config_file(tmp_path, payload)), out_dir=str(out_dir), trials=2)
        assert 'completed' in output

        table = pd.read_csv(out_dir / 'sweep.csv')
        assert list(table['algorithm']) == ['gatta', 'dsgd']
        assert list(table['trials']) == [2, 2]
        for algorithm in ('gatta', 'dsgd'):
            for trial in (0, 1):
                assert (out_dir / algorithm / f'trial_{trial}' / 'meta.json').exists()

        records = ExperimentRun.objects.all()
        assert records.count() == 4
        assert len({record.sweep_id for record in records}) == 1

    def test_single_trial_reports_no_interval(self, tmp_path):
        payload = ExperimentConfigFactory(run__algorithms=['il'], run__rounds=1)
        output = _call('sweep', config=str(_config_file(tmp_path, payload)), out_dir=str(tmp_path / 's'))
        assert 'n/a' in output

    def test_parallel_trials_match_serial_ones(self, tmp_path):
        payload = ExperimentConfigFactory(run__algorithms=['dsgd'], run__rounds=2)
        path = _config_file(tmp_path, payload)
        _call('sweep', config=str(path), out_dir=str(tmp_path / 'serial'), trials=2, parallel=1)
        _call('sweep', config=str(path), out_dir=str(tmp_path / 'parallel'), trials=2, parallel=2)
        for trial in (0, 1):
            serial = (tmp_path / 'serial' / 'dsgd' / f'trial_{trial}' / 'metrics.jsonl').read_bytes()
            parallel = (tmp_path / 'parallel' / 'dsgd' / f'trial_{trial}' / 'metrics.jsonl').read_bytes()
            assert serial == parallel


@pytest.mark.django_db
def test_report_and_plot_commands(tmp_path):
    runs = []
    for name in ('dsgd', 'ce_gatta'):
        payload = ExperimentConfigFactory(algorithm__name=name)
        out_dir = tmp_path / name
        _call('run', config=str(_config_file(tmp_path, payload, f'{name}.json')), out_dir=str(out_dir))
        runs.append(str(out_dir))

    report = _call('report', *runs, csv=str(tmp_path / 'report.csv'))
    assert 'Communication cost against dsgd' in report
    assert '0.0%' in report
    assert pd.read_csv(tmp_path / 'report.csv').shape[0] == 2

    output = _call('plot', *runs, node=0, out_dir=str(tmp_path / 'charts'))
    assert '3 chart(s) rendered' in output
    assert '<polyline' in (tmp_path / 'charts' / 'alphas.svg').read_text()


def test_plot_without_runs_needs_a_directory():
    with pytest.raises(CommandError):
        _call('plot')


class TestValidateCommand:
    def test_lazy_ring_passes(self, tmp_path):
        output = _call('validate', config=str(_config_file(tmp_path)))
        assert 'PASSED' in output
        assert '0.333333' in output

    def test_non_lazy_even_ring_fails(self, tmp_path):
        payload = ExperimentConfigFactory(topology__lazy=False)
        with pytest.raises(CommandError, match='spectral gap'):
            _call('validate', config=str(_config_file(tmp_path, payload)))

    def test_zero_fusion_parameter_is_reported(self, tmp_path):
        payload = ExperimentConfigFactory(algorithm__mu=0.0)
        output = _call('validate', config=str(_config_file(tmp_path, payload)))
        assert 'largest agent bound 0' in output
        assert 'PASSED' in output


def test_gen_topology(tmp_path):
    out = tmp_path / 'graph.txt'
    output = _call('gen_topology', kind='erdos_renyi', n=10, p=0.4, seed=3, out=str(out))
    assert 'Lazy Metropolis rho' in output
    assert read_edge_list(out, n=10).n == 10


def test_gen_topology_rejects_missing_probability(tmp_path):
    with pytest.raises(CommandError):
        _call('gen_topology', kind='erdos_renyi', n=10, seed=3, out=str(tmp_path / 'graph.txt'))
