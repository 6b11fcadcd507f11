"""
Experiment service: runs trials, keeps the ExperimentRun index in step with
the run directories and assembles sweep tables.
"""
import logging
import traceback
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

from django.conf import settings
from django.utils import timezone
from joblib import Parallel, delayed

from .config import ExperimentConfig, sweep_algorithms
from .models import ExperimentRun
from .reporting import accuracy_table
from .runner import RunResult, execute_trial, trial_worker

logger = logging.getLogger(__name__)

SWEEP_TABLE = 'sweep.csv'


@dataclass
class SweepResult:
    sweep_id: str
    table_path: Path
    results: List[RunResult] = field(default_factory=list)
    failures: Dict[str, str] = field(default_factory=dict)

    @property
    def final_accuracies(self) -> Dict[str, List[float]]:
        grouped: Dict[str, List[float]] = {}
        for result in self.results:
            grouped.setdefault(result.algorithm, []).append(result.final_accuracy)
        return grouped


class ExperimentService:
    """
    Service for executing experiments and recording them.
    """

    def __init__(self, record: bool = None):
        self.record = settings.SIM_RECORD_RUNS if record is None else record

    def _start_record(self, config: ExperimentConfig, out_dir: Path, trial: int = 0,
                      sweep_id: str = '') -> Optional[ExperimentRun]:
        if not self.record:
            return None
        return ExperimentRun.objects.create(
            run_id=f"RUN{str(uuid.uuid4())[:8].upper()}",
            algorithm=config.name,
            run_status='RUNNING',
            sweep_id=sweep_id,
            trial=trial,
            config_hash=config.config_hash,
            config=config.to_dict(),
            output_dir=str(out_dir),
            rounds=config.run.rounds,
            started_at=timezone.now(),
        )

    @staticmethod
    def _complete_record(record: Optional[ExperimentRun], result: RunResult) -> None:
        if record is None:
            return
        record.run_status = 'COMPLETED'
        record.completed_at = timezone.now()
        record.wall_clock_seconds = result.wall_clock_seconds
        record.final_accuracy = result.final_accuracy
        record.global_scalars = result.totals['global_scalars']
        record.head_scalars = result.totals['head_scalars']
        record.control_messages = result.totals['control_messages']
        record.validation_report = result.report
        record.save()

    @staticmethod
    def _fail_record(record: Optional[ExperimentRun], error_logs: str) -> None:
        if record is None:
            return
        record.run_status = 'FAILED'
        record.completed_at = timezone.now()
        record.error_logs = error_logs
        record.save()

    def run(self, config: ExperimentConfig, out_dir, trial: int = 0, sweep_id: str = '') -> RunResult:
        """
        Execute one trial into out_dir. The index row goes RUNNING to
        COMPLETED, or to FAILED with the traceback before the error propagates.
        """
        out_dir = Path(out_dir)
        record = self._start_record(config, out_dir, trial, sweep_id)
        try:
            result = execute_trial(config, out_dir)
        except Exception:
            self._fail_record(record, traceback.format_exc())
            logger.error(f"Run {config.name} in {out_dir} failed", exc_info=True)
            raise
        self._complete_record(record, result)
        return result

    def sweep(self, config: ExperimentConfig, out_dir, trials: int = None, parallel: int = None,
              seed_base: int = 0) -> SweepResult:
        """
        Every algorithm x trial into out_dir/<algorithm>/trial_<t>, in
        parallel worker processes when parallel > 1. Database rows are only
        written from this process.
        """
        out_dir = Path(out_dir)
        trials = config.run.trials if trials is None else trials
        parallel = settings.SIM_DEFAULT_PARALLEL if parallel is None else parallel
        sweep_id = f"SWP{str(uuid.uuid4())[:8].upper()}"

        jobs = []
        for algorithm in sweep_algorithms(config):
            for trial in range(trials):
                trial_config = config.for_algorithm(algorithm).for_trial(trial, seed_base)
                trial_dir = out_dir / algorithm / f"trial_{trial}"
                jobs.append((trial_config, trial_dir, trial))
        logger.info(f"Sweep {sweep_id}: {len(jobs)} trials with {parallel} worker(s)")

        records = [self._start_record(cfg, path, trial, sweep_id) for cfg, path, trial in jobs]
        outcomes = Parallel(n_jobs=parallel)(delayed(trial_worker)(cfg, path) for cfg, path, _ in jobs)

        result = SweepResult(sweep_id=sweep_id, table_path=out_dir / SWEEP_TABLE)
        for (cfg, path, trial), record, (run_result, error_logs) in zip(jobs, records, outcomes):
            if run_result is None:
                self._fail_record(record, error_logs)
                result.failures[str(path)] = error_logs
                logger.error(f"Trial {trial} of {cfg.name} failed:\n{error_logs}")
                continue
            self._complete_record(record, run_result)
            result.results.append(run_result)

        out_dir.mkdir(parents=True, exist_ok=True)
        accuracy_table(result.final_accuracies).to_csv(result.table_path, index=False)
        return result
