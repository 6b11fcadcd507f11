"""
Tables computed from finished run directories: accuracy comparisons with
normal-approximation confidence intervals and communication-cost reductions.
"""
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np
import pandas as pd
from django.conf import settings

from apps.netsim.ledger import CONTROL

from .runner import ALPHAS_FILE, LEDGER_FILE, META_FILE, METRICS_FILE

logger = logging.getLogger(__name__)

METRIC_COLUMNS = ['round', 'agent', 'train_loss', 'test_acc', 'comm_global', 'comm_head']


@dataclass
class RunData:
    run_dir: Path
    meta: dict
    metrics: pd.DataFrame
    ledger: pd.DataFrame
    alphas: Optional[pd.DataFrame]

    @property
    def algorithm(self) -> str:
        return self.meta['algorithm']


def load_run(run_dir) -> RunData:
    run_dir = Path(run_dir)
    meta_path = run_dir / META_FILE
    if not meta_path.exists():
        raise FileNotFoundError(f"{run_dir} is not a run directory (no {META_FILE})")
    meta = json.loads(meta_path.read_text(encoding='utf-8'))
    lines = (run_dir / METRICS_FILE).read_text(encoding='utf-8').splitlines()
    metrics = pd.DataFrame([json.loads(line) for line in lines if line.strip()], columns=METRIC_COLUMNS)
    ledger = pd.read_csv(run_dir / LEDGER_FILE)
    alphas_path = run_dir / ALPHAS_FILE
    alphas = pd.read_csv(alphas_path) if alphas_path.exists() else None
    return RunData(run_dir, meta, metrics, ledger, alphas)


def accuracy_curve(run: RunData) -> pd.Series:
    """Mean test accuracy over agents, indexed by round."""
    return run.metrics.groupby('round')['test_acc'].mean().sort_index()


def final_accuracy(run: RunData) -> float:
    curve = accuracy_curve(run)
    return float(curve.iloc[-1]) if len(curve) else float('nan')


def cost_per_round(run: RunData) -> pd.Series:
    """Parameter scalars sent in each round, round 0 (head bootstrap) included."""
    params = run.ledger[run.ledger['kind'] != CONTROL]
    return params.groupby('round')['scalars'].sum().sort_index()


def cumulative_cost(run: RunData) -> pd.Series:
    return cost_per_round(run).cumsum()


def total_cost(run: RunData) -> int:
    costs = cost_per_round(run)
    return int(costs.sum()) if len(costs) else 0


def cost_to_target(run: RunData, target: float) -> Optional[int]:
    """Cumulative scalars up to the first round whose mean accuracy reaches target; None if never."""
    curve = accuracy_curve(run)
    reached = curve[curve >= target]
    if reached.empty:
        return None
    first = reached.index[0]
    cumulative = cumulative_cost(run)
    upto = cumulative[cumulative.index <= first]
    return int(upto.iloc[-1]) if len(upto) else 0


def rounds_to_target(run: RunData, target: float) -> Optional[int]:
    curve = accuracy_curve(run)
    reached = curve[curve >= target]
    return None if reached.empty else int(reached.index[0])


def reduction(cost: float, baseline: float) -> Optional[float]:
    """1 - cost / baseline."""
    if cost is None or baseline is None or baseline <= 0:
        return None
    return 1.0 - cost / baseline


def format_reduction(value: Optional[float]) -> str:
    if value is None or pd.isna(value):
        return 'n/a'
    return f"{100.0 * value:.1f}%"


def confidence_half_width(values: Sequence[float], z: float = None) -> Optional[float]:
    """z * sample std / sqrt(n); None with fewer than two trials."""
    values = np.asarray(values, dtype=np.float64)
    if values.size < 2:
        return None
    z = settings.SIMULATION['CI_Z_VALUE'] if z is None else z
    return float(z * values.std(ddof=1) / math.sqrt(values.size))


def _fmt(value, spec: str = '.4f') -> str:
    return 'n/a' if value is None else format(value, spec)


def accuracy_table(final_accuracies: Dict[str, List[float]]) -> pd.DataFrame:
    """One row per algorithm: mean final accuracy, 95% half-width and trial count."""
    rows = []
    for algorithm, values in final_accuracies.items():
        rows.append({
            'algorithm': algorithm,
            'mean_accuracy': float(np.mean(values)),
            'half_width': confidence_half_width(values),
            'trials': len(values),
        })
    return pd.DataFrame(rows, columns=['algorithm', 'mean_accuracy', 'half_width', 'trials'])


def render_accuracy_table(table: pd.DataFrame) -> str:
    lines = [f"{'algorithm':<12}{'accuracy':>12}{'95% CI':>12}{'trials':>8}"]
    for row in table.itertuples(index=False):
        half = None if pd.isna(row.half_width) else row.half_width
        lines.append(f"{row.algorithm:<12}{row.mean_accuracy:>12.4f}{_fmt(half):>12}{row.trials:>8}")
    return '\n'.join(lines)


def _group_runs(runs: Iterable[RunData]) -> Dict[str, List[RunData]]:
    grouped: Dict[str, List[RunData]] = {}
    for run in runs:
        grouped.setdefault(run.algorithm, []).append(run)
    return grouped


def _mean_or_none(values: List[Optional[float]]) -> Optional[float]:
    if not values or any(v is None for v in values):
        return None
    return float(np.mean(values))


def report_table(run_dirs: Sequence, baseline: str = 'dsgd', target: float = None) -> pd.DataFrame:
    """
    Per algorithm: mean final accuracy, mean total scalars, mean scalars to
    reach the target accuracy and both reductions against the baseline. The
    target defaults to the baseline's mean final accuracy.
    """
    grouped = _group_runs(load_run(path) for path in run_dirs)
    if target is None:
        if baseline in grouped:
            target = float(np.mean([final_accuracy(run) for run in grouped[baseline]]))
        else:
            logger.warning(f"Baseline {baseline!r} not among the runs; no target accuracy")

    rows = []
    for algorithm, runs in grouped.items():
        rows.append({
            'algorithm': algorithm,
            'runs': len(runs),
            'final_accuracy': float(np.mean([final_accuracy(run) for run in runs])),
            'total_scalars': float(np.mean([total_cost(run) for run in runs])),
            'target': target,
            'scalars_to_target': _mean_or_none(
                [cost_to_target(run, target) for run in runs] if target is not None else []
            ),
        })
    table = pd.DataFrame(rows, columns=['algorithm', 'runs', 'final_accuracy', 'total_scalars',
                                        'target', 'scalars_to_target'])
    base = table[table['algorithm'] == baseline]
    base_total = float(base['total_scalars'].iloc[0]) if len(base) else None
    base_to_target = base['scalars_to_target'].iloc[0] if len(base) else None
    base_to_target = None if base_to_target is None or pd.isna(base_to_target) else float(base_to_target)

    table['reduction'] = [reduction(cost, base_total) for cost in table['total_scalars']]
    table['reduction_to_target'] = [
        reduction(None if pd.isna(cost) else cost, base_to_target) for cost in table['scalars_to_target']
    ]
    return table


def render_report_table(table: pd.DataFrame, baseline: str = 'dsgd') -> str:
    target = table['target'].iloc[0] if len(table) else None
    header = f"Communication cost against {baseline}"
    if target is not None and not pd.isna(target):
        header += f" (target accuracy {target:.4f})"
    lines = [
        header,
        f"{'algorithm':<12}{'accuracy':>10}{'total':>16}{'reduction':>11}{'to target':>16}{'reduction':>11}",
    ]
    for row in table.itertuples(index=False):
        to_target = None if pd.isna(row.scalars_to_target) else row.scalars_to_target
        lines.append(
            f"{row.algorithm:<12}{row.final_accuracy:>10.4f}{row.total_scalars:>16.0f}"
            f"{format_reduction(row.reduction):>11}{_fmt(to_target, '.0f'):>16}"
            f"{format_reduction(row.reduction_to_target):>11}"
        )
    return '\n'.join(lines)
