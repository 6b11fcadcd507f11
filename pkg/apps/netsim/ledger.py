"""
Communication ledger: exact counts of scalars handed to the bus, per round
and per directed edge. Control messages are counted as messages and never
enter the parameter totals.
"""
import logging
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Tuple

import pandas as pd

logger = logging.getLogger(__name__)

GLOBAL = 'global'
HEAD = 'head'
CONTROL = 'control'
PAYLOAD_KINDS = (GLOBAL, HEAD, CONTROL)


@dataclass
class RoundTotals:
    global_scalars: int = 0
    head_scalars: int = 0
    control_messages: int = 0

    @property
    def parameter_scalars(self) -> int:
        return self.global_scalars + self.head_scalars


class CommLedger:
    def __init__(self):
        self.current_round = 0
        self._rounds: Dict[int, RoundTotals] = defaultdict(RoundTotals)
        self._edges: Dict[Tuple[int, int, int, str], int] = defaultdict(int)

    def begin_round(self, round_index: int) -> None:
        if self._rounds and round_index < max(self._rounds):
            raise ValueError(f"Round {round_index} precedes an already recorded round")
        self.current_round = round_index
        self._rounds.setdefault(round_index, RoundTotals())

    def record(self, sender: int, receiver: int, kind: str, scalars: int) -> None:
        totals = self._rounds[self.current_round]
        if kind == CONTROL:
            totals.control_messages += 1
            self._edges[(self.current_round, sender, receiver, kind)] += 1
            return
        if kind == GLOBAL:
            totals.global_scalars += scalars
        elif kind == HEAD:
            totals.head_scalars += scalars
        else:
            raise ValueError(f"Unknown payload kind {kind!r}")
        self._edges[(self.current_round, sender, receiver, kind)] += scalars

    def round_totals(self, round_index: int) -> RoundTotals:
        return self._rounds.get(round_index, RoundTotals())

    @property
    def rounds(self):
        return sorted(self._rounds)

    def sent_by(self, round_index: int, agent: int) -> Tuple[int, int]:
        """(global, head) scalars sent by `agent` in `round_index`."""
        sent = {GLOBAL: 0, HEAD: 0}
        for (r, sender, _, kind), amount in self._edges.items():
            if r == round_index and sender == agent and kind in sent:
                sent[kind] += amount
        return sent[GLOBAL], sent[HEAD]

    def edge_totals(self, round_index: int) -> Dict[Tuple[int, int, str], int]:
        return {
            (sender, receiver, kind): amount
            for (r, sender, receiver, kind), amount in self._edges.items()
            if r == round_index
        }

    def totals(self) -> RoundTotals:
        cumulative = RoundTotals()
        for totals in self._rounds.values():
            cumulative.global_scalars += totals.global_scalars
            cumulative.head_scalars += totals.head_scalars
            cumulative.control_messages += totals.control_messages
        return cumulative

    def to_frame(self) -> pd.DataFrame:
        """Long table (round, kind, scalars) plus the cumulative parameter count."""
        rows = []
        for r in self.rounds:
            totals = self._rounds[r]
            rows.append({'round': r, 'kind': GLOBAL, 'scalars': totals.global_scalars})
            rows.append({'round': r, 'kind': HEAD, 'scalars': totals.head_scalars})
            rows.append({'round': r, 'kind': CONTROL, 'scalars': totals.control_messages})
        frame = pd.DataFrame(rows, columns=['round', 'kind', 'scalars'])
        params = frame[frame['kind'] != CONTROL].groupby('round')['scalars'].sum().cumsum()
        frame['cumulative'] = frame['round'].map(params).fillna(0).astype('int64')
        return frame

    def edge_frame(self) -> pd.DataFrame:
        rows = [
            {'round': r, 'sender': s, 'receiver': t, 'kind': kind, 'scalars': amount}
            for (r, s, t, kind), amount in sorted(self._edges.items())
        ]
        return pd.DataFrame(rows, columns=['round', 'sender', 'receiver', 'kind', 'scalars'])

    def export_csv(self, path) -> Path:
        path = Path(path)
        self.to_frame().to_csv(path, index=False)
        logger.debug(f"Ledger with {len(self.rounds)} rounds written to {path}")
        return path
