"""
In-process synchronous message bus. Sends are queued; a barrier delivers
every queued message at once, ordered by sender id.
"""
import logging
import threading
from collections import defaultdict
from dataclasses import dataclass
from typing import Any, Dict, List, Optional

import numpy as np

from apps.topology.graphs import Graph

from .exceptions import DeliveryError
from .ledger import CONTROL, PAYLOAD_KINDS, CommLedger

logger = logging.getLogger(__name__)

SERVER = -1


@dataclass(frozen=True)
class Message:
    sender: int
    receiver: int
    kind: str
    scalars: int
    payload: Any
    sequence: int


class MessageBus:
    def __init__(self, graph: Optional[Graph], ledger: CommLedger = None, allow_server: bool = False,
                 n_agents: int = None):
        if graph is None and n_agents is None:
            raise ValueError("A bus without a graph needs an explicit agent count")
        self.graph = graph
        self.n_agents = graph.n if graph is not None else n_agents
        self.ledger = ledger if ledger is not None else CommLedger()
        self.allow_server = allow_server
        self._lock = threading.Lock()
        self._pending: Dict[int, List[Message]] = defaultdict(list)
        self._sequence = 0
        self.sent_count = 0
        self.delivered_count = 0

    def _check_link(self, sender: int, receiver: int) -> None:
        agents = range(self.n_agents)
        if self.allow_server and SERVER in (sender, receiver) and sender != receiver:
            other = receiver if sender == SERVER else sender
            if other in agents:
                return
        if (self.graph is not None and sender in agents and receiver in agents
                and self.graph.has_edge(sender, receiver)):
            return
        raise DeliveryError(f"No link from {sender} to {receiver}")

    def begin_round(self, round_index: int) -> None:
        if any(self._pending.values()):
            raise DeliveryError("Cannot start a round with undelivered messages")
        self.ledger.begin_round(round_index)

    def send(self, sender: int, receiver: int, kind: str, payload=None) -> None:
        if kind not in PAYLOAD_KINDS:
            raise ValueError(f"Unknown payload kind {kind!r}")
        self._check_link(sender, receiver)
        if kind == CONTROL:
            scalars = 0
        else:
            payload = np.array(payload, dtype=np.float64, copy=True)
            scalars = int(payload.size)
        with self._lock:
            message = Message(sender, receiver, kind, scalars, payload, self._sequence)
            self._sequence += 1
            self._pending[receiver].append(message)
            self.ledger.record(sender, receiver, kind, scalars)
            self.sent_count += 1

    def barrier(self) -> Dict[int, List[Message]]:
        """Deliver and clear every queue. Mailboxes are sorted by sender id."""
        with self._lock:
            pending, self._pending = self._pending, defaultdict(list)
        mailboxes = {
            receiver: sorted(messages, key=lambda m: (m.sender, m.sequence))
            for receiver, messages in pending.items() if messages
        }
        self.delivered_count += sum(len(m) for m in mailboxes.values())
        return mailboxes
