"""Discrete-event engine, parametric latency model, and metrics collection.

Everything here is deterministic: the event queue orders strictly by
(time, insertion sequence), and the latency model is pure arithmetic, so a
(scenario, seed) pair always reproduces bit-identical outputs.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from typing import Callable, Optional

from .errors import TimeTravelError

DEFAULTS_RESOURCE = "defaults.json"
DEFAULTS_VERSION = 1


class TransportKind(Enum):
    RELAY = "relay"
    DIRECT = "direct"
    AUTO = "auto"


@dataclass(frozen=True)
class LatencyModel:
    """Homogeneous link cost model.

    Network hops cost ``alpha_net + size / beta_net`` each; a shared-memory
    delivery costs ``alpha_sm + size / beta_sm``.  Direct-transport messages
    pay a fixed per-message ``direct_overhead`` on top.
    """
    alpha_net: float
    beta_net: float
    alpha_sm: float
    beta_sm: float
    direct_overhead: float

    def __post_init__(self):
        for name in ("alpha_net", "alpha_sm", "direct_overhead"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        for name in ("beta_net", "beta_sm"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")

    def net_hop(self, size: int) -> float:
        return self.alpha_net + size / self.beta_net

    def shared_memory(self, size: int) -> float:
        return self.alpha_sm + size / self.beta_sm

    def to_dict(self) -> dict:
        return {
            "alpha_net": self.alpha_net,
            "beta_net": self.beta_net,
            "alpha_sm": self.alpha_sm,
            "beta_sm": self.beta_sm,
            "direct_overhead": self.direct_overhead,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LatencyModel":
        return cls(**{k: float(d[k]) for k in
                      ("alpha_net", "beta_net", "alpha_sm", "beta_sm", "direct_overhead")})


def latency_of(path: list[int], size: int, model: LatencyModel,
               transport: TransportKind) -> float:
    """Latency of one message over a collapsed path.

    A single-node path is a shared-memory delivery; otherwise every hop costs
    the full per-hop latency (store-and-forward).  Direct transport adds its
    fixed per-message overhead.
    """
    if len(path) <= 1:
        total = model.shared_memory(size)
    else:
        total = network_hops_latency(len(path) - 1, size, model)
    if transport is TransportKind.DIRECT:
        total += model.direct_overhead
    return total


def network_hops_latency(hops: int, size: int, model: LatencyModel) -> float:
    return hops * model.net_hop(size)


def load_model(path: Optional[str] = None) -> LatencyModel:
    """Load the latency model from a defaults file (the packaged calibrated
    defaults when no path is given)."""
    if path is None:
        text = resources.files(__package__).joinpath(DEFAULTS_RESOURCE).read_text()
    else:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    data = json.loads(text)
    version = data.get("version")
    if version != DEFAULTS_VERSION:
        raise ValueError(f"unsupported defaults version {version!r}")
    return LatencyModel.from_dict(data["model"])


class EventQueue:
    """Deterministic event queue: dequeues strictly by (time, insertion seq)."""

    def __init__(self):
        self.now = 0.0
        self._heap: list[tuple[float, int, Callable[[], None]]] = []
        self._seq = 0

    def __len__(self) -> int:
        return len(self._heap)

    def schedule(self, t: float, action: Callable[[], None]) -> None:
        if t < self.now:
            raise TimeTravelError(f"schedule at {t} before now={self.now}")
        heapq.heappush(self._heap, (t, self._seq, action))
        self._seq += 1

    def run_until(self, t_end: float) -> int:
        """Execute all events with time <= t_end; the clock ends at t_end."""
        count = 0
        while self._heap and self._heap[0][0] <= t_end:
            t, _, action = heapq.heappop(self._heap)
            self.now = t
            action()
            count += 1
        self.now = max(self.now, t_end)
        return count

    def run(self) -> int:
        """Drain the queue completely."""
        count = 0
        while self._heap:
            t, _, action = heapq.heappop(self._heap)
            self.now = t
            action()
            count += 1
        return count


@dataclass
class Metrics:
    """Byte and frame counters plus per-message latency samples.

    Conservation invariant: the sum of `delivered_bytes` equals the payload
    bytes of every delivered message (`payload_delivered`).
    """
    relayed_bytes: dict[int, int] = field(default_factory=dict)
    delivered_bytes: dict[int, int] = field(default_factory=dict)
    frames_handled: dict[int, int] = field(default_factory=dict)
    link_bytes: dict[tuple[int, int], int] = field(default_factory=dict)
    latencies: list[tuple[str, int, float]] = field(default_factory=list)
    payload_delivered: int = 0

    def relay(self, node: int, size: int) -> None:
        self.relayed_bytes[node] = self.relayed_bytes.get(node, 0) + size

    def deliver(self, node: int, size: int) -> None:
        self.delivered_bytes[node] = self.delivered_bytes.get(node, 0) + size
        self.payload_delivered += size

    def handle(self, node: int) -> None:
        self.frames_handled[node] = self.frames_handled.get(node, 0) + 1

    def link(self, frm: int, to: int, size: int) -> None:
        key = (frm, to)
        self.link_bytes[key] = self.link_bytes.get(key, 0) + size

    def sample(self, transport: str, size: int, latency: float) -> None:
        self.latencies.append((transport, size, latency))

    def snapshot(self) -> "Metrics":
        return Metrics(
            relayed_bytes=dict(self.relayed_bytes),
            delivered_bytes=dict(self.delivered_bytes),
            frames_handled=dict(self.frames_handled),
            link_bytes=dict(self.link_bytes),
            latencies=list(self.latencies),
            payload_delivered=self.payload_delivered,
        )

    def rows(self) -> list[tuple[str, str, str]]:
        """Flatten to (metric, key, value) rows in a fixed order for CSV."""
        out: list[tuple[str, str, str]] = []
        for name in ("relayed_bytes", "delivered_bytes", "frames_handled"):
            counters: dict[int, int] = getattr(self, name)
            for node in sorted(counters):
                out.append((name, str(node), repr(counters[node])))
        for (frm, to) in sorted(self.link_bytes):
            out.append(("link_bytes", f"{frm}->{to}", repr(self.link_bytes[(frm, to)])))
        for i, (transport, size, latency) in enumerate(self.latencies):
            out.append(("latency", f"{transport}/{size}/{i}", repr(latency)))
        out.append(("payload_delivered", "total", repr(self.payload_delivered)))
        return out
