"""Cluster ground truth: nodes, topology, process residency, home registries.

The home node of a process is fixed at spawn time and is part of its global
id.  Every home keeps an authoritative registry of where its processes
currently run; `migrate` updates that registry in the same step, so a home
lookup is never stale.  Gossip bulletins (see :mod:`migratenet.gossip`) carry
the *rumored* locations and are allowed to lag.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Optional

from .errors import BadNodeError, InvalidScenarioError, NoSuchProcessError
from .gossip import Bulletin

NodeId = int


@dataclass(frozen=True, order=True)
class GPid:
    """Cluster-wide process id; `home` never changes, however often the
    process migrates."""
    home: NodeId
    seq: int

    def __str__(self) -> str:
        return f"{self.home}:{self.seq}"


@dataclass
class ProcessRecord:
    pid: GPid
    current: NodeId
    job: str
    work: float = 1.0


@dataclass(frozen=True)
class MigrationEvent:
    pid: GPid
    src: NodeId
    dst: NodeId


MESH = "mesh"
RING_WITH_CENTER = "ring_with_center"
EXPLICIT = "explicit"


@dataclass(frozen=True)
class Topology:
    """Cluster shape.

    Any node can exchange frames with any other regardless of shape; the
    topology only labels structure for load accounting (in particular the
    center of a ring-with-center, which plays the home node in the ring
    benchmark).  Explicit edge lists are validated for connectivity.
    """
    kind: str
    nodes: int
    edges: Optional[frozenset[tuple[NodeId, NodeId]]] = None

    @classmethod
    def mesh(cls, nodes: int) -> "Topology":
        if nodes < 1:
            raise InvalidScenarioError("topology.nodes: must be >= 1")
        return cls(MESH, nodes)

    @classmethod
    def ring_with_center(cls, nodes: int) -> "Topology":
        if nodes < 2:
            raise InvalidScenarioError("topology.nodes: ring_with_center needs >= 2 nodes")
        return cls(RING_WITH_CENTER, nodes)

    @classmethod
    def explicit(cls, nodes: int, edges) -> "Topology":
        if nodes < 1:
            raise InvalidScenarioError("topology.nodes: must be >= 1")
        norm = set()
        for e in edges:
            a, b = e
            if not (0 <= a < nodes and 0 <= b < nodes):
                raise InvalidScenarioError(f"topology.edges: node out of range in {e!r}")
            if a == b:
                raise InvalidScenarioError(f"topology.edges: self-loop {e!r}")
            norm.add((min(a, b), max(a, b)))
        topo = cls(EXPLICIT, nodes, frozenset(norm))
        if not topo._connected():
            raise InvalidScenarioError("topology.edges: graph is not connected")
        return topo

    @property
    def center(self) -> Optional[NodeId]:
        """Node 0 for ring-with-center topologies, None otherwise."""
        return 0 if self.kind == RING_WITH_CENTER else None

    def _connected(self) -> bool:
        if self.nodes == 1:
            return True
        adj: dict[NodeId, list[NodeId]] = {n: [] for n in range(self.nodes)}
        for a, b in self.edges or ():
            adj[a].append(b)
            adj[b].append(a)
        seen = {0}
        queue = deque([0])
        while queue:
            for peer in adj[queue.popleft()]:
                if peer not in seen:
                    seen.add(peer)
                    queue.append(peer)
        return len(seen) == self.nodes


def collapse_path(raw: list[NodeId]) -> list[NodeId]:
    """Drop consecutive duplicate nodes from a path."""
    out: list[NodeId] = []
    for node in raw:
        if not out or out[-1] != node:
            out.append(node)
    return out


def network_hops(path: list[NodeId]) -> int:
    return len(path) - 1


class ClusterState:
    """Mutable ground truth for one simulated cluster.

    Single-writer: all mutation happens on the simulation thread that owns
    the instance.
    """

    def __init__(self, topology: Topology):
        self.topology = topology
        n = topology.nodes
        self.resident: list[set[GPid]] = [set() for _ in range(n)]
        self.registry: list[dict[GPid, NodeId]] = [{} for _ in range(n)]
        self.procs: dict[GPid, ProcessRecord] = {}
        self.bulletins: list[Bulletin] = [Bulletin(owner=i) for i in range(n)]
        self.gossip_rounds = 0
        self._next_seq = [0] * n
        self._publish_serial = 0
        for i in range(n):
            self.bulletins[i].publish_load(0.0, self.next_serial())

    @property
    def node_count(self) -> int:
        return self.topology.nodes

    def next_serial(self) -> int:
        """Monotone publication stamp ordering same-round-window publishes."""
        self._publish_serial += 1
        return self._publish_serial

    def _check_node(self, n: NodeId) -> None:
        if not (isinstance(n, int) and 0 <= n < self.node_count):
            raise BadNodeError(f"node {n!r} not in 0..{self.node_count - 1}")

    def _record(self, pid: GPid) -> ProcessRecord:
        rec = self.procs.get(pid)
        if rec is None:
            raise NoSuchProcessError(f"process {pid}")
        return rec

    def spawn(self, home: NodeId, job: str = "job", work: float = 1.0) -> GPid:
        """Create a process at `home`; publishes its location and the home's
        new load in the home bulletin."""
        self._check_node(home)
        if work < 0:
            raise ValueError("work must be non-negative")
        pid = GPid(home, self._next_seq[home])
        self._next_seq[home] += 1
        self.procs[pid] = ProcessRecord(pid, home, job, work)
        self.resident[home].add(pid)
        self.registry[home][pid] = home
        self.bulletins[home].publish_location(pid, home, self.next_serial())
        self.bulletins[home].publish_load(self.node_load(home), self.next_serial())
        return pid

    def migrate(self, pid: GPid, to: NodeId) -> Optional[MigrationEvent]:
        """Move a running process; the home registry is updated in the same
        step so the home stays authoritative.  Moving to the current node is
        a no-op and returns None."""
        rec = self._record(pid)
        self._check_node(to)
        src = rec.current
        if src == to:
            return None
        self.resident[src].discard(pid)
        self.resident[to].add(pid)
        rec.current = to
        self.registry[pid.home][pid] = to
        # the hosting node learns arrivals first-hand; both ends republish load
        self.bulletins[to].publish_location(pid, to, self.next_serial())
        self.bulletins[to].publish_load(self.node_load(to), self.next_serial())
        self.bulletins[src].publish_load(self.node_load(src), self.next_serial())
        return MigrationEvent(pid, src, to)

    def locate_authoritative(self, pid: GPid) -> NodeId:
        """Home-registry lookup; never stale by the migrate postcondition."""
        self._record(pid)
        return self.registry[pid.home][pid]

    def residency(self, pid: GPid) -> NodeId:
        return self._record(pid).current

    def relay_path(self, src: GPid, dst: GPid) -> list[NodeId]:
        """Baseline route: sender node, sender home, receiver home, receiver
        node, with consecutive duplicates collapsed.  A single-node result
        means shared-memory delivery (zero network hops)."""
        r1 = self.residency(src)
        r2 = self.residency(dst)
        return collapse_path([r1, src.home, dst.home, r2])

    def node_load(self, n: NodeId) -> float:
        self._check_node(n)
        return sum(self.procs[pid].work for pid in self.resident[n])

    def resident_count(self, n: NodeId) -> int:
        self._check_node(n)
        return len(self.resident[n])
