"""TCP-like socket facade whose connections survive endpoint migration.

Handles are owned by processes, not nodes: ports live in a per-process
namespace and every frame is addressed to a process id, so migrating either
endpoint never disturbs an established connection.  All calls are
non-blocking; readiness is polled with :meth:`SocketStack.select`.

Payloads are byte *sizes* with per-connection sequence numbers, not real
buffers.  Delivered chunks become readable once the simulation clock passes
their arrival time; arrival times are monotone per connection, so the stream
stays FIFO even when a later send is routed faster than an earlier one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional

from .cluster import ClusterState, GPid
from .errors import (AddressInUseError, BadStateError, ConnRefusedError,
                     NoSuchProcessError, WouldBlockError)
from .simcore import EventQueue, TransportKind
from .transport import Router

EPHEMERAL_BASE = 49152


class SocketState(Enum):
    CLOSED = "CLOSED"
    BOUND = "BOUND"
    LISTENING = "LISTENING"
    CONNECTING = "CONNECTING"
    ESTABLISHED = "ESTABLISHED"


@dataclass
class Chunk:
    seq: int
    size: int
    ready_at: float


@dataclass
class SocketHandle:
    id: int
    owner: GPid
    transport: TransportKind
    state: SocketState = SocketState.CLOSED
    local_port: Optional[int] = None
    peer: Optional[tuple[GPid, int]] = None
    peer_handle: Optional[int] = None
    recv_queue: list[Chunk] = field(default_factory=list)
    pending: list[int] = field(default_factory=list)   # handle ids awaiting accept
    peer_closed: bool = False
    last_error: Optional[str] = None
    send_seq: int = 0
    _ready_watermark: float = 0.0


class SocketStack:
    """All socket state for one simulated cluster."""

    def __init__(self, cluster: ClusterState, router: Router, queue: EventQueue):
        self.cluster = cluster
        self.router = router
        self.queue = queue
        self.handles: dict[int, SocketHandle] = {}
        self._next_id = 0
        self._bound: dict[GPid, dict[int, int]] = {}       # owner -> port -> handle id
        self._ephemeral: dict[GPid, int] = {}

    @property
    def now(self) -> float:
        return self.queue.now

    # -- lifecycle ----------------------------------------------------------

    def socket(self, owner: GPid, transport: TransportKind = TransportKind.AUTO) -> SocketHandle:
        if owner not in self.cluster.procs:
            raise NoSuchProcessError(f"process {owner}")
        handle = SocketHandle(self._next_id, owner, transport)
        self._next_id += 1
        self.handles[handle.id] = handle
        return handle

    def bind(self, h: SocketHandle, port: int) -> None:
        if h.state is not SocketState.CLOSED:
            raise BadStateError(f"bind in state {h.state.value}")
        ports = self._bound.setdefault(h.owner, {})
        if port in ports:
            raise AddressInUseError(f"port {port} already bound by {h.owner}")
        ports[port] = h.id
        h.local_port = port
        h.state = SocketState.BOUND

    def listen(self, h: SocketHandle) -> None:
        if h.state is not SocketState.BOUND:
            raise BadStateError(f"listen in state {h.state.value}")
        h.state = SocketState.LISTENING

    def close(self, h: SocketHandle) -> None:
        """Idempotent; the peer's next recv after draining reports end of
        stream.  Closing a listener discards (and closes) pending children."""
        if h.state is SocketState.CLOSED:
            return
        if h.local_port is not None:
            self._bound.get(h.owner, {}).pop(h.local_port, None)
        for child_id in h.pending:
            child = self.handles[child_id]
            h_pending_peer = child.peer_handle
            child.state = SocketState.CLOSED
            if h_pending_peer is not None:
                self.handles[h_pending_peer].peer_closed = True
        h.pending.clear()
        h.state = SocketState.CLOSED
        if h.peer_handle is not None:
            self.handles[h.peer_handle].peer_closed = True

    # -- connection setup -----------------------------------------------------

    def connect(self, h: SocketHandle, dst: GPid, port: int) -> None:
        """Start a handshake; completes asynchronously after one round trip
        over the handle's transport.  Refusal (no listener at the far end when
        the request arrives) closes the handle with E_CONN_REFUSED."""
        if h.state is not SocketState.CLOSED:
            raise BadStateError(f"connect in state {h.state.value}")
        if dst not in self.cluster.procs:
            raise NoSuchProcessError(f"process {dst}")
        if h.local_port is None:
            h.local_port = self._alloc_ephemeral(h.owner)
        h.state = SocketState.CONNECTING
        h.peer = (dst, port)
        report = self.router.send(h.transport, h.owner, dst,
                                  self.router.config.control_size)
        self.queue.schedule(self.now + report.latency,
                            lambda: self._syn_arrives(h.id, dst, port))

    def _syn_arrives(self, handle_id: int, dst: GPid, port: int) -> None:
        h = self.handles[handle_id]
        if h.state is not SocketState.CONNECTING:
            return
        listener = self._find_listener(dst, port)
        if listener is None:
            h.state = SocketState.CLOSED
            h.last_error = ConnRefusedError.code
            return
        child = self.socket(dst, h.transport)
        child.state = SocketState.ESTABLISHED
        child.local_port = port
        child.peer = (h.owner, h.local_port)
        child.peer_handle = h.id
        listener.pending.append(child.id)
        report = self.router.send(h.transport, dst, h.owner,
                                  self.router.config.control_size)
        self.queue.schedule(self.now + report.latency,
                            lambda: self._synack_arrives(h.id, child.id))

    def _synack_arrives(self, handle_id: int, child_id: int) -> None:
        h = self.handles[handle_id]
        if h.state is not SocketState.CONNECTING:
            return
        h.state = SocketState.ESTABLISHED
        h.peer_handle = child_id

    def accept(self, h: SocketHandle) -> SocketHandle:
        if h.state is not SocketState.LISTENING:
            raise BadStateError(f"accept in state {h.state.value}")
        if not h.pending:
            raise WouldBlockError("no pending connections")
        return self.handles[h.pending.pop(0)]

    # -- data transfer ----------------------------------------------------------

    def send(self, h: SocketHandle, size: int):
        """Send `size` bytes to the peer; returns the transport's delivery
        report.  FIFO order per connection is preserved even when a later
        message is routed faster."""
        if h.state is not SocketState.ESTABLISHED:
            raise BadStateError(f"send in state {h.state.value}")
        peer = self.handles[h.peer_handle]
        if peer.state is SocketState.CLOSED:
            raise BadStateError("peer endpoint is closed")
        report = self.router.send(h.transport, h.owner, peer.owner, size)
        ready = max(self.now + report.latency, peer._ready_watermark)
        peer._ready_watermark = ready
        peer.recv_queue.append(Chunk(h.send_seq, size, ready))
        h.send_seq += 1
        return report

    def recv(self, h: SocketHandle, max_bytes: int) -> Optional[int]:
        """Dequeue up to `max_bytes` of arrived data; 0 when nothing is ready
        yet, None once the peer has closed and the stream is drained."""
        if h.state is not SocketState.ESTABLISHED:
            raise BadStateError(f"recv in state {h.state.value}")
        got = 0
        while h.recv_queue and got < max_bytes:
            chunk = h.recv_queue[0]
            if chunk.ready_at > self.now:
                break
            take = min(chunk.size, max_bytes - got)
            got += take
            chunk.size -= take
            if chunk.size == 0:
                h.recv_queue.pop(0)
        if got == 0 and h.peer_closed and not self._has_ready(h):
            return None
        return got

    def select(self, handles: Iterable[SocketHandle],
               now: Optional[float] = None) -> list[SocketHandle]:
        """Handles that are readable at `now` (default: current sim time):
        established with arrived data (or a drained stream whose peer closed),
        or listening with pending accepts."""
        at = self.now if now is None else now
        ready = []
        for h in handles:
            if h.state is SocketState.LISTENING and h.pending:
                ready.append(h)
            elif h.state is SocketState.ESTABLISHED:
                if any(c.ready_at <= at for c in h.recv_queue) or \
                        (h.peer_closed and not h.recv_queue):
                    ready.append(h)
        return ready

    # -- internals -----------------------------------------------------------

    def _has_ready(self, h: SocketHandle) -> bool:
        return any(c.ready_at <= self.now for c in h.recv_queue)

    def _find_listener(self, owner: GPid, port: int) -> Optional[SocketHandle]:
        handle_id = self._bound.get(owner, {}).get(port)
        if handle_id is None or handle_id < 0:   # absent or ephemeral reservation
            return None
        h = self.handles[handle_id]
        return h if h.state is SocketState.LISTENING else None

    def _alloc_ephemeral(self, owner: GPid) -> int:
        ports = self._bound.setdefault(owner, {})
        port = self._ephemeral.get(owner, EPHEMERAL_BASE)
        while port in ports:
            port += 1
        self._ephemeral[owner] = port + 1
        ports[port] = -1   # reserve; ephemeral ports are not accept targets
        return port
