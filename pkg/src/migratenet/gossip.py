"""Bounded rumor-mongering dissemination of process locations and node loads.

Each node keeps a :class:`Bulletin` of aged facts.  Once per round every node
pairs up with one uniformly random peer and the two swap bounded digests
(push-pull).  A fact's age counts rounds since its original publication;
merging keeps the strictly younger copy, so a republished fact displaces
every stale copy as it spreads.

Internally an entry stores the bulletin clock value at which it was born;
its age is recomputed as ``clock - birth``, which makes the per-round ageing
of a whole bulletin O(1).
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterator, Optional

if TYPE_CHECKING:
    from .cluster import ClusterState, GPid, NodeId


# kind tags used for deterministic digest ordering: locations sort before loads
KIND_LOCATION = 0
KIND_LOAD = 1

DEFAULT_BOUND = 64


@dataclass(frozen=True)
class LocationEntry:
    pid: "GPid"
    node: "NodeId"
    age: int
    serial: int = 0


@dataclass(frozen=True)
class LoadEntry:
    node: "NodeId"
    load: float
    age: int
    serial: int = 0


@dataclass(frozen=True)
class GossipDigest:
    locations: tuple[LocationEntry, ...]
    loads: tuple[LoadEntry, ...]

    def __len__(self) -> int:
        return len(self.locations) + len(self.loads)


@dataclass(frozen=True)
class GossipConfig:
    bound: int = DEFAULT_BOUND          # max entries per digest
    drop_probability: float = 0.0       # chance an entire exchange is lost
    rounds_per_second: float = 10.0     # used when rounds are driven by sim time


@dataclass(frozen=True)
class RoundReport:
    index: int
    exchanges: int
    dropped: int
    frames: int
    entries_moved: int


class Bulletin:
    """One node's local database of aged location and load facts.

    Publications carry a monotone `serial` (handed out by the cluster) so two
    publications falling inside the same round window can still be ordered;
    age stays the round-granular freshness measure.
    """

    def __init__(self, owner: "NodeId"):
        self.owner = owner
        self.clock = 0
        # pid -> (node, birth, serial); node -> (load, birth, serial)
        self._locations: dict["GPid", tuple["NodeId", int, int]] = {}
        self._loads: dict["NodeId", tuple[float, int, int]] = {}

    def __len__(self) -> int:
        return len(self._locations) + len(self._loads)

    def advance(self) -> None:
        """Age every entry by one round."""
        self.clock += 1

    def publish_location(self, pid: "GPid", node: "NodeId", serial: int = 0) -> None:
        """Record pid's location as a fresh (age 0) fact, replacing any copy."""
        self._locations[pid] = (node, self.clock, serial)

    def publish_load(self, load: float, serial: int = 0) -> None:
        """Record the owner's own load as a fresh fact."""
        self._loads[self.owner] = (load, self.clock, serial)

    def invalidate_location(self, pid: "GPid") -> None:
        self._locations.pop(pid, None)

    def lookup_location(self, pid: "GPid") -> Optional[tuple["NodeId", int]]:
        """Return (node, age) for pid if known, possibly stale; None if unknown."""
        hit = self._locations.get(pid)
        if hit is None:
            return None
        node, birth, _ = hit
        return node, self.clock - birth

    def load_view(self) -> dict["NodeId", tuple[float, int]]:
        """Snapshot of all known node loads as node -> (load, age)."""
        return {n: (load, self.clock - birth)
                for n, (load, birth, _) in self._loads.items()}

    def location_entries(self) -> Iterator[LocationEntry]:
        for pid, (node, birth, serial) in self._locations.items():
            yield LocationEntry(pid, node, self.clock - birth, serial)

    def load_entries(self) -> Iterator[LoadEntry]:
        for node, (load, birth, serial) in self._loads.items():
            yield LoadEntry(node, load, self.clock - birth, serial)


def make_digest(bulletin: Bulletin, bound: int) -> GossipDigest:
    """Select the `bound` youngest entries across both maps.

    Ties break on (age, kind, key) so the digest is deterministic; locations
    order before loads at equal age.  A bulletin with at most `bound` entries
    is shipped whole.
    """
    if bound < 1:
        raise ValueError("digest bound must be >= 1")
    keyed: list[tuple[tuple[int, int, int, int], LocationEntry | LoadEntry]] = []
    for e in bulletin.location_entries():
        keyed.append(((e.age, KIND_LOCATION, e.pid.home, e.pid.seq), e))
    for e in bulletin.load_entries():
        keyed.append(((e.age, KIND_LOAD, e.node, 0), e))
    keyed.sort(key=lambda pair: pair[0])
    picked = [e for _, e in keyed[:bound]]
    return GossipDigest(
        locations=tuple(e for e in picked if isinstance(e, LocationEntry)),
        loads=tuple(e for e in picked if isinstance(e, LoadEntry)),
    )


def _fresher(age: int, serial: int, resident_age: int, resident_serial: int) -> bool:
    """Strictly-younger age wins; equal ages fall back to the publication
    serial, which orders publications that landed in the same round window.
    Equal on both counts keeps the resident copy."""
    return age < resident_age or (age == resident_age and serial > resident_serial)


def merge(bulletin: Bulletin, digest: GossipDigest) -> int:
    """Fold a digest into a bulletin; returns the number of entries accepted.

    An incoming entry wins only if fresher than the resident copy (see
    `_fresher`; plain copies of the same fact never displace each other).
    Facts the owner publishes about itself are never overwritten by hearsay.
    """
    accepted = 0
    clock = bulletin.clock
    for loc in digest.locations:
        resident = bulletin._locations.get(loc.pid)
        if resident is None or _fresher(loc.age, loc.serial,
                                        clock - resident[1], resident[2]):
            bulletin._locations[loc.pid] = (loc.node, clock - loc.age, loc.serial)
            accepted += 1
    for entry in digest.loads:
        if entry.node == bulletin.owner:
            continue
        resident_load = bulletin._loads.get(entry.node)
        if resident_load is None or _fresher(entry.age, entry.serial,
                                             clock - resident_load[1], resident_load[2]):
            bulletin._loads[entry.node] = (entry.load, clock - entry.age, entry.serial)
            accepted += 1
    return accepted


def lookup_location(bulletin: Bulletin, pid: "GPid") -> Optional[tuple["NodeId", int]]:
    return bulletin.lookup_location(pid)


def load_view(bulletin: Bulletin) -> dict["NodeId", tuple[float, int]]:
    return bulletin.load_view()


def gossip_round(state: "ClusterState", rng: random.Random,
                 config: GossipConfig = GossipConfig()) -> RoundReport:
    """Run one synchronous gossip round over the whole cluster.

    All ages advance first.  Then each node, in index order, picks one
    uniformly random peer other than itself and the pair swaps digests both
    ways; later exchanges within the round see the effect of earlier ones.
    A whole exchange is lost with probability `drop_probability` (its two
    frames still count as emitted).  A one-node cluster only ages.
    """
    n = state.node_count
    for b in state.bulletins:
        b.advance()
    state.gossip_rounds += 1
    exchanges = dropped = frames = moved = 0
    if n >= 2:
        for i in range(n):
            j = rng.randrange(n - 1)
            if j >= i:
                j += 1
            frames += 2
            if config.drop_probability > 0.0 and rng.random() < config.drop_probability:
                dropped += 1
                continue
            exchanges += 1
            digest_i = make_digest(state.bulletins[i], config.bound)
            digest_j = make_digest(state.bulletins[j], config.bound)
            moved += merge(state.bulletins[j], digest_i)
            moved += merge(state.bulletins[i], digest_j)
    return RoundReport(state.gossip_rounds, exchanges, dropped, frames, moved)


def informed_count(state: "ClusterState", pid: "GPid") -> int:
    """Number of bulletins holding any location entry for pid."""
    return sum(1 for b in state.bulletins if b.lookup_location(pid) is not None)


def is_converged(state: "ClusterState") -> bool:
    """True when every bulletin knows the true location of every process and
    the true load of every node."""
    truth_loc = {pid: rec.current for pid, rec in state.procs.items()}
    truth_load = [state.node_load(n) for n in range(state.node_count)]
    for b in state.bulletins:
        for pid, node in truth_loc.items():
            hit = b.lookup_location(pid)
            if hit is None or hit[0] != node:
                return False
        view = b.load_view()
        for n in range(state.node_count):
            if n not in view or view[n][0] != truth_load[n]:
                return False
    return True


def converge(state: "ClusterState", rng: random.Random,
             config: GossipConfig = GossipConfig(), max_rounds: int = 1000) -> int:
    """Run rounds until `is_converged`; returns the number of rounds used."""
    for done in range(max_rounds + 1):
        if is_converged(state):
            return done
        gossip_round(state, rng, config)
    raise RuntimeError(f"gossip failed to converge within {max_rounds} rounds")


def force_convergence(state: "ClusterState") -> None:
    """Write ground truth into every bulletin (age 0).

    Test/setup shortcut for experiments where gossip itself is not under
    study; benchmark templates converge via real rounds instead.
    """
    truth_load = [state.node_load(n) for n in range(state.node_count)]
    serial = state.next_serial()
    for b in state.bulletins:
        for pid, rec in state.procs.items():
            b.publish_location(pid, rec.current, serial)
        for n in range(state.node_count):
            b._loads[n] = (truth_load[n], b.clock, serial)
