"""Shared builders for the test suite."""

from __future__ import annotations

import random

from migratenet.bench import Simulation
from migratenet.cluster import Topology
from migratenet.gossip import GossipConfig
from migratenet.simcore import LatencyModel
from migratenet.transport import TransportConfig

# hand-computable numbers: one hop = 1 + size/100, shared memory = 0.1 + size/1000
TEST_MODEL = LatencyModel(alpha_net=1.0, beta_net=100.0,
                          alpha_sm=0.1, beta_sm=1000.0,
                          direct_overhead=0.5)


def build_sim(nodes: int = 6, seed: int = 0, model: LatencyModel = TEST_MODEL,
              caps: TransportConfig = TransportConfig(),
              gossip_config: GossipConfig = GossipConfig(),
              trace: list | None = None) -> Simulation:
    return Simulation.build(Topology.mesh(nodes), model, caps, seed,
                            gossip_config, trace)


def place_pair(sim: Simulation, home_a: int, home_b: int,
               at_a: int | None = None, at_b: int | None = None):
    """Spawn two processes and optionally migrate them; returns their pids."""
    a = sim.cluster.spawn(home_a, "A")
    b = sim.cluster.spawn(home_b, "B")
    if at_a is not None:
        sim.cluster.migrate(a, at_a)
    if at_b is not None:
        sim.cluster.migrate(b, at_b)
    return a, b


def fresh_rng(seed: int = 0) -> random.Random:
    return random.Random(seed)
