"""Benchmark scenarios and structured reports.

A :class:`Scenario` is a declarative experiment (JSON-friendly) that
`run_scenario` executes deterministically; the built-in templates
(`latency_sweep`, `limit_test`, `ring_load`, `imbalance_test`,
`gossip_stats`) reproduce the standard experiments and re-derive every
assertion from raw simulation output.

Scenario file schema (version 1)::

    {
      "version": 1,
      "name": "demo",
      "seed": 7,
      "topology": {"kind": "mesh" | "ring_with_center" | "explicit",
                    "nodes": 4, "edges": [[0, 1], ...]},      # edges: explicit only
      "processes": [{"id": "p0", "home": 0, "job": "A", "work": 1.0}, ...],
      "migrations": [{"time": 0.0, "pid": "p0", "to": 2}, ...],  # times non-decreasing
      "traffic": [{"time": 1.0, "src": "p0", "dst": "p1",
                    "transport": "relay" | "direct" | "auto",
                    "size": 1024, "count": 1, "interval": 0.0}, ...],
      "gossip": {"bound": 64, "drop_probability": 0.0, "rounds_per_second": 10.0},
      "pre_converge": true,
      "model": {"alpha_net": ...},                # optional overrides
      "caps": {"relay_max": ..., "direct_max": ...}  # optional
    }
"""

from __future__ import annotations

import csv
import json
import random
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

from . import balancer, gossip
from .cluster import ClusterState, GPid, Topology
from .errors import InvalidScenarioError, MessageTooLargeError
from .gossip import GossipConfig
from .simcore import EventQueue, LatencyModel, Metrics, TransportKind, load_model
from .transport import Router, TransportConfig

SCENARIO_VERSION = 1
DEFAULT_SWEEP_SIZES = [2 ** k for k in range(10, 27)]   # 1 KiB .. 64 MiB
CONVERGE_CAP = 1000


@dataclass
class Simulation:
    """One self-contained simulation instance; instances never share state."""
    cluster: ClusterState
    queue: EventQueue
    metrics: Metrics
    router: Router
    rng: random.Random
    gossip_config: GossipConfig

    @classmethod
    def build(cls, topology: Topology, model: Optional[LatencyModel] = None,
              caps: TransportConfig = TransportConfig(), seed: int = 0,
              gossip_config: GossipConfig = GossipConfig(),
              trace: Optional[list] = None) -> "Simulation":
        if model is None:
            model = load_model()
        cluster = ClusterState(topology)
        queue = EventQueue()
        metrics = Metrics()
        router = Router(cluster, model, metrics, queue, caps, trace)
        return cls(cluster, queue, metrics, router, random.Random(seed), gossip_config)

    def converge(self) -> int:
        return gossip.converge(self.cluster, self.rng, self.gossip_config, CONVERGE_CAP)


@dataclass(frozen=True)
class Assertion:
    name: str
    passed: bool
    detail: str


@dataclass
class Report:
    name: str
    seed: int
    latency_rows: list[tuple[int, float, str]] = field(default_factory=list)
    metrics: Metrics = field(default_factory=Metrics)
    convergence_rounds: Optional[int] = None
    assertions: list[Assertion] = field(default_factory=list)
    extra: dict[str, str] = field(default_factory=dict)
    gossip_rows: list[tuple[int, int, int, int]] = field(default_factory=list)
    trace: Optional[list] = None

    @property
    def passed(self) -> bool:
        return all(a.passed for a in self.assertions)

    def check(self, name: str, passed: bool, detail: str = "") -> None:
        self.assertions.append(Assertion(name, bool(passed), detail))

    def write(self, outdir) -> list[Path]:
        """Emit CSV tables, plot data, and a text summary; file contents are
        a pure function of the report, so equal seeds give equal bytes."""
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        written = []

        path = outdir / f"{self.name}_latency.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["size", "latency", "series"])
            for size, latency, series in self.latency_rows:
                w.writerow([size, repr(latency), series])
        written.append(path)

        path = outdir / f"{self.name}_metrics.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["scenario", "seed", "metric", "key", "value"])
            for metric, key, value in self.metrics.rows():
                w.writerow([self.name, self.seed, metric, key, value])
        written.append(path)

        if self.gossip_rows:
            path = outdir / f"{self.name}_gossip.csv"
            with open(path, "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh)
                w.writerow(["round", "informed_count", "frames", "entries_moved"])
                for row in self.gossip_rows:
                    w.writerow(row)
            written.append(path)

        if self.trace is not None:
            path = outdir / f"{self.name}_trace.csv"
            with open(path, "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh)
                w.writerow(["time", "kind", "src", "dst", "from_node", "to_node", "size"])
                for t, kind, src, dst, frm, to, size in self.trace:
                    w.writerow([repr(t), kind, src, dst, frm, to, size])
            written.append(path)

        path = outdir / f"{self.name}_summary.txt"
        lines = [f"scenario: {self.name}", f"seed: {self.seed}"]
        if self.convergence_rounds is not None:
            lines.append(f"gossip rounds to converge: {self.convergence_rounds}")
        for key in sorted(self.extra):
            lines.append(f"{key}: {self.extra[key]}")
        for a in self.assertions:
            status = "PASS" if a.passed else "FAIL"
            lines.append(f"[{status}] {a.name}" + (f" — {a.detail}" if a.detail else ""))
        lines.append(f"result: {'PASS' if self.passed else 'FAIL'}")
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        written.append(path)
        return written


# ---------------------------------------------------------------------------
# declarative scenarios

_TRANSPORTS = {k.value: k for k in TransportKind}


@dataclass(frozen=True)
class ProcessSpec:
    id: str
    home: int
    job: str = "job"
    work: float = 1.0


@dataclass(frozen=True)
class MigrationSpec:
    time: float
    pid: str
    to: int


@dataclass(frozen=True)
class TrafficSpec:
    time: float
    src: str
    dst: str
    transport: TransportKind
    size: int
    count: int = 1
    interval: float = 0.0


@dataclass
class Scenario:
    name: str
    topology: Topology
    processes: list[ProcessSpec]
    migrations: list[MigrationSpec] = field(default_factory=list)
    traffic: list[TrafficSpec] = field(default_factory=list)
    gossip_config: GossipConfig = GossipConfig()
    pre_converge: bool = True
    seed: int = 0
    model: Optional[LatencyModel] = None
    caps: TransportConfig = TransportConfig()

    @classmethod
    def load(cls, path) -> "Scenario":
        with open(path, "r", encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise InvalidScenarioError(f"{path}: not valid JSON ({exc})") from exc
        return cls.from_dict(data)

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        def need(mapping, key, kind, where):
            if key not in mapping:
                raise InvalidScenarioError(f"{where}.{key}: missing")
            value = mapping[key]
            if kind is float and isinstance(value, int):
                value = float(value)
            if not isinstance(value, kind) or isinstance(value, bool):
                raise InvalidScenarioError(
                    f"{where}.{key}: expected {kind.__name__}, got {type(value).__name__}")
            return value

        if not isinstance(data, dict):
            raise InvalidScenarioError("scenario: expected a JSON object")
        version = data.get("version")
        if version != SCENARIO_VERSION:
            raise InvalidScenarioError(f"version: expected {SCENARIO_VERSION}, got {version!r}")
        name = need(data, "name", str, "scenario")
        seed = int(data.get("seed", 0))

        topo = need(data, "topology", dict, "scenario")
        kind = need(topo, "kind", str, "topology")
        nodes = need(topo, "nodes", int, "topology")
        if kind == "mesh":
            topology = Topology.mesh(nodes)
        elif kind == "ring_with_center":
            topology = Topology.ring_with_center(nodes)
        elif kind == "explicit":
            topology = Topology.explicit(nodes, need(topo, "edges", list, "topology"))
        else:
            raise InvalidScenarioError(f"topology.kind: unknown kind {kind!r}")

        processes = []
        ids = set()
        for i, p in enumerate(need(data, "processes", list, "scenario")):
            where = f"processes[{i}]"
            pid = need(p, "id", str, where)
            if pid in ids:
                raise InvalidScenarioError(f"{where}.id: duplicate id {pid!r}")
            ids.add(pid)
            home = need(p, "home", int, where)
            if not 0 <= home < nodes:
                raise InvalidScenarioError(f"{where}.home: node {home} out of range")
            work = float(p.get("work", 1.0))
            if work < 0:
                raise InvalidScenarioError(f"{where}.work: must be non-negative")
            processes.append(ProcessSpec(pid, home, str(p.get("job", "job")), work))

        migrations = []
        last_time = None
        for i, m in enumerate(data.get("migrations", [])):
            where = f"migrations[{i}]"
            t = need(m, "time", float, where)
            pid = need(m, "pid", str, where)
            to = need(m, "to", int, where)
            if pid not in ids:
                raise InvalidScenarioError(f"{where}.pid: unknown process {pid!r}")
            if not 0 <= to < nodes:
                raise InvalidScenarioError(f"{where}.to: node {to} out of range")
            if last_time is not None and t < last_time:
                raise InvalidScenarioError(f"{where}.time: times must be non-decreasing")
            last_time = t
            migrations.append(MigrationSpec(t, pid, to))

        traffic = []
        for i, s in enumerate(data.get("traffic", [])):
            where = f"traffic[{i}]"
            t = need(s, "time", float, where)
            src = need(s, "src", str, where)
            dst = need(s, "dst", str, where)
            for label, value in (("src", src), ("dst", dst)):
                if value not in ids:
                    raise InvalidScenarioError(f"{where}.{label}: unknown process {value!r}")
            transport = need(s, "transport", str, where)
            if transport not in _TRANSPORTS:
                raise InvalidScenarioError(f"{where}.transport: unknown transport {transport!r}")
            size = need(s, "size", int, where)
            if size < 0:
                raise InvalidScenarioError(f"{where}.size: must be non-negative")
            count = int(s.get("count", 1))
            if count < 1:
                raise InvalidScenarioError(f"{where}.count: must be >= 1")
            traffic.append(TrafficSpec(t, src, dst, _TRANSPORTS[transport], size,
                                       count, float(s.get("interval", 0.0))))

        g = data.get("gossip", {})
        gossip_config = GossipConfig(
            bound=int(g.get("bound", GossipConfig.bound)),
            drop_probability=float(g.get("drop_probability", GossipConfig.drop_probability)),
            rounds_per_second=float(g.get("rounds_per_second", GossipConfig.rounds_per_second)),
        )

        model = None
        if "model" in data:
            base = load_model().to_dict()
            base.update(data["model"])
            model = LatencyModel.from_dict(base)

        caps = TransportConfig()
        if "caps" in data:
            caps = replace(caps, **{k: int(v) for k, v in data["caps"].items()})

        return cls(name, topology, processes, migrations, traffic, gossip_config,
                   bool(data.get("pre_converge", True)), seed, model, caps)


def run_scenario(scenario: Scenario, seed: Optional[int] = None,
                 trace_enabled: bool = False) -> Report:
    """Execute a declarative scenario; same (scenario, seed) in, same report
    out, bit for bit."""
    used_seed = scenario.seed if seed is None else seed
    trace: Optional[list] = [] if trace_enabled else None
    sim = Simulation.build(scenario.topology, scenario.model, scenario.caps,
                           used_seed, scenario.gossip_config, trace)
    pids: dict[str, GPid] = {}
    for spec in scenario.processes:
        pids[spec.id] = sim.cluster.spawn(spec.home, spec.job, spec.work)

    report = Report(scenario.name, used_seed, trace=trace)
    if scenario.pre_converge:
        report.convergence_rounds = sim.converge()

    horizon = 0.0
    for m in scenario.migrations:
        horizon = max(horizon, m.time)
        sim.queue.schedule(m.time, lambda m=m: sim.cluster.migrate(pids[m.pid], m.to))
    for t in scenario.traffic:
        for k in range(t.count):
            at = t.time + k * t.interval
            horizon = max(horizon, at)

            def fire(t=t, at=at):
                rep = sim.router.send(t.transport, pids[t.src], pids[t.dst], t.size)
                report.latency_rows.append((t.size, rep.latency, t.transport.value))

            sim.queue.schedule(at, fire)

    period = 1.0 / scenario.gossip_config.rounds_per_second
    next_round = period
    while next_round <= horizon:
        sim.queue.schedule(next_round,
                           lambda: gossip.gossip_round(sim.cluster, sim.rng,
                                                       scenario.gossip_config))
        next_round += period

    sim.queue.run()
    report.metrics = sim.metrics.snapshot()
    report.extra["sends"] = str(len(report.latency_rows))
    return report


# ---------------------------------------------------------------------------
# built-in experiment templates

def _pair_sim(migrated: bool, model: Optional[LatencyModel], seed: int,
              caps: TransportConfig = TransportConfig(),
              trace: Optional[list] = None) -> tuple[Simulation, GPid, GPid]:
    """Two processes homed on nodes 0 and 1 of a 4-node mesh; `migrated`
    moves them to nodes 2 and 3.  Gossip is run to convergence."""
    sim = Simulation.build(Topology.mesh(4), model, caps, seed, trace=trace)
    a = sim.cluster.spawn(0, "pair")
    b = sim.cluster.spawn(1, "pair")
    if migrated:
        sim.cluster.migrate(a, 2)
        sim.cluster.migrate(b, 3)
    sim.converge()
    return sim, a, b


def latency_sweep(sizes: Optional[list[int]] = None,
                  model: Optional[LatencyModel] = None, seed: int = 0,
                  trace_enabled: bool = False) -> Report:
    """Latency as a function of message size for relay and direct transports,
    with endpoints at home ("local") and migrated off-home ("migrated")."""
    if sizes is None:
        sizes = DEFAULT_SWEEP_SIZES
    if not sizes:
        raise InvalidScenarioError("latency_sweep: sizes must be non-empty")
    sizes = sorted(sizes)
    trace: Optional[list] = [] if trace_enabled else None
    report = Report("latency_sweep", seed, trace=trace)
    curves: dict[str, list[float]] = {}
    for placement in ("local", "migrated"):
        sim, a, b = _pair_sim(placement == "migrated", model, seed, trace=trace)
        for transport in (TransportKind.RELAY, TransportKind.DIRECT):
            series = f"{placement}-{transport.value}"
            values = []
            for size in sizes:
                rep = sim.router.send(transport, a, b, size)
                values.append(rep.latency)
                report.latency_rows.append((size, rep.latency, series))
            curves[series] = values
        report.metrics = sim.metrics.snapshot()

    local_relay = curves["local-relay"]
    migrated_relay = curves["migrated-relay"]
    direct = curves["migrated-direct"]

    crossover = None
    for size, d, r in zip(sizes, direct, migrated_relay):
        if d < r:
            crossover = size
            break
    report.extra["crossover_size"] = str(crossover) if crossover is not None else "none"

    slowdown = sum(d / l - 1.0 for d, l in zip(direct, local_relay)) / len(sizes)
    improvement = sum(1.0 - d / r for d, r in zip(direct, migrated_relay)) / len(sizes)
    report.extra["mean_slowdown_vs_local_relay"] = repr(slowdown)
    report.extra["mean_improvement_vs_migrated_relay"] = repr(improvement)

    report.check("direct latency independent of placement",
                 curves["local-direct"] == curves["migrated-direct"],
                 "bit-identical curves")
    above = [i for i, size in enumerate(sizes)
             if crossover is not None and size >= crossover]
    report.check("ordering above crossover: local-relay < direct < migrated-relay",
                 all(local_relay[i] < direct[i] < migrated_relay[i] for i in above),
                 f"crossover={report.extra['crossover_size']}"
                 + ("" if above else " (vacuous: direct never wins in this sweep)"))
    monotone = all(all(v[i] <= v[i + 1] for i in range(len(v) - 1))
                   for v in curves.values())
    report.check("curves monotone in size", monotone)
    return report


def limit_test(model: Optional[LatencyModel] = None, seed: int = 0,
               caps: TransportConfig = TransportConfig(),
               trace_enabled: bool = False) -> Report:
    """Binary-search the maximum deliverable message size per transport and
    check the direct cap is exactly twice the relay cap."""
    trace: Optional[list] = [] if trace_enabled else None
    sim, a, b = _pair_sim(True, model, seed, caps, trace=trace)

    def max_deliverable(transport: TransportKind) -> int:
        lo, hi = 0, max(caps.relay_max, caps.direct_max) * 4
        while lo < hi:
            mid = (lo + hi + 1) // 2
            try:
                sim.router.send(transport, a, b, mid)
                lo = mid
            except MessageTooLargeError:
                hi = mid - 1
        return lo

    report = Report("limit_test", seed, trace=trace)
    relay_max = max_deliverable(TransportKind.RELAY)
    direct_max = max_deliverable(TransportKind.DIRECT)
    report.extra["relay_max"] = str(relay_max)
    report.extra["direct_max"] = str(direct_max)
    report.check("direct cap = 2 x relay cap", direct_max == 2 * relay_max,
                 f"{direct_max} vs 2*{relay_max}")
    try:
        sim.router.send_relay(a, b, relay_max)
        boundary_ok = True
    except MessageTooLargeError:
        boundary_ok = False
    report.check("relay delivers at its cap", boundary_ok)
    try:
        sim.router.send_relay(a, b, relay_max + 1)
        rejected = False
    except MessageTooLargeError:
        rejected = True
    report.check("relay rejects cap+1 with E_MSG_TOO_LARGE", rejected)
    report.metrics = sim.metrics.snapshot()
    return report


def ring_load(spokes: int = 8, size: int = 4096,
              model: Optional[LatencyModel] = None, seed: int = 0,
              trace_enabled: bool = False) -> Report:
    """All-pairs traffic between processes homed on a ring's center and
    migrated to distinct outer nodes; measures how much payload the center
    carries for each transport."""
    trace: Optional[list] = [] if trace_enabled else None

    def build() -> tuple[Simulation, list[GPid]]:
        sim = Simulation.build(Topology.ring_with_center(spokes + 1), model,
                               TransportConfig(), seed, trace=trace)
        procs = [sim.cluster.spawn(0, "ring") for _ in range(spokes)]
        for i, pid in enumerate(procs):
            sim.cluster.migrate(pid, i + 1)
        return sim, procs

    def all_pairs(sim: Simulation, procs: list[GPid], transport: TransportKind) -> None:
        for src in procs:
            for dst in procs:
                if src != dst:
                    sim.router.send(transport, src, dst, size)

    report = Report("ring_load", seed, trace=trace)
    pairs = spokes * (spokes - 1)
    total_payload = pairs * size

    sim, procs = build()
    all_pairs(sim, procs, TransportKind.RELAY)
    relay_center = sim.metrics.relayed_bytes.get(0, 0)
    report.extra["relay_center_bytes"] = str(relay_center)
    report.check("relay: center carries every payload byte once",
                 relay_center == total_payload,
                 f"{relay_center} vs {total_payload}")

    sim, procs = build()   # cold start: no gossip rounds at all
    all_pairs(sim, procs, TransportKind.DIRECT)
    cold_center = sim.metrics.relayed_bytes.get(0, 0)
    report.extra["direct_cold_center_bytes"] = str(cold_center)
    report.check("direct cold: exactly one forward per first-contact pair",
                 cold_center == total_payload,
                 f"{cold_center} vs {total_payload}")
    all_pairs(sim, procs, TransportKind.DIRECT)   # second pass: caches are warm
    report.check("direct warm: no further center forwards",
                 sim.metrics.relayed_bytes.get(0, 0) == cold_center)

    sim, procs = build()
    rounds = sim.converge()
    all_pairs(sim, procs, TransportKind.DIRECT)
    converged_center = sim.metrics.relayed_bytes.get(0, 0)
    report.extra["direct_converged_center_bytes"] = str(converged_center)
    report.convergence_rounds = rounds
    report.check("direct converged: center fully bypassed", converged_center == 0)
    report.metrics = sim.metrics.snapshot()
    return report


def imbalance_test(model: Optional[LatencyModel] = None, seed: int = 0,
                   policy: balancer.BalancePolicy = balancer.BalancePolicy(),
                   preset: str = "imbalanced", trace_enabled: bool = False) -> Report:
    """Two 3-process jobs crowded onto four of six nodes; balancing to a
    fixpoint should spread them out and beat the 2x-of-optimal bound.
    The "balanced" preset starts at one process per node instead."""
    trace: Optional[list] = [] if trace_enabled else None
    sim = Simulation.build(Topology.mesh(6), model, TransportConfig(), seed, trace=trace)
    if preset == "imbalanced":
        placement_a = [0, 0, 2]
        placement_b = [1, 1, 3]
    elif preset == "balanced":
        placement_a = [0, 1, 2]
        placement_b = [3, 4, 5]
    else:
        raise InvalidScenarioError(f"imbalance_test: unknown preset {preset!r}")

    jobs = []
    for name, placement in (("A", placement_a), ("B", placement_b)):
        members = []
        for node in placement:
            pid = sim.cluster.spawn(node, name)
            members.append((pid, 1.0))
        jobs.append(balancer.JobSpec(name, tuple(members)))

    def worst_makespan() -> float:
        return max(balancer.job_makespan(sim.cluster, job) for job in jobs)

    report = Report("imbalance_test", seed, trace=trace)
    before = worst_makespan()
    moves = []
    for _ in range(32):
        sim.converge()
        step = balancer.balance_step(sim.cluster, policy)
        if not step:
            break
        moves.extend(step)
        if trace is not None:
            for m in step:
                trace.append((sim.queue.now, "MIGRATE", str(m.pid), str(m.pid),
                              m.src, m.dst, 0))
    after = worst_makespan()
    optimum = balancer.optimal_joint_makespan(jobs, sim.cluster.node_count)

    report.extra["makespan_before"] = repr(before)
    report.extra["makespan_after"] = repr(after)
    report.extra["makespan_optimum"] = repr(optimum)
    report.extra["migrations"] = ";".join(
        f"{m.pid}:{m.src}->{m.dst}" for m in moves) or "none"
    if preset == "balanced":
        report.check("already balanced: no migrations", not moves)
        report.check("makespan unchanged", after == before)
    else:
        report.check("makespan strictly decreases", after < before,
                     f"{before} -> {after}")
        report.check("final makespan within 2x of brute-force optimum",
                     after <= 2 * optimum, f"{after} vs 2*{optimum}")
    report.metrics = sim.metrics.snapshot()
    return report


def gossip_stats(nodes: int = 32, seed: int = 0,
                 config: GossipConfig = GossipConfig(),
                 max_rounds: int = 50) -> Report:
    """Spread one fresh location fact and log per-round dissemination."""
    sim = Simulation.build(Topology.mesh(nodes), None, TransportConfig(), seed, config)
    pid = sim.cluster.spawn(0, "fact")
    report = Report("gossip_stats", seed)
    report.gossip_rows.append((0, gossip.informed_count(sim.cluster, pid), 0, 0))
    informed = 1
    for _ in range(max_rounds):
        round_report = gossip.gossip_round(sim.cluster, sim.rng, config)
        previous = informed
        informed = gossip.informed_count(sim.cluster, pid)
        report.gossip_rows.append((round_report.index, informed,
                                   round_report.frames, round_report.entries_moved))
        if informed < previous:
            report.check("informed set is non-decreasing", False,
                         f"round {round_report.index}")
        if informed == nodes:
            break
    report.extra["rounds_to_full"] = str(report.gossip_rows[-1][0]) \
        if informed == nodes else "not reached"
    report.check("fact reached every node", informed == nodes,
                 f"{informed}/{nodes}")
    report.metrics = sim.metrics.snapshot()
    return report
