import json

import pytest

from conftest import TEST_MODEL
from migratenet import bench
from migratenet.errors import InvalidScenarioError
from migratenet.simcore import TransportKind

VALID_SCENARIO = {
    "version": 1,
    "name": "demo",
    "seed": 5,
    "topology": {"kind": "mesh", "nodes": 4},
    "processes": [
        {"id": "p0", "home": 0, "job": "A"},
        {"id": "p1", "home": 1, "job": "A"},
    ],
    "migrations": [
        {"time": 0.5, "pid": "p0", "to": 2},
        {"time": 0.5, "pid": "p1", "to": 3},
    ],
    "traffic": [
        {"time": 1.0, "src": "p0", "dst": "p1", "transport": "direct",
         "size": 2048, "count": 3, "interval": 0.25},
        {"time": 2.0, "src": "p1", "dst": "p0", "transport": "relay", "size": 512},
    ],
    "gossip": {"bound": 32, "rounds_per_second": 20.0},
}


# -- scenario parsing -----------------------------------------------------------

def test_scenario_round_trip():
    s = bench.Scenario.from_dict(VALID_SCENARIO)
    assert s.name == "demo" and s.seed == 5
    assert s.topology.nodes == 4
    assert len(s.processes) == 2 and len(s.traffic) == 2
    assert s.traffic[0].transport is TransportKind.DIRECT
    assert s.gossip_config.bound == 32


@pytest.mark.parametrize("mutate,needle", [
    (lambda d: d.update(version=2), "version"),
    (lambda d: d.pop("name"), "scenario.name"),
    (lambda d: d["topology"].update(kind="torus"), "topology.kind"),
    (lambda d: d["processes"].append({"id": "p0", "home": 0}), "processes[2].id"),
    (lambda d: d["processes"].append({"id": "p9", "home": 40}), "processes[2].home"),
    (lambda d: d["migrations"].append({"time": 0.1, "pid": "nope", "to": 1}),
     "migrations[2].pid"),
    (lambda d: d["migrations"].append({"time": 0.1, "pid": "p0", "to": 1}),
     "migrations[2].time"),
    (lambda d: d["traffic"].append({"time": 3.0, "src": "px", "dst": "p1",
                                    "transport": "relay", "size": 1}),
     "traffic[2].src"),
    (lambda d: d["traffic"].append({"time": 3.0, "src": "p0", "dst": "p1",
                                    "transport": "warp", "size": 1}),
     "traffic[2].transport"),
])
def test_scenario_validation_reports_field_paths(mutate, needle):
    data = json.loads(json.dumps(VALID_SCENARIO))
    mutate(data)
    with pytest.raises(InvalidScenarioError) as err:
        bench.Scenario.from_dict(data)
    assert needle in str(err.value)


def test_scenario_load_rejects_bad_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(InvalidScenarioError):
        bench.Scenario.load(path)


# -- run_scenario -----------------------------------------------------------------

def test_empty_traffic_gives_empty_latency_table():
    data = json.loads(json.dumps(VALID_SCENARIO))
    data["traffic"] = []
    data["migrations"] = []
    report = bench.run_scenario(bench.Scenario.from_dict(data))
    assert report.latency_rows == []
    assert report.metrics.payload_delivered == 0


def test_run_scenario_executes_all_sends():
    report = bench.run_scenario(bench.Scenario.from_dict(VALID_SCENARIO))
    assert len(report.latency_rows) == 4
    assert report.metrics.payload_delivered == 3 * 2048 + 512


def test_run_scenario_deterministic_files(tmp_path):
    scenario = bench.Scenario.from_dict(VALID_SCENARIO)
    blobs = []
    for d in ("one", "two"):
        report = bench.run_scenario(scenario)
        files = report.write(tmp_path / d)
        blobs.append(b"".join(p.read_bytes() for p in files))
    assert blobs[0] == blobs[1]


def test_run_scenario_seed_override_changes_only_seed_field():
    scenario = bench.Scenario.from_dict(VALID_SCENARIO)
    report = bench.run_scenario(scenario, seed=99)
    assert report.seed == 99


# -- latency sweep ------------------------------------------------------------------

def test_sweep_assertions_pass_under_test_model():
    report = bench.latency_sweep([1024, 4096, 65536], TEST_MODEL)
    assert report.passed, [a for a in report.assertions if not a.passed]


def test_sweep_rows_cover_all_series():
    sizes = [1024, 4096]
    report = bench.latency_sweep(sizes, TEST_MODEL)
    series = {s for _, _, s in report.latency_rows}
    assert series == {"local-relay", "local-direct", "migrated-relay", "migrated-direct"}
    assert len(report.latency_rows) == len(series) * len(sizes)


def test_sweep_direct_curve_identical_across_placements():
    report = bench.latency_sweep([1024, 2048], TEST_MODEL)
    local = [(s, l) for s, l, series in report.latency_rows if series == "local-direct"]
    migrated = [(s, l) for s, l, series in report.latency_rows
                if series == "migrated-direct"]
    assert local == migrated


def test_sweep_reports_measured_crossover():
    # TEST_MODEL overhead 0.5 vs 2 hops of (1 + s/100): direct wins from s=0
    report = bench.latency_sweep([16, 64, 256], TEST_MODEL)
    assert report.extra["crossover_size"] == "16"


def test_sweep_rejects_empty_sizes():
    with pytest.raises(InvalidScenarioError):
        bench.latency_sweep([], TEST_MODEL)


# -- limit test -----------------------------------------------------------------------

def test_limit_finds_exact_caps():
    from migratenet.transport import TransportConfig
    report = bench.limit_test(TEST_MODEL, caps=TransportConfig(relay_max=1000,
                                                               direct_max=2000))
    assert report.passed
    assert report.extra["relay_max"] == "1000"
    assert report.extra["direct_max"] == "2000"


# -- ring load -----------------------------------------------------------------------

def test_ring_load_center_accounting():
    report = bench.ring_load(spokes=5, size=1000, model=TEST_MODEL)
    assert report.passed, [a for a in report.assertions if not a.passed]
    pairs = 5 * 4
    assert report.extra["relay_center_bytes"] == str(pairs * 1000)
    assert report.extra["direct_cold_center_bytes"] == str(pairs * 1000)
    assert report.extra["direct_converged_center_bytes"] == "0"


# -- imbalance ------------------------------------------------------------------------

def test_imbalance_report():
    report = bench.imbalance_test(TEST_MODEL)
    assert report.passed
    assert float(report.extra["makespan_after"]) < float(report.extra["makespan_before"])
    assert float(report.extra["makespan_after"]) <= \
        2 * float(report.extra["makespan_optimum"])


def test_imbalance_balanced_preset_makes_no_moves():
    report = bench.imbalance_test(TEST_MODEL, preset="balanced")
    assert report.passed
    assert report.extra["migrations"] == "none"


# -- gossip stats ----------------------------------------------------------------------

def test_gossip_stats_rows_and_convergence():
    report = bench.gossip_stats(nodes=16, seed=4)
    assert report.passed
    counts = [informed for _, informed, _, _ in report.gossip_rows]
    assert counts == sorted(counts)
    assert counts[-1] == 16
    frames = [f for _, _, f, _ in report.gossip_rows[1:]]
    assert all(f <= 2 * 16 for f in frames)


# -- report files ------------------------------------------------------------------------

def test_report_file_schemas(tmp_path):
    report = bench.latency_sweep([1024], TEST_MODEL)
    files = {p.name: p for p in report.write(tmp_path)}
    header = files["latency_sweep_latency.csv"].read_text().splitlines()[0]
    assert header == "size,latency,series"
    header = files["latency_sweep_metrics.csv"].read_text().splitlines()[0]
    assert header == "scenario,seed,metric,key,value"
    summary = files["latency_sweep_summary.txt"].read_text()
    assert "result: PASS" in summary


def test_trace_file_written_when_enabled(tmp_path):
    report = bench.ring_load(spokes=3, size=100, model=TEST_MODEL, trace_enabled=True)
    files = {p.name: p for p in report.write(tmp_path)}
    lines = files["ring_load_trace.csv"].read_text().splitlines()
    assert lines[0] == "time,kind,src,dst,from_node,to_node,size"
    assert len(lines) > 1
