import json
from dataclasses import replace

import pytest

from bufsim.errors import ConfigError, NoVictimError, PolicyContractError
from bufsim.harness import (CSV_COLUMNS, ComparisonReport, RunReport, SimConfig,
                            compare_policies, derive_seed, load_report, parse_config,
                            run_simulation, write_csv)
from bufsim.policies import POLICY_NAMES
from bufsim.trace import (PointParams, ScanParams, generate_mixed_workload,
                          generate_point_workload, generate_scan_workload)

from conftest import make_trace

SCAN = generate_scan_workload(3, 200, 3, 2, seed=4)
POINT = generate_point_workload(300, 3000, 1.0, 0.4, seed=4)
MIXED = generate_mixed_workload(ScanParams(3, 200, 3, 2), PointParams(200, 3000, 1.0, 0.5),
                                0.5, seed=4)


@pytest.mark.parametrize("policy", POLICY_NAMES)
def test_cold_misses_only(policy):
    t = make_trace([0, 1, 2, 0, 1, 2, 2, 1])
    r = run_simulation(t, SimConfig(capacity_pages=3, policy=policy, pin_hold_window=0))
    assert r.hit_rate == pytest.approx((8 - 3) / 8)
    assert r.metrics.rand_misses == 3


@pytest.mark.parametrize("policy", POLICY_NAMES)
def test_run_is_deterministic(policy):
    cfg = SimConfig(capacity_pages=150, policy=policy, seed=3)
    a = run_simulation(MIXED, cfg, "m").to_json(include_wall_time=False)
    b = run_simulation(MIXED, cfg, "m").to_json(include_wall_time=False)
    assert a == b


def test_scan_trace_ordering():
    cfg = SimConfig(capacity_pages=SCAN.footprint // 4, pin_hold_window=0)
    rates = {p: run_simulation(SCAN, replace(cfg, policy=p)).hit_rate for p in POLICY_NAMES}
    assert all(rates["belady"] >= rates[p] >= 0 for p in POLICY_NAMES)


def test_seed_derivation_is_stable_and_policy_specific():
    assert derive_seed(1, "t", "clock") == derive_seed(1, "t", "clock")
    assert derive_seed(1, "t", "clock") != derive_seed(1, "t", "evolved")
    assert derive_seed(1, "t", "clock") != derive_seed(2, "t", "clock")


def test_adding_policy_does_not_perturb_others():
    cfg = SimConfig(capacity_pages=150, seed=2)
    one = compare_policies({"m": MIXED}, ["pbm-sampling"], cfg)
    two = compare_policies({"m": MIXED}, ["evolved", "pbm-sampling"], cfg)
    pbm = [r for r in two.runs if r.policy == "pbm-sampling"][0]
    assert one.runs[0].to_json(False) == pbm.to_json(False)


def test_report_round_trip():
    r = run_simulation(MIXED, SimConfig(capacity_pages=150, policy="evolved", seed=1), "m")
    again = RunReport.from_dict(json.loads(r.to_json()))
    assert again == r
    assert load_report(r.to_json()) == r
    assert again.hit_rate == r.metrics.hits / r.metrics.requests


def test_report_schema():
    r = run_simulation(POINT, SimConfig(capacity_pages=100), "p")
    d = json.loads(r.to_json())
    assert set(d) == {"trace", "policy", "config", "metrics", "derived", "events", "wall_time_ms"}
    assert set(d["derived"]) == {"hit_rate", "avg_io_wait_us", "latency_score"}
    assert set(d["metrics"]) == {"requests", "hits", "seq_misses", "rand_misses",
                                 "dirty_evictions", "total_io_wait_us", "io_volume_bytes"}
    assert d["config"]["policy_config"]["dirty_score_for_not_requested"] == "inf"


def test_comparison_single_policy():
    rep = compare_policies([SCAN], ["clock"], SimConfig(capacity_pages=150))
    assert rep.ranking == ["clock"] and rep.deltas == []


def test_comparison_belady_first_and_round_trip():
    rep = compare_policies({"s": SCAN, "p": POINT}, ["clock", "belady"],
                           SimConfig(capacity_pages=150, pin_hold_window=0))
    assert rep.ranking[0] == "belady"
    assert len(rep.runs) == 4
    d = rep.deltas[0]
    assert d["a"] == "belady" and d["b"] == "clock"
    assert d["hit_rate_delta"] == pytest.approx(rep.mean_hit_rate["belady"] - rep.mean_hit_rate["clock"])
    again = ComparisonReport.from_dict(json.loads(rep.to_json()))
    assert again == rep
    assert load_report(rep.to_json()) == rep


def test_ranking_consistent_with_scores():
    rep = compare_policies({"m": MIXED}, list(POLICY_NAMES), SimConfig(capacity_pages=150))
    scores = [rep.mean_latency_score[p] for p in rep.ranking]
    assert scores == sorted(scores, reverse=True)


def test_compare_errors():
    with pytest.raises(ConfigError):
        compare_policies([], ["clock"], SimConfig())
    with pytest.raises(ConfigError):
        compare_policies([SCAN], [], SimConfig())
    with pytest.raises(ConfigError, match="valid names"):
        compare_policies([SCAN], ["lru"], SimConfig())


def test_compare_with_processes_matches_serial():
    cfg = SimConfig(capacity_pages=150, seed=5)
    a = compare_policies({"m": MIXED}, ["clock", "evolved"], cfg, jobs=1)
    b = compare_policies({"m": MIXED}, ["clock", "evolved"], cfg, jobs=2)
    assert a.to_json(False) == b.to_json(False)


def test_pins_need_headroom():
    t = make_trace([0, 1, 2])
    with pytest.raises(ConfigError):
        run_simulation(t, SimConfig(capacity_pages=1, pin_hold_window=1))


def test_pin_window_keeps_stream_page():
    # capacity 2, one stream holding its last page: the page just read is never the victim
    t = make_trace([0, 1, 2, 3, 4, 5])
    r = run_simulation(t, SimConfig(capacity_pages=2, policy="clock", pin_hold_window=1))
    assert r.metrics.requests == 6


def test_policy_error_carries_seq(monkeypatch):
    import bufsim.harness as h

    monkeypatch.setattr(h, "make_policy", lambda *a, **k: (lambda s, e, r: 99))
    with pytest.raises(PolicyContractError) as err:
        run_simulation(make_trace([0, 1, 2]), SimConfig(capacity_pages=2, pin_hold_window=0))
    assert err.value.seq == 2


def test_no_victim_carries_seq(monkeypatch):
    import bufsim.harness as h

    def fail(*a):
        raise NoVictimError("all buffers are pinned")

    monkeypatch.setattr(h, "make_policy", lambda *a, **k: fail)
    with pytest.raises(NoVictimError, match="request 1"):
        run_simulation(make_trace([0, 1]), SimConfig(capacity_pages=1, pin_hold_window=0))


@pytest.mark.parametrize("ring", [False, True])
@pytest.mark.parametrize("bg", [False, True])
@pytest.mark.parametrize("policy", POLICY_NAMES)
def test_toggle_matrix_completes(ring, bg, policy):
    cfg = SimConfig(capacity_pages=160, policy=policy, ring_buffer_enabled=ring,
                    ring_buffer_pages=16, background_writer_enabled=bg,
                    background_writer_pages_per_tick=0.5)
    for t in (SCAN, MIXED):
        r = run_simulation(t, cfg)
        m = r.metrics
        assert m.hits + m.seq_misses + m.rand_misses == m.requests == len(t)
        assert 0 <= r.hit_rate <= 1
        if ring and t is SCAN:
            assert r.events["ring_reuses"] > 0
        if bg and t is MIXED:
            assert r.events["background_writes"] > 0


def test_ring_buffer_lowers_clock_on_pure_scans():
    t = generate_scan_workload(1, 400, 2, 3, seed=1)
    base = SimConfig(capacity_pages=300, policy="clock", pin_hold_window=0)
    off = run_simulation(t, base).hit_rate
    on = run_simulation(t, replace(base, ring_buffer_enabled=True, ring_buffer_pages=16)).hit_rate
    assert on <= off


def test_background_writer_reduces_dirty_evictions():
    base = SimConfig(capacity_pages=100, policy="clock")
    off = run_simulation(POINT, base).metrics.dirty_evictions
    on = run_simulation(POINT, replace(base, background_writer_enabled=True,
                                       background_writer_pages_per_tick=1.0)).metrics.dirty_evictions
    assert on < off


def test_parse_config():
    cfg = parse_config("""
        # comment
        capacity_pages = 512
        policy = evolved
        seed = 9
        ring_buffer_enabled = true
        clean_bonus = 10
        rand_read_us = 80   # trailing comment
    """)
    assert cfg.capacity_pages == 512 and cfg.policy == "evolved" and cfg.seed == 9
    assert cfg.ring_buffer_enabled is True
    assert cfg.policy_config.clean_bonus == 10.0
    assert cfg.cost_model.rand_read_us == 80.0
    assert cfg.cost_model.seq_read_us == 20


@pytest.mark.parametrize("text", ["bogus=1", "capacity_pages", "capacity_pages=abc",
                                  "ring_buffer_enabled=maybe"])
def test_parse_config_errors(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_config_validation():
    with pytest.raises(ConfigError, match="valid names"):
        SimConfig(policy="lru").validate()
    with pytest.raises(ConfigError):
        SimConfig(capacity_pages=10, ring_buffer_enabled=True, ring_buffer_pages=10).validate()
    assert SimConfig.from_dict(SimConfig().to_dict()) == SimConfig()


def test_csv_columns():
    r = run_simulation(POINT, SimConfig(capacity_pages=100), "p")
    text = write_csv([r])
    header, row = text.strip().splitlines()
    assert tuple(header.split(",")) == CSV_COLUMNS
    assert row.startswith("p,clock,0,3000,")
