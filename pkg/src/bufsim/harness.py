"""Experiment runner, configuration files and policy-comparison reports."""

from __future__ import annotations

import csv
import hashlib
import heapq
import io
import json
import math
import random
import time
from collections import deque
from dataclasses import asdict, dataclass, field, fields, replace
from itertools import combinations
from typing import IO, Iterable, Mapping, Sequence

from .bufferpool import CacheState, OutcomeKind, access, clean, pin, unpin
from .costmodel import IoCostModel, RunMetrics, accumulate, avg_io_wait, hit_rate, latency_score
from .errors import BufsimError, ConfigError, NoVictimError, PolicyContractError
from .policies import POLICY_NAMES, BeladyOracle, PolicyConfig, make_policy
from .scantrack import GROUP_SIZE, ScanRegistry
from .trace import Trace

CSV_COLUMNS = ("trace", "policy", "seed", "requests", "hits", "seq_misses", "rand_misses",
               "dirty_evictions", "total_io_wait_us", "hit_rate", "avg_io_wait_us",
               "latency_score")


@dataclass(frozen=True)
class SimConfig:
    capacity_pages: int = 1024
    policy: str = "clock"
    policy_config: PolicyConfig = field(default_factory=PolicyConfig)
    cost_model: IoCostModel = field(default_factory=IoCostModel)
    seed: int = 0
    pin_hold_window: int = 1
    ring_buffer_enabled: bool = False
    ring_buffer_pages: int = 32
    background_writer_enabled: bool = False
    background_writer_pages_per_tick: float = 0.0
    group_size: int = GROUP_SIZE
    per_group_estimates: bool = False

    def validate(self) -> None:
        if self.capacity_pages < 1:
            raise ConfigError("capacity_pages must be >= 1")
        if self.policy not in POLICY_NAMES:
            raise ConfigError(f"unknown policy {self.policy!r}; valid names: {', '.join(POLICY_NAMES)}")
        if self.pin_hold_window < 0:
            raise ConfigError("pin_hold_window must be >= 0")
        if self.ring_buffer_enabled and not 1 <= self.ring_buffer_pages < self.capacity_pages:
            raise ConfigError("ring_buffer_pages must be in [1, capacity_pages) when enabled")
        if self.background_writer_pages_per_tick < 0:
            raise ConfigError("background_writer_pages_per_tick must be >= 0")
        if self.group_size < 1:
            raise ConfigError("group_size must be >= 1")

    def to_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out["policy_config"] = _encode_floats(asdict(self.policy_config))
        out["cost_model"] = asdict(self.cost_model)
        return out

    @classmethod
    def from_dict(cls, data: Mapping) -> "SimConfig":
        data = dict(data)
        pc = PolicyConfig(**_decode_floats(data.pop("policy_config", {})))
        cm = IoCostModel(**data.pop("cost_model", {}))
        return cls(policy_config=pc, cost_model=cm, **data)


def _encode_floats(d: dict) -> dict:
    return {k: ("inf" if isinstance(v, float) and math.isinf(v) else v) for k, v in d.items()}


def _decode_floats(d: Mapping) -> dict:
    return {k: (math.inf if v == "inf" else v) for k, v in d.items()}


_BOOL_WORDS = {"1": True, "true": True, "yes": True, "on": True,
               "0": False, "false": False, "no": False, "off": False}


def _coerce(name: str, raw: str, type_name: str):
    try:
        if type_name == "bool":
            return _BOOL_WORDS[raw.lower()]
        if type_name == "int":
            return int(raw)
        if type_name == "float":
            return float(raw)
    except (KeyError, ValueError):
        raise ConfigError(f"bad value for {name}: {raw!r}") from None
    return raw


def parse_config(text: str, base: SimConfig | None = None) -> SimConfig:
    """Parse flat ``key=value`` lines.  Keys are SimConfig fields or fields of
    its nested PolicyConfig / IoCostModel; ``#`` starts a comment."""
    base = base or SimConfig()
    sections = {"top": {}, "policy_config": {}, "cost_model": {}}
    owner = {}
    for section, cls in (("policy_config", PolicyConfig), ("cost_model", IoCostModel),
                         ("top", SimConfig)):
        for f in fields(cls):
            if f.name not in ("policy_config", "cost_model"):
                owner[f.name] = (section, f.type)
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected key=value")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in owner:
            raise ConfigError(f"config line {lineno}: unknown key {key!r}")
        section, type_name = owner[key]
        sections[section][key] = _coerce(key, raw, type_name)
    return replace(base, policy_config=replace(base.policy_config, **sections["policy_config"]),
                   cost_model=replace(base.cost_model, **sections["cost_model"]),
                   **sections["top"])


def derive_seed(master: int, trace_id: str, policy: str) -> int:
    digest = hashlib.sha256(f"{master}\x1f{trace_id}\x1f{policy}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass
class RunReport:
    trace: str
    policy: str
    config: SimConfig
    metrics: RunMetrics
    hit_rate: float
    avg_io_wait_us: float
    latency_score: float
    events: dict = field(default_factory=dict)
    wall_time_ms: float = 0.0

    @classmethod
    def from_metrics(cls, trace_id: str, config: SimConfig, metrics: RunMetrics,
                     events: dict, wall_time_ms: float = 0.0) -> "RunReport":
        return cls(trace_id, config.policy, config, metrics, hit_rate(metrics),
                   avg_io_wait(metrics), latency_score(metrics), dict(events), wall_time_ms)

    def to_dict(self, include_wall_time: bool = True) -> dict:
        out = {
            "trace": self.trace,
            "policy": self.policy,
            "config": self.config.to_dict(),
            "metrics": self.metrics.to_dict(),
            "derived": {
                "hit_rate": self.hit_rate,
                "avg_io_wait_us": self.avg_io_wait_us,
                "latency_score": self.latency_score,
            },
            "events": dict(sorted(self.events.items())),
        }
        if include_wall_time:
            out["wall_time_ms"] = self.wall_time_ms
        return out

    @classmethod
    def from_dict(cls, data: Mapping) -> "RunReport":
        derived = data["derived"]
        return cls(
            trace=data["trace"],
            policy=data["policy"],
            config=SimConfig.from_dict(data["config"]),
            metrics=RunMetrics(**data["metrics"]),
            hit_rate=derived["hit_rate"],
            avg_io_wait_us=derived["avg_io_wait_us"],
            latency_score=derived["latency_score"],
            events=dict(data.get("events", {})),
            wall_time_ms=data.get("wall_time_ms", 0.0),
        )

    def to_json(self, include_wall_time: bool = True) -> str:
        return json.dumps(self.to_dict(include_wall_time), sort_keys=True, indent=2)

    def csv_row(self) -> dict:
        m = self.metrics
        return {
            "trace": self.trace, "policy": self.policy, "seed": self.config.seed,
            "requests": m.requests, "hits": m.hits, "seq_misses": m.seq_misses,
            "rand_misses": m.rand_misses, "dirty_evictions": m.dirty_evictions,
            "total_io_wait_us": m.total_io_wait_us, "hit_rate": self.hit_rate,
            "avg_io_wait_us": self.avg_io_wait_us, "latency_score": self.latency_score,
        }


class _Ring:
    __slots__ = ("slots", "next")

    def __init__(self):
        self.slots: list[int] = []
        self.next = 0


def run_simulation(trace: Trace, config: SimConfig, trace_id: str = "trace") -> RunReport:
    """Replay ``trace`` through a fresh pool under ``config``."""
    config.validate()
    streams = trace.streams()
    if len(streams) * config.pin_hold_window >= config.capacity_pages:
        raise ConfigError(
            f"capacity {config.capacity_pages} cannot hold {len(streams)} streams x "
            f"{config.pin_hold_window} held pins with a page left to evict"
        )
    started = time.perf_counter()

    state = CacheState(config.capacity_pages)
    registry = ScanRegistry(config.group_size, per_group_estimates=config.per_group_estimates)
    policy = make_policy(config.policy, config.policy_config, trace.requests)
    oracle = policy if isinstance(policy, BeladyOracle) else None
    rng = random.Random(derive_seed(config.seed, trace_id, config.policy))
    cost = config.cost_model
    metrics = RunMetrics()
    events = {"evictions": 0, "filled_empty": 0, "ring_reuses": 0, "background_writes": 0}

    relations = trace.relations
    window = config.pin_hold_window
    held: dict[int, deque] = {s: deque() for s in streams}

    ring_on = config.ring_buffer_enabled
    ring_threshold = config.capacity_pages / 4
    ring_pages = config.ring_buffer_pages
    rings: dict[int, _Ring] = {}

    bg_on = config.background_writer_enabled and config.background_writer_pages_per_tick > 0
    bg_rate = config.background_writer_pages_per_tick
    bg_credit = 0.0
    last_access: list[int] = [0] * config.capacity_pages
    dirty_heap: list[tuple[int, int]] = []

    scans = registry.scans
    slots = state.slots
    for req in trace.requests:
        seq = req.seq
        scan = req.scan
        tag = req.tag
        if scan is not None:
            sc = scans.get(scan)
            if sc is None:
                registry.register_scan(scan, tag.relation, tag.block,
                                       relations[tag.relation] - tag.block, now=seq)
            elif sc.active and sc.position <= tag.block <= sc.end:
                registry.advance_scan(scan, tag.block, seq)

        use_policy = policy
        ring = None
        if ring_on and scan is not None and relations[tag.relation] > ring_threshold:
            ring = rings.get(scan)
            if ring is None:
                ring = rings[scan] = _Ring()
            if len(ring.slots) >= ring_pages and tag not in state.page_table:
                cand = ring.slots[ring.next]
                d = slots[cand]
                if d.tag is not None and not d.refcount and d.usage_count <= 1:
                    use_policy = lambda s, e, r, c=cand: c  # noqa: E731
                    events["ring_reuses"] += 1

        try:
            outcome = access(state, req, use_policy, registry, rng)
        except NoVictimError as exc:
            raise NoVictimError(f"request {seq}: {exc}") from exc
        except PolicyContractError as exc:
            if exc.seq is None:
                raise PolicyContractError(str(exc), seq) from exc
            raise

        slot = outcome.slot
        if oracle is not None:
            oracle.touch(slot, seq)
        kind = outcome.kind
        if kind is OutcomeKind.MISS_EVICTED:
            events["evictions"] += 1
        elif kind is OutcomeKind.MISS_FILLED_EMPTY:
            events["filled_empty"] += 1
        accumulate(metrics, outcome, cost)

        if ring is not None and kind is not OutcomeKind.HIT:
            if len(ring.slots) < ring_pages:
                ring.slots.append(slot)
            elif ring.slots[ring.next] == slot:
                ring.next = (ring.next + 1) % ring_pages
            else:
                # ring slot was busy; adopt the slot the main policy picked
                ring.slots[ring.next] = slot
                ring.next = (ring.next + 1) % ring_pages
        if ring is not None and not scans[scan].active:
            del rings[scan]

        if window:
            q = held[req.stream]
            pin(state, slot)
            q.append(slot)
            if len(q) > window:
                unpin(state, q.popleft())

        if bg_on:
            last_access[slot] = seq
            if slots[slot].is_dirty:
                heapq.heappush(dirty_heap, (seq, slot))
            bg_credit += bg_rate
            budget = int(bg_credit)
            bg_credit -= budget
            deferred = []
            while budget and dirty_heap:
                when, s = heapq.heappop(dirty_heap)
                d = slots[s]
                if last_access[s] != when or not d.is_dirty:
                    continue
                if d.refcount:
                    deferred.append((when, s))
                    continue
                clean(state, s)
                events["background_writes"] += 1
                budget -= 1
            for item in deferred:
                heapq.heappush(dirty_heap, item)

    wall = (time.perf_counter() - started) * 1000.0
    return RunReport.from_metrics(trace_id, config, metrics, events, wall)


@dataclass
class ComparisonReport:
    runs: list[RunReport]
    ranking: list[str]
    mean_latency_score: dict[str, float]
    mean_hit_rate: dict[str, float]
    deltas: list[dict]

    @classmethod
    def build(cls, runs: list[RunReport], policies: Sequence[str]) -> "ComparisonReport":
        score = {p: _mean(r.latency_score for r in runs if r.policy == p) for p in policies}
        hits = {p: _mean(r.hit_rate for r in runs if r.policy == p) for p in policies}
        ranking = sorted(policies, key=lambda p: (-score[p], p))
        deltas = [
            {"a": a, "b": b,
             "hit_rate_delta": hits[a] - hits[b],
             "latency_score_delta": score[a] - score[b]}
            for a, b in combinations(ranking, 2)
        ]
        return cls(list(runs), ranking, score, hits, deltas)

    def to_dict(self, include_wall_time: bool = True) -> dict:
        return {
            "runs": [r.to_dict(include_wall_time) for r in self.runs],
            "ranking": list(self.ranking),
            "mean_latency_score": dict(self.mean_latency_score),
            "mean_hit_rate": dict(self.mean_hit_rate),
            "deltas": [dict(d) for d in self.deltas],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "ComparisonReport":
        return cls(
            runs=[RunReport.from_dict(r) for r in data["runs"]],
            ranking=list(data["ranking"]),
            mean_latency_score=dict(data["mean_latency_score"]),
            mean_hit_rate=dict(data["mean_hit_rate"]),
            deltas=[dict(d) for d in data["deltas"]],
        )

    def to_json(self, include_wall_time: bool = True) -> str:
        return json.dumps(self.to_dict(include_wall_time), sort_keys=True, indent=2)


def _mean(values: Iterable[float]) -> float:
    values = list(values)
    return sum(values) / len(values) if values else 0.0


def _normalize_traces(traces) -> list[tuple[str, Trace]]:
    if isinstance(traces, Mapping):
        return list(traces.items())
    out = []
    for i, t in enumerate(traces):
        out.append(t if isinstance(t, tuple) else (f"trace{i}", t))
    return out


def _run_one(args):
    trace_id, trace, config = args
    try:
        return run_simulation(trace, config, trace_id)
    except BufsimError as exc:
        exc.args = (f"[trace={trace_id} policy={config.policy}] {exc}",)
        raise


def compare_policies(traces, policies: Sequence[str], base_config: SimConfig,
                     jobs: int = 1) -> ComparisonReport:
    """Run every policy on every trace.  ``traces`` is a mapping or a list of
    ``(trace_id, Trace)`` pairs (bare traces get positional ids)."""
    named = _normalize_traces(traces)
    if not named:
        raise ConfigError("compare_policies needs at least one trace")
    if not policies:
        raise ConfigError("compare_policies needs at least one policy")
    for p in policies:
        if p not in POLICY_NAMES:
            raise ConfigError(f"unknown policy {p!r}; valid names: {', '.join(POLICY_NAMES)}")
    tasks = [(tid, t, replace(base_config, policy=p)) for tid, t in named for p in policies]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            runs = list(pool.map(_run_one, tasks))
    else:
        runs = [_run_one(t) for t in tasks]
    return ComparisonReport.build(runs, list(policies))


def write_csv(reports: Iterable[RunReport], dest: IO[str] | None = None) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for r in reports:
        writer.writerow(r.csv_row())
    text = buf.getvalue()
    if dest is not None:
        dest.write(text)
    return text


def load_report(text: str) -> RunReport | ComparisonReport:
    data = json.loads(text)
    if "runs" in data:
        return ComparisonReport.from_dict(data)
    return RunReport.from_dict(data)
