"""I/O cost accounting and run metrics.

Default latencies follow an NVMe calibration: 20 us sequential read, 100 us
random read, 200 us synchronous dirty write-back.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

from .bufferpool import AccessOutcome, OutcomeKind
from .errors import ConfigError
from .trace import Access

SCORE_SCALE = 1000.0


@dataclass(frozen=True)
class IoCostModel:
    seq_read_us: float = 20
    rand_read_us: float = 100
    dirty_writeback_us: float = 200
    hit_us: float = 0
    page_size_bytes: int = 8192

    def __post_init__(self):
        if min(self.seq_read_us, self.rand_read_us, self.dirty_writeback_us, self.hit_us) < 0:
            raise ConfigError("costs must be >= 0")
        if self.page_size_bytes < 1:
            raise ConfigError("page_size_bytes must be >= 1")

    @property
    def calibrated(self) -> bool:
        """True when write-back >= random read >= sequential read."""
        return self.dirty_writeback_us >= self.rand_read_us >= self.seq_read_us


@dataclass
class RunMetrics:
    requests: int = 0
    hits: int = 0
    seq_misses: int = 0
    rand_misses: int = 0
    dirty_evictions: int = 0
    total_io_wait_us: float = 0
    io_volume_bytes: int = 0

    @property
    def misses(self) -> int:
        return self.seq_misses + self.rand_misses

    def __add__(self, other: "RunMetrics") -> "RunMetrics":
        return RunMetrics(*(getattr(self, f.name) + getattr(other, f.name) for f in fields(self)))

    def to_dict(self) -> dict:
        return asdict(self)


def cost_of(model: IoCostModel, outcome: AccessOutcome) -> float:
    if outcome.kind is OutcomeKind.HIT:
        return model.hit_us
    cost = model.seq_read_us if outcome.estimated_fault_kind is Access.SEQ else model.rand_read_us
    if outcome.victim_was_dirty:
        cost += model.dirty_writeback_us
    return cost


def accumulate(metrics: RunMetrics, outcome: AccessOutcome, model: IoCostModel) -> RunMetrics:
    """Fold one outcome into ``metrics`` in place and return it."""
    metrics.requests += 1
    if outcome.kind is OutcomeKind.HIT:
        metrics.hits += 1
    else:
        if outcome.estimated_fault_kind is Access.SEQ:
            metrics.seq_misses += 1
        else:
            metrics.rand_misses += 1
        pages = 1
        if outcome.victim_was_dirty:
            metrics.dirty_evictions += 1
            pages = 2
        metrics.io_volume_bytes += pages * model.page_size_bytes
    metrics.total_io_wait_us += cost_of(model, outcome)
    return metrics


def hit_rate(metrics: RunMetrics) -> float:
    return metrics.hits / metrics.requests if metrics.requests else 0.0


def avg_io_wait(metrics: RunMetrics) -> float:
    return metrics.total_io_wait_us / metrics.requests if metrics.requests else 0.0


def latency_score(metrics: RunMetrics) -> float:
    """SCORE_SCALE / (1 + average wait in us); strictly decreasing in the wait."""
    return SCORE_SCALE / (1.0 + avg_io_wait(metrics))
