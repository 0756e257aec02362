"""Victim selection: Clock sweep, PBM-Sampling, the evolved policy and Belady's MIN.

Sampling policies draw slots with replacement from a caller-owned
``random.Random`` and break score ties by the lowest slot index.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable, Sequence

from .bufferpool import CacheState
from .errors import ConfigError, NoVictimError
from .scantrack import NOT_REQUESTED, ScanRegistry
from .trace import PageRequest, PageTag

POLICY_NAMES = ("clock", "pbm-sampling", "evolved", "belady")


@dataclass(frozen=True)
class PolicyConfig:
    sample_size_pbm: int = 20
    sample_size_evolved: int = 30
    fast_path_probes: int = 3
    clean_bonus: float = 64.0
    cold_bonus: float = 32.0
    dirty_score_for_not_requested: float = math.inf

    def __post_init__(self):
        for name in ("sample_size_pbm", "sample_size_evolved", "fast_path_probes"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.clean_bonus < 0 or self.cold_bonus < 0:
            raise ConfigError("bonuses must be >= 0")


def _require_unpinned(state: CacheState) -> None:
    if state.pinned_slots >= state.capacity:
        raise NoVictimError("all buffers are pinned")


def clock_select_victim(state: CacheState) -> int:
    _require_unpinned(state)
    slots = state.slots
    n = state.capacity
    hand = state.clock_hand
    while True:
        d = slots[hand]
        hand = hand + 1 if hand + 1 < n else 0
        if d.refcount:
            continue
        if d.usage_count == 0:
            state.clock_hand = hand
            return d.id
        d.usage_count -= 1


def _random_unpinned(state: CacheState, rng) -> int:
    slots = state.slots
    n = state.capacity
    while True:
        i = rng.randrange(n)
        if not slots[i].refcount:
            return i


def pbm_sampling_select_victim(state: CacheState, estimator: ScanRegistry,
                               cfg: PolicyConfig, rng) -> int:
    _require_unpinned(state)
    slots = state.slots
    n = state.capacity
    estimate = estimator.estimate
    best_slot = -1
    best_t = -1.0
    gathered = 0
    while gathered < cfg.sample_size_pbm:
        i = rng.randrange(n)
        d = slots[i]
        if d.refcount:
            continue
        t = estimate(d.tag)
        if t is NOT_REQUESTED:
            return i
        gathered += 1
        if t > best_t or (t == best_t and i < best_slot):
            best_slot, best_t = i, t
    if slots[best_slot].refcount:
        return _random_unpinned(state, rng)
    return best_slot


def evolved_select_victim(state: CacheState, estimator: ScanRegistry,
                          cfg: PolicyConfig, rng) -> int:
    _require_unpinned(state)
    slots = state.slots
    n = state.capacity
    for _ in range(cfg.fast_path_probes):
        d = slots[rng.randrange(n)]
        if d.refcount == 0 and d.block_group is None:
            return d.id

    estimate = estimator.estimate
    clean_bonus, cold_bonus = cfg.clean_bonus, cfg.cold_bonus
    best_clean = best_dirty = -1
    clean_score = dirty_score = -math.inf
    for _ in range(cfg.sample_size_evolved):
        i = _random_unpinned(state, rng)
        d = slots[i]
        t = estimate(d.tag)
        if t is NOT_REQUESTED:
            if not d.is_dirty:
                return i
            score = cfg.dirty_score_for_not_requested
        else:
            score = t
        if not d.is_dirty:
            score += clean_bonus
        if d.usage_count == 0:
            score += cold_bonus
        if d.is_dirty:
            if best_dirty < 0 or score > dirty_score or (score == dirty_score and i < best_dirty):
                best_dirty, dirty_score = i, score
        elif best_clean < 0 or score > clean_score or (score == clean_score and i < best_clean):
            best_clean, clean_score = i, score
    return best_clean if best_clean >= 0 else best_dirty


def belady_select_victim(state: CacheState, future: Sequence[PageRequest | PageTag]) -> int:
    """Resident slot whose next use in ``future`` is furthest away.

    Straightforward reference form: one pass over the future per call.
    Pinned slots are skipped.
    """
    _require_unpinned(state)
    next_use: dict[PageTag, int] = {}
    for pos, item in enumerate(future):
        tag = item.tag if isinstance(item, PageRequest) else item
        next_use.setdefault(tag, pos)
    best_slot, best_pos = -1, -1.0
    for d in state.slots:
        if d.tag is None or d.refcount:
            continue
        pos = next_use.get(d.tag, math.inf)
        if pos > best_pos:
            best_slot, best_pos = d.id, pos
    return best_slot


class BeladyOracle:
    """Indexed MIN for whole-trace replay.

    Next-use positions are precomputed once; the harness reports every access
    through ``touch`` and victims come off a lazily invalidated max-heap.
    """

    def __init__(self, requests: Sequence[PageRequest]):
        n = len(requests)
        self.never = n
        nxt = [n] * n
        last: dict[PageTag, int] = {}
        for i in range(n - 1, -1, -1):
            tag = requests[i].tag
            nxt[i] = last.get(tag, n)
            last[tag] = i
        self._next = nxt
        self._stamp: dict[int, int] = {}
        self._heap: list[tuple[int, int, int]] = []

    def touch(self, slot: int, seq: int) -> None:
        self._stamp[slot] = seq
        heapq.heappush(self._heap, (-self._next[seq], slot, seq))

    def __call__(self, state: CacheState, estimator=None, rng=None) -> int:
        _require_unpinned(state)
        heap = self._heap
        stamp = self._stamp
        held = []
        try:
            while True:
                neg, slot, seq = heap[0]
                if stamp.get(slot) != seq:
                    heapq.heappop(heap)
                    continue
                if state.slots[slot].refcount:
                    held.append(heapq.heappop(heap))
                    continue
                return slot
        finally:
            for item in held:
                heapq.heappush(heap, item)


def make_policy(name: str, cfg: PolicyConfig | None = None,
                requests: Sequence[PageRequest] | None = None) -> Callable:
    """Build a ``(state, estimator, rng) -> slot`` callable for the access path."""
    cfg = cfg or PolicyConfig()
    if name == "clock":
        return lambda state, estimator, rng: clock_select_victim(state)
    if name == "pbm-sampling":
        return lambda state, estimator, rng: pbm_sampling_select_victim(state, estimator, cfg, rng)
    if name == "evolved":
        return lambda state, estimator, rng: evolved_select_victim(state, estimator, cfg, rng)
    if name == "belady":
        if requests is None:
            raise ConfigError("belady needs the full request sequence")
        return BeladyOracle(requests)
    raise ConfigError(f"unknown policy {name!r}; valid names: {', '.join(POLICY_NAMES)}")
