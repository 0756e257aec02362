"""Fixed-capacity buffer pool: descriptors, page table, pins and the access path."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

from .errors import InvalidParameterError, InvalidStateError, PinUnderflowError, PolicyContractError
from .scantrack import BlockGroup, ScanRegistry
from .trace import Access, Op, PageRequest, PageTag

MAX_USAGE = 5

# (state, estimator, rng) -> victim slot
Policy = Callable[["CacheState", Optional[ScanRegistry], object], int]


class BufferDescriptor:
    __slots__ = ("id", "tag", "refcount", "usage_count", "is_dirty", "group")

    def __init__(self, id: int):
        self.id = id
        self.tag: PageTag | None = None
        self.refcount = 0
        self.usage_count = 0
        self.is_dirty = False
        # stable handle to the page's block group; see block_group
        self.group: BlockGroup | None = None

    @property
    def block_group(self) -> BlockGroup | None:
        """The page's block group while any active scan is still interested in it."""
        g = self.group
        if g is None or not g.interested_scans:
            return None
        return g

    def __repr__(self):
        return (f"BufferDescriptor(id={self.id}, tag={self.tag}, refcount={self.refcount}, "
                f"usage_count={self.usage_count}, is_dirty={self.is_dirty})")


class OutcomeKind(str, Enum):
    HIT = "hit"
    MISS_FILLED_EMPTY = "miss-filled-empty"
    MISS_EVICTED = "miss-evicted"


@dataclass(frozen=True, slots=True)
class AccessOutcome:
    kind: OutcomeKind
    slot: int
    victim: int | None = None
    victim_was_dirty: bool = False
    estimated_fault_kind: Access = Access.RAND
    evicted_tag: PageTag | None = None

    @property
    def is_hit(self) -> bool:
        return self.kind is OutcomeKind.HIT


class CacheState:
    def __init__(self, capacity: int):
        if capacity < 1:
            raise InvalidParameterError(f"capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self.slots = [BufferDescriptor(i) for i in range(capacity)]
        self.page_table: dict[PageTag, int] = {}
        self.clock_hand = 0
        self.pinned_slots = 0
        # popped from the end, so empty slots are consumed in index order
        self._free = list(range(capacity - 1, -1, -1))

    @property
    def is_full(self) -> bool:
        return not self._free

    def occupied(self) -> int:
        return len(self.page_table)

    def has_unpinned(self) -> bool:
        return self.pinned_slots < self.capacity

    def audit(self) -> None:
        """Check structural invariants; raises InvalidStateError on the first violation."""
        seen = set()
        for tag, idx in self.page_table.items():
            if self.slots[idx].tag != tag:
                raise InvalidStateError(f"page table maps {tag} to slot {idx} holding {self.slots[idx].tag}")
            seen.add(idx)
        pinned = 0
        for d in self.slots:
            if d.tag is None:
                if d.refcount or d.usage_count or d.is_dirty or d.block_group is not None:
                    raise InvalidStateError(f"empty slot {d.id} carries metadata")
            elif d.id not in seen:
                raise InvalidStateError(f"slot {d.id} holds {d.tag} but is not in the page table")
            if not 0 <= d.usage_count <= MAX_USAGE:
                raise InvalidStateError(f"slot {d.id} usage_count {d.usage_count} out of range")
            if d.refcount < 0:
                raise InvalidStateError(f"slot {d.id} negative refcount")
            pinned += d.refcount > 0
        if pinned != self.pinned_slots:
            raise InvalidStateError("pinned slot count out of sync")
        if len(self._free) + len(self.page_table) != self.capacity:
            raise InvalidStateError("free list and page table do not partition the pool")


def lookup(state: CacheState, tag: PageTag) -> int | None:
    return state.page_table.get(tag)


def pin(state: CacheState, slot: int) -> None:
    d = state.slots[slot]
    if d.tag is None:
        raise InvalidStateError(f"cannot pin empty slot {slot}")
    if d.refcount == 0:
        state.pinned_slots += 1
    d.refcount += 1


def unpin(state: CacheState, slot: int) -> None:
    d = state.slots[slot]
    if d.refcount <= 0:
        raise PinUnderflowError(f"slot {slot} is not pinned")
    d.refcount -= 1
    if d.refcount == 0:
        state.pinned_slots -= 1


def clean(state: CacheState, slot: int) -> None:
    state.slots[slot].is_dirty = False


def access(state: CacheState, request: PageRequest, policy: Policy,
           estimator: ScanRegistry | None = None, rng=None) -> AccessOutcome:
    """Serve one request.  Empty slots are filled before the policy is consulted.

    The requested page itself is never resident during victim selection, so
    pinning it for the duration of its own access has no observable effect and
    is not modelled.
    """
    tag = request.tag
    write = request.op is Op.WRITE
    idx = state.page_table.get(tag)
    if idx is not None:
        d = state.slots[idx]
        if d.usage_count < MAX_USAGE:
            d.usage_count += 1
        if write:
            d.is_dirty = True
        if d.group is None and estimator is not None:
            d.group = estimator.group_for(tag)
        return AccessOutcome(OutcomeKind.HIT, idx, estimated_fault_kind=request.access)

    victim_dirty = False
    evicted = None
    if state._free:
        idx = state._free.pop()
        kind = OutcomeKind.MISS_FILLED_EMPTY
        victim = None
    else:
        victim = policy(state, estimator, rng)
        if not isinstance(victim, int) or not 0 <= victim < state.capacity:
            raise PolicyContractError(f"policy returned out-of-range slot {victim!r}", request.seq)
        d = state.slots[victim]
        if d.tag is None:
            raise PolicyContractError(f"policy returned empty slot {victim}", request.seq)
        if d.refcount:
            raise PolicyContractError(f"policy returned pinned slot {victim}", request.seq)
        victim_dirty = d.is_dirty
        evicted = d.tag
        del state.page_table[d.tag]
        idx = victim
        kind = OutcomeKind.MISS_EVICTED

    d = state.slots[idx]
    d.tag = tag
    d.usage_count = 1
    d.is_dirty = write
    d.refcount = 0
    d.group = estimator.group_for(tag) if estimator is not None else None
    state.page_table[tag] = idx
    return AccessOutcome(kind, idx, victim, victim_dirty, request.access, evicted)
