import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bufsim.bufferpool import MAX_USAGE, CacheState, OutcomeKind, access, lookup, pin, unpin
from bufsim.errors import PinUnderflowError, PolicyContractError
from bufsim.policies import make_policy
from bufsim.scantrack import ScanRegistry
from bufsim.trace import Access, PageTag

from conftest import req

clock = make_policy("clock")
A, B, C = (PageTag(0, i) for i in range(3))


def run(state, blocks, ops=None, policy=clock):
    ops = ops or "R" * len(blocks)
    return [access(state, req(i, b, o), policy) for i, (b, o) in enumerate(zip(blocks, ops))]


def test_lookup_empty():
    assert lookup(CacheState(4), A) is None


def test_read_your_write():
    s = CacheState(4)
    run(s, [0])
    assert lookup(s, A) == 0


def test_lookup_after_eviction():
    s = CacheState(1)
    run(s, [0, 1])
    assert lookup(s, A) is None
    assert lookup(s, B) == 0


def test_capacity_suffices():
    s = CacheState(2)
    kinds = [o.kind for o in run(s, [0, 1, 0])]
    assert kinds == [OutcomeKind.MISS_FILLED_EMPTY, OutcomeKind.MISS_FILLED_EMPTY, OutcomeKind.HIT]


def test_forced_eviction():
    s = CacheState(1)
    out = run(s, [0, 1])
    assert out[1].kind is OutcomeKind.MISS_EVICTED
    assert out[1].victim == 0
    assert out[1].evicted_tag == A


def test_dirty_victim_reported():
    # hand-stepped Clock: A(u=1,dirty) B(u=1); C sweeps A->0, B->0, evicts A
    s = CacheState(2)
    out = run(s, [0, 1, 2], "WRR")
    assert out[2].kind is OutcomeKind.MISS_EVICTED
    assert out[2].victim == 0 and out[2].victim_was_dirty
    assert s.slots[0].tag == C and not s.slots[0].is_dirty and s.slots[0].usage_count == 1


def test_hit_bumps_usage_and_dirties():
    s = CacheState(2)
    out = run(s, [0] * 8, "RRWRRRRR")
    assert out[-1].kind is OutcomeKind.HIT and out[-1].victim is None
    d = s.slots[0]
    assert d.usage_count == MAX_USAGE and d.is_dirty


def test_fault_kind_mirrors_access():
    s = CacheState(2)
    o1 = access(s, req(0, 0, access="SEQ", scan=1), clock)
    o2 = access(s, req(1, 1), clock)
    assert o1.estimated_fault_kind is Access.SEQ and o2.estimated_fault_kind is Access.RAND


def test_pin_unpin():
    s = CacheState(2)
    run(s, [0])
    pin(s, 0)
    pin(s, 0)
    assert s.slots[0].refcount == 2 and s.pinned_slots == 1
    unpin(s, 0)
    unpin(s, 0)
    assert s.slots[0].refcount == 0 and s.pinned_slots == 0


def test_unpin_underflow():
    s = CacheState(2)
    run(s, [0])
    with pytest.raises(PinUnderflowError):
        unpin(s, 0)


@pytest.mark.parametrize("bad", [-1, 5, "x", None])
def test_policy_out_of_range(bad):
    s = CacheState(1)
    run(s, [0])
    with pytest.raises(PolicyContractError) as err:
        access(s, req(7, 1), lambda *a: bad)
    assert err.value.seq == 7


def test_policy_pinned_victim():
    s = CacheState(2)
    run(s, [0, 1])
    pin(s, 1)
    with pytest.raises(PolicyContractError):
        access(s, req(2, 2), lambda *a: 1)


def test_block_group_link_follows_scan_interest():
    reg = ScanRegistry(group_size=4)
    s = CacheState(4)
    access(s, req(0, 5), clock, reg)
    assert s.slots[0].block_group is None
    reg.register_scan(1, 0, 0, 8)
    assert s.slots[0].block_group is not None
    reg.advance_scan(1, 7, now=1)
    assert s.slots[0].block_group is None


@settings(max_examples=60, deadline=None)
@given(blocks=st.lists(st.integers(0, 9), max_size=80), cap=st.integers(1, 6),
       ops=st.lists(st.sampled_from("RW"), min_size=80, max_size=80))
def test_bookkeeping_invariants(blocks, cap, ops):
    s = CacheState(cap)
    kinds = []
    for i, b in enumerate(blocks):
        kinds.append(access(s, req(i, b, ops[i]), clock).kind)
        s.audit()
    hits = kinds.count(OutcomeKind.HIT)
    filled = kinds.count(OutcomeKind.MISS_FILLED_EMPTY)
    evicted = kinds.count(OutcomeKind.MISS_EVICTED)
    assert hits + filled + evicted == len(blocks)
    distinct = len(set(blocks))
    if cap >= distinct:
        assert filled == distinct and evicted == 0 and hits == len(blocks) - distinct


def test_audit_detects_corruption():
    s = CacheState(2)
    run(s, [0, 1])
    s.page_table[A] = 1
    with pytest.raises(Exception):
        s.audit()


def test_random_pins_never_evicted():
    rng = random.Random(5)
    s = CacheState(8)
    for i in range(2000):
        for d in s.slots:
            if d.tag is not None and d.refcount and rng.random() < 0.3:
                unpin(s, d.id)
        for d in s.slots:
            if d.tag is not None and s.pinned_slots < 7 and rng.random() < 0.2:
                pin(s, d.id)
        access(s, req(i, rng.randrange(40)), clock)
