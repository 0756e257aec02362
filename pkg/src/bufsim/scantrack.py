"""Scan registry, block groups and the next-access estimator.

Time is measured in request ticks (the global request ordinal).  A scan's
speed is an EWMA of observed blocks per tick, so with k interleaved streams a
scan typically settles near 1/k.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import InvalidParameterError, InvalidStateError
from .trace import PageTag

GROUP_SIZE = 128
SPEED_ALPHA = 0.25
MIN_SPEED = 1e-6


class _NotRequested:
    __slots__ = ()

    def __repr__(self):
        return "NOT_REQUESTED"

    def __reduce__(self):
        return "NOT_REQUESTED"


NOT_REQUESTED = _NotRequested()


@dataclass(slots=True)
class ScanContext:
    scan_id: int
    relation: int
    start: int
    length: int
    position: int
    speed: float = 1.0
    last_tick: int = 0
    observations: int = 1
    active: bool = True

    @property
    def end(self) -> int:
        return self.start + self.length - 1


@dataclass(eq=False, slots=True)
class BlockGroup:
    relation: int
    group_index: int
    interested_scans: set = field(default_factory=set)


class ScanRegistry:
    """Active scans plus per-(relation, group) interest sets.

    Group objects are created once and kept for the life of the registry so
    buffer descriptors can hold a stable handle to them.
    """

    def __init__(self, group_size: int = GROUP_SIZE, alpha: float = SPEED_ALPHA,
                 per_group_estimates: bool = False):
        if group_size < 1:
            raise InvalidParameterError("group_size must be >= 1")
        if not 0.0 < alpha <= 1.0:
            raise InvalidParameterError("alpha must be in (0, 1]")
        self.group_size = group_size
        self.alpha = alpha
        self.per_group_estimates = per_group_estimates
        self.scans: dict[int, ScanContext] = {}
        self.groups: dict[tuple[int, int], BlockGroup] = {}

    def group(self, relation: int, group_index: int) -> BlockGroup:
        key = (relation, group_index)
        g = self.groups.get(key)
        if g is None:
            g = self.groups[key] = BlockGroup(relation, group_index)
        return g

    def group_for(self, tag: PageTag) -> BlockGroup:
        return self.group(tag.relation, tag.block // self.group_size)

    def is_active(self, scan_id: int) -> bool:
        sc = self.scans.get(scan_id)
        return sc is not None and sc.active

    def active_scans(self) -> list[ScanContext]:
        return [sc for sc in self.scans.values() if sc.active]

    def register_scan(self, scan_id: int, relation: int, start_block: int, length: int,
                      now: int = 0) -> None:
        if scan_id in self.scans:
            raise InvalidStateError(f"scan {scan_id} already registered")
        if length < 1:
            raise InvalidParameterError(f"scan length must be >= 1, got {length}")
        if start_block < 0:
            raise InvalidParameterError(f"start_block must be >= 0, got {start_block}")
        sc = ScanContext(scan_id, relation, start_block, length, start_block, last_tick=now)
        self.scans[scan_id] = sc
        gs = self.group_size
        for gi in range(start_block // gs, sc.end // gs + 1):
            self.group(relation, gi).interested_scans.add(scan_id)
        if sc.position == sc.end:
            self._finish(sc)

    def advance_scan(self, scan_id: int, block: int, now: int) -> None:
        sc = self.scans.get(scan_id)
        if sc is None or not sc.active:
            raise InvalidStateError(f"scan {scan_id} is not active")
        if block < sc.position:
            raise InvalidStateError(
                f"scan {scan_id} cannot move backwards ({sc.position} -> {block})"
            )
        if block > sc.end:
            raise InvalidStateError(f"scan {scan_id} block {block} beyond its end {sc.end}")
        dt = now - sc.last_tick
        if dt > 0:
            observed = (block - sc.position) / dt
            sc.speed = max(sc.speed + self.alpha * (observed - sc.speed), MIN_SPEED)
            sc.observations += 1
            sc.last_tick = now
        gs = self.group_size
        old_group = sc.position // gs
        sc.position = block
        if block == sc.end:
            self._finish(sc)
            return
        # groups whose last block is now at or behind the scan position
        for gi in range(old_group, (block + 1) // gs):
            g = self.groups.get((sc.relation, gi))
            if g is not None:
                g.interested_scans.discard(scan_id)

    def _finish(self, sc: ScanContext) -> None:
        sc.active = False
        gs = self.group_size
        for gi in range(sc.start // gs, sc.end // gs + 1):
            g = self.groups.get((sc.relation, gi))
            if g is not None:
                g.interested_scans.discard(sc.scan_id)

    def estimate(self, tag: PageTag, now: int | None = None):
        """Ticks until some active scan reaches ``tag``, or NOT_REQUESTED.

        ``now`` is accepted for interface symmetry; positions are refreshed on
        every advance so the estimate does not extrapolate.
        """
        rel, block = tag
        g = self.groups.get((rel, block // self.group_size))
        if g is None or not g.interested_scans:
            return NOT_REQUESTED
        best = None
        scans = self.scans
        gstart = g.group_index * self.group_size
        gend = gstart + self.group_size - 1
        for sid in g.interested_scans:
            sc = scans[sid]
            pos = sc.position
            if self.per_group_estimates:
                if gend <= pos or gstart > sc.end:
                    continue
                t = max(gstart - pos, 0) / sc.speed
            else:
                if block <= pos or block > sc.end:
                    continue
                t = (block - pos) / sc.speed
            if best is None or t < best:
                best = t
        return NOT_REQUESTED if best is None else best


def register_scan(registry: ScanRegistry, scan_id: int, relation: int, start_block: int,
                  length: int, now: int = 0) -> None:
    registry.register_scan(scan_id, relation, start_block, length, now)


def advance_scan(registry: ScanRegistry, scan_id: int, block: int, now: int) -> None:
    registry.advance_scan(scan_id, block, now)


def estimate_next_access(registry: ScanRegistry, tag: PageTag, now: int | None = None):
    return registry.estimate(tag, now)
