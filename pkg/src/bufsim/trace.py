"""Workload model: page requests, synthetic generators and the CSV trace format.

A trace file is UTF-8 CSV.  Optional ``# relation=<id> blocks=<n>`` comment
lines declare relation lengths and precede the header line::

    # relation=0 blocks=4
    seq,stream,relation,block,op,access,scan
    0,0,0,0,R,SEQ,0
"""

from __future__ import annotations

import bisect
import csv
import io
import itertools
import random
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import IO, Iterable, NamedTuple

from .errors import InvalidParameterError, TraceParseError, TraceValidationError

HEADER = ("seq", "stream", "relation", "block", "op", "access", "scan")
_RELATION_LINE = re.compile(r"^#\s*relation=(\d+)\s+blocks=(\d+)\s*$")


class Op(str, Enum):
    READ = "R"
    WRITE = "W"


class Access(str, Enum):
    SEQ = "SEQ"
    RAND = "RAND"


class PageTag(NamedTuple):
    relation: int
    block: int


@dataclass(frozen=True, slots=True)
class PageRequest:
    seq: int
    tag: PageTag
    op: Op = Op.READ
    access: Access = Access.RAND
    scan: int | None = None
    stream: int = 0

    @property
    def is_write(self) -> bool:
        return self.op is Op.WRITE


@dataclass(frozen=True)
class Trace:
    requests: tuple[PageRequest, ...] = ()
    relations: dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        if not isinstance(self.requests, tuple):
            object.__setattr__(self, "requests", tuple(self.requests))
        object.__setattr__(self, "relations", dict(self.relations))
        self.validate()

    def __len__(self) -> int:
        return len(self.requests)

    def validate(self) -> None:
        for i, req in enumerate(self.requests):
            if req.seq != i:
                raise TraceValidationError(f"request {i} has seq {req.seq}; seq must be 0..n-1")
            if req.access is Access.RAND and req.scan is not None:
                raise TraceValidationError(f"request {i}: random access cannot carry a scan id")
            rel, block = req.tag
            if rel < 0 or block < 0:
                raise TraceValidationError(f"request {i}: negative relation or block")
            length = self.relations.get(rel)
            if length is None:
                raise TraceValidationError(f"request {i}: undeclared relation {rel}")
            if block >= length:
                raise TraceValidationError(
                    f"request {i}: block {block} >= relation {rel} length {length}"
                )

    def distinct_pages(self) -> int:
        return len({r.tag for r in self.requests})

    def streams(self) -> set[int]:
        return {r.stream for r in self.requests}

    @property
    def footprint(self) -> int:
        """Total blocks across all declared relations."""
        return sum(self.relations.values())


def _require_count(name: str, value: int, minimum: int = 1) -> None:
    if not isinstance(value, int) or value < minimum:
        raise InvalidParameterError(f"{name} must be an integer >= {minimum}, got {value!r}")


@dataclass(frozen=True)
class ScanParams:
    num_relations: int = 4
    relation_blocks: int = 1000
    num_streams: int = 4
    scans_per_stream: int = 3


@dataclass(frozen=True)
class PointParams:
    relation_blocks: int = 1000
    num_requests: int = 12000
    zipf_s: float = 1.0
    write_fraction: float = 0.0


def generate_scan_workload(num_relations: int, relation_blocks: int, num_streams: int,
                           scans_per_stream: int, seed: int) -> Trace:
    """Full sequential sweeps of randomly chosen relations, one sweep after
    another per stream, with streams interleaved round-robin."""
    _require_count("num_relations", num_relations)
    _require_count("relation_blocks", relation_blocks)
    _require_count("num_streams", num_streams)
    _require_count("scans_per_stream", scans_per_stream)
    rng = random.Random(seed)
    choices = [[rng.randrange(num_relations) for _ in range(scans_per_stream)]
               for _ in range(num_streams)]

    requests = []
    seq = 0
    for sweep in range(scans_per_stream):
        for block in range(relation_blocks):
            for stream in range(num_streams):
                requests.append(PageRequest(
                    seq=seq,
                    tag=PageTag(choices[stream][sweep], block),
                    op=Op.READ,
                    access=Access.SEQ,
                    scan=stream * scans_per_stream + sweep,
                    stream=stream,
                ))
                seq += 1
    relations = {r: relation_blocks for r in range(num_relations)}
    return Trace(tuple(requests), relations)


def zipf_cdf(n: int, s: float) -> list[float]:
    weights = [1.0 / (k + 1) ** s for k in range(n)]
    total = sum(weights)
    cdf = [w / total for w in itertools.accumulate(weights)]
    cdf[-1] = 1.0
    return cdf


def generate_point_workload(relation_blocks: int, num_requests: int, zipf_s: float,
                            write_fraction: float, seed: int) -> Trace:
    """Random point lookups over relation 0, block popularity Zipf(zipf_s) by block id."""
    _require_count("relation_blocks", relation_blocks)
    _require_count("num_requests", num_requests, minimum=0)
    if not 0.0 <= write_fraction <= 1.0:
        raise InvalidParameterError(f"write_fraction must be in [0, 1], got {write_fraction}")
    if not zipf_s >= 0.0:
        raise InvalidParameterError(f"zipf_s must be >= 0, got {zipf_s}")

    rng = random.Random(seed)
    cdf = zipf_cdf(relation_blocks, zipf_s)
    last = relation_blocks - 1
    requests = []
    for seq in range(num_requests):
        block = min(bisect.bisect_right(cdf, rng.random()), last)
        op = Op.WRITE if rng.random() < write_fraction else Op.READ
        requests.append(PageRequest(seq=seq, tag=PageTag(0, block), op=op,
                                    access=Access.RAND, scan=None, stream=0))
    return Trace(tuple(requests), {0: relation_blocks})


def generate_mixed_workload(scan_params: ScanParams, point_params: PointParams,
                            ratio: float, seed: int) -> Trace:
    """Interleave a scan trace and a point trace so that ``ratio`` of the
    requests are scan requests.

    The longer side is truncated to hit the target fraction.  Point lookups
    keep their relation (0), which is also a scan target, so updates land on
    pages that scans later re-read.  They run on their own stream id, placed
    after the scan streams.
    """
    if not 0.0 <= ratio <= 1.0:
        raise InvalidParameterError(f"ratio must be in [0, 1], got {ratio}")
    if 0.0 < ratio < 1.0 and point_params.relation_blocks > scan_params.relation_blocks:
        raise InvalidParameterError("point relation_blocks must not exceed scan relation_blocks")
    if ratio == 1.0:
        return generate_scan_workload(**vars(scan_params), seed=seed)
    if ratio == 0.0:
        return generate_point_workload(**vars(point_params), seed=seed)

    scans = generate_scan_workload(**vars(scan_params), seed=seed).requests
    points = generate_point_workload(**vars(point_params), seed=seed).requests
    n_scan, n_point = len(scans), len(points)
    if n_scan / (n_scan + n_point) > ratio:
        n_scan = round(ratio * n_point / (1.0 - ratio))
    else:
        n_point = round(n_scan * (1.0 - ratio) / ratio)

    point_stream = scan_params.num_streams
    requests = []
    i = j = 0
    # error-diffusion merge keeps every prefix close to the target fraction
    while i < n_scan or j < n_point:
        take_scan = j >= n_point or (i < n_scan and i < ratio * (i + j + 1))
        if take_scan:
            r = scans[i]
            requests.append(PageRequest(len(requests), r.tag, r.op, r.access, r.scan, r.stream))
            i += 1
        else:
            r = points[j]
            requests.append(PageRequest(len(requests), r.tag, r.op, r.access, None, point_stream))
            j += 1

    relations = {r: scan_params.relation_blocks for r in range(scan_params.num_relations)}
    return Trace(tuple(requests), relations)


def write_trace(trace: Trace, dest: IO[str] | None = None) -> str:
    """Serialize ``trace``; also writes to ``dest`` when given.  Returns the text."""
    buf = io.StringIO()
    for rel in sorted(trace.relations):
        buf.write(f"# relation={rel} blocks={trace.relations[rel]}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(HEADER)
    for r in trace.requests:
        writer.writerow((r.seq, r.stream, r.tag.relation, r.tag.block, r.op.value,
                         r.access.value, "" if r.scan is None else r.scan))
    text = buf.getvalue()
    if dest is not None:
        dest.write(text)
    return text


def _int_field(value: str, name: str, lineno: int) -> int:
    try:
        out = int(value)
    except ValueError:
        raise TraceParseError(lineno, f"column {name!r}: expected integer, got {value!r}") from None
    if out < 0:
        raise TraceParseError(lineno, f"column {name!r}: negative value {out}")
    return out


def read_trace(source: IO[str] | str | Iterable[str]) -> Trace:
    """Parse the CSV trace format.  Relation lengths default to max block + 1
    when the file declares none."""
    if isinstance(source, str):
        source = io.StringIO(source)
    lines = iter(enumerate(source, start=1))

    relations: dict[int, int] = {}
    header_seen = False
    for lineno, line in lines:
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            m = _RELATION_LINE.match(stripped)
            if m:
                relations[int(m.group(1))] = int(m.group(2))
            continue
        if tuple(c.strip() for c in stripped.split(",")) != HEADER:
            raise TraceParseError(lineno, f"expected header {','.join(HEADER)!r}")
        header_seen = True
        break
    if not header_seen:
        raise TraceParseError(1, "missing header line")

    declared = bool(relations)
    requests = []
    seen_blocks: dict[int, int] = {}
    for lineno, line in lines:
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        cols = next(csv.reader([stripped]))
        if len(cols) != len(HEADER):
            raise TraceParseError(lineno, f"expected {len(HEADER)} columns, got {len(cols)}")
        seq, stream, rel, block = (_int_field(cols[k], HEADER[k], lineno) for k in range(4))
        try:
            op = Op(cols[4])
        except ValueError:
            raise TraceParseError(lineno, f"column 'op': expected R or W, got {cols[4]!r}") from None
        try:
            access = Access(cols[5])
        except ValueError:
            raise TraceParseError(lineno, f"column 'access': expected SEQ or RAND, got {cols[5]!r}") from None
        scan = None if cols[6] == "" else _int_field(cols[6], "scan", lineno)
        if access is Access.RAND and scan is not None:
            raise TraceParseError(lineno, "scan id given on a RAND request")
        if declared and rel in relations and block >= relations[rel]:
            raise TraceValidationError(
                f"line {lineno}: block {block} >= relation {rel} length {relations[rel]}"
            )
        seen_blocks[rel] = max(seen_blocks.get(rel, 0), block + 1)
        requests.append(PageRequest(seq, PageTag(rel, block), op, access, scan, stream))

    for rel, length in seen_blocks.items():
        if rel not in relations:
            if declared:
                raise TraceValidationError(f"relation {rel} used but not declared")
            relations[rel] = length
    return Trace(tuple(requests), relations)
