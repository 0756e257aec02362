import random
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from bufsim.trace import Access, Op, PageRequest, PageTag, Trace  # noqa: E402

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def make_trace(tags, ops=None, relation_len=None, stream=0):
    """Random-access trace over relation 0 from a list of block numbers."""
    ops = ops or ["R"] * len(tags)
    reqs = [PageRequest(i, PageTag(0, b), Op(o), Access.RAND, None, stream)
            for i, (b, o) in enumerate(zip(tags, ops))]
    length = relation_len or (max(tags) + 1 if tags else 1)
    return Trace(tuple(reqs), {0: length})


def req(seq, block, op="R", relation=0, access="RAND", scan=None, stream=0):
    return PageRequest(seq, PageTag(relation, block), Op(op), Access(access), scan, stream)


@pytest.fixture
def rng():
    return random.Random(1234)
