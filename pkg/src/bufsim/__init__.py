"""Trace-driven simulator of a PostgreSQL-style buffer pool.

Compares Clock sweep, PBM-Sampling, a clean/cold-aware sampling policy and
Belady's offline optimum under an I/O cost model that charges sequential
reads, random reads and dirty write-backs differently.
"""

from .bufferpool import (MAX_USAGE, AccessOutcome, BufferDescriptor, CacheState, OutcomeKind,
                         access, lookup, pin, unpin)
from .costmodel import (IoCostModel, RunMetrics, accumulate, avg_io_wait, cost_of, hit_rate,
                        latency_score)
from .harness import (ComparisonReport, RunReport, SimConfig, compare_policies, parse_config,
                      run_simulation)
from .policies import (POLICY_NAMES, BeladyOracle, PolicyConfig, belady_select_victim,
                       clock_select_victim, evolved_select_victim, make_policy,
                       pbm_sampling_select_victim)
from .scantrack import (GROUP_SIZE, NOT_REQUESTED, BlockGroup, ScanContext, ScanRegistry,
                        advance_scan, estimate_next_access, register_scan)
from .trace import (Access, Op, PageRequest, PageTag, PointParams, ScanParams, Trace,
                    generate_mixed_workload, generate_point_workload, generate_scan_workload,
                    read_trace, write_trace)

__version__ = "0.1.0"
