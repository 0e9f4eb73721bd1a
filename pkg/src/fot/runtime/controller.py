"""The controller: executes ready operations with bounded parallelism and
commits results through a single serialized authority.

Execution happens against immutable snapshots; validation and application of
mutations plus output recording happen atomically under the commit authority.
A mutation that became invalid because another commit advanced the graph is
re-validated here against the fresh state; execution results are never
discarded, only the batch is re-checked (and optionally trimmed when
``partial_commit`` is enabled).

In virtual-clock mode the controller is a deterministic event simulation: an
operation "finishes" at dispatch-time + its simulated duration, and commits
are processed in finish-time order. In real-clock mode a thread pool runs the
operations and commits happen in completion order.
"""

from __future__ import annotations

import heapq
import logging
import queue
import random
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any

from fot.cache import CacheFacade
from fot.errors import DeadlockError, OpFailedError, ValidationFailedError
from fot.graph.model import (
    EMPTY,
    ExecutionGraph,
    MutationBatch,
    READY,
    RUNNING,
    PLANNED,
    Thought,
    ThoughtMeta,
)
from fot.graph.mutation import apply_mutation, validate_mutation
from fot.graph.regions import exclusive_descendants, visible_subgraph
from fot.graph.serialize import derive_reasoning_graph
from fot.ops import OpContext, OpResult, execute_op
from fot.runtime.clock import RealClock, VirtualClock
from fot.runtime.metrics import OpMetrics, RunMetrics
from fot.runtime.scheduler import compute_ready, order_frontier

logger = logging.getLogger(__name__)

FAIL_FAST = "fail_fast"
SKIP_SUBTREE = "skip_subtree"


@dataclass
class RunConfig:
    backend: Any = None
    cache: CacheFacade | None = None
    strategy: str = "fifo"
    max_concurrency: int | None = 1  # None = unbounded
    seed: int = 0
    virtual_clock: bool = True
    failure_policy: str = FAIL_FAST
    partial_commit: bool = False
    hyperparams: dict = field(default_factory=dict)
    budget_usd: float | None = None
    interleave_seed: int | None = None
    validate_each_commit: bool = False


@dataclass
class RunResult:
    graph: ExecutionGraph
    reasoning: Any
    metrics: RunMetrics
    failed_ops: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failed_ops


class _CostMeter:
    def __init__(self):
        self.total = 0.0
        self._lock = threading.Lock()

    def add(self, amount: float) -> float:
        with self._lock:
            self.total += amount
            return self.total


class Controller:
    def __init__(self, config: RunConfig):
        self.config = config

    # -- public ---------------------------------------------------------------

    def run(self, g0: ExecutionGraph) -> RunResult:
        if not any(True for _ in g0.live_ops()):
            raise ValueError("initial graph must contain at least one operation")
        g = g0.snapshot()
        metrics = RunMetrics()
        meter = _CostMeter()
        failed: list[str] = []
        if self.config.virtual_clock:
            clock = VirtualClock()
            self._run_virtual(g, clock, metrics, meter, failed)
        else:
            clock = RealClock()
            self._run_threads(g, clock, metrics, meter, failed)
        cache_stats = (
            self.config.cache.stats.to_json() if self.config.cache is not None else None
        )
        metrics.finalize(g, clock.now_ms(), cache_stats)
        return RunResult(
            graph=g,
            reasoning=derive_reasoning_graph(g),
            metrics=metrics,
            failed_ops=failed,
        )

    # -- shared helpers ---------------------------------------------------------

    def _gather_inputs(self, g: ExecutionGraph, op_id: str) -> list[Thought]:
        node = g.ops[op_id]
        port_index = {port: i for i, port in enumerate(node.input_ports)}
        conns = sorted(
            g.incoming(op_id),
            key=lambda c: (port_index.get(c.target[1], len(port_index)), c.id),
        )
        return [c.payload for c in conns if c.payload is not EMPTY]

    def _make_context(self, snapshot: ExecutionGraph, op_id: str, clock, meter: _CostMeter) -> OpContext:
        return OpContext(
            run_seed=self.config.seed,
            op_id=op_id,
            backend=self.config.backend,
            cache=self.config.cache,
            hyperparams=dict(self.config.hyperparams),
            graph_view=visible_subgraph(snapshot, op_id),
            clock_now=clock.now_ms,
            budget_usd=self.config.budget_usd,
            charge=meter.add,
        )

    def _execute(self, snapshot: ExecutionGraph, op_id: str, clock, meter: _CostMeter):
        ctx = self._make_context(snapshot, op_id, clock, meter)
        node = snapshot.ops[op_id]
        inputs = self._gather_inputs(snapshot, op_id)
        try:
            result = execute_op(node, inputs, ctx)
            return result, None, ctx
        except Exception as exc:  # op failures are routed through policy
            return None, exc, ctx

    def _commit(
        self,
        g: ExecutionGraph,
        op_id: str,
        result: OpResult | None,
        error: Exception | None,
        ctx: OpContext,
        metrics: RunMetrics,
        failed: list[str],
    ) -> None:
        if error is None:
            mutation = result.mutation
            if mutation is not None and not mutation.is_empty():
                violations = validate_mutation(g, mutation)
                if violations and self.config.partial_commit:
                    trimmed = _drop_violating_edits(mutation, violations)
                    if not validate_mutation(g, trimmed):
                        logger.warning(
                            "partial commit for %s dropped %d violating edit(s)",
                            op_id, len(violations),
                        )
                        mutation = trimmed
                        violations = []
                if violations:
                    error = ValidationFailedError(violations)
                else:
                    apply_mutation(g, mutation)
        if error is not None:
            self._handle_failure(g, op_id, error, ctx, metrics, failed)
            return
        thoughts = {
            port: Thought.make(
                f"{op_id}:{port}",
                value,
                ThoughtMeta(
                    producer_op_id=op_id,
                    created_step=g.step + 1,
                    cost_usd=result.cost_usd,
                    duration_ms=result.duration_ms,
                ),
            )
            for port, value in result.outputs.items()
        }
        g.record_outputs(op_id, thoughts)
        metrics.per_op[op_id] = OpMetrics(
            duration_ms=result.duration_ms,
            cost_usd=result.cost_usd,
            cache_hit=result.cache_hit,
            backend_calls=ctx.backend_calls,
        )
        if self.config.validate_each_commit:
            g.check_invariants()

    def _handle_failure(
        self,
        g: ExecutionGraph,
        op_id: str,
        error: Exception,
        ctx: OpContext,
        metrics: RunMetrics,
        failed: list[str],
    ) -> None:
        if self.config.failure_policy == FAIL_FAST:
            raise OpFailedError(op_id, error)
        logger.warning("operation %s failed, skipping its exclusive subtree: %s", op_id, error)
        excl = exclusive_descendants(g, op_id)
        if excl:
            apply_mutation(g, MutationBatch(actor=op_id, remove_ops=sorted(excl)))
        marker = {"_dead": True, "_failed": True, "error": str(error)}
        node = g.ops[op_id]
        ports = set(node.output_ports) | {c.source[1] for c in g.outgoing(op_id)}
        thoughts = {
            port: Thought.make(
                f"{op_id}:{port}",
                marker,
                ThoughtMeta(producer_op_id=op_id, created_step=g.step + 1),
            )
            for port in ports
        }
        g.record_outputs(op_id, thoughts)
        metrics.per_op[op_id] = OpMetrics(
            duration_ms=ctx.duration_ms,
            cost_usd=ctx.cost_usd,
            backend_calls=ctx.backend_calls,
            failed=True,
        )
        failed.append(op_id)
        if self.config.validate_each_commit:
            g.check_invariants()

    def _check_deadlock(self, g: ExecutionGraph) -> None:
        stuck = [n.id for n in g.live_ops() if n.status == PLANNED]
        if stuck:
            raise DeadlockError(stuck)

    def _capacity(self, in_flight: int) -> bool:
        limit = self.config.max_concurrency
        return limit is None or in_flight < limit

    # -- virtual-clock event simulation ------------------------------------------

    def _run_virtual(self, g, clock, metrics, meter, failed) -> None:
        frontier: list[str] = []
        seen: set[str] = set()
        events: list[tuple[float, float, int, str, Any, Any, OpContext]] = []
        seq = 0
        tie_rng = (
            random.Random(self.config.interleave_seed)
            if self.config.interleave_seed is not None
            else None
        )

        def refill() -> None:
            nonlocal seq
            for op_id in sorted(compute_ready(g) - seen):
                frontier.append(op_id)
                seen.add(op_id)
            while frontier and self._capacity(len(events)):
                ordered = order_frontier(g, frontier, self.config.strategy)
                op_id = ordered[0]
                frontier.remove(op_id)
                g.set_status(op_id, READY)
                g.set_status(op_id, RUNNING)
                snapshot = g.snapshot()
                result, error, ctx = self._execute(snapshot, op_id, clock, meter)
                duration = result.duration_ms if result is not None else ctx.duration_ms
                tie = tie_rng.random() if tie_rng is not None else 0.0
                heapq.heappush(
                    events, (clock.now_ms() + duration, tie, seq, op_id, result, error, ctx)
                )
                seq += 1

        refill()
        while events:
            finish, _, _, op_id, result, error, ctx = heapq.heappop(events)
            clock.advance_to(finish)
            self._commit(g, op_id, result, error, ctx, metrics, failed)
            refill()
        self._check_deadlock(g)

    # -- real-clock thread pool ----------------------------------------------------

    def _run_threads(self, g, clock, metrics, meter, failed) -> None:
        frontier: list[str] = []
        seen: set[str] = set()
        done_q: queue.Queue = queue.Queue()
        in_flight = 0
        workers = self.config.max_concurrency or 32
        with ThreadPoolExecutor(max_workers=workers) as pool:

            def job(op_id: str, snapshot: ExecutionGraph):
                started = clock.now_ms()
                result, error, ctx = self._execute(snapshot, op_id, clock, meter)
                elapsed = int(clock.now_ms() - started)
                if result is not None and result.duration_ms == 0:
                    result.duration_ms = elapsed
                done_q.put((op_id, result, error, ctx))

            def refill() -> int:
                count = 0
                for op_id in sorted(compute_ready(g) - seen):
                    frontier.append(op_id)
                    seen.add(op_id)
                while frontier and self._capacity(in_flight + count):
                    ordered = order_frontier(g, frontier, self.config.strategy)
                    op_id = ordered[0]
                    frontier.remove(op_id)
                    g.set_status(op_id, READY)
                    g.set_status(op_id, RUNNING)
                    pool.submit(job, op_id, g.snapshot())
                    count += 1
                return count

            in_flight = refill()
            while in_flight:
                op_id, result, error, ctx = done_q.get()
                in_flight -= 1
                self._commit(g, op_id, result, error, ctx, metrics, failed)
                in_flight += refill()
        self._check_deadlock(g)


def _drop_violating_edits(m: MutationBatch, violations) -> MutationBatch:
    """Intersection-safe fallback: drop exactly the edits named in violations."""
    bad: set[str] = set()
    for v in violations:
        bad.update(v.elements)
    return MutationBatch(
        actor=m.actor,
        add_ops=[n for n in m.add_ops if n.id not in bad],
        remove_ops=[o for o in m.remove_ops if o not in bad],
        add_conns=[c for c in m.add_conns if c.id not in bad],
        remove_conns=[c for c in m.remove_conns if c not in bad],
        rewire=[(cid, src) for cid, src in m.rewire if cid not in bad],
    )


def run(g0: ExecutionGraph, config: RunConfig) -> RunResult:
    """Execute the graph until no planned or ready operations remain."""
    return Controller(config).run(g0)
