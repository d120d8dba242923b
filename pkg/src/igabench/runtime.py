"""Parallel execution strategies for mesh-wide Gram matrix integration.

Four strategies under a single worker-count knob:

* ``sequential``: one worker loops over elements.
* ``over_elements``: the element list is split into contiguous static
  chunks, one per worker; each worker integrates its chunk with the
  sequential kernel.
* ``within_element``: elements are visited sequentially; inside each
  element the workers cooperate, either on pair ranges (classical) or on
  the Foata classes of the task graph with a barrier between consecutive
  classes (sum factorization).
* ``combined``: ``workers`` outer element workers, each driving
  ``inner_workers`` intra-element workers.

All strategies produce bitwise identical global matrices: every matrix
entry, buffer slot and reduction is owned by exactly one task and every
reduction runs in a fixed index order, so the result does not depend on
the number of workers or on scheduling.  Kernels release the GIL, so
threads give genuine parallelism.
"""

import os
import threading
import time
import warnings
from concurrent.futures import FIRST_EXCEPTION, ThreadPoolExecutor, wait
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import taskgraph
from .assembly import GlobalGram, assemble
from .integrators import (
    ElementMatrix,
    SumFactBuffers,
    canonical_pairs,
    classical_kernel,
    default_rule,
    flop_count,
    sumfact_kernel,
)
from .mesh import ElementId, element_list
from .splines import KnotVector, basis_value_table, eval_basis, make_knot_vector

METHODS = ("classical", "sumfact")
STRATEGIES = ("sequential", "over_elements", "within_element", "combined")

BARRIER_TIMEOUT = 300.0  # seconds; expiry signals a deadlocked class


@dataclass(frozen=True)
class RunConfig:
    """One benchmark configuration.

    ``workers`` is the parallelism knob of the chosen strategy; for the
    combined strategy it is the outer (element) worker count and
    ``inner_workers`` the intra-element worker count.  ``quad_points``
    defaults to ``degree + 1`` points per direction.
    """

    method: str
    strategy: str
    mesh: int
    degree: int
    workers: int = 1
    repetitions: int = 1
    quad_points: int | None = None
    inner_workers: int = 1
    chunking: str = "static"

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        if self.mesh < 1 or self.degree < 0:
            raise ValueError("mesh must be >= 1 and degree >= 0")
        if self.workers < 1 or self.inner_workers < 1:
            raise ValueError("worker counts must be >= 1")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if self.chunking not in ("static", "dynamic"):
            raise ValueError(f"chunking must be static or dynamic, got {self.chunking!r}")

    @property
    def points(self) -> int:
        return self.degree + 1 if self.quad_points is None else self.quad_points


@dataclass
class RunResult:
    config: RunConfig
    gram: GlobalGram
    times: list[float]
    flops: int


@dataclass
class ExecutionTrace:
    """Instrumentation of one within-element run (sum factorization only)."""

    graph: "taskgraph.DependencyGraph | None" = None
    completion_order: list[int] = field(default_factory=list)
    barriers: int = 0
    intra_class_syncs: int = 0  # by construction no task waits inside a class


def grams_bitwise_equal(a: GlobalGram, b: GlobalGram) -> bool:
    """True iff the two assembled matrices are bitwise identical."""
    ma, mb = a.matrix, b.matrix
    return (
        ma.shape == mb.shape
        and np.array_equal(ma.indptr, mb.indptr)
        and np.array_equal(ma.indices, mb.indices)
        and ma.data.tobytes() == mb.data.tobytes()
    )


def _static_chunks(n_items: int, n_chunks: int) -> list[tuple[int, int]]:
    """Contiguous near-even (lo, hi) ranges; empty ranges are dropped."""
    bounds = np.linspace(0, n_items, n_chunks + 1).astype(int)
    return [(int(lo), int(hi)) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]


class _MeshContext:
    """Per-run precomputation shared by all strategies."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.kv = make_knot_vector(cfg.mesh, cfg.degree)
        self.elements = element_list(cfg.mesh)
        self.rule0 = default_rule(self.kv, (0, 0, 0), cfg.points)
        self.weights = self.rule0.weights[0]
        self.jacobian = self.rule0.jacobian
        m = cfg.degree + 1
        self.n_local = m**3
        self.rows, self.cols = canonical_pairs(self.n_local)
        self.tables: list[np.ndarray] | None = None

    def build_tables(self) -> None:
        """Evaluate the per-1D-element basis tables (part of the integration work)."""
        ref_nodes, _ = np.polynomial.legendre.leggauss(self.cfg.points)
        h = 1.0 / self.cfg.mesh
        self.tables = [
            basis_value_table(self.kv, e, e * h + (ref_nodes + 1.0) * (h / 2.0))
            for e in range(self.cfg.mesh)
        ]

    def element_tables(self, alpha: ElementId) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.tables[alpha[0]], self.tables[alpha[1]], self.tables[alpha[2]]


class IntegrationRuntime:
    """Owns the worker pool for one benchmark run.

    ``run`` may be called repeatedly but not concurrently; a second caller
    is rejected while a run is active.  The pool is sized to the hardware
    concurrency: asking for more workers than cores keeps the work
    partition at the requested width (results are identical either way)
    but avoids oversubscribing threads, with a warning.
    """

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self._active = threading.Lock()
        hw = os.cpu_count() or 1
        wanted = cfg.workers if cfg.strategy != "combined" else cfg.workers * cfg.inner_workers
        if wanted > hw:
            warnings.warn(
                f"requested {wanted} workers exceeds hardware concurrency {hw}; "
                "pool capped, work partition kept",
                RuntimeWarning,
                stacklevel=2,
            )
        self._pool_size = max(1, min(cfg.workers, hw))

    def run(self) -> RunResult:
        if not self._active.acquire(blocking=False):
            raise RuntimeError("run_integration is already active on this runtime")
        try:
            return self._run_locked()
        finally:
            self._active.release()

    def _run_locked(self) -> RunResult:
        cfg = self.cfg
        ctx = _MeshContext(cfg)
        n_el = len(ctx.elements)
        out = np.zeros((n_el, ctx.n_local, ctx.n_local))
        times: list[float] = []

        pool = ThreadPoolExecutor(max_workers=self._pool_size) if cfg.strategy != "sequential" else None
        inner_pools: list[ThreadPoolExecutor] = []
        try:
            if cfg.strategy == "combined" and cfg.inner_workers > 1:
                inner_pools = [
                    ThreadPoolExecutor(max_workers=min(cfg.inner_workers, os.cpu_count() or 1))
                    for _ in range(cfg.workers)
                ]
            for _ in range(cfg.repetitions):
                t0 = time.perf_counter()
                ctx.build_tables()
                self._integrate_all(ctx, out, pool, inner_pools)
                times.append(time.perf_counter() - t0)
        finally:
            if pool is not None:
                pool.shutdown(wait=True)
            for ip in inner_pools:
                ip.shutdown(wait=True)

        per_element = flop_count(cfg.method, cfg.degree, cfg.points)
        mats = (
            (alpha, ElementMatrix(alpha, ctx.n_local, out[e], per_element))
            for e, alpha in enumerate(ctx.elements)
        )
        gram = assemble(mats, cfg.mesh, cfg.degree)
        return RunResult(config=cfg, gram=gram, times=times, flops=per_element * n_el)

    # ------------------------------------------------------------------

    def _integrate_all(self, ctx, out, pool, inner_pools) -> None:
        cfg = self.cfg
        if cfg.strategy == "sequential":
            self._chunk_sequential(ctx, out, 0, len(ctx.elements))
        elif cfg.strategy == "over_elements":
            self._over_elements(ctx, out, pool)
        elif cfg.strategy == "within_element":
            for e in range(len(ctx.elements)):
                _within_element(ctx, ctx.elements[e], out[e], cfg.method, cfg.workers, pool)
        else:  # combined
            chunks = _static_chunks(len(ctx.elements), cfg.workers)
            futs = []
            for w, (lo, hi) in enumerate(chunks):
                inner = inner_pools[w] if inner_pools else None
                futs.append(pool.submit(self._chunk_combined, ctx, out, lo, hi, inner))
            _await(futs)

    def _chunk_sequential(self, ctx, out, lo, hi) -> None:
        cfg = self.cfg
        w = ctx.weights
        if cfg.method == "sumfact":
            buf = SumFactBuffers.allocate(cfg.degree, cfg.points)
            for e in range(lo, hi):
                bx, by, bz = ctx.element_tables(ctx.elements[e])
                buf.D[:] = 0.0
                buf.C[:] = 0.0
                sumfact_kernel(bx, by, bz, w, w, w, ctx.jacobian,
                               buf.D, buf.C, ctx.rows, ctx.cols, out[e])
        else:
            npairs = len(ctx.rows)
            for e in range(lo, hi):
                bx, by, bz = ctx.element_tables(ctx.elements[e])
                classical_kernel(bx, by, bz, w, w, w, ctx.jacobian,
                                 ctx.rows, ctx.cols, 0, npairs, out[e])

    def _over_elements(self, ctx, out, pool) -> None:
        cfg = self.cfg
        if cfg.chunking == "static":
            chunks = _static_chunks(len(ctx.elements), cfg.workers)
        else:
            # dynamic mode: fine-grained chunks stolen from a shared queue
            grain = max(1, len(ctx.elements) // (cfg.workers * 8))
            chunks = _static_chunks(len(ctx.elements), max(1, len(ctx.elements) // grain))
        futs = [pool.submit(self._chunk_sequential, ctx, out, lo, hi) for lo, hi in chunks]
        _await(futs)

    def _chunk_combined(self, ctx, out, lo, hi, inner_pool) -> None:
        cfg = self.cfg
        if cfg.inner_workers == 1:
            self._chunk_sequential(ctx, out, lo, hi)
            return
        for e in range(lo, hi):
            _within_element(ctx, ctx.elements[e], out[e], cfg.method,
                            cfg.inner_workers, inner_pool)


def _await(futures) -> None:
    done, pending = wait(futures, timeout=BARRIER_TIMEOUT, return_when=FIRST_EXCEPTION)
    if pending:
        raise RuntimeError("barrier timeout: workers did not complete a phase")
    for f in done:
        f.result()


def run_integration(cfg: RunConfig) -> RunResult:
    """Integrate the whole mesh under ``cfg`` and assemble the global Gram.

    Returns the assembled matrix, the wall time of each repetition
    (monotonic clock around the integration region only) and the modelled
    multiply-add count.  The matrix is bitwise identical to a sequential
    run of the same method.
    """
    return IntegrationRuntime(cfg).run()


# ----------------------------------------------------------------------
# within-element execution


def _within_element(ctx, alpha, out, method, workers, pool, trace=None) -> None:
    if method == "classical":
        npairs = len(ctx.rows)
        w = ctx.weights
        bx, by, bz = ctx.element_tables(alpha)
        chunks = _static_chunks(npairs, workers)
        if pool is None or len(chunks) == 1:
            classical_kernel(bx, by, bz, w, w, w, ctx.jacobian,
                             ctx.rows, ctx.cols, 0, npairs, out)
        else:
            futs = [
                pool.submit(classical_kernel, bx, by, bz, w, w, w, ctx.jacobian,
                            ctx.rows, ctx.cols, lo, hi, out)
                for lo, hi in chunks
            ]
            _await(futs)
    else:
        _FoataExecutor(ctx, alpha, workers, pool, trace).run(out)


@lru_cache(maxsize=None)
def _product_meta(p: int, q: int):
    """Per-direction pair/point index arrays for vectorized class execution."""
    m = p + 1
    n = m**3
    rows, cols = canonical_pairs(n)
    npairs = len(rows)
    P = q**3
    t_all = np.repeat(np.arange(npairs), P)
    n_all = np.tile(np.arange(P), npairs)
    comp = {
        1: n_all // (q * q),
        2: (n_all // q) % q,
        3: n_all % q,
    }
    offsets = {}
    for d in (1, 2, 3):
        shift = (m * m, m, 1)[d - 1]
        offsets[d] = ((rows // shift) % m, (cols // shift) % m)
    return t_all, comp, offsets, rows, cols


class _FoataExecutor:
    """Barrier-synchronised execution of the sum-factorization task classes.

    Classes ``0..p`` evaluate the recursion levels and the Jacobian;
    classes ``p+1..p+6`` alternate product and reduction tasks per
    direction.  Within a class the tasks are split into ``workers``
    contiguous batches that write disjoint slots, so no synchronisation is
    needed until the barrier at the class boundary.  Slot values and
    reduction orders replicate the sequential kernel exactly, which makes
    the result bitwise equal to it for any worker count.
    """

    def __init__(self, ctx, alpha, workers, pool, trace: ExecutionTrace | None):
        self.ctx = ctx
        self.alpha = alpha
        self.workers = workers
        self.pool = pool
        self.trace = trace
        self.p = ctx.cfg.degree
        self.q = ctx.cfg.points
        self.m = self.p + 1
        self.P = self.q**3
        self.graph = None
        self.members = None
        if trace is not None:
            self.graph = taskgraph.build_graph(alpha, self.p, self.P)
            trace.graph = self.graph
            self.members = self.graph.class_members()

    def run(self, out: np.ndarray) -> None:
        ctx, alpha = self.ctx, self.alpha
        p, q, m, P = self.p, self.q, self.m, self.P
        t_all, comp, offsets, rows, cols = _product_meta(p, q)
        npairs = len(rows)
        w = ctx.weights
        jac = ctx.jacobian
        ref_nodes, _ = np.polynomial.legendre.leggauss(q)
        h = 1.0 / ctx.cfg.mesh

        cox_slots = np.zeros((3, m, q))
        jac_slots = np.zeros(P)
        U = {d: np.zeros((npairs, P)) for d in (1, 2, 3)}
        R = {d: np.zeros(npairs) for d in (1, 2, 3)}
        stride = {1: q * q, 2: q, 3: 1}

        kv = ctx.kv
        axis_nodes = [alpha[d] * h + (ref_nodes + 1.0) * (h / 2.0) for d in range(3)]

        def exec_cox(r, lo, hi):
            # task order within the class: direction, then function, then point
            per_dir = (p + 1) * P
            for idx in range(lo, hi):
                d = idx // per_dir + 1
                rem = idx % per_dir
                f_off = rem // P
                n = rem % P
                k = (n // (q * q), (n // q) % q, n % q)[d - 1]
                val = eval_basis(kv, alpha[d - 1] + f_off, r, axis_nodes[d - 1][k])
                if r == p:
                    cox_slots[d - 1, f_off, k] = val

        def exec_class_p(lo, hi):
            n_cox = 3 * (p + 1) * P
            if lo < n_cox:
                exec_cox(p, lo, min(hi, n_cox))
            if hi > n_cox:
                jac_slots[max(lo - n_cox, 0):hi - n_cox] = jac

        def exec_product(d, lo, hi):
            t = t_all[lo:hi]
            k = comp[d][lo:hi]
            oi, oj = offsets[d]
            T = cox_slots[d - 1]  # order-p values produced by the cox classes
            if d == 1:
                vals = T[oi[t], k] * T[oj[t], k] * w[k] * jac
            else:
                vals = T[oi[t], k] * T[oj[t], k] * R[d - 1][t] * w[k]
            U[d].reshape(-1)[lo:hi] = vals

        def exec_reduce(d, lo, hi):
            ts = np.arange(lo, hi)
            acc = np.zeros(hi - lo)
            Ud = U[d]
            s = stride[d]
            for k in range(self.q):
                acc += Ud[ts, k * s]
            R[d][ts] = acc
            if d == 3:
                out[rows[ts], cols[ts]] = acc
                out[cols[ts], rows[ts]] = acc

        class_sizes = (
            [3 * (p + 1) * P] * p
            + [3 * (p + 1) * P + P]
            + [npairs * P, npairs, npairs * P, npairs, npairs * P, npairs]
        )
        runners = (
            [(lambda lo, hi, r=r: exec_cox(r, lo, hi)) for r in range(p)]
            + [exec_class_p]
            + [
                lambda lo, hi: exec_product(1, lo, hi),
                lambda lo, hi: exec_reduce(1, lo, hi),
                lambda lo, hi: exec_product(2, lo, hi),
                lambda lo, hi: exec_reduce(2, lo, hi),
                lambda lo, hi: exec_product(3, lo, hi),
                lambda lo, hi: exec_reduce(3, lo, hi),
            ]
        )

        for c, (size, runner) in enumerate(zip(class_sizes, runners)):
            chunks = _static_chunks(size, self.workers)
            if self.pool is None or len(chunks) <= 1:
                for lo, hi in chunks:
                    runner(lo, hi)
                    self._record(c, lo, hi)
            else:
                futs = {self.pool.submit(runner, lo, hi): (lo, hi) for lo, hi in chunks}
                done, pending = wait(futs, timeout=BARRIER_TIMEOUT, return_when=FIRST_EXCEPTION)
                if pending:
                    raise RuntimeError("barrier timeout inside Foata class execution")
                for f in done:
                    f.result()
                for f in done:
                    self._record(c, *futs[f])
            if self.trace is not None and c + 1 < len(class_sizes):
                self.trace.barriers += 1

    def _record(self, c, lo, hi) -> None:
        if self.trace is not None:
            self.trace.completion_order.extend(self.members[c][lo:hi].tolist())


def run_within_element(
    alpha: ElementId,
    kv: KnotVector,
    method: str,
    workers: int,
    points: int | None = None,
    trace: ExecutionTrace | None = None,
) -> ElementMatrix:
    """Integrate one element with intra-element parallelism.

    For sum factorization the Foata classes run in order with a barrier
    between consecutive classes; passing ``trace`` records the observed
    completion order against the element's dependency graph.
    """
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}")
    if trace is not None and method != "sumfact":
        raise ValueError("execution traces are only defined for the sum factorization graph")
    cfg = RunConfig(method=method, strategy="within_element", mesh=kv.elements,
                    degree=kv.degree, workers=workers, quad_points=points)
    ctx = _MeshContext(cfg)
    ctx.build_tables()
    out = np.zeros((ctx.n_local, ctx.n_local))
    pool = ThreadPoolExecutor(max_workers=min(workers, os.cpu_count() or 1)) if workers > 1 else None
    try:
        _within_element(ctx, alpha, out, method, workers, pool, trace)
    finally:
        if pool is not None:
            pool.shutdown(wait=True)
    return ElementMatrix(alpha, ctx.n_local, out, flop_count(method, kv.degree, cfg.points))
