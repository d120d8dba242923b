"""Task alphabet, Diekert dependency graph and Foata classes for one element.

The integration of one element by sum factorization is decomposed into four
task kinds:

* ``cox``: evaluate one 1D basis function of a given order at one quadrature
  point, along one direction (the recursion step).
* ``jacobian``: evaluate the element Jacobian at one quadrature point.
* ``product``: multiply the two direction-``d`` basis values of a canonical
  function pair at one quadrature point with the previous stage's value
  (the Jacobian for direction 1).
* ``reduce``: sum the direction-``d`` products of a pair over the quadrature
  index of that direction.

Direct dependencies (the covering edges of the dependency relation) join
cox recursion levels, feed order-``p`` cox values and the Jacobian into the
products, products into their reduce, and each direction's reduce into the
next direction's products.  Tasks are scheduled in ``p + 7`` barrier
classes: cox order ``r`` in class ``r``, order ``p`` together with the
Jacobian tasks in class ``p``, then alternating product/reduce classes
``p+1 .. p+6`` for directions 1, 2, 3.

Quadrature points carry a zero-based flat index ``n`` over the lexicographic
``(k1, k2, k3)`` grid; products are indexed by the full point even though a
direction-``d`` product only depends on coordinate ``d``, mirroring the
source formulation.
"""

from dataclasses import dataclass

import numpy as np

from .integrators import canonical_pairs
from .mesh import ElementId


@dataclass(frozen=True)
class Task:
    """One node of the dependency graph; unused index fields are ``None``."""

    kind: str
    element: ElementId
    direction: int | None = None
    order: int | None = None
    func: int | None = None
    pair: tuple[int, int] | None = None
    point: int | None = None

    def label(self) -> str:
        if self.kind == "cox":
            return f"cox d{self.direction} r{self.order} f{self.func} n{self.point}"
        if self.kind == "jacobian":
            return f"jac n{self.point}"
        if self.kind == "product":
            return f"prod d{self.direction} ({self.pair[0]},{self.pair[1]}) n{self.point}"
        return f"red d{self.direction} ({self.pair[0]},{self.pair[1]})"


class DependencyGraph:
    """Immutable task set with direct-dependency edges and Foata classes."""

    def __init__(self, tasks: list[Task], edges: np.ndarray, p: int, num_points: int):
        self.tasks = tasks
        self.edges = edges
        self.p = p
        self.num_points = num_points
        self.task_ids = {t: i for i, t in enumerate(tasks)}
        self.classes = foata_classes(self)
        self._edges_by_src_class: tuple[np.ndarray, list[np.ndarray]] | None = None

    @property
    def n_tasks(self) -> int:
        return len(self.tasks)

    @property
    def n_classes(self) -> int:
        return self.p + 7

    def class_members(self) -> list[np.ndarray]:
        """Task ids grouped by Foata class, each group in id order."""
        out = []
        for c in range(self.n_classes):
            out.append(np.flatnonzero(self.classes == c))
        return out

    def edges_by_source_class(self) -> tuple[np.ndarray, list[np.ndarray]]:
        """Edges sorted by the source task's class, sliced per class (cached)."""
        if self._edges_by_src_class is None:
            if len(self.edges) == 0:
                self._edges_by_src_class = (self.edges, [self.edges] * self.n_classes)
            else:
                order = np.argsort(self.classes[self.edges[:, 0]], kind="stable")
                sorted_edges = self.edges[order]
                src_classes = self.classes[sorted_edges[:, 0]]
                slices = []
                for c in range(self.n_classes):
                    lo = np.searchsorted(src_classes, c, side="left")
                    hi = np.searchsorted(src_classes, c, side="right")
                    slices.append(sorted_edges[lo:hi])
                self._edges_by_src_class = (sorted_edges, slices)
        return self._edges_by_src_class


def _pair_offsets(pair: tuple[int, int], m: int, d: int) -> tuple[int, int]:
    """Direction-``d`` local offsets of the two members of a canonical pair."""
    row, col = pair
    decode = lambda v: (v // (m * m), (v // m) % m, v % m)
    return decode(row)[d - 1], decode(col)[d - 1]


def build_alphabet(alpha: ElementId, p: int, num_points: int) -> list[Task]:
    """All tasks for integrating element ``alpha`` at degree ``p``.

    ``num_points`` is the total quadrature point count ``P`` of the element.
    Cox tasks cover the ``p + 1`` supported function indices per direction
    at every recursion order; product and reduce tasks exist for each
    canonical local pair in each direction.
    """
    if p < 0 or num_points < 1:
        raise ValueError("degree must be >= 0 and point count >= 1")
    m = p + 1
    rows, cols = canonical_pairs(m**3)
    tasks: list[Task] = []
    for r in range(p + 1):
        for d in (1, 2, 3):
            base = alpha[d - 1]
            for f in range(base, base + p + 1):
                for n in range(num_points):
                    tasks.append(Task("cox", alpha, direction=d, order=r, func=f, point=n))
    for n in range(num_points):
        tasks.append(Task("jacobian", alpha, point=n))
    for d in (1, 2, 3):
        for row, col in zip(rows, cols):
            pair = (int(row), int(col))
            for n in range(num_points):
                tasks.append(Task("product", alpha, direction=d, pair=pair, point=n))
        for row, col in zip(rows, cols):
            tasks.append(Task("reduce", alpha, direction=d, pair=(int(row), int(col))))
    return tasks


def build_dependencies(tasks: list[Task]) -> DependencyGraph:
    """Materialize the direct-dependency edges over a full task alphabet."""
    ids = {t: i for i, t in enumerate(tasks)}
    if not tasks:
        raise ValueError("empty task set")
    alpha = tasks[0].element
    p = max((t.order for t in tasks if t.kind == "cox"), default=0)
    num_points = max(t.point for t in tasks if t.point is not None) + 1
    m = p + 1

    def tid(**kw) -> int:
        task = Task(element=alpha, **kw)
        try:
            return ids[task]
        except KeyError:
            raise ValueError(f"unknown task referenced: {task}") from None

    src: list[int] = []
    dst: list[int] = []

    def add(u: int, v: int) -> None:
        src.append(u)
        dst.append(v)

    for t in tasks:
        i = ids[t]
        if t.kind == "cox" and t.order >= 1:
            # recursion step reads levels r-1 at f and f+1; the f+1 source is
            # outside the fixed index window for the last function and is dropped
            add(tid(kind="cox", direction=t.direction, order=t.order - 1,
                    func=t.func, point=t.point), i)
            upper = Task("cox", alpha, direction=t.direction, order=t.order - 1,
                         func=t.func + 1, point=t.point)
            if upper in ids:
                add(ids[upper], i)
        elif t.kind == "product":
            fa, fb = _pair_offsets(t.pair, m, t.direction)
            base = alpha[t.direction - 1]
            add(tid(kind="cox", direction=t.direction, order=p, func=base + fa,
                    point=t.point), i)
            if fb != fa:
                add(tid(kind="cox", direction=t.direction, order=p, func=base + fb,
                        point=t.point), i)
            if t.direction == 1:
                add(tid(kind="jacobian", point=t.point), i)
            else:
                add(tid(kind="reduce", direction=t.direction - 1, pair=t.pair), i)
        elif t.kind == "reduce":
            for n in range(num_points):
                add(tid(kind="product", direction=t.direction, pair=t.pair, point=n), i)

    if src:
        edges = np.stack([np.array(src, dtype=np.int64), np.array(dst, dtype=np.int64)], axis=1)
    else:
        edges = np.zeros((0, 2), dtype=np.int64)
    return DependencyGraph(tasks, edges, p=p, num_points=num_points)


def build_graph(alpha: ElementId, p: int, num_points: int) -> DependencyGraph:
    return build_dependencies(build_alphabet(alpha, p, num_points))


def foata_classes(graph: DependencyGraph) -> np.ndarray:
    """Barrier class of every task.

    Cox order ``r`` tasks sit in class ``r``; the Jacobian tasks are
    scheduled together with the order-``p`` cox tasks in class ``p``;
    products and reduces of direction ``d`` occupy classes ``p + 2d - 1``
    and ``p + 2d``.  Raises if the edge set contains a cycle or an edge
    that does not cross classes forward.
    """
    p = graph.p
    classes = np.empty(len(graph.tasks), dtype=np.int64)
    for i, t in enumerate(graph.tasks):
        if t.kind == "cox":
            classes[i] = t.order
        elif t.kind == "jacobian":
            classes[i] = p
        elif t.kind == "product":
            classes[i] = p + 2 * t.direction - 1
        else:
            classes[i] = p + 2 * t.direction
    if len(graph.edges):
        _check_acyclic(len(graph.tasks), graph.edges)
        cu, cv = classes[graph.edges[:, 0]], classes[graph.edges[:, 1]]
        if not np.all(cu < cv):
            raise ValueError("edge does not cross Foata classes forward")
    return classes


def _check_acyclic(n: int, edges: np.ndarray) -> None:
    indeg = np.zeros(n, dtype=np.int64)
    np.add.at(indeg, edges[:, 1], 1)
    out_by_src: dict[int, list[int]] = {}
    for u, v in edges:
        out_by_src.setdefault(int(u), []).append(int(v))
    ready = list(np.flatnonzero(indeg == 0))
    seen = 0
    while ready:
        u = ready.pop()
        seen += 1
        for v in out_by_src.get(u, ()):
            indeg[v] -= 1
            if indeg[v] == 0:
                ready.append(v)
    if seen != n:
        raise ValueError("cycle detected in dependency graph")


def longest_path_depths(graph: DependencyGraph) -> np.ndarray:
    """Longest-path distance of every task from the graph sources."""
    depth = np.zeros(graph.n_tasks, dtype=np.int64)
    if not len(graph.edges):
        return depth
    order = np.argsort(graph.classes, kind="stable")
    pos = np.empty_like(order)
    pos[order] = np.arange(len(order))
    edges = graph.edges[np.argsort(pos[graph.edges[:, 0]], kind="stable")]
    for u, v in edges:
        if depth[u] + 1 > depth[v]:
            depth[v] = depth[u] + 1
    return depth


@dataclass(frozen=True)
class ScheduleVerdict:
    accepted: bool
    class_monotone: bool
    violation: tuple[int, int] | None = None


def validate_schedule(graph: DependencyGraph, order) -> ScheduleVerdict:
    """Check an execution order against the dependency edges.

    ``order`` is a permutation of the graph's tasks, given as task ids or
    :class:`Task` objects.  Accepted iff every task appears after all of its
    predecessors; ``class_monotone`` reports whether Foata classes are
    non-decreasing along the order.
    """
    ids = np.asarray(
        [graph.task_ids[t] if isinstance(t, Task) else int(t) for t in order],
        dtype=np.int64,
    )
    n = graph.n_tasks
    if len(ids) != n or not np.array_equal(np.sort(ids), np.arange(n)):
        raise ValueError("order is not a permutation of the graph's tasks")
    pos = np.empty(n, dtype=np.int64)
    pos[ids] = np.arange(n)
    ok = pos[graph.edges[:, 0]] < pos[graph.edges[:, 1]] if len(graph.edges) else np.ones(0, bool)
    accepted = bool(np.all(ok))
    violation = None
    if not accepted:
        bad = int(np.flatnonzero(~ok)[0])
        violation = (int(graph.edges[bad, 0]), int(graph.edges[bad, 1]))
    monotone = bool(np.all(np.diff(graph.classes[ids]) >= 0))
    return ScheduleVerdict(accepted=accepted, class_monotone=monotone, violation=violation)


def random_topological_order(graph: DependencyGraph, rng: np.random.Generator) -> np.ndarray:
    """A random linear extension of the dependency order (not class-monotone in general).

    Every task receives a virtual finish time strictly later than all of its
    predecessors plus a random jitter; sorting by finish time yields a valid
    topological order that freely interleaves independent tasks of different
    classes.
    """
    n = graph.n_tasks
    finish = np.zeros(n)
    floor = np.zeros(n)
    _, per_class = graph.edges_by_source_class()
    for members, out_edges in zip(graph.class_members(), per_class):
        if len(members) == 0:
            continue
        finish[members] = floor[members] + rng.random(len(members))
        if len(out_edges):
            np.maximum.at(floor, out_edges[:, 1], finish[out_edges[:, 0]])
    return np.argsort(finish, kind="stable")


def perturbed_order(graph: DependencyGraph, rng: np.random.Generator) -> np.ndarray:
    """A non-topological order: one dependency edge is deliberately inverted."""
    if not len(graph.edges):
        raise ValueError("graph has no edges to violate")
    order = random_topological_order(graph, rng)
    u, v = graph.edges[rng.integers(len(graph.edges))]
    pos = np.empty(graph.n_tasks, dtype=np.int64)
    pos[order] = np.arange(graph.n_tasks)
    pu, pv = int(pos[u]), int(pos[v])  # pu < pv in any valid order
    return np.concatenate([order[:pu], [v], order[pu:pv], order[pv + 1:]])


def export_dot(graph: DependencyGraph) -> str:
    """Render the graph as DOT text, one ranked subgraph per Foata class."""
    lines = ["digraph tasks {", "  rankdir=TB;"]
    for c, members in enumerate(graph.class_members()):
        if len(members) == 0:
            continue
        lines.append(f"  subgraph cluster_class_{c} {{")
        lines.append(f'    label="class {c}"; rank=same;')
        for i in members:
            lines.append(f'    t{i} [label="{graph.tasks[i].label()}"];')
        lines.append("  }")
    for u, v in graph.edges:
        lines.append(f"  t{u} -> t{v};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def export_json(graph: DependencyGraph) -> dict:
    """JSON-serializable dump with stable ids: task list plus edge pairs."""
    tasks = []
    for i, t in enumerate(graph.tasks):
        indices = {"element": list(t.element)}
        for name in ("direction", "order", "func", "pair", "point"):
            value = getattr(t, name)
            if value is not None:
                indices[name] = list(value) if isinstance(value, tuple) else value
        tasks.append({"id": i, "kind": t.kind, "indices": indices,
                      "class": int(graph.classes[i])})
    return {
        "degree": graph.p,
        "points": graph.num_points,
        "tasks": tasks,
        "edges": [[int(u), int(v)] for u, v in graph.edges],
    }
