"""Graph topologies: integer lattices, homogeneous trees, finite edge lists.

All three families expose the same read-only surface:

* ``neighbors(v)``    -- fixed-order list, always of nominal length degree(v);
  for boxed lattices the off-box coordinates are still returned (founding
  attempts aimed at them simply die), with ``contains`` as the off-box marker,
* ``contains(v)``     -- whether v is a live site of the graph,
* ``distance(x, y)``  -- shortest-path metric.

Vertices are plain hashable values: d-tuples of ints for lattices, root paths
(tuples of child indices, () = root) for trees, and integer ids for finite
graphs.  Infinite families are never materialized; neighbor lists are computed
on demand, so a process started from finitely many colonies only ever touches
finitely many vertices.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import IO, Iterable, Union

from .errors import DomainError, EdgeListFormatError, GraphValidationError

__all__ = [
    "Vertex",
    "Lattice",
    "Tree",
    "FiniteGraph",
    "Topology",
    "parse_edge_list",
    "complete_graph",
    "neighbors",
    "graph_distance",
]

Vertex = Union[tuple, int]


@dataclass(frozen=True)
class Lattice:
    """The d-dimensional integer lattice, optionally restricted to a box.

    ``box``, when given, is the per-axis extent: live sites have
    0 <= v[i] < box[i].  The boundary is blocked: neighbor slots pointing off
    the box stay in the neighbor list (the degree is 2d everywhere) but are
    not contained in the graph.
    """

    d: int
    box: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.d < 1:
            raise DomainError(f"lattice dimension must be >= 1, got {self.d}")
        if self.box is not None:
            if len(self.box) != self.d:
                raise DomainError(f"box must have {self.d} extents, got {self.box}")
            if any(n < 1 for n in self.box):
                raise DomainError(f"box extents must be >= 1, got {self.box}")

    @property
    def degree(self) -> int:
        return 2 * self.d

    def contains(self, v: Vertex) -> bool:
        if not (isinstance(v, tuple) and len(v) == self.d):
            return False
        if self.box is None:
            return True
        return all(0 <= x < n for x, n in zip(v, self.box))

    def _check(self, v: Vertex) -> None:
        if not self.contains(v):
            raise DomainError(f"{v!r} is not a vertex of {self}")

    def neighbors(self, v: Vertex) -> list[Vertex]:
        """+axis then -axis for each axis in order; length 2d always."""
        self._check(v)
        out = []
        for i in range(self.d):
            for step in (1, -1):
                w = list(v)
                w[i] += step
                out.append(tuple(w))
        return out

    def distance(self, x: Vertex, y: Vertex) -> int:
        self._check(x)
        self._check(y)
        return sum(abs(a - b) for a, b in zip(x, y))

    def origin(self) -> Vertex:
        """Canonical start site: the origin, or the box center."""
        if self.box is None:
            return (0,) * self.d
        return tuple(n // 2 for n in self.box)


@dataclass(frozen=True)
class Tree:
    """The homogeneous tree in which every vertex has degree d+1.

    Vertices are reduced root paths: the root is (), its d+1 subtrees hang off
    child indices 0..d, and every other vertex has one parent plus d children
    indexed 0..d-1.  Reduced addressing means neighbor generation needs no
    global registry.
    """

    d: int

    def __post_init__(self):
        if self.d < 1:
            raise DomainError(f"tree parameter must be >= 1, got {self.d}")

    @property
    def degree(self) -> int:
        return self.d + 1

    def contains(self, v: Vertex) -> bool:
        if not isinstance(v, tuple):
            return False
        if v == ():
            return True
        if not all(isinstance(c, int) for c in v):
            return False
        if not 0 <= v[0] <= self.d:
            return False
        return all(0 <= c < self.d for c in v[1:])

    def _check(self, v: Vertex) -> None:
        if not self.contains(v):
            raise DomainError(f"{v!r} is not a vertex of {self}")

    def neighbors(self, v: Vertex) -> list[Vertex]:
        """Parent first (when it exists), then children in index order."""
        self._check(v)
        if v == ():
            return [(c,) for c in range(self.d + 1)]
        return [v[:-1]] + [v + (c,) for c in range(self.d)]

    def distance(self, x: Vertex, y: Vertex) -> int:
        self._check(x)
        self._check(y)
        k = 0
        for a, b in zip(x, y):
            if a != b:
                break
            k += 1
        return (len(x) - k) + (len(y) - k)

    def origin(self) -> Vertex:
        return ()


class FiniteGraph:
    """A finite, connected, undirected simple graph over integer vertex ids."""

    def __init__(self, edges: Iterable[tuple[int, int]]):
        adj: dict[int, set[int]] = {}
        for u, v in edges:
            if u == v:
                raise EdgeListFormatError(f"self-loop at vertex {u}")
            adj.setdefault(u, set()).add(v)
            adj.setdefault(v, set()).add(u)
        if not adj:
            raise GraphValidationError("graph has no edges")
        self._adj: dict[int, tuple[int, ...]] = {
            u: tuple(sorted(nbrs)) for u, nbrs in adj.items()
        }
        self._check_connected()

    def _check_connected(self) -> None:
        start = next(iter(self._adj))
        seen = {start}
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for w in self._adj[u]:
                if w not in seen:
                    seen.add(w)
                    queue.append(w)
        if len(seen) != len(self._adj):
            raise GraphValidationError(
                f"graph is disconnected ({len(seen)} of {len(self._adj)} vertices reachable)"
            )

    @property
    def vertices(self) -> tuple[int, ...]:
        return tuple(sorted(self._adj))

    def contains(self, v: Vertex) -> bool:
        return v in self._adj

    def _check(self, v: Vertex) -> None:
        if v not in self._adj:
            raise DomainError(f"{v!r} is not a vertex of this graph")

    def neighbors(self, v: Vertex) -> list[Vertex]:
        self._check(v)
        return list(self._adj[v])

    def distance(self, x: Vertex, y: Vertex) -> int:
        self._check(x)
        self._check(y)
        if x == y:
            return 0
        dist = {x: 0}
        queue = deque([x])
        while queue:
            u = queue.popleft()
            for w in self._adj[u]:
                if w not in dist:
                    dist[w] = dist[u] + 1
                    if w == y:
                        return dist[w]
                    queue.append(w)
        raise DomainError(f"no path from {x!r} to {y!r}")  # unreachable: connected

    def origin(self) -> Vertex:
        return self.vertices[0]

    def __eq__(self, other) -> bool:
        return isinstance(other, FiniteGraph) and self._adj == other._adj

    def __repr__(self) -> str:
        n = len(self._adj)
        e = sum(len(v) for v in self._adj.values()) // 2
        return f"FiniteGraph({n} vertices, {e} edges)"


Topology = Union[Lattice, Tree, FiniteGraph]


def parse_edge_list(text: Union[str, bytes, IO]) -> FiniteGraph:
    """Build a FiniteGraph from whitespace-separated vertex-id pairs.

    One edge per line; lines starting with ``#`` are comments; duplicate edges
    collapse.  Self-loops are a format error, disconnected graphs a validation
    error (the collapse dynamics assume connectivity).
    """
    if hasattr(text, "read"):
        text = text.read()
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    edges = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise EdgeListFormatError(
                f"line {lineno}: expected two vertex ids, got {raw!r}"
            )
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise EdgeListFormatError(
                f"line {lineno}: vertex ids must be integers, got {raw!r}"
            ) from None
        if u < 0 or v < 0:
            raise EdgeListFormatError(f"line {lineno}: vertex ids must be nonnegative")
        edges.append((u, v))
    if not edges:
        raise EdgeListFormatError("edge list contains no edges")
    return FiniteGraph(edges)


def complete_graph(n: int) -> FiniteGraph:
    """K_n, mostly used for finite-volume extinction experiments."""
    if n < 2:
        raise DomainError("complete graph needs n >= 2")
    return FiniteGraph((i, j) for i in range(n) for j in range(i + 1, n))


def neighbors(topology: Topology, v: Vertex) -> list[Vertex]:
    """Fixed-order neighbor list of v; see the per-family methods."""
    return topology.neighbors(v)


def graph_distance(topology: Topology, x: Vertex, y: Vertex) -> int:
    """Shortest-path distance between two vertices."""
    return topology.distance(x, y)
