"""Finite simple graphs carrying the urn network.

Vertices are ``0..vertex_count-1``; edge ids are list indices. Each vertex
keeps its incident edges in construction order, and that order fixes how a
firing vertex splits ``[0, 1]`` among its edges, so it never changes after
the graph is built.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Graph",
    "GraphError",
    "build_cycle",
    "build_path",
    "build_star",
    "build_torus",
    "build_grid",
    "build_random_regular",
    "build_from_edges",
    "build_from_edge_list",
    "read_edge_list",
    "edge_neighborhood",
    "validate",
]


class GraphError(ValueError):
    """Raised for malformed or infeasible graph input."""


@dataclass(frozen=True)
class Graph:
    vertex_count: int
    edges: tuple[tuple[int, int], ...]
    incidence: tuple[tuple[int, ...], ...]
    max_degree: int

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.array([len(inc) for inc in self.incidence], dtype=np.int64)

    @property
    def regular(self) -> bool:
        return self.vertex_count > 0 and bool(np.all(self.degrees == self.max_degree))

    @cached_property
    def endpoints(self) -> tuple[np.ndarray, np.ndarray]:
        """Endpoint arrays ``(u, v)`` indexed by edge id."""
        if not self.edges:
            empty = np.zeros(0, dtype=np.int64)
            return empty, empty.copy()
        arr = np.asarray(self.edges, dtype=np.int64)
        return arr[:, 0].copy(), arr[:, 1].copy()

    @cached_property
    def csr(self) -> tuple[np.ndarray, np.ndarray]:
        """Incidence lists packed as ``(indptr, indices)``, order preserved."""
        indptr = np.zeros(self.vertex_count + 1, dtype=np.int64)
        np.cumsum(self.degrees, out=indptr[1:])
        indices = np.fromiter(
            itertools.chain.from_iterable(self.incidence),
            dtype=np.int64,
            count=int(indptr[-1]),
        )
        return indptr, indices

    def summary(self) -> dict:
        return {
            "vertex_count": self.vertex_count,
            "edge_count": self.edge_count,
            "max_degree": self.max_degree,
            "regular": self.regular,
        }


def build_from_edges(vertex_count: int, edges: Iterable[Sequence[int]]) -> Graph:
    """Build and validate a graph from an ordered edge sequence."""
    if vertex_count < 1:
        raise GraphError(f"vertex_count must be positive, got {vertex_count}")
    edge_list: list[tuple[int, int]] = []
    seen: set[frozenset[int]] = set()
    incidence: list[list[int]] = [[] for _ in range(vertex_count)]
    for u, v in edges:
        u, v = int(u), int(v)
        if u == v:
            raise GraphError(f"self-loop at vertex {u}")
        if not (0 <= u < vertex_count and 0 <= v < vertex_count):
            raise GraphError(f"edge ({u}, {v}) out of range for {vertex_count} vertices")
        key = frozenset((u, v))
        if key in seen:
            raise GraphError(f"duplicate edge ({u}, {v})")
        seen.add(key)
        eid = len(edge_list)
        edge_list.append((u, v))
        incidence[u].append(eid)
        incidence[v].append(eid)
    max_degree = max((len(inc) for inc in incidence), default=0)
    return Graph(
        vertex_count=vertex_count,
        edges=tuple(edge_list),
        incidence=tuple(tuple(inc) for inc in incidence),
        max_degree=max_degree,
    )


def validate(g: Graph) -> None:
    """Re-check every structural invariant; raise GraphError on the first failure."""
    seen: set[frozenset[int]] = set()
    for eid, (u, v) in enumerate(g.edges):
        if u == v:
            raise GraphError(f"edge {eid} is a self-loop")
        key = frozenset((u, v))
        if key in seen:
            raise GraphError(f"edge {eid} duplicates an earlier edge")
        seen.add(key)
    if len(g.incidence) != g.vertex_count:
        raise GraphError("incidence table size differs from vertex_count")
    owners: dict[int, list[int]] = {eid: [] for eid in range(g.edge_count)}
    for v, inc in enumerate(g.incidence):
        for eid in inc:
            if eid not in owners:
                raise GraphError(f"vertex {v} lists unknown edge {eid}")
            owners[eid].append(v)
    for eid, (u, v) in enumerate(g.edges):
        if sorted(owners[eid]) != sorted((u, v)):
            raise GraphError(f"edge {eid} is not listed at exactly its two endpoints")
    true_max = max((len(inc) for inc in g.incidence), default=0)
    if true_max != g.max_degree:
        raise GraphError(f"max_degree {g.max_degree} differs from true maximum {true_max}")


def build_cycle(n: int) -> Graph:
    """The n-cycle; edge i joins i and (i + 1) mod n."""
    if n < 3:
        raise GraphError(f"cycle needs n >= 3, got {n}")
    return build_from_edges(n, ((i, (i + 1) % n) for i in range(n)))


def build_path(n_edges: int) -> Graph:
    """Path 0 - 1 - ... - n_edges with free ends (not regular)."""
    if n_edges < 1:
        raise GraphError(f"path needs at least one edge, got {n_edges}")
    return build_from_edges(n_edges + 1, ((i, i + 1) for i in range(n_edges)))


def build_star(leaves: int) -> Graph:
    """Star K_{1,leaves}; vertex 0 is the center, edge i joins 0 and i + 1."""
    if leaves < 1:
        raise GraphError(f"star needs at least one leaf, got {leaves}")
    return build_from_edges(leaves + 1, ((0, i + 1) for i in range(leaves)))


def _lattice(d: int, n: int, periodic: bool) -> Graph:
    shape = (n,) * d
    edges = []
    for flat in range(n**d):
        coord = np.unravel_index(flat, shape)
        for axis in range(d):
            if coord[axis] + 1 == n and not periodic:
                continue
            nb = list(coord)
            nb[axis] = (nb[axis] + 1) % n
            edges.append((flat, int(np.ravel_multi_index(nb, shape))))
    return build_from_edges(n**d, edges)


def build_torus(d: int, n: int) -> Graph:
    """Discrete d-torus of side n: regular of degree 2d with d * n**d edges.

    Vertices are numbered in row-major order. Each vertex adds its edges to
    the +1 neighbour along axis 0, 1, ..., d-1, so ``build_torus(1, n)``
    reproduces ``build_cycle(n)`` exactly.
    """
    if d < 1:
        raise GraphError(f"torus dimension must be >= 1, got {d}")
    if n < 3:
        raise GraphError(f"torus side must be >= 3, got {n}")
    return _lattice(d, n, periodic=True)


def build_grid(d: int, n: int) -> Graph:
    """Free-boundary box of side n. Boundary vertices have lower degree, so the
    graph is not regular and its equilibrium must come from the solver."""
    if d < 1 or n < 2:
        raise GraphError(f"grid needs d >= 1 and n >= 2, got d={d}, n={n}")
    return _lattice(d, n, periodic=False)


def build_random_regular(n: int, delta: int, seed: int, max_tries: int = 10_000) -> Graph:
    """Uniform simple delta-regular graph via the pairing model with rejection.

    Stubs are shuffled and paired consecutively; any pairing with a loop or a
    repeated pair is discarded and redrawn. Edges are returned sorted, so equal
    seeds give identical edge lists.
    """
    if n < 1 or delta < 1:
        raise GraphError(f"need n >= 1 and delta >= 1, got n={n}, delta={delta}")
    if (n * delta) % 2:
        raise GraphError(f"n * delta must be even, got n={n}, delta={delta}")
    if delta >= n:
        raise GraphError(f"delta must be < n, got n={n}, delta={delta}")
    rng = np.random.default_rng(seed)
    stubs = np.repeat(np.arange(n, dtype=np.int64), delta)
    for _ in range(max_tries):
        pairs = rng.permutation(stubs).reshape(-1, 2)
        pairs.sort(axis=1)
        if np.any(pairs[:, 0] == pairs[:, 1]):
            continue
        if len(np.unique(pairs, axis=0)) != len(pairs):
            continue
        edges = sorted(map(tuple, pairs.tolist()))
        return build_from_edges(n, edges)
    raise GraphError(
        f"no simple {delta}-regular pairing on {n} vertices after {max_tries} tries"
    )


def build_from_edge_list(text: str) -> Graph:
    """Parse ``u v`` lines (``#`` comments and blank lines skipped).

    Vertex ids may be sparse; they are compacted to ``0..m-1`` in increasing
    order. Edge ids follow line order.
    """
    raw: list[tuple[int, int, int]] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        parts = stripped.split()
        if len(parts) != 2:
            raise GraphError(f"line {lineno}: expected 'u v', got {line!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphError(f"line {lineno}: non-integer vertex id in {line!r}") from None
        if u < 0 or v < 0:
            raise GraphError(f"line {lineno}: negative vertex id in {line!r}")
        if u == v:
            raise GraphError(f"line {lineno}: self-loop at vertex {u}")
        raw.append((lineno, u, v))
    if not raw:
        raise GraphError("edge list contains no edges")
    ids = sorted({x for _, u, v in raw for x in (u, v)})
    index = {vid: i for i, vid in enumerate(ids)}
    seen: dict[frozenset[int], int] = {}
    for lineno, u, v in raw:
        key = frozenset((u, v))
        if key in seen:
            raise GraphError(f"line {lineno}: duplicate of edge on line {seen[key]}")
        seen[key] = lineno
    return build_from_edges(len(ids), ((index[u], index[v]) for _, u, v in raw))


def read_edge_list(path) -> Graph:
    with open(path, encoding="utf-8") as fh:
        return build_from_edge_list(fh.read())


def edge_neighborhood(g: Graph, e: int) -> set[int]:
    """Edges sharing an endpoint with ``e``, including ``e`` itself."""
    if not 0 <= e < g.edge_count:
        raise GraphError(f"invalid edge id {e}")
    u, v = g.edges[e]
    return set(g.incidence[u]) | set(g.incidence[v])
