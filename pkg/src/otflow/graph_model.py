"""Transport networks, state spaces and sparse structure matrices.

A *state* is anything a unit of flow can occupy during one time step: an
edge of the network, a vertex (when vertex storage is allowed), or a
dedicated source/sink copy of a vertex (traffic routing).  The structure
matrix ``C`` holds the finite one-step transition costs between states;
entries absent from its sparse layout mean an infinite cost, i.e. the
transition is not allowed.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

EDGES_ONLY = "edges_only"
EDGES_WITH_SELF_STAY = "edges_with_self_stay"
EDGES_AND_VERTICES = "edges_and_vertices"
TRAFFIC_ROUTING = "traffic_routing"

VARIANTS = (EDGES_ONLY, EDGES_WITH_SELF_STAY, EDGES_AND_VERTICES, TRAFFIC_ROUTING)


class ValidationError(ValueError):
    """Raised when a network, policy or problem violates its invariants."""


@dataclass(frozen=True)
class Edge:
    tail: int
    head: int
    length: float = 1.0
    tag: str = ""


@dataclass(frozen=True)
class Network:
    """Directed graph with per-edge lengths and free-form tags."""

    vertex_count: int
    edges: tuple[Edge, ...]
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple(self.edges))
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(self.labels))
            if len(self.labels) != self.vertex_count:
                raise ValidationError("labels must have one entry per vertex")
        if self.vertex_count < 0:
            raise ValidationError("vertex_count must be nonnegative")
        seen = set()
        for k, e in enumerate(self.edges):
            if not (0 <= e.tail < self.vertex_count and 0 <= e.head < self.vertex_count):
                raise ValidationError(f"edge {k} ({e.tail}->{e.head}) references an unknown vertex")
            if e.length < 0:
                raise ValidationError(f"edge {k} has negative length")
            if (e.tail, e.head) in seen:
                raise ValidationError(f"duplicate edge ({e.tail}, {e.head})")
            seen.add((e.tail, e.head))

    @classmethod
    def from_pairs(cls, vertex_count: int, pairs: Iterable[Sequence]) -> "Network":
        """Build a network from ``(tail, head[, length[, tag]])`` tuples."""
        return cls(vertex_count, tuple(Edge(*p) for p in pairs))

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def tails(self) -> np.ndarray:
        return np.array([e.tail for e in self.edges], dtype=np.int64)

    @property
    def heads(self) -> np.ndarray:
        return np.array([e.head for e in self.edges], dtype=np.int64)

    def out_edges(self, v: int) -> list[int]:
        return [k for k, e in enumerate(self.edges) if e.tail == v]

    def in_edges(self, v: int) -> list[int]:
        return [k for k, e in enumerate(self.edges) if e.head == v]


@dataclass(frozen=True)
class StoragePolicy:
    """Which states exist and which one-step transitions are allowed.

    ``self_stay_cost`` is the structure-matrix value put on every self-loop
    the policy creates.  It may be a scalar or one value per state, and may
    be negative (a negative stay cost cancels the per-step state cost so that
    waiting does not accumulate cost).

    ``stay_edges`` restricts which edges get a self-loop under
    ``edges_with_self_stay``; ``None`` means all edges.
    """

    variant: str = EDGES_ONLY
    sources: frozenset[int] = frozenset()
    sinks: frozenset[int] = frozenset()
    self_stay_cost: float | tuple[float, ...] = 0.0
    stay_edges: frozenset[int] | None = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValidationError(f"unknown storage variant {self.variant!r}")
        object.__setattr__(self, "sources", frozenset(int(v) for v in self.sources))
        object.__setattr__(self, "sinks", frozenset(int(v) for v in self.sinks))
        if self.stay_edges is not None:
            object.__setattr__(self, "stay_edges", frozenset(int(e) for e in self.stay_edges))
        if not np.isscalar(self.self_stay_cost):
            object.__setattr__(self, "self_stay_cost", tuple(float(x) for x in self.self_stay_cost))

    @classmethod
    def traffic_routing(cls, sources, sinks, self_stay_cost=0.0) -> "StoragePolicy":
        return cls(TRAFFIC_ROUTING, frozenset(sources), frozenset(sinks), self_stay_cost)

    def stay_cost(self, state: int) -> float:
        if np.isscalar(self.self_stay_cost):
            return float(self.self_stay_cost)
        return self.self_stay_cost[state]


@dataclass(frozen=True)
class State:
    kind: str  # "edge" | "vertex" | "source" | "sink"
    index: int

    def __str__(self) -> str:
        return f"{self.kind}:{self.index}"


@dataclass(frozen=True)
class StateSpace:
    states: tuple[State, ...]
    index: dict = field(compare=False, repr=False, default=None)

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "index", {s: k for k, s in enumerate(self.states)})
        if len(self.index) != len(self.states):
            raise ValidationError("state descriptors must be unique")

    @property
    def n(self) -> int:
        return len(self.states)

    def __len__(self) -> int:
        return len(self.states)

    def position(self, kind: str, index: int) -> int:
        return self.index[State(kind, index)]

    def positions(self, kind: str) -> np.ndarray:
        return np.array([k for k, s in enumerate(self.states) if s.kind == kind], dtype=np.int64)

    @classmethod
    def anonymous(cls, n: int) -> "StateSpace":
        """State space of ``n`` states with no network meaning (tests, oracles)."""
        return cls(tuple(State("edge", k) for k in range(n)))


class StructureMatrix:
    """Sparse ``n x n`` matrix of finite transition costs.

    Stored in compressed-row form.  Explicit zeros are meaningful (a
    zero-cost allowed transition), so this deliberately does not reuse a
    container that may prune them.
    """

    __slots__ = ("n", "indptr", "indices", "data")

    def __init__(self, n: int, indptr, indices, data):
        self.n = int(n)
        self.indptr = np.asarray(indptr, dtype=np.int64)
        self.indices = np.asarray(indices, dtype=np.int64)
        self.data = np.asarray(data, dtype=float)
        if self.indptr.shape != (self.n + 1,) or self.indices.shape != self.data.shape:
            raise ValidationError("inconsistent compressed-row arrays")
        if not np.all(np.isfinite(self.data)):
            raise ValidationError("structure values must be finite; omit an entry for infinite cost")
        for arr in (self.indptr, self.indices, self.data):
            arr.setflags(write=False)

    @classmethod
    def from_triplets(cls, n: int, triplets: Iterable[Sequence]) -> "StructureMatrix":
        trip = sorted((int(i), int(j), float(v)) for i, j, v in triplets)
        for a, b in zip(trip, trip[1:]):
            if a[:2] == b[:2]:
                raise ValidationError(f"duplicate structure entry {a[:2]}")
        for i, j, _ in trip:
            if not (0 <= i < n and 0 <= j < n):
                raise ValidationError(f"structure entry ({i}, {j}) out of range for n={n}")
        rows = np.array([t[0] for t in trip], dtype=np.int64)
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(indptr, rows + 1, 1)
        return cls(n, np.cumsum(indptr), [t[1] for t in trip], [t[2] for t in trip])

    @classmethod
    def from_dense(cls, C) -> "StructureMatrix":
        """Dense cost matrix with ``np.inf`` off the support."""
        C = np.asarray(C, dtype=float)
        ii, jj = np.nonzero(np.isfinite(C))
        return cls.from_triplets(C.shape[0], zip(ii, jj, C[ii, jj]))

    @property
    def nnz(self) -> int:
        return len(self.indices)

    @property
    def rows(self) -> np.ndarray:
        return np.repeat(np.arange(self.n), np.diff(self.indptr))

    def triplets(self) -> list[tuple[int, int, float]]:
        return [(int(i), int(j), float(v)) for i, j, v in zip(self.rows, self.indices, self.data)]

    def support(self) -> set[tuple[int, int]]:
        return {(int(i), int(j)) for i, j in zip(self.rows, self.indices)}

    def row(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return self.indices[lo:hi], self.data[lo:hi]

    def to_dense(self) -> np.ndarray:
        C = np.full((self.n, self.n), np.inf)
        C[self.rows, self.indices] = self.data
        return C

    def __eq__(self, other) -> bool:
        if not isinstance(other, StructureMatrix):
            return NotImplemented
        return (
            self.n == other.n
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.data, other.data)
        )

    def __repr__(self) -> str:
        return f"StructureMatrix(n={self.n}, nnz={self.nnz})"


def build_state_space(network: Network, policy: StoragePolicy) -> StateSpace:
    """Enumerate transport states: edges in input order, then vertices or sources, then sinks."""
    for v in policy.sources | policy.sinks:
        if not 0 <= v < network.vertex_count:
            raise ValidationError(f"policy references unknown vertex {v}")
    if policy.stay_edges is not None:
        for e in policy.stay_edges:
            if not 0 <= e < network.n_edges:
                raise ValidationError(f"policy references unknown edge {e}")
    states = [State("edge", k) for k in range(network.n_edges)]
    if policy.variant == EDGES_AND_VERTICES:
        states += [State("vertex", v) for v in range(network.vertex_count)]
    elif policy.variant == TRAFFIC_ROUTING:
        states += [State("source", v) for v in sorted(policy.sources)]
        states += [State("sink", v) for v in sorted(policy.sinks)]
    space = StateSpace(tuple(states))
    if not np.isscalar(policy.self_stay_cost) and len(policy.self_stay_cost) != space.n:
        raise ValidationError("per-state self_stay_cost must have one value per state")
    return space


def build_structure_matrix(space: StateSpace, policy: StoragePolicy, network: Network) -> StructureMatrix:
    """One-step transition support and costs for the given storage policy."""
    heads, tails = network.heads, network.tails
    out_by_vertex: dict[int, list[int]] = {v: [] for v in range(network.vertex_count)}
    for k, t in enumerate(tails):
        out_by_vertex[int(t)].append(k)

    entries: dict[tuple[int, int], float] = {}

    def stay(i):
        entries[(i, i)] = policy.stay_cost(i)

    for k in range(network.n_edges):
        i = space.position("edge", k)
        for j_edge in out_by_vertex[int(heads[k])]:
            entries.setdefault((i, space.position("edge", j_edge)), 0.0)
        if policy.variant == EDGES_WITH_SELF_STAY:
            if policy.stay_edges is None or k in policy.stay_edges:
                stay(i)
        elif policy.variant == TRAFFIC_ROUTING:
            stay(i)
            if int(heads[k]) in policy.sinks:
                entries[(i, space.position("sink", int(heads[k])))] = 0.0
        elif policy.variant == EDGES_AND_VERTICES:
            entries[(i, space.position("vertex", int(heads[k])))] = 0.0

    if policy.variant == EDGES_AND_VERTICES:
        for v in range(network.vertex_count):
            i = space.position("vertex", v)
            stay(i)
            for k in out_by_vertex[v]:
                entries[(i, space.position("edge", k))] = 0.0
    elif policy.variant == TRAFFIC_ROUTING:
        for v in sorted(policy.sources):
            i = space.position("source", v)
            stay(i)
            for k in out_by_vertex[v]:
                entries[(i, space.position("edge", k))] = 0.0
        for v in sorted(policy.sinks):
            stay(space.position("sink", v))
    return StructureMatrix.from_triplets(space.n, ((i, j, c) for (i, j), c in entries.items()))


def time_expand(network: Network, T: int, vertex_storage: bool = False) -> tuple[int, int]:
    """Vertex and arc counts of the time-expanded network.

    Without storage, ``T`` counts travel steps: ``T + 1`` vertex copies and
    ``T`` copies of every edge.  With vertex storage the states themselves are
    occupied at ``T`` instants, giving ``T`` vertex copies and ``T - 1`` layers
    of arcs, each holding every edge plus one waiting arc per vertex.
    """
    if T < 1:
        raise ValidationError("T must be at least 1")
    V, E = network.vertex_count, network.n_edges
    if vertex_storage:
        return T * V, (T - 1) * (E + V)
    return (T + 1) * V, T * E
