"""Problem instances, validation, the JSON file format and scenario generators."""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .graph_model import (
    EDGES_AND_VERTICES,
    EDGES_WITH_SELF_STAY,
    Edge,
    Network,
    State,
    StateSpace,
    StoragePolicy,
    StructureMatrix,
    ValidationError,
    build_state_space,
    build_structure_matrix,
)

FORMAT_NAME = "otflow-problem"
FORMAT_VERSION = 1
MASS_RTOL = 1e-12


class ProblemFormatError(ValueError):
    """Problem file could not be parsed; the message carries line or field context."""


def _as_capacity(d, T: int, n: int) -> np.ndarray:
    d = np.asarray(d, dtype=float)
    if d.ndim <= 1:
        d = np.broadcast_to(d, (max(T - 2, 0), n)).copy()
    return d


def _structure_list(structure, T: int):
    if isinstance(structure, StructureMatrix):
        return None
    return tuple(structure)


@dataclass
class _ProblemBase:
    def __post_init__(self):
        if isinstance(self.structure, (list, tuple)):
            self.structure = tuple(self.structure)
        self.T = int(self.T)
        self.epsilon = float(self.epsilon)
        self.d = _as_capacity(self.d, self.T, self.n)
        if self.space is None:
            self.space = StateSpace.anonymous(self.n)

    @property
    def n(self) -> int:
        s = self.structure
        return (s[0] if isinstance(s, tuple) else s).n

    @property
    def time_varying(self) -> bool:
        return isinstance(self.structure, tuple)

    def structure_at(self, t: int) -> StructureMatrix:
        """Structure for the transition from step ``t`` to ``t + 1`` (1-based)."""
        if isinstance(self.structure, tuple):
            return self.structure[t - 1]
        return self.structure

    def capacity_at(self, t: int) -> np.ndarray:
        """Capacity vector for the inequality-constrained step ``t`` in ``2..T-1``."""
        return self.d[t - 2]


@dataclass
class SingleCommodityProblem(_ProblemBase):
    """One commodity; ``c`` costs every step ``1..T``; ``d`` has one row per step ``2..T-1``."""

    structure: Union[StructureMatrix, tuple]
    c: np.ndarray
    mu_1: np.ndarray
    mu_T: np.ndarray
    d: np.ndarray
    T: int
    epsilon: float
    space: StateSpace | None = None
    network: Network | None = None
    policy: StoragePolicy | None = None
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        self.mu_1 = np.asarray(self.mu_1, dtype=float)
        self.mu_T = np.asarray(self.mu_T, dtype=float)
        super().__post_init__()

    L = 1

    @property
    def total_mass(self) -> float:
        return float(self.mu_1.sum())


@dataclass
class MultiCommodityProblem(_ProblemBase):
    """``L`` commodities sharing capacities; ``C_L`` costs steps ``2..T-1`` only."""

    structure: Union[StructureMatrix, tuple]
    C_L: np.ndarray
    R01: np.ndarray
    R0T: np.ndarray
    d: np.ndarray
    T: int
    epsilon: float
    space: StateSpace | None = None
    network: Network | None = None
    policy: StoragePolicy | None = None
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.C_L = np.atleast_2d(np.asarray(self.C_L, dtype=float))
        self.R01 = np.atleast_2d(np.asarray(self.R01, dtype=float))
        self.R0T = np.atleast_2d(np.asarray(self.R0T, dtype=float))
        super().__post_init__()

    @property
    def L(self) -> int:
        return self.R01.shape[0]

    @property
    def mu_0(self) -> np.ndarray:
        return self.R01.sum(axis=1)

    @property
    def total_mass(self) -> float:
        return float(self.R01.sum())


Problem = Union[SingleCommodityProblem, MultiCommodityProblem]


def with_epsilon(problem: Problem, epsilon: float) -> Problem:
    """Copy of ``problem`` with a different regularization parameter."""
    import dataclasses

    return dataclasses.replace(problem, epsilon=float(epsilon), d=problem.d.copy())


# --------------------------------------------------------------------------- validation


def _check_nonneg(name, arr, out):
    arr = np.asarray(arr)
    if np.isnan(arr).any():
        out.append(f"{name}: contains NaN")
    elif (arr < 0).any():
        out.append(f"{name}: entries must be nonnegative")


def _mass_mismatch(a, b) -> bool:
    scale = max(abs(a), abs(b), 1e-300)
    return abs(a - b) > MASS_RTOL * scale


def validate(problem) -> list[str]:
    """Return every invariant violation as ``"field: rule"``; empty when valid."""
    out: list[str] = []
    if not isinstance(problem, (SingleCommodityProblem, MultiCommodityProblem)):
        return ["problem: not a problem instance"]
    n, T = problem.n, problem.T
    if T < 2:
        out.append("T: horizon must be at least 2")
    if not problem.epsilon > 0:
        out.append("epsilon: must be positive")
    if problem.time_varying:
        if len(problem.structure) != T - 1:
            out.append("structure: time-varying structure needs T-1 matrices")
        if any(s.n != n for s in problem.structure):
            out.append("structure: all matrices must share the state count")
    if problem.space is not None and problem.space.n != n:
        out.append("space: state count differs from structure")
    if problem.d.shape != (max(T - 2, 0), n):
        out.append(f"capacity: expected shape {(max(T - 2, 0), n)}, got {problem.d.shape}")
    else:
        _check_nonneg("capacity", problem.d, out)

    if isinstance(problem, SingleCommodityProblem):
        for name in ("c", "mu_1", "mu_T"):
            arr = getattr(problem, name)
            if arr.shape != (n,):
                out.append(f"{name}: expected length {n}, got shape {arr.shape}")
        if problem.c.shape == (n,) and not np.all(np.isfinite(problem.c)):
            out.append("c: costs must be finite")
        _check_nonneg("mu_1", problem.mu_1, out)
        _check_nonneg("mu_T", problem.mu_T, out)
        if _mass_mismatch(problem.mu_1.sum(), problem.mu_T.sum()):
            out.append("mu_1/mu_T: mass balance violated (sums differ)")
    else:
        L = problem.L
        for name in ("C_L", "R01", "R0T"):
            arr = getattr(problem, name)
            if arr.shape != (L, n):
                out.append(f"{name}: expected shape {(L, n)}, got {arr.shape}")
        if problem.C_L.shape == (L, n) and not np.all(np.isfinite(problem.C_L)):
            out.append("C_L: costs must be finite")
        _check_nonneg("R01", problem.R01, out)
        _check_nonneg("R0T", problem.R0T, out)
        if problem.R01.shape == problem.R0T.shape:
            for ell, (a, b) in enumerate(zip(problem.R01.sum(1), problem.R0T.sum(1))):
                if _mass_mismatch(a, b):
                    out.append(f"R01/R0T: mass balance violated for commodity {ell}")
    return out


def check_problem(problem) -> Problem:
    """Raise :class:`ValidationError` listing all violations, else return ``problem``."""
    violations = validate(problem)
    if violations:
        raise ValidationError("invalid problem: " + "; ".join(violations))
    return problem


# --------------------------------------------------------------------------- file format

_KNOWN_KEYS = {
    "format", "version", "network", "policy", "states", "structure", "T", "epsilon",
    "seed", "commodities", "capacity", "meta",
}


def _structure_to_json(s: StructureMatrix) -> dict:
    return {"n": s.n, "triplets": [[i, j, v] for i, j, v in s.triplets()]}


def _capacity_to_json(d: np.ndarray) -> list:
    return [[None if np.isinf(x) else float(x) for x in row] for row in d]


def to_dict(problem: Problem) -> dict:
    doc: dict = {"format": FORMAT_NAME, "version": FORMAT_VERSION}
    net = problem.network
    doc["network"] = None if net is None else {
        "vertex_count": net.vertex_count,
        "edges": [[e.tail, e.head, e.length, e.tag] for e in net.edges],
        "labels": None if net.labels is None else list(net.labels),
    }
    pol = problem.policy
    doc["policy"] = None if pol is None else {
        "variant": pol.variant,
        "sources": sorted(pol.sources),
        "sinks": sorted(pol.sinks),
        "self_stay_cost": pol.self_stay_cost if np.isscalar(pol.self_stay_cost) else list(pol.self_stay_cost),
        "stay_edges": None if pol.stay_edges is None else sorted(pol.stay_edges),
    }
    doc["states"] = [[s.kind, s.index] for s in problem.space.states]
    if problem.time_varying:
        doc["structure"] = [_structure_to_json(s) for s in problem.structure]
    else:
        doc["structure"] = _structure_to_json(problem.structure)
    doc["T"] = problem.T
    doc["epsilon"] = problem.epsilon
    doc["seed"] = problem.seed
    if isinstance(problem, SingleCommodityProblem):
        doc["commodities"] = {
            "c": problem.c.tolist(), "mu_1": problem.mu_1.tolist(), "mu_T": problem.mu_T.tolist(),
        }
    else:
        doc["commodities"] = {
            "L": problem.L, "C_L": problem.C_L.tolist(),
            "R01": problem.R01.tolist(), "R0T": problem.R0T.tolist(),
        }
    doc["capacity"] = _capacity_to_json(problem.d)
    doc["meta"] = problem.meta
    return doc


def _field(doc, key, ctx):
    try:
        return doc[key]
    except (KeyError, TypeError):
        raise ProblemFormatError(f"{ctx}: missing field {key!r}") from None


def _structure_from_json(obj, ctx) -> StructureMatrix:
    try:
        return StructureMatrix.from_triplets(int(obj["n"]), obj["triplets"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ProblemFormatError(f"{ctx}: {exc}") from None


def from_dict(doc: dict) -> tuple[Problem, list[str]]:
    """Build a problem from a parsed document; returns ``(problem, warnings)``."""
    if not isinstance(doc, dict):
        raise ProblemFormatError("top level: expected a JSON object")
    notes = [f"unknown field {k!r} ignored" for k in doc if k not in _KNOWN_KEYS]
    try:
        net = None
        if doc.get("network") is not None:
            nd = doc["network"]
            net = Network(
                int(_field(nd, "vertex_count", "network")),
                tuple(Edge(int(e[0]), int(e[1]), float(e[2]) if len(e) > 2 else 1.0,
                           str(e[3]) if len(e) > 3 else "") for e in _field(nd, "edges", "network")),
                nd.get("labels"),
            )
        pol = None
        if doc.get("policy") is not None:
            pd = doc["policy"]
            stay = pd.get("stay_edges")
            pol = StoragePolicy(
                _field(pd, "variant", "policy"),
                frozenset(pd.get("sources", [])),
                frozenset(pd.get("sinks", [])),
                pd.get("self_stay_cost", 0.0),
                None if stay is None else frozenset(stay),
            )
        sdoc = doc.get("structure")
        if sdoc is None:
            if net is None or pol is None:
                raise ProblemFormatError("structure: missing (and no network/policy to build it from)")
            space = build_state_space(net, pol)
            structure = build_structure_matrix(space, pol, net)
        elif isinstance(sdoc, list):
            structure = tuple(_structure_from_json(s, f"structure[{k}]") for k, s in enumerate(sdoc))
        else:
            structure = _structure_from_json(sdoc, "structure")
        space = None
        if doc.get("states") is not None:
            space = StateSpace(tuple(State(str(k), int(i)) for k, i in doc["states"]))
        elif net is not None and pol is not None:
            space = build_state_space(net, pol)
        T = int(_field(doc, "T", "top level"))
        eps = float(_field(doc, "epsilon", "top level"))
        com = _field(doc, "commodities", "top level")
        cap = np.array([[np.inf if x is None else float(x) for x in row]
                        for row in _field(doc, "capacity", "top level")], dtype=float)
        n = (structure[0] if isinstance(structure, tuple) else structure).n
        if cap.size == 0:
            cap = np.zeros((max(T - 2, 0), n))
        common = dict(structure=structure, d=cap, T=T, epsilon=eps, space=space, network=net,
                      policy=pol, seed=doc.get("seed"), meta=doc.get("meta") or {})
        if "R01" in com:
            problem = MultiCommodityProblem(
                C_L=_field(com, "C_L", "commodities"), R01=com["R01"],
                R0T=_field(com, "R0T", "commodities"), **common)
            if "L" in com and int(com["L"]) != problem.L:
                raise ProblemFormatError("commodities.L: does not match the rows of R01")
        else:
            problem = SingleCommodityProblem(
                c=_field(com, "c", "commodities"), mu_1=_field(com, "mu_1", "commodities"),
                mu_T=_field(com, "mu_T", "commodities"), **common)
    except ProblemFormatError:
        raise
    except (TypeError, ValueError, KeyError, IndexError) as exc:
        raise ProblemFormatError(f"invalid problem document: {exc}") from None
    return problem, notes


def save(problem: Problem, path) -> None:
    text = json.dumps(to_dict(problem), allow_nan=False, separators=(",", ":"))
    Path(path).write_text(text + "\n")


def load_with_warnings(path) -> tuple[Problem, list[str]]:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemFormatError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return from_dict(doc)


def load(path) -> Problem:
    problem, notes = load_with_warnings(path)
    for note in notes:
        warnings.warn(f"{path}: {note}", UserWarning, stacklevel=2)
    return problem


# --------------------------------------------------------------------------- scenarios


@dataclass(frozen=True)
class GridSpec:
    rows: int = 10
    cols: int = 10
    L: int = 50
    T: int = 80
    seed: int = 0
    epsilon: float = 0.01


@dataclass(frozen=True)
class RandomDenseSpec:
    vertices: int = 40
    edge_prob: float = 0.5
    L: int = 100
    T: int = 100
    seed: int = 0
    epsilon: float = 0.0025


@dataclass(frozen=True)
class TrafficSpec:
    T: int = 30
    truck_variant: bool = False
    epsilon: float = 0.01
    source_cost: float = 0.01
    street_map: Network | None = None


def grid_network(rows: int, cols: int) -> Network:
    """Bidirectional grid plus a source edge into corner (0, 0) and a sink edge
    out of corner (rows-1, cols-1).

    Vertex ``r * cols + c`` is grid cell ``(r, c)``; the source tail and sink
    head are the two extra vertices ``rows * cols`` and ``rows * cols + 1``.
    Edge order: source edge, grid edges in lexicographic (tail, head) order,
    sink edge.
    """
    if rows < 2 or cols < 2:
        raise ValidationError("grid needs rows >= 2 and cols >= 2")
    vid = lambda r, c: r * cols + c  # noqa: E731
    pairs = []
    for r in range(rows):
        for c in range(cols):
            for dr, dc in ((-1, 0), (0, -1), (0, 1), (1, 0)):
                rr, cc = r + dr, c + dc
                if 0 <= rr < rows and 0 <= cc < cols:
                    pairs.append((vid(r, c), vid(rr, cc)))
    pairs.sort()
    src, snk = rows * cols, rows * cols + 1
    edges = [Edge(src, vid(0, 0), 1.0, "source")]
    edges += [Edge(a, b, 1.0, "grid") for a, b in pairs]
    edges.append(Edge(vid(rows - 1, cols - 1), snk, 1.0, "sink"))
    return Network(rows * cols + 2, tuple(edges))


def gen_grid(spec: GridSpec) -> MultiCommodityProblem:
    """Sparse grid scenario: shared source/sink corner edges, unit masses,
    capacity ``L`` on the source/sink and 1 elsewhere, storage only at the
    source and sink, per-commodity costs ``Unif[0, 1]``."""
    net = grid_network(spec.rows, spec.cols)
    source_edge, sink_edge = 0, net.n_edges - 1
    policy = StoragePolicy(EDGES_WITH_SELF_STAY, stay_edges=frozenset({source_edge, sink_edge}))
    space = build_state_space(net, policy)
    structure = build_structure_matrix(space, policy, net)
    n, L = space.n, spec.L
    rng = np.random.default_rng(spec.seed)
    C_L = rng.uniform(0.0, 1.0, size=(L, n))
    R01 = np.zeros((L, n))
    R0T = np.zeros((L, n))
    R01[:, source_edge] = 1.0
    R0T[:, sink_edge] = 1.0
    d = np.ones(n)
    d[[source_edge, sink_edge]] = L
    return MultiCommodityProblem(
        structure, C_L, R01, R0T, d, spec.T, spec.epsilon, space, net, policy, spec.seed,
        meta={"scenario": "grid", "rows": spec.rows, "cols": spec.cols},
    )


def gen_random_dense(spec: RandomDenseSpec) -> MultiCommodityProblem:
    """Random digraph with vertex storage; random distinct source/sink vertex per commodity."""
    if spec.vertices < 2:
        raise ValidationError("random dense network needs at least 2 vertices")
    if not 0 < spec.edge_prob <= 1:
        raise ValidationError("edge_prob must lie in (0, 1]")
    rng = np.random.default_rng(spec.seed)
    V = spec.vertices
    pairs = [(i, j) for i in range(V) for j in range(V) if i != j]
    keep = rng.random(len(pairs)) < spec.edge_prob
    net = Network.from_pairs(V, [p for p, k in zip(pairs, keep) if k])
    policy = StoragePolicy(EDGES_AND_VERTICES)
    space = build_state_space(net, policy)
    structure = build_structure_matrix(space, policy, net)
    n, L, E = space.n, spec.L, net.n_edges
    C_L = np.zeros((L, n))
    C_L[:, :E] = rng.uniform(0.0, 1.0, size=(L, E))
    R01 = np.zeros((L, n))
    R0T = np.zeros((L, n))
    for ell in range(L):
        s, t = rng.choice(V, size=2, replace=False)
        R01[ell, space.position("vertex", int(s))] = 1.0
        R0T[ell, space.position("vertex", int(t))] = 1.0
    d = np.ones(n)
    d[E:] = L
    return MultiCommodityProblem(
        structure, C_L, R01, R0T, d, spec.T, spec.epsilon, space, net, policy, spec.seed,
        meta={"scenario": "random_dense", "vertices": V, "edge_prob": spec.edge_prob},
    )


def street_map() -> Network:
    """The bundled synthetic 57-vertex street map (150 directed roads, highways tagged)."""
    text = resources.files("otflow").joinpath("data/street_map.json").read_text()
    doc = json.loads(text)
    edges = tuple(Edge(int(a), int(b), float(l), str(tag)) for a, b, l, tag in doc["edges"])
    return Network(int(doc["vertex_count"]), edges, tuple(doc["labels"]) if doc.get("labels") else None)


def synthetic_street_map(seed: int = 57) -> tuple[Network, np.ndarray]:
    """Generate the synthetic street map shipped as ``data/street_map.json``.

    Jittered 8x8 lattice with 7 points removed (57 junctions); two highway
    corridors hop over every second junction; a spanning tree of lattice
    streets plus extra lattice streets brings the total to 75 two-way roads.
    Coordinates are in units where the lattice spacing is 7.5; at that scale
    the traffic scenario (10 agents per source-sink pair, T = 30) is feasible
    with room to spare, while a spacing of 2.5 leaves it infeasible.
    """
    rng = np.random.default_rng(seed)
    side, spacing = 8, 7.5
    coords = {(r, c): (spacing * (c + rng.uniform(-0.15, 0.15)), spacing * (r + rng.uniform(-0.15, 0.15)))
              for r in range(side) for c in range(side)}
    corridor_row, corridor_col = 3, 4
    highway_hops = []
    for c in range(0, side - 2, 2):
        highway_hops.append(((corridor_row, c), (corridor_row, c + 2)))
    for r in range(0, side - 2, 2):
        highway_hops.append(((r, corridor_col), (r + 2, corridor_col)))
    highway_nodes = {p for hop in highway_hops for p in hop}

    lattice = lambda keep: [  # noqa: E731
        (a, b) for a in keep for b in ((a[0] + 1, a[1]), (a[0], a[1] + 1)) if b in keep
    ]
    candidates = sorted(set(coords) - highway_nodes - {(corridor_row, c) for c in range(side)}
                        - {(r, corridor_col) for r in range(side)})
    while True:
        drop = {candidates[k] for k in rng.choice(len(candidates), size=7, replace=False)}
        keep = sorted(set(coords) - drop)
        streets = lattice(set(keep))
        # connectivity of the street lattice
        adj = {p: [] for p in keep}
        for a, b in streets:
            adj[a].append(b)
            adj[b].append(a)
        seen, stack = {keep[0]}, [keep[0]]
        while stack:
            for q in adj[stack.pop()]:
                if q not in seen:
                    seen.add(q)
                    stack.append(q)
        if len(seen) == len(keep):
            break

    # random spanning tree via shuffled Kruskal, then extra streets up to 75 roads total
    order = rng.permutation(len(streets))
    parent = {p: p for p in keep}

    def find(p):
        while parent[p] != p:
            parent[p] = parent[parent[p]]
            p = parent[p]
        return p

    tree, extra = [], []
    for k in order:
        a, b = streets[k]
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
            tree.append((a, b))
        else:
            extra.append((a, b))
    n_streets = 75 - len(highway_hops)
    roads = [(a, b, "street") for a, b in tree + extra[: n_streets - len(tree)]]
    roads += [(a, b, "highway") for a, b in highway_hops]
    roads.sort()

    vid = {p: k for k, p in enumerate(keep)}
    xy = np.array([coords[p] for p in keep])
    edges = []
    for a, b, tag in roads:
        length = float(np.round(np.hypot(*(xy[vid[a]] - xy[vid[b]])), 6))
        edges.append(Edge(vid[a], vid[b], length, tag))
        edges.append(Edge(vid[b], vid[a], length, tag))
    labels = tuple(f"j{r}{c}" for r, c in keep)
    return Network(len(keep), tuple(edges), labels), xy


def gen_traffic(spec: TrafficSpec) -> MultiCommodityProblem:
    """Traffic routing: every junction is a source and a sink, one commodity per sink."""
    net = spec.street_map or street_map()
    V = net.vertex_count
    policy = StoragePolicy.traffic_routing(range(V), range(V))
    space = build_state_space(net, policy)
    structure = build_structure_matrix(space, policy, net)
    n, E, L = space.n, net.n_edges, V
    src = np.array([space.position("source", v) for v in range(V)])
    snk = np.array([space.position("sink", v) for v in range(V)])
    highway = np.array([e.tag == "highway" for e in net.edges])
    lengths = np.array([e.length for e in net.edges])

    R01 = np.zeros((L, n))
    R01[:, src] = 10.0
    R0T = np.zeros((L, n))
    R0T[np.arange(L), snk] = 10.0 * V
    d = np.empty(n)
    d[:E] = np.where(highway, 100.0, 20.0) * lengths
    d[src] = d[snk] = 100.0 * L
    C_L = np.zeros((L, n))
    C_L[:, src] = spec.source_cost
    C_L[:, :E] = 0.1
    meta = {"scenario": "traffic", "truck_variant": spec.truck_variant, "vertices": V}
    if spec.truck_variant:
        trucks = np.zeros((L, n))
        trucks[:, src] = 0.01
        trucks[:, :E] = np.where(highway, 0.1, 0.7)
        C_L = np.vstack([C_L, trucks])
        R01 = 0.5 * np.vstack([R01, R01])
        R0T = 0.5 * np.vstack([R0T, R0T])
        meta["classes"] = ["car"] * L + ["truck"] * L
    return MultiCommodityProblem(structure, C_L, R01, R0T, d, spec.T, spec.epsilon, space, net, policy,
                                 None, meta=meta)


def generate(spec) -> MultiCommodityProblem:
    if isinstance(spec, GridSpec):
        return gen_grid(spec)
    if isinstance(spec, RandomDenseSpec):
        return gen_random_dense(spec)
    if isinstance(spec, TrafficSpec):
        return gen_traffic(spec)
    raise TypeError(f"unknown scenario spec {type(spec).__name__}")


def write_street_map(path, seed: int = 57) -> None:
    net, xy = synthetic_street_map(seed)
    doc = {
        "vertex_count": net.vertex_count,
        "labels": list(net.labels),
        "coordinates": xy.round(6).tolist(),
        "edges": [[e.tail, e.head, e.length, e.tag] for e in net.edges],
        "seed": seed,
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


__all__: Sequence[str] = (
    "SingleCommodityProblem", "MultiCommodityProblem", "ProblemFormatError", "validate",
    "check_problem", "load", "load_with_warnings", "save", "to_dict", "from_dict", "GridSpec",
    "RandomDenseSpec", "TrafficSpec", "gen_grid", "gen_random_dense", "gen_traffic", "generate",
    "grid_network", "street_map", "with_epsilon",
)
