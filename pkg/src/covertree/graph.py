"""Finite graphs with vertex potentials, directed-edge machinery, radii and lifts."""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph


class GraphError(ValueError):
    """Raised for malformed or disconnected graph input."""


class PotentialGraph:
    """Simple graph on vertices ``0..n-1`` with a real potential per vertex.

    The operator of interest is ``H = A + diag(w)``. Instances are treated as
    immutable; all derived tables are computed lazily and cached.
    """

    def __init__(
        self,
        n: int,
        edges: Iterable[Sequence[int]],
        potential: Sequence[float] | None = None,
        *,
        allow_disconnected: bool = False,
    ):
        self.n = int(n)
        if self.n < 1:
            raise GraphError("malformed edge list: graph needs at least one vertex")
        self.edges: tuple[tuple[int, int], ...] = tuple((int(u), int(v)) for u, v in edges)
        w = np.zeros(self.n) if potential is None else np.asarray(potential, dtype=float)
        if w.shape != (self.n,):
            raise GraphError(f"potential has shape {w.shape}, expected ({self.n},)")
        if not np.all(np.isfinite(w)):
            raise GraphError("potential must be finite at every vertex")
        self.w = w
        self.w.setflags(write=False)

        seen: set[tuple[int, int]] = set()
        nbrs: list[list[int]] = [[] for _ in range(self.n)]
        for u, v in self.edges:
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise GraphError(f"malformed edge list: vertex out of range in {(u, v)}")
            if u == v:
                raise GraphError(f"malformed edge list: self-loop at {u}")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise GraphError(f"malformed edge list: duplicate edge {key}")
            seen.add(key)
            nbrs[u].append(v)
            nbrs[v].append(u)
        self.neighbors: tuple[tuple[int, ...], ...] = tuple(tuple(sorted(a)) for a in nbrs)
        self.degree = np.array([len(a) for a in self.neighbors], dtype=int)

        ncomp, _ = csgraph.connected_components(self.adjacency, directed=False)
        self.connected = ncomp == 1
        if not self.connected and not allow_disconnected:
            raise GraphError("disconnected")

    def __repr__(self) -> str:
        return f"PotentialGraph(n={self.n}, m={self.m}, D={self.max_degree})"

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def max_degree(self) -> int:
        return int(self.degree.max()) if self.n else 0

    @property
    def min_degree(self) -> int:
        return int(self.degree.min()) if self.n else 0

    @property
    def is_cycle(self) -> bool:
        return self.connected and self.n >= 3 and bool(np.all(self.degree == 2))

    @property
    def satisfies_c1(self) -> bool:
        return self.min_degree >= 2 and not self.is_cycle

    def flags(self) -> dict[str, bool]:
        return {
            "connected": self.connected,
            "min_degree_ge_2": self.min_degree >= 2,
            "min_degree_ge_3": self.min_degree >= 3,
            "is_cycle": self.is_cycle,
            "c1": self.satisfies_c1,
        }

    @cached_property
    def adjacency(self) -> sparse.csr_matrix:
        if not self.edges:
            return sparse.csr_matrix((self.n, self.n))
        e = np.array(self.edges)
        rows = np.concatenate([e[:, 0], e[:, 1]])
        cols = np.concatenate([e[:, 1], e[:, 0]])
        return sparse.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(self.n, self.n))

    def hamiltonian(self) -> np.ndarray:
        """Dense ``A + diag(w)``."""
        return self.adjacency.toarray() + np.diag(self.w)

    # -- directed edges ---------------------------------------------------

    @cached_property
    def _darts(self) -> tuple[np.ndarray, np.ndarray, dict[tuple[int, int], int]]:
        origin, terminus = [], []
        for v in range(self.n):
            for u in self.neighbors[v]:
                origin.append(v)
                terminus.append(u)
        index = {(o, t): i for i, (o, t) in enumerate(zip(origin, terminus))}
        return np.array(origin, dtype=int), np.array(terminus, dtype=int), index

    @property
    def origin(self) -> np.ndarray:
        return self._darts[0]

    @property
    def terminus(self) -> np.ndarray:
        return self._darts[1]

    @property
    def n_darts(self) -> int:
        return len(self._darts[0])

    def dart(self, o: int, t: int) -> int:
        """Index of the directed edge ``(o, t)``."""
        try:
            return self._darts[2][(o, t)]
        except KeyError:
            raise GraphError(f"{(o, t)} is not an edge") from None

    @cached_property
    def reverse(self) -> np.ndarray:
        idx = self._darts[2]
        return np.array([idx[(t, o)] for o, t in zip(self.origin, self.terminus)], dtype=int)

    @cached_property
    def out_darts(self) -> tuple[np.ndarray, ...]:
        """Directed edges leaving each vertex."""
        idx = self._darts[2]
        return tuple(np.array([idx[(v, u)] for u in self.neighbors[v]], dtype=int) for v in range(self.n))

    @cached_property
    def successors(self) -> tuple[np.ndarray, ...]:
        """Non-backtracking successors of each directed edge."""
        out = self.out_darts
        rev = self.reverse
        return tuple(out[t][out[t] != rev[e]] for e, t in enumerate(self.terminus))

    @cached_property
    def nb_matrix(self) -> sparse.csr_matrix:
        """Non-backtracking operator: ``(B f)(e) = sum of f over successors of e``."""
        rows = np.repeat(np.arange(self.n_darts), [len(s) for s in self.successors])
        cols = np.concatenate(self.successors) if rows.size else np.array([], dtype=int)
        k = self.n_darts
        return sparse.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(k, k))

    def directed_edges(self) -> list[tuple[int, int]]:
        return list(zip(self.origin.tolist(), self.terminus.tolist()))

    def nb_successors(self, b: tuple[int, int]) -> set[tuple[int, int]]:
        e = self.dart(*b)
        return {(int(self.origin[s]), int(self.terminus[s])) for s in self.successors[e]}

    # -- distances --------------------------------------------------------

    def distances(self, sources: Sequence[int] | None = None) -> np.ndarray:
        d = csgraph.shortest_path(self.adjacency, unweighted=True, directed=False, indices=sources)
        return d

    def diameter(self) -> int:
        d = self.distances()
        return int(d.max()) if np.all(np.isfinite(d)) else -1

    # -- I/O --------------------------------------------------------------

    def to_json_obj(self) -> dict:
        return {
            "vertices": [{"id": i, "w": float(x)} for i, x in enumerate(self.w)],
            "edges": [[u, v] for u, v in self.edges],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj(), sort_keys=True)

    def with_potential(self, potential: Sequence[float]) -> "PotentialGraph":
        return PotentialGraph(self.n, self.edges, potential, allow_disconnected=not self.connected)


def build_graph(edges: Iterable[Sequence[int]], potentials: Sequence[float]) -> PotentialGraph:
    """Validated connected graph; vertex count is ``len(potentials)``."""
    return PotentialGraph(len(potentials), edges, potentials)


def graph_from_json(obj: Mapping | str) -> PotentialGraph:
    if isinstance(obj, str):
        obj = json.loads(obj)
    try:
        verts = obj["vertices"]
        ids = [int(v["id"]) for v in verts]
        w = [float(v["w"]) for v in verts]
        edges = [tuple(e) for e in obj["edges"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise GraphError(f"malformed graph file: {exc}") from None
    if ids != list(range(len(ids))):
        raise GraphError("malformed graph file: vertex ids must be 0..n-1 in order")
    if any(len(e) != 2 for e in edges):
        raise GraphError("malformed edge list: edges must be pairs")
    return build_graph(edges, w)


def load_graph(path: str) -> PotentialGraph:
    with open(path) as fh:
        return graph_from_json(json.load(fh))


def save_graph(g: PotentialGraph, path: str) -> None:
    with open(path, "w") as fh:
        fh.write(g.to_json())
        fh.write("\n")


# -- radii ----------------------------------------------------------------


@dataclass(frozen=True)
class RadiiProfile:
    rho_G: int
    ell_G: int
    ell_local: np.ndarray
    rho_local: np.ndarray
    girth: float  # math.inf for acyclic graphs
    cap: int
    unbounded: bool  # ell_G hit the cap because the whole graph has at most one cycle

    def to_json_obj(self) -> dict:
        return {
            "rho_G": self.rho_G,
            "ell_G": self.ell_G,
            "ell_local": self.ell_local.tolist(),
            "girth": None if math.isinf(self.girth) else int(self.girth),
            "cap": self.cap,
            "unbounded": self.unbounded,
        }


def ball_cyclomatic(g: PotentialGraph, x: int, r: int, dist_row: np.ndarray | None = None) -> int:
    """Cyclomatic number (edges - vertices + components) of the induced ball ``B(x, r)``."""
    d = g.distances([x])[0] if dist_row is None else dist_row
    inside = d <= r
    e = np.array(g.edges) if g.edges else np.zeros((0, 2), dtype=int)
    n_e = int(np.count_nonzero(inside[e[:, 0]] & inside[e[:, 1]])) if len(e) else 0
    n_v = int(np.count_nonzero(inside))
    return n_e - n_v + 1  # a ball is connected


def girth(g: PotentialGraph) -> float:
    """Length of a shortest cycle, ``inf`` if acyclic."""
    best = math.inf
    for root in range(g.n):
        dist = {root: 0}
        parent = {root: -1}
        queue = deque([root])
        while queue:
            v = queue.popleft()
            if 2 * dist[v] + 1 >= best:
                break
            for u in g.neighbors[v]:
                if u not in dist:
                    dist[u] = dist[v] + 1
                    parent[u] = v
                    queue.append(u)
                elif parent[v] != u:
                    best = min(best, dist[u] + dist[v] + 1)
    return best


def radii(g: PotentialGraph, chunk: int = 256) -> RadiiProfile:
    """Largest radii at which every induced ball is a tree / has at most one cycle.

    Both are capped at ``diam(G)``: past that the ball is the whole graph.
    """
    if not g.connected:
        raise GraphError("disconnected")
    cap = max(g.diameter(), 0)
    e = np.array(g.edges, dtype=int).reshape(-1, 2)
    rho_local = np.empty(g.n, dtype=int)
    ell_local = np.empty(g.n, dtype=int)
    rs = np.arange(cap + 1)
    for start in range(0, g.n, chunk):
        rows = np.arange(start, min(start + chunk, g.n))
        d = g.distances(rows).astype(int)
        # an edge belongs to B(x, r) iff both endpoints do
        de = np.maximum(d[:, e[:, 0]], d[:, e[:, 1]]) if len(e) else np.zeros((len(rows), 0), dtype=int)
        n_v = np.stack([np.count_nonzero(d <= r, axis=1) for r in rs], axis=1)
        n_e = np.stack([np.count_nonzero(de <= r, axis=1) for r in rs], axis=1)
        cyc = n_e - n_v + 1
        # cyclomatic number of nested connected balls is nondecreasing in r
        rho_local[rows] = np.count_nonzero(cyc == 0, axis=1) - 1
        ell_local[rows] = np.count_nonzero(cyc <= 1, axis=1) - 1
    rho_local = np.maximum(rho_local, 0)
    ell_local = np.maximum(ell_local, 0)
    total_cyc = g.m - g.n + 1
    return RadiiProfile(
        rho_G=int(rho_local.min()),
        ell_G=int(ell_local.min()),
        ell_local=ell_local,
        rho_local=rho_local,
        girth=girth(g),
        cap=cap,
        unbounded=total_cyc <= 1,
    )


# -- (C1) -----------------------------------------------------------------


@dataclass(frozen=True)
class C1Report:
    holds: bool
    reason: str
    violating_pair: tuple[tuple[int, int], tuple[int, int]] | None = None


def check_c1(g: PotentialGraph) -> C1Report:
    """Min degree >= 2, not a cycle, and the non-backtracking matrix is irreducible."""
    if g.min_degree < 2:
        v = int(np.argmin(g.degree))
        return C1Report(False, f"vertex {v} has degree {g.min_degree}")
    if g.is_cycle:
        return C1Report(False, "graph is a cycle")
    ncomp, labels = csgraph.connected_components(g.nb_matrix, directed=True, connection="strong")
    if ncomp == 1:
        return C1Report(True, "ok")
    reach = csgraph.breadth_first_order(g.nb_matrix, 0, directed=True, return_predecessors=False)
    missing = np.setdiff1d(np.arange(g.n_darts), reach)
    b0 = (int(g.origin[0]), int(g.terminus[0]))
    b1 = (int(g.origin[missing[0]]), int(g.terminus[missing[0]]))
    return C1Report(False, "non-backtracking matrix is reducible", (b0, b1))


# -- lifts ----------------------------------------------------------------


@dataclass(frozen=True)
class LiftMap:
    base: PotentialGraph
    lift: PotentialGraph
    N: int
    projection: np.ndarray  # lift vertex -> base vertex
    permutations: tuple[np.ndarray, ...]  # one per base edge, in base.edges order

    def fiber_index(self, lift_vertex: int) -> int:
        return int(lift_vertex) // self.base.n

    def dart_projection(self) -> np.ndarray:
        """Base directed-edge index of every lift directed edge."""
        L, B = self.lift, self.base
        p = self.projection
        return np.array([B.dart(int(p[o]), int(p[t])) for o, t in zip(L.origin, L.terminus)], dtype=int)


def n_lift(
    base: PotentialGraph,
    N: int,
    seed: int | None = None,
    permutations: Sequence[Sequence[int]] | None = None,
) -> LiftMap:
    """N-fold cover: base edge ``(u, v)`` with permutation ``s`` gives lift edges ``(u,i)-(v,s(i))``.

    Lift vertex ``(v, i)`` has index ``i * base.n + v``.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if permutations is None:
        rng = np.random.default_rng(seed)
        perms = tuple(rng.permutation(N) for _ in base.edges)
    else:
        perms = tuple(np.asarray(p, dtype=int) for p in permutations)
        if len(perms) != base.m or any(sorted(p.tolist()) != list(range(N)) for p in perms):
            raise ValueError("need one permutation of 0..N-1 per base edge")
    nb = base.n
    edges = []
    for (u, v), s in zip(base.edges, perms):
        for i in range(N):
            edges.append((i * nb + u, int(s[i]) * nb + v))
    w = np.tile(base.w, N)
    lift = PotentialGraph(N * nb, edges, w, allow_disconnected=True)
    projection = np.tile(np.arange(nb), N)
    return LiftMap(base, lift, N, projection, perms)


# -- generators -----------------------------------------------------------


def cycle_graph(n: int, potential: Sequence[float] | None = None) -> PotentialGraph:
    if n < 3:
        raise GraphError("a simple cycle needs at least 3 vertices")
    return build_graph([(i, (i + 1) % n) for i in range(n)], np.zeros(n) if potential is None else potential)


def complete_graph(n: int, potential: Sequence[float] | None = None) -> PotentialGraph:
    edges = [(i, j) for i in range(n) for j in range(i + 1, n)]
    return build_graph(edges, np.zeros(n) if potential is None else potential)


def path_graph(n: int, potential: Sequence[float] | None = None) -> PotentialGraph:
    return build_graph([(i, i + 1) for i in range(n - 1)], np.zeros(n) if potential is None else potential)


def wheel_graph(rim: int, potential: Sequence[float] | None = None) -> PotentialGraph:
    """Hub 0 joined to a rim cycle ``1..rim``; minimal degree 3."""
    edges = [(0, i) for i in range(1, rim + 1)] + [(i, i % rim + 1) for i in range(1, rim + 1)]
    return build_graph(edges, np.zeros(rim + 1) if potential is None else potential)


def petersen_graph(potential: Sequence[float] | None = None) -> PotentialGraph:
    outer = [(i, (i + 1) % 5) for i in range(5)]
    spokes = [(i, i + 5) for i in range(5)]
    inner = [(5 + i, 5 + (i + 2) % 5) for i in range(5)]
    return build_graph(outer + spokes + inner, np.zeros(10) if potential is None else potential)


def lcf_graph(n: int, shifts: Sequence[int], potential: Sequence[float] | None = None) -> PotentialGraph:
    """Cubic Hamiltonian graph in LCF notation: cycle ``0..n-1`` plus chords ``i ~ i + shifts[i mod len]``."""
    edges = {tuple(sorted((i, (i + 1) % n))) for i in range(n)}
    for i in range(n):
        j = (i + shifts[i % len(shifts)]) % n
        edges.add(tuple(sorted((i, j))))
    return build_graph(sorted(edges), np.zeros(n) if potential is None else potential)


def tutte_coxeter_graph(potential: Sequence[float] | None = None) -> PotentialGraph:
    """The 3-regular girth-8 cage on 30 vertices."""
    return lcf_graph(30, [-13, -9, 7, -7, 9, 13], potential)


def localized_example(m: int) -> PotentialGraph:
    """6-cycle ``x0..x5`` plus a path ``y1..y_{3m-1}`` glued at ``y1~x2`` and ``y_{3m-1}~x5``.

    Vertices ``0..5`` are ``x0..x5``; ``y_k`` has index ``5 + k``. Zero potential.
    """
    if m < 2:
        raise ValueError("m must be >= 2")
    L = 3 * m - 1
    edges = [(i, (i + 1) % 6) for i in range(6)]
    ys = [5 + k for k in range(1, L + 1)]
    edges += [(a, b) for a, b in zip(ys, ys[1:])]
    edges += [(ys[0], 2), (ys[-1], 5)]
    return build_graph(edges, np.zeros(6 + L))


def localized_vector(g: PotentialGraph) -> np.ndarray:
    """The eigenvalue -1 vector of :func:`localized_example`, supported on the 6-cycle."""
    psi = np.zeros(g.n)
    psi[[0, 3]] = 0.5
    psi[[1, 4]] = -0.5
    return psi
