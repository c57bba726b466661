"""Finite metric graphs with unit-length edges.

Everything downstream (Cayley balls, cone-offs, coordinate spaces of
hierarchical structures) is one of these graphs, so the module carries the
shared machinery: BFS distances, deterministic geodesics, a distance oracle
with a fast path for trees, hyperbolicity and quasi-convexity estimation,
closest-point projections and Hausdorff distances.

Distances are integers; hyperbolicity deltas are half-integers.  All "sup
over the infinite space" quantities are maxima over the built graph and the
reports say whether a scan was exhaustive or sampled.
"""

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import BudgetExceeded, Disconnected
from .sampling import (DEFAULT_PAIR_BUDGET, SampleSpec, rng_for,
                       sample_unordered_pairs)

# Largest vertex count for which an all-pairs matrix is materialized.
MATRIX_CAP = 4096
# Largest quadruple count enumerated exhaustively by four_point_delta.
EXHAUSTIVE_QUADRUPLE_CAP = 2_000_000


class MetricGraph:
    """Immutable simple graph on vertices 0..n-1 with unit edge lengths.

    ``labels``, when given, attaches an opaque string to each vertex
    (normal forms of group elements, usually).
    """

    def __init__(self, n, edges, labels=None):
        self.n = int(n)
        seen = set()
        for u, v in edges:
            if u == v:
                raise ValueError(f"self-loop at vertex {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise ValueError(f"edge ({u},{v}) out of range for n={n}")
            e = (u, v) if u < v else (v, u)
            if e in seen:
                raise ValueError(f"duplicate edge {e}")
            seen.add(e)
        self.edges = tuple(sorted(seen))
        if labels is not None:
            labels = tuple(labels)
            if len(labels) != self.n:
                raise ValueError("label count does not match vertex count")
        self.labels = labels

        # CSR adjacency, neighbor lists sorted for deterministic traversal.
        deg = np.zeros(self.n, dtype=np.int64)
        for u, v in self.edges:
            deg[u] += 1
            deg[v] += 1
        self.indptr = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(deg, out=self.indptr[1:])
        self.indices = np.empty(2 * len(self.edges), dtype=np.int32)
        fill = self.indptr[:-1].copy()
        for u, v in self.edges:
            self.indices[fill[u]] = v
            fill[u] += 1
            self.indices[fill[v]] = u
            fill[v] += 1
        for u in range(self.n):
            self.indices[self.indptr[u]:self.indptr[u + 1]].sort()

        if self.n == 0:
            self.is_connected = True
        else:
            self.is_connected = bool((bfs_distances(self, [0]) >= 0).all())
        self._oracle = None

    def __repr__(self):
        return f"MetricGraph(n={self.n}, edges={len(self.edges)})"

    def neighbors(self, v):
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    def degree(self, v):
        return int(self.indptr[v + 1] - self.indptr[v])

    def is_tree(self):
        return self.is_connected and len(self.edges) == self.n - 1

    def oracle(self):
        if self._oracle is None:
            self._oracle = DistanceOracle(self)
        return self._oracle

    def label_of(self, v):
        return self.labels[v] if self.labels is not None else str(v)


def _frontier_neighbors(graph, frontier):
    """Flattened neighbor and source arrays for a frontier of vertices."""
    starts = graph.indptr[frontier]
    counts = graph.indptr[frontier + 1] - starts
    total = int(counts.sum())
    if total == 0:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty
    base = np.repeat(np.cumsum(counts) - counts, counts)
    flat = np.repeat(starts, counts) + (np.arange(total, dtype=np.int64) - base)
    nbrs = graph.indices[flat].astype(np.int64)
    srcs = np.repeat(frontier, counts)
    return nbrs, srcs


def bfs_distances(graph, sources):
    """Distances from a set of sources (multi-source BFS); -1 = unreached."""
    dist = np.full(graph.n, -1, dtype=np.int32)
    frontier = np.unique(np.asarray(list(sources), dtype=np.int64))
    dist[frontier] = 0
    level = 0
    while frontier.size:
        level += 1
        nbrs, _ = _frontier_neighbors(graph, frontier)
        if nbrs.size == 0:
            break
        fresh = np.unique(nbrs[dist[nbrs] < 0])
        dist[fresh] = level
        frontier = fresh
    return dist


def bfs_parents(graph, source):
    """BFS tree from one source with smallest-id parents.

    Ties between equal-distance predecessors break toward the smallest
    vertex id, so geodesics reconstructed from the parent array are
    deterministic (and shortlex-first on Cayley balls, whose ids are
    assigned in shortlex order).
    """
    dist = np.full(graph.n, -1, dtype=np.int32)
    parent = np.full(graph.n, -1, dtype=np.int64)
    frontier = np.array([source], dtype=np.int64)
    dist[source] = 0
    level = 0
    while frontier.size:
        level += 1
        nbrs, srcs = _frontier_neighbors(graph, frontier)
        if nbrs.size == 0:
            break
        new = dist[nbrs] < 0
        nbrs, srcs = nbrs[new], srcs[new]
        if nbrs.size == 0:
            break
        order = np.lexsort((srcs, nbrs))
        nbrs, srcs = nbrs[order], srcs[order]
        first = np.ones(len(nbrs), dtype=bool)
        first[1:] = nbrs[1:] != nbrs[:-1]
        fresh, fresh_par = nbrs[first], srcs[first]
        dist[fresh] = level
        parent[fresh] = fresh_par
        frontier = fresh
    return dist, parent


class _TreeMetric:
    """O(1)-ish distance queries on a tree via binary-lifting LCA."""

    def __init__(self, graph):
        self.graph = graph
        n = graph.n
        dist, parent = bfs_parents(graph, 0)
        self.depth = dist.astype(np.int64)
        parent = parent.copy()
        parent[0] = 0
        logn = max(1, int(np.ceil(np.log2(max(n, 2)))))
        self.up = np.empty((logn, n), dtype=np.int64)
        self.up[0] = parent
        for k in range(1, logn):
            self.up[k] = self.up[k - 1][self.up[k - 1]]
        self.logn = logn

    def lca(self, us, vs):
        us = np.array(us, dtype=np.int64, copy=True)
        vs = np.array(vs, dtype=np.int64, copy=True)
        du, dv = self.depth[us], self.depth[vs]
        swap = du < dv
        us[swap], vs[swap] = vs[swap], us[swap].copy()
        diff = np.abs(du - dv)
        for k in range(self.logn):
            lift = (diff >> k) & 1 == 1
            if lift.any():
                us[lift] = self.up[k][us[lift]]
        neq = us != vs
        for k in range(self.logn - 1, -1, -1):
            cand = neq & (self.up[k][us] != self.up[k][vs])
            if cand.any():
                us[cand] = self.up[k][us[cand]]
                vs[cand] = self.up[k][vs[cand]]
        out = us.copy()
        out[neq] = self.up[0][us[neq]]
        return out

    def pair_dist(self, us, vs):
        l = self.lca(us, vs)
        return (self.depth[us] + self.depth[vs] - 2 * self.depth[l]).astype(np.int32)

    def row(self, u):
        all_v = np.arange(self.graph.n, dtype=np.int64)
        return self.pair_dist(all_v, np.full(self.graph.n, u, dtype=np.int64))

    def parents_toward(self, u):
        """parent[v] = next vertex on the geodesic from v to u (u itself: -1)."""
        n = self.graph.n
        chain = [u]
        w = u
        while self.depth[w] > 0:
            w = int(self.up[0][w])
            chain.append(w)
        anc_at_depth = np.array(chain[::-1], dtype=np.int64)  # depth d -> ancestor
        all_v = np.arange(n, dtype=np.int64)
        l = self.lca(all_v, np.full(n, u, dtype=np.int64))
        parent = self.up[0].copy()
        on_spine = l == all_v  # v is an ancestor of u: step down toward u
        dv = self.depth[all_v[on_spine]] + 1
        dv = np.minimum(dv, len(anc_at_depth) - 1)
        parent[on_spine] = anc_at_depth[dv]
        parent[u] = -1
        return parent


class DistanceOracle:
    """Exact distance queries with a strategy chosen per graph.

    Trees use LCA arithmetic, graphs up to MATRIX_CAP vertices get a cached
    all-pairs matrix, anything larger answers from per-source BFS rows
    cached on demand.
    """

    def __init__(self, graph, matrix_cap=MATRIX_CAP):
        self.graph = graph
        self.n = graph.n
        self._tree = _TreeMetric(graph) if graph.is_tree() and graph.n > 0 else None
        self._matrix = None
        self._use_matrix = self._tree is None and graph.n <= matrix_cap
        self._rows = {}
        self._parents = {}

    def matrix(self):
        if self._matrix is None:
            if self.n > MATRIX_CAP and not self._use_matrix:
                raise BudgetExceeded(f"distance matrix for n={self.n} over cap")
            m = np.empty((self.n, self.n), dtype=np.int16)
            for u in range(self.n):
                m[u] = bfs_distances(self.graph, [u]).astype(np.int16)
            self._matrix = m
        return self._matrix

    def row(self, u):
        if self._tree is not None:
            return self._tree.row(u).astype(np.int32)
        if self._use_matrix:
            return self.matrix()[u].astype(np.int32)
        if u not in self._rows:
            self._rows[u] = bfs_distances(self.graph, [u])
        return self._rows[u]

    def pairs(self, us, vs):
        us = np.asarray(us, dtype=np.int64)
        vs = np.asarray(vs, dtype=np.int64)
        if self._tree is not None:
            return self._tree.pair_dist(us, vs)
        if self._use_matrix:
            return self.matrix()[us, vs].astype(np.int32)
        out = np.empty(len(us), dtype=np.int32)
        for u in np.unique(us):
            mask = us == u
            out[mask] = self.row(int(u))[vs[mask]]
        return out

    def dist(self, u, v):
        return int(self.pairs([u], [v])[0])

    def dist_to_set(self, verts):
        """Distances from every vertex to the nearest vertex of the set."""
        return bfs_distances(self.graph, verts)

    def parents_from(self, u):
        if self._tree is not None:
            return self._tree.parents_toward(u)
        if u not in self._parents:
            _, par = bfs_parents(self.graph, u)
            self._parents[u] = par
        return self._parents[u]

    def geodesic(self, u, v):
        """A deterministic geodesic from u to v as a vertex list."""
        if self._tree is not None:
            parent = None
            path = [v]
            tm = self._tree
            l = int(tm.lca([u], [v])[0])
            up_u = [u]
            w = u
            while w != l:
                w = int(tm.up[0][w])
                up_u.append(w)
            down_v = []
            w = v
            while w != l:
                down_v.append(w)
                w = int(tm.up[0][w])
            return up_u + down_v[::-1]
        parent = self.parents_from(u)
        if u != v and parent[v] < 0:
            raise Disconnected(f"no path from {u} to {v}")
        path = [int(v)]
        w = int(v)
        while w != u:
            w = int(parent[w])
            path.append(w)
        return path[::-1]

    def diameter_of_set(self, verts, pair_budget=None):
        """Max pairwise distance within a vertex set (0 for empty/singleton)."""
        verts = np.asarray(list(verts), dtype=np.int64)
        if len(verts) <= 1:
            return 0
        if pair_budget is not None and len(verts) * (len(verts) - 1) // 2 > pair_budget:
            raise BudgetExceeded("diameter scan over pair budget")
        us, vs = np.triu_indices(len(verts), k=1)
        return int(self.pairs(verts[us], verts[vs]).max())


class Subgraph:
    """A nonempty connected induced subgraph, referenced by vertex set."""

    def __init__(self, parent, vertices, label=None, flags=()):
        self.parent = parent
        self.vertices = tuple(sorted(set(int(v) for v in vertices)))
        if not self.vertices:
            raise ValueError("subgraph must be nonempty")
        for v in self.vertices:
            if not 0 <= v < parent.n:
                raise ValueError(f"vertex {v} not in parent graph")
        self.label = label
        self.flags = tuple(flags)
        self._induced = None
        if not self._connected_check():
            raise ValueError(f"induced subgraph {label or self.vertices[:4]} is not connected")

    def _connected_check(self):
        vset = set(self.vertices)
        seen = {self.vertices[0]}
        stack = [self.vertices[0]]
        while stack:
            w = stack.pop()
            for nb in self.parent.neighbors(w):
                nb = int(nb)
                if nb in vset and nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        return len(seen) == len(self.vertices)

    def __len__(self):
        return len(self.vertices)

    def __repr__(self):
        name = self.label or "subgraph"
        return f"Subgraph({name}, {len(self.vertices)} vertices)"

    def vertex_array(self):
        return np.asarray(self.vertices, dtype=np.int64)

    def to_local(self):
        return {v: i for i, v in enumerate(self.vertices)}

    def induced_graph(self):
        """The induced graph on local ids 0..len-1 (vertices kept sorted)."""
        if self._induced is None:
            local = self.to_local()
            edges = []
            for i, v in enumerate(self.vertices):
                for nb in self.parent.neighbors(v):
                    nb = int(nb)
                    if nb in local and v < nb:
                        edges.append((i, local[nb]))
            labels = None
            if self.parent.labels is not None:
                labels = [self.parent.labels[v] for v in self.vertices]
            self._induced = MetricGraph(len(self.vertices), edges, labels)
        return self._induced


@dataclass
class PathRecord:
    """A vertex path; length is the number of edges."""

    vertices: tuple
    is_geodesic: bool = False
    quasi_constant: float | None = None

    def length(self):
        return len(self.vertices) - 1

    def validate(self, graph):
        for a, b in zip(self.vertices, self.vertices[1:]):
            if b not in graph.neighbors(a):
                raise ValueError(f"consecutive vertices {a},{b} not adjacent")
        return True


@dataclass
class HyperbolicityReport:
    """Four-point hyperbolicity constant of a graph.

    The four-point convention is used throughout: delta is the smallest
    value with d(x,y)+d(z,w) <= max of the two other pair sums plus
    2*delta over quadruples.  Exhaustive scans give the exact constant;
    sampled scans give a lower bound and say so.
    """

    delta: float
    witness: tuple | None
    exhaustive: bool
    sample: SampleSpec
    convention: str = "four-point"

    def to_dict(self):
        return {"delta": self.delta,
                "witness": list(self.witness) if self.witness else None,
                "exhaustive": self.exhaustive,
                "sample": self.sample.to_dict(),
                "convention": self.convention}


def _vertex_array(h):
    if isinstance(h, Subgraph):
        return h.vertex_array()
    return np.asarray(sorted(set(int(v) for v in h)), dtype=np.int64)


def connected_hull(graph, verts, label=None, flags=()):
    """A Subgraph on the vertex set, geodesic-completed if disconnected."""
    verts = sorted(set(int(v) for v in verts))
    try:
        return Subgraph(graph, verts, label=label, flags=flags)
    except ValueError:
        pass
    vset = set(verts)
    comps = []
    unseen = set(verts)
    while unseen:
        root = min(unseen)
        comp = {root}
        stack = [root]
        while stack:
            w = stack.pop()
            for nb in graph.neighbors(w):
                nb = int(nb)
                if nb in vset and nb not in comp:
                    comp.add(nb)
                    stack.append(nb)
        comps.append(sorted(comp))
        unseen -= comp
    oracle = graph.oracle()
    filled = set(verts)
    for comp in comps[1:]:
        filled.update(oracle.geodesic(comps[0][0], comp[0]))
    return Subgraph(graph, sorted(filled), label=label,
                    flags=tuple(flags) + ("hull-completed",))


def shortest_path(graph, u, v):
    """A geodesic from u to v as a PathRecord; raises Disconnected."""
    if not (0 <= u < graph.n and 0 <= v < graph.n):
        raise ValueError("endpoint not in graph")
    path = graph.oracle().geodesic(u, v)
    return PathRecord(vertices=tuple(path), is_geodesic=True)


def _quad_deltas(oracle, quads):
    """Half the gap between the largest and middle pair sums, per quadruple."""
    x, y, z, w = (quads[:, i] for i in range(4))
    s1 = oracle.pairs(x, y).astype(np.int64) + oracle.pairs(z, w)
    s2 = oracle.pairs(x, z).astype(np.int64) + oracle.pairs(y, w)
    s3 = oracle.pairs(x, w).astype(np.int64) + oracle.pairs(y, z)
    sums = np.sort(np.stack([s1, s2, s3], axis=1), axis=1)
    return (sums[:, 2] - sums[:, 1]) / 2.0


def four_point_value(graph, quad):
    """Re-evaluate the four-point gap of one quadruple (witness replay)."""
    quads = np.asarray([quad], dtype=np.int64)
    return float(_quad_deltas(graph.oracle(), quads)[0])


def four_point_delta(graph, budget=None, seed=0,
                     exhaustive_cap=EXHAUSTIVE_QUADRUPLE_CAP):
    """Four-point hyperbolicity constant of a connected graph.

    With no budget the scan is exhaustive over all vertex quadruples
    (guarded by ``exhaustive_cap``); with a budget it is a seeded sample
    and the report is flagged as a lower bound.
    """
    if not graph.is_connected:
        raise Disconnected("four_point_delta requires a connected graph")
    n = graph.n
    oracle = graph.oracle()
    if n < 4:
        spec = SampleSpec("exhaustive", 0, 0, None)
        return HyperbolicityReport(0.0, None, True, spec)

    population = n * (n - 1) * (n - 2) * (n - 3) // 24
    if budget is None:
        if population > exhaustive_cap:
            raise BudgetExceeded(
                f"{population} quadruples exceed exhaustive cap; pass a budget")
        best = -1.0
        witness = None
        it = itertools.combinations(range(n), 4)
        while True:
            chunk = np.fromiter(itertools.chain.from_iterable(
                itertools.islice(it, 200_000)), dtype=np.int64)
            if chunk.size == 0:
                break
            quads = chunk.reshape(-1, 4)
            deltas = _quad_deltas(oracle, quads)
            i = int(np.argmax(deltas))
            if deltas[i] > best:
                best = float(deltas[i])
                witness = tuple(int(q) for q in quads[i])
        spec = SampleSpec("exhaustive", population, population, None)
        return HyperbolicityReport(best, witness, True, spec)

    rng = rng_for(seed)
    quads = rng.integers(0, n, size=(int(budget * 1.2) + 8, 4))
    distinct = ((quads[:, 0] != quads[:, 1]) & (quads[:, 0] != quads[:, 2])
                & (quads[:, 0] != quads[:, 3]) & (quads[:, 1] != quads[:, 2])
                & (quads[:, 1] != quads[:, 3]) & (quads[:, 2] != quads[:, 3]))
    quads = quads[distinct][:budget]
    deltas = _quad_deltas(oracle, quads)
    i = int(np.argmax(deltas))
    spec = SampleSpec("sampled", population, len(quads), seed)
    return HyperbolicityReport(float(deltas[i]), tuple(int(q) for q in quads[i]),
                               False, spec)


def closest_point_projection(graph, h, x):
    """All vertices of h at minimal distance from x (the full tie set)."""
    verts = _vertex_array(h)
    if len(verts) == 0:
        raise ValueError("projection target is empty")
    row = graph.oracle().row(x)
    sub = row[verts]
    reachable = sub >= 0
    if not reachable.any():
        raise Disconnected(f"vertex {x} cannot reach the target set")
    m = sub[reachable].min()
    return [int(v) for v in verts[reachable][sub[reachable] == m]]


@dataclass
class QuasiconvexityReport:
    q: int
    witness_pair: tuple | None
    witness_vertex: int | None
    sample: SampleSpec

    def to_dict(self):
        return {"q": self.q, "witness_pair": self.witness_pair,
                "witness_vertex": self.witness_vertex,
                "sample": self.sample.to_dict()}


def quasiconvexity_constant(graph, h, pair_budget=DEFAULT_PAIR_BUDGET, seed=0):
    """Smallest q with every geodesic between vertices of h inside N_q(h).

    A vertex z lies on some geodesic from u to v iff d(u,z)+d(z,v)=d(u,v),
    so the scan covers *all* geodesics between the scanned pairs without
    enumerating them.
    """
    if not graph.is_connected:
        raise Disconnected("quasiconvexity scan requires a connected graph")
    verts = _vertex_array(h)
    oracle = graph.oracle()
    dist_to_h = oracle.dist_to_set(verts)
    us, vs, spec = sample_unordered_pairs(len(verts), pair_budget, seed)
    q = -1
    witness_pair = None
    witness_vertex = None
    rows = {}
    for ui, vi in zip(us, vs):
        u, v = int(verts[ui]), int(verts[vi])
        for w in (u, v):
            if w not in rows:
                rows[w] = oracle.row(w)
        d = rows[u][v]
        on_geo = rows[u] + rows[v] == d
        local = dist_to_h[on_geo]
        zi = int(np.argmax(local))
        if local[zi] > q:
            q = int(local[zi])
            witness_pair = (u, v)
            witness_vertex = int(np.flatnonzero(on_geo)[zi])
        if len(rows) > 4096:
            rows.clear()
    return QuasiconvexityReport(max(q, 0), witness_pair, witness_vertex, spec)


def hausdorff_distance(graph, a, b):
    """Symmetric Hausdorff distance between two nonempty vertex sets."""
    av, bv = _vertex_array(a), _vertex_array(b)
    if len(av) == 0 or len(bv) == 0:
        raise ValueError("hausdorff_distance needs nonempty sets")
    oracle = graph.oracle()
    to_b = oracle.dist_to_set(bv)[av]
    to_a = oracle.dist_to_set(av)[bv]
    if (to_b < 0).any() or (to_a < 0).any():
        raise Disconnected("sets are not mutually reachable")
    return int(max(to_b.max(), to_a.max()))


# ---------------------------------------------------------------------------
# import/export

def write_edge_list(graph):
    lines = [f"# vertices {graph.n}"]
    for u, v in graph.edges:
        lines.append(f"{u} {v}")
    return "\n".join(lines) + "\n"


def read_edge_list(text):
    n = 0
    edges = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if len(parts) == 2 and parts[0] == "vertices":
                n = max(n, int(parts[1]))
            continue
        u, v = line.split()
        u, v = int(u), int(v)
        edges.append((u, v))
        n = max(n, u + 1, v + 1)
    return MetricGraph(n, edges)


def to_dot(graph, styled_edges=None, style='style="dashed", color="red"'):
    """DOT text; edges in ``styled_edges`` get the extra attribute string."""
    styled = set()
    if styled_edges:
        styled = {(u, v) if u < v else (v, u) for u, v in styled_edges}
    lines = ["graph G {"]
    for v in range(graph.n):
        if graph.labels is not None:
            lines.append(f'  {v} [label="{graph.labels[v]}"];')
        else:
            lines.append(f"  {v};")
    for u, v in graph.edges:
        if (u, v) in styled:
            lines.append(f"  {u} -- {v} [{style}];")
        else:
            lines.append(f"  {u} -- {v};")
    lines.append("}")
    return "\n".join(lines) + "\n"
