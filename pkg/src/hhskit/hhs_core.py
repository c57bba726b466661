"""The hierarchical-structure data model and its constructions.

An instance bundles a total space X, an index set with pairwise relations
(nested / orthogonal / transverse), one hyperbolic graph per index,
projection sets for every X-vertex, and relative projections between
indices.  Projections are set-valued (full tie sets); all measured
distances between coarse sets are taken between their canonical
representatives (first element of the sorted set) with the set diameters
reported separately as part of xi.  Relative projections that a
construction cannot populate inside the built ball are 'unreached': they
are excluded from constant estimation and counted in reports.

The verification battery itself lives in hhs_checks and is re-exported
here.
"""

import numpy as np

from .errors import BudgetExceeded
from .graph_core import MetricGraph, Subgraph, connected_hull

# relation codes
EQUAL, NESTED, CONTAINS, ORTHOGONAL, TRANSVERSE = 0, 1, 2, 3, 4
REL_NAMES = {EQUAL: "equal", NESTED: "nested", CONTAINS: "contains",
             ORTHOGONAL: "orthogonal", TRANSVERSE: "transverse"}


class ProjectionTable:
    """CSR storage of one index's projection sets over all X-vertices."""

    def __init__(self, indptr, data):
        self.indptr = np.asarray(indptr, dtype=np.int64)
        self.data = np.asarray(data, dtype=np.int32)
        # canonical representative: first element of each (sorted) set
        n = len(self.indptr) - 1
        self.rep = np.empty(n, dtype=np.int32)
        valid = self.indptr[:-1] < self.indptr[1:]
        self.rep[valid] = self.data[self.indptr[:-1][valid]]
        if not valid.all():
            raise ValueError("projection sets must be nonempty")

    def get(self, x):
        return self.data[self.indptr[x]:self.indptr[x + 1]]

    def all_singletons(self):
        if not hasattr(self, "_all_singletons"):
            self._all_singletons = bool((np.diff(self.indptr) == 1).all())
        return self._all_singletons

    def min_over_sets(self, xs, values):
        """Per x in xs: min of ``values`` over the projection set of x."""
        xs = np.asarray(xs, dtype=np.int64)
        if self.all_singletons():
            return values[self.rep[xs]]
        starts = self.indptr[xs]
        counts = self.indptr[xs + 1] - starts
        total = int(counts.sum())
        base = np.repeat(np.cumsum(counts) - counts, counts)
        flat = np.repeat(starts, counts) + (np.arange(total) - base)
        vals = values[self.data[flat]]
        offsets = (np.cumsum(counts) - counts)
        return np.minimum.reduceat(vals, offsets)

    def max_set_diameter(self, space_oracle):
        best = 0
        n = len(self.indptr) - 1
        for x in range(n):
            s = self.get(x)
            if len(s) > 1:
                best = max(best, space_oracle.diameter_of_set(s))
        return best

    @staticmethod
    def identity(n):
        return ProjectionTable(np.arange(n + 1), np.arange(n))

    @staticmethod
    def from_sets(sets):
        indptr = np.zeros(len(sets) + 1, dtype=np.int64)
        data = []
        for i, s in enumerate(sets):
            vals = sorted(int(v) for v in s)
            data.extend(vals)
            indptr[i + 1] = len(data)
        return ProjectionTable(indptr, np.asarray(data, dtype=np.int32))


class HHSInstance:
    """A concrete hierarchical structure on a finite graph.

    ``rho_provider(inst, u, v)`` returns the relative projection of index u
    into C(v) as an array of C(v)-vertex ids, or None for 'unreached'.
    ``rho_down_provider(inst, w, v, verts)`` maps a set of C(w)-vertices
    into C(v) for v properly nested in w (the coarse downward map).
    ``space_to_x[u]`` maps C(u)-vertices to X-vertices when the index space
    is carried by X (used by the default downward maps); None otherwise.
    """

    def __init__(self, X, labels, spaces, rel, maximal, projections,
                 rho_provider, rho_down_provider=None, space_to_x=None,
                 meta=None):
        self.X = X
        self.labels = list(labels)
        self.spaces = list(spaces)
        self.rel = np.asarray(rel, dtype=np.int8)
        self.maximal = int(maximal)
        self.projections = list(projections)
        self._rho_provider = rho_provider
        self._rho_down_provider = rho_down_provider
        self.space_to_x = space_to_x or [None] * len(self.labels)
        self.meta = dict(meta or {})
        self._rho_cache = {}
        self._reverse_proj = {}
        n = len(self.labels)
        if not (self.rel.shape == (n, n) and len(self.spaces) == n
                and len(self.projections) == n):
            raise ValueError("index data sizes disagree")

    # -- basic queries ----------------------------------------------------
    def n_indices(self):
        return len(self.labels)

    def relation(self, u, v):
        return int(self.rel[u, v])

    def nested_below(self, v):
        """Indices properly nested in v."""
        return np.flatnonzero(self.rel[:, v] == NESTED)

    def children_exist(self, v):
        return bool((self.rel[:, v] == NESTED).any())

    def pi(self, u, x):
        return self.projections[u].get(x)

    def pi_rep(self, u):
        return self.projections[u].rep

    def space_oracle(self, u):
        return self.spaces[u].oracle()

    def rho(self, u, v):
        """rho^u_v as C(v)-vertex ids, or None when unreached."""
        key = (u, v)
        if key not in self._rho_cache:
            self._rho_cache[key] = self._rho_provider(self, u, v)
        return self._rho_cache[key]

    def rho_rep(self, u, v):
        r = self.rho(u, v)
        return None if r is None or len(r) == 0 else int(r[0])

    def rho_down(self, w, v, verts):
        """Image in C(v) of a set of C(w)-vertices, for v nested in w."""
        if self._rho_down_provider is not None:
            out = self._rho_down_provider(self, w, v, verts)
            if out is not None:
                return out
        # default: map C(w)-vertices to X, then project with pi_v
        self.meta.setdefault("flags", [])
        if "default-rho" not in self.meta["flags"]:
            self.meta["flags"].append("default-rho")
        if self.space_to_x[w] is not None:
            xs = self.space_to_x[w][np.asarray(verts, dtype=np.int64)]
        else:
            rev = self._reverse_projection(w)
            xs = rev[np.asarray(verts, dtype=np.int64)]
        out = set()
        for x in np.unique(xs):
            out.update(int(p) for p in self.pi(v, int(x)))
        return np.asarray(sorted(out), dtype=np.int32)

    def _reverse_projection(self, u):
        """One X-vertex per C(u)-vertex whose projection contains it."""
        if u not in self._reverse_proj:
            table = self.projections[u]
            rev = np.full(self.spaces[u].n, -1, dtype=np.int64)
            for x in range(self.X.n - 1, -1, -1):
                rev[table.get(x)] = x
            missing = rev < 0
            if missing.any():
                rev[missing] = 0
            self._reverse_proj[u] = rev
        return self._reverse_proj[u]

    def eligible_rho_pairs(self):
        """Ordered pairs (u, v) with rho^u_v defined: u nested in v or transverse."""
        n = self.n_indices()
        out = []
        for u in range(n):
            for v in range(n):
                if self.rel[u, v] in (NESTED, TRANSVERSE):
                    out.append((u, v))
        return out

    def index_of_label(self, label):
        return self.labels.index(label)

    def summary(self):
        return {"indices": self.n_indices(), "X_vertices": self.X.n,
                "maximal": self.labels[self.maximal],
                "meta": {k: v for k, v in self.meta.items()
                         if isinstance(v, (str, int, float, list))}}


# ---------------------------------------------------------------------------
# constructions

def trivial_instance(graph, label="S", meta=None):
    """The one-index structure: CS = X and the identity projection."""
    n = graph.n
    rel = np.zeros((1, 1), dtype=np.int8)

    def rho_provider(inst, u, v):
        return None

    return HHSInstance(graph, [label], [graph], rel, 0,
                       [ProjectionTable.identity(n)], rho_provider,
                       space_to_x=[np.arange(n, dtype=np.int64)],
                       meta=meta)


def instance_from_ball(ball, label="S", meta=None):
    """Trivial structure on a Cayley ball, tagged with its generating set."""
    base_meta = {"cs_generating_set": list(ball.gens), "radius": ball.radius,
                 "cayley": True}
    base_meta.update(meta or {})
    inst = trivial_instance(ball.graph, label=label, meta=base_meta)
    inst.meta["ball"] = ball
    return inst


def _projection_sets_onto(member_verts, xmatrix):
    """Tie-complete closest-point projections onto a member, via X distances."""
    block = xmatrix[:, member_verts]
    mins = block.min(axis=1)
    sets = block == mins[:, None]
    indptr = np.zeros(xmatrix.shape[0] + 1, dtype=np.int64)
    counts = sets.sum(axis=1)
    np.cumsum(counts, out=indptr[1:])
    data = np.flatnonzero(sets.ravel()) % len(member_verts)
    return ProjectionTable(indptr, data.astype(np.int32))


def instance_from_factor_system(cand, report=None):
    """The induced structure: indices = family + the whole graph.

    Index spaces are cone-offs over strictly contained members, projections
    are closest-point projections, nesting is vertex containment, no
    orthogonality, everything else transverse.  rho^U_V is the projection
    image of U (U itself in the coned top space).
    """
    from .coneoff import build_coneoff
    from .factor_system import _containment_dag

    graph, family = cand.graph, cand.family
    m = len(family)
    oracle = graph.oracle()
    xmatrix = oracle.matrix()

    above, vsets = _containment_dag(family)
    n_idx = m + 1
    S = m
    rel = np.full((n_idx, n_idx), TRANSVERSE, dtype=np.int8)
    np.fill_diagonal(rel, EQUAL)
    for i in range(m):
        rel[i, S] = NESTED
        rel[S, i] = CONTAINS
        for j in above[i]:
            rel[i, j] = NESTED
            rel[j, i] = CONTAINS

    spaces = []
    space_to_x = []
    projections = []
    for i, mem in enumerate(family):
        local = mem.to_local()
        contained = [Subgraph(mem.induced_graph(),
                              [local[v] for v in family[j].vertices],
                              label=family[j].label)
                     for j in above_inverse(above, i)]
        coned = build_coneoff(mem.induced_graph(), contained).coned
        spaces.append(coned)
        space_to_x.append(mem.vertex_array())
        projections.append(_projection_sets_onto(mem.vertex_array(), xmatrix))
    cs = build_coneoff(graph, family).coned
    spaces.append(cs)
    space_to_x.append(np.arange(graph.n, dtype=np.int64))
    projections.append(ProjectionTable.identity(graph.n))

    member_arrays = [mem.vertex_array() for mem in family]

    def rho_provider(inst, u, v):
        if inst.rel[u, v] not in (NESTED, TRANSVERSE):
            return None
        if v == S:
            return member_arrays[u].astype(np.int32)
        verts = member_arrays[u]
        out = set()
        table = inst.projections[v]
        for x in verts:
            out.update(int(p) for p in table.get(int(x)))
        return np.asarray(sorted(out), dtype=np.int32)

    def rho_down_provider(inst, w, v, verts):
        xs = inst.space_to_x[w][np.asarray(verts, dtype=np.int64)]
        out = set()
        table = inst.projections[v]
        for x in np.unique(xs):
            out.update(int(p) for p in table.get(int(x)))
        return np.asarray(sorted(out), dtype=np.int32)

    labels = [mem.label or f"member{i}" for i, mem in enumerate(family)] + ["S"]
    meta = {"construction": "factor-system", "radius": cand.radius}
    if report is not None:
        meta["factor_report_passed"] = report.passed
        meta["xi_candidate"] = report.xi_candidate
    if cand.ball is not None:
        # the coned top space realizes the Cayley graph over the extended
        # generating set (finite generators plus the coned members)
        meta.update({"cayley": True, "cs_coned": True,
                     "cs_generating_set": list(cand.ball.gens),
                     "ball": cand.ball})
    return HHSInstance(graph, labels, spaces, rel, S, projections,
                       rho_provider, rho_down_provider, space_to_x, meta)


def above_inverse(above, i):
    """Members strictly contained in member i (inverse of the 'above' lists)."""
    return [j for j in range(len(above)) if i in above[j]]


def normalize(inst):
    """Restrict every index space to the projection image (hull-repaired).

    Returns a new instance plus a hieromorphism record: identity on X,
    bijection on indices.  Already-normalized instances come back intact.
    """
    n_idx = inst.n_indices()
    new_spaces = []
    new_projections = []
    new_space_to_x = []
    changed = []
    keep_maps = []
    for u in range(n_idx):
        space = inst.spaces[u]
        table = inst.projections[u]
        image = np.unique(table.data)
        if len(image) == space.n:
            new_spaces.append(space)
            new_projections.append(table)
            new_space_to_x.append(inst.space_to_x[u])
            keep_maps.append(None)
            continue
        sub = connected_hull(space, image, label=inst.labels[u])
        repaired = "hull-completed" in sub.flags
        local = sub.to_local()
        remap = np.full(space.n, -1, dtype=np.int32)
        for v in sub.vertices:
            remap[v] = local[v]
        new_data = remap[table.data]
        new_spaces.append(sub.induced_graph())
        new_projections.append(ProjectionTable(table.indptr, new_data))
        if inst.space_to_x[u] is not None:
            new_space_to_x.append(inst.space_to_x[u][np.asarray(sub.vertices)])
        else:
            new_space_to_x.append(None)
        keep_maps.append(remap)
        changed.append({"index": inst.labels[u], "removed": int(space.n - len(sub.vertices)),
                        "hull_repaired": repaired})

    def rho_provider(new_inst, u, v):
        r = inst.rho(u, v)
        if r is None:
            return None
        if keep_maps[v] is None:
            return r
        mapped = keep_maps[v][np.asarray(r, dtype=np.int64)]
        mapped = mapped[mapped >= 0]
        if len(mapped) == 0:
            return None
        return np.unique(mapped).astype(np.int32)

    def rho_down_provider(new_inst, w, v, verts):
        verts = np.asarray(verts, dtype=np.int64)
        if keep_maps[w] is not None:
            back = np.asarray(
                [np.flatnonzero(keep_maps[w] == lv)[0] for lv in verts],
                dtype=np.int64)
        else:
            back = verts
        out = inst.rho_down(w, v, back)
        if keep_maps[v] is not None:
            out = keep_maps[v][np.asarray(out, dtype=np.int64)]
            out = np.unique(out[out >= 0]).astype(np.int32)
        return out

    meta = dict(inst.meta)
    meta["normalized"] = True
    meta["normalization_changes"] = changed
    out = HHSInstance(inst.X, inst.labels, new_spaces, inst.rel.copy(),
                      inst.maximal, new_projections, rho_provider,
                      rho_down_provider, new_space_to_x, meta)
    record = {"map": "identity", "index_bijection": dict(zip(inst.labels,
                                                             out.labels)),
              "changed": changed}
    return out, record


def product_hhs(a, b, cap=200_000):
    """The product fixture: Cartesian product graph, coordinate projections.

    Index set = both factors' indices (cross pairs orthogonal) plus a new
    maximal element whose space is the two top spaces joined through one
    apex vertex.
    """
    na, nb = a.X.n, b.X.n
    if na * nb > cap:
        raise BudgetExceeded(f"product would have {na * nb} vertices")

    def vid(i, j):
        return i * nb + j

    edges = []
    for i in range(na):
        for (u, v) in b.X.edges:
            edges.append((vid(i, u), vid(i, v)))
    for (u, v) in a.X.edges:
        for j in range(nb):
            edges.append((vid(u, j), vid(v, j)))
    labels = None
    if a.X.labels is not None and b.X.labels is not None:
        labels = [f"({a.X.labels[i]},{b.X.labels[j]})"
                  for i in range(na) for j in range(nb)]
    X = MetricGraph(na * nb, edges, labels)

    n_a, n_b = a.n_indices(), b.n_indices()
    n_idx = n_a + n_b + 1
    S = n_idx - 1
    rel = np.full((n_idx, n_idx), ORTHOGONAL, dtype=np.int8)
    rel[:n_a, :n_a] = a.rel
    rel[n_a:n_a + n_b, n_a:n_a + n_b] = b.rel
    rel[:, S] = NESTED
    rel[S, :] = CONTAINS
    rel[S, S] = EQUAL

    # top space: both factor top spaces joined through an apex
    csa, csb = a.spaces[a.maximal], b.spaces[b.maximal]
    apex = csa.n + csb.n
    top_edges = list(csa.edges)
    top_edges += [(u + csa.n, v + csa.n) for u, v in csb.edges]
    top_edges += [(v, apex) for v in range(csa.n)]
    top_edges += [(v + csa.n, apex) for v in range(csb.n)]
    cs_top = MetricGraph(apex + 1, top_edges)

    spaces = list(a.spaces) + list(b.spaces) + [cs_top]
    labels_idx = ([f"A.{l}" for l in a.labels] + [f"B.{l}" for l in b.labels]
                  + ["S"])

    coord_a = np.repeat(np.arange(na, dtype=np.int64), nb)
    coord_b = np.tile(np.arange(nb, dtype=np.int64), na)

    projections = []
    for u in range(n_a):
        t = a.projections[u]
        sets = [t.get(int(coord_a[x])) for x in range(X.n)]
        projections.append(ProjectionTable.from_sets(sets))
    for u in range(n_b):
        t = b.projections[u]
        sets = [t.get(int(coord_b[x])) for x in range(X.n)]
        projections.append(ProjectionTable.from_sets(sets))
    top_sets = []
    rep_a = a.projections[a.maximal].rep
    rep_b = b.projections[b.maximal].rep
    for x in range(X.n):
        top_sets.append([int(rep_a[coord_a[x]]), int(rep_b[coord_b[x]]) + csa.n])
    projections.append(ProjectionTable.from_sets(top_sets))

    def rho_provider(inst, u, v):
        if inst.rel[u, v] not in (NESTED, TRANSVERSE):
            return None
        if v == S:
            # each factor's top copy sits inside the join with diameter 2,
            # so the whole copy is the bounded relative projection
            if u < n_a:
                if u == a.maximal:
                    return np.arange(csa.n, dtype=np.int32)
                r = a.rho(u, a.maximal)
                return None if r is None else r.astype(np.int32)
            w = u - n_a
            if w == b.maximal:
                return (np.arange(csb.n) + csa.n).astype(np.int32)
            r = b.rho(w, b.maximal)
            return None if r is None else (r + csa.n).astype(np.int32)
        if u < n_a and v < n_a:
            return a.rho(u, v)
        if u >= n_a and v >= n_a:
            return b.rho(u - n_a, v - n_a)
        return None

    def rho_down_provider(inst, w, v, verts):
        if w == S:
            return None   # fall back to the default reverse-projection map
        if w < n_a and v < n_a:
            return a.rho_down(w, v, verts)
        if w >= n_a and v >= n_a and w != S:
            return b.rho_down(w - n_a, v - n_a, verts)
        return None

    space_to_x = [None] * n_idx
    meta = {"construction": "product",
            "factors": [a.meta.get("construction", "?"),
                        b.meta.get("construction", "?")],
            "coord_a": coord_a, "coord_b": coord_b,
            "split": (n_a, n_b)}
    return HHSInstance(X, labels_idx, spaces, rel, S, projections,
                       rho_provider, rho_down_provider, space_to_x, meta)


# re-export the battery so callers only deal with this module
from .hhs_checks import (AxiomBatteryReport, HierarchyPathResult, HQCReport,  # noqa: E402,F401
                         check_bgi, check_consistency, check_hqc,
                         check_large_links, check_partial_realization,
                         check_structural, check_uniqueness, constants_bundle,
                         distance_formula_fit, find_hierarchy_path,
                         hqc_qc_equivalence, realization_gap,
                         run_axiom_battery)


# ---------------------------------------------------------------------------
# serialization

def instance_to_bundle(inst, rho_cap=250_000):
    """A JSON-ready bundle: relations, spaces, projections, rho tables.

    Refuses on instances whose rho table would explode; the cap counts
    eligible ordered pairs.
    """
    pairs = inst.eligible_rho_pairs()
    if len(pairs) > rho_cap:
        raise BudgetExceeded(f"{len(pairs)} rho pairs exceed bundle cap")
    bundle = {
        "labels": list(inst.labels),
        "maximal": int(inst.maximal),
        "relations": inst.rel.tolist(),
        "X": {"n": inst.X.n, "edges": [list(e) for e in inst.X.edges],
              "labels": list(inst.X.labels) if inst.X.labels else None},
        "spaces": [{"n": s.n, "edges": [list(e) for e in s.edges]}
                   for s in inst.spaces],
        "projections": [{"indptr": t.indptr.tolist(),
                         "data": t.data.tolist()}
                        for t in inst.projections],
        "rho": {},
        "meta": {k: v for k, v in inst.meta.items()
                 if isinstance(v, (str, int, float, bool, list))},
    }
    for u, v in pairs:
        r = inst.rho(u, v)
        bundle["rho"][f"{u},{v}"] = (None if r is None
                                     else [int(x) for x in r])
    return bundle


def instance_from_bundle(bundle):
    """Rebuild an instance from a bundle (rho comes from the stored table)."""
    X = MetricGraph(bundle["X"]["n"],
                    [tuple(e) for e in bundle["X"]["edges"]],
                    bundle["X"]["labels"])
    spaces = [MetricGraph(s["n"], [tuple(e) for e in s["edges"]])
              for s in bundle["spaces"]]
    projections = [ProjectionTable(np.asarray(t["indptr"]),
                                   np.asarray(t["data"]))
                   for t in bundle["projections"]]
    rho_table = {tuple(int(x) for x in k.split(",")):
                 (None if v is None else np.asarray(v, dtype=np.int32))
                 for k, v in bundle["rho"].items()}

    def rho_provider(inst, u, v):
        return rho_table.get((u, v))

    return HHSInstance(X, bundle["labels"], spaces,
                       np.asarray(bundle["relations"], dtype=np.int8),
                       bundle["maximal"], projections, rho_provider,
                       meta=dict(bundle.get("meta", {})))


def instances_structurally_equal(a, b):
    """Equality of labels, relations, spaces, projections and rho tables."""
    if a.labels != b.labels or a.maximal != b.maximal:
        return False
    if not (a.rel == b.rel).all():
        return False
    if a.X.edges != b.X.edges:
        return False
    for sa, sb in zip(a.spaces, b.spaces):
        if sa.n != sb.n or sa.edges != sb.edges:
            return False
    for ta, tb in zip(a.projections, b.projections):
        if not ((ta.indptr == tb.indptr).all()
                and (ta.data == tb.data).all()):
            return False
    for u, v in a.eligible_rho_pairs():
        ra, rb = a.rho(u, v), b.rho(u, v)
        if (ra is None) != (rb is None):
            return False
        if ra is not None and list(ra) != list(rb):
            return False
    return True
