"""Relative metrics, hyperbolically embedded subgroups, and absorption.

The relative metric of a subgroup is measured in the coset-coned Cayley
ball with every edge between two subgroup elements removed.  A family is
accepted as hyperbolically embedded when four desk-scale checks pass:
the coned ball is hyperbolic with radius-stable delta, the relative
metric is proper (radius-stable growth profile), the subgroup is
quasi-isometrically embedded, and distinct cosets have uniformly bounded
coarse intersections.

The absorption construction rebuilds the ambient structure with one copy
of each subgroup's index set per coset, projections factoring through
closest-point projection onto the coset, and relative projections
composed through the coset gates.  Relative projections that cannot be
populated inside the ball are 'unreached' and excluded from constant
estimation, with counts reported.
"""

from dataclasses import dataclass, field

import numpy as np

from .coneoff import build_coneoff
from .errors import EmbeddingViolated, Inconclusive, StructureMismatch
from .graph_core import (MetricGraph, Subgraph, bfs_distances,
                         four_point_delta)
from .groups import (SubgroupSpec, cayley_ball, coset_subgraph,
                     coset_vertices, enumerate_cosets, inverse_word,
                     subgroup_membership)
from .hhs_core import (CONTAINS, EQUAL, NESTED, TRANSVERSE, HHSInstance,
                       ProjectionTable, run_axiom_battery)
from .sampling import rng_for, sample_indices


# ---------------------------------------------------------------------------
# relative metric

@dataclass
class RelativeMetricTable:
    subgroup: SubgroupSpec
    elements: list          # ball vertex ids of subgroup elements, sorted
    words: list
    table: dict             # (i, j) in element order -> distance or None
    coned_graph: object
    radius: int

    def entry(self, i, j):
        return self.table.get((min(i, j), max(i, j)))

    def row_of_identity(self):
        return [self.entry(0, j) for j in range(len(self.elements))]

    def profile(self):
        """n -> number of elements with d-hat from the identity <= n."""
        row = self.row_of_identity()
        finite = sorted(d for d in row if d is not None)
        out = {}
        for n in range(0, (finite[-1] if finite else 0) + 1):
            out[n] = sum(1 for d in finite if d <= n)
        return out


def subgroup_ball_vertices(ball, sub):
    """Vertices of the ball lying in the subgroup (identity coset)."""
    out = []
    for v in range(ball.graph.n):
        if subgroup_membership(ball.model, sub, ball.words[v]):
            out.append(v)
    return out


def coned_over_cosets(ball, subs):
    """The ball coned over every coset of every subgroup in the family."""
    family = []
    owners = []
    for sub in subs:
        for c in enumerate_cosets(ball, sub):
            family.append(coset_subgraph(ball, c))
            owners.append((sub.label, c.representative))
    cg = build_coneoff(ball.graph, family)
    return cg, owners


def relative_metric(ball, sub, family=None):
    """BFS distances between subgroup elements avoiding internal edges.

    The ambient space is the ball coned over all cosets of the family
    (default: just the subgroup); removed edges are every coned or base
    edge joining two identity-coset vertices.
    """
    subs = list(family) if family is not None else [sub]
    cg, _ = coned_over_cosets(ball, subs)
    members = subgroup_ball_vertices(ball, sub)
    member_set = set(members)
    kept = [(u, v) for (u, v) in cg.coned.edges
            if not (u in member_set and v in member_set)]
    punctured = MetricGraph(cg.coned.n, kept, cg.coned.labels)
    table = {}
    for i, v in enumerate(members):
        dist = bfs_distances(punctured, [v])
        for j in range(i, len(members)):
            d = int(dist[members[j]])
            table[(i, j)] = d if d >= 0 else None
    words = [ball.words[v] for v in members]
    return RelativeMetricTable(sub, members, words, table, cg, ball.radius)


# ---------------------------------------------------------------------------
# hyperbolically embedded

@dataclass
class HHEmbeddingWitness:
    gens: tuple
    radius: int
    hyperbolicity: dict
    properness: dict
    qi_embedding: dict
    separation: dict
    flags: list = field(default_factory=list)

    @property
    def passed(self):
        return (self.hyperbolicity["passed"] and self.properness["passed"]
                and self.qi_embedding["passed"] and self.separation["passed"])

    def to_dict(self):
        return {"passed": self.passed, "gens": list(self.gens),
                "radius": self.radius, "hyperbolicity": self.hyperbolicity,
                "properness": self.properness,
                "qi_embedding": self.qi_embedding,
                "separation": self.separation, "flags": self.flags}


def _intrinsic_lengths(model, sub, needed_words, budget=200_000):
    """Word length over subgroup generators for each needed element."""
    targets = {w: None for w in needed_words}
    remaining = len(targets)
    if () in targets:
        targets[()] = 0
        remaining -= 1
    seen = {(): 0}
    frontier = [()]
    max_len = max((len(w) for w in needed_words), default=0) + 4
    while frontier and remaining:
        nxt = []
        for w in frontier:
            for g in sub.generator_words_with_inverses():
                p = model.multiply(w, g)
                if p in seen or len(p) > max_len:
                    continue
                seen[p] = seen[w] + 1
                if p in targets and targets[p] is None:
                    targets[p] = seen[p]
                    remaining -= 1
                nxt.append(p)
                if len(seen) > budget:
                    raise Inconclusive("intrinsic length enumeration over budget")
        frontier = nxt
    return targets


def check_hyperbolically_embedded(model, subs, radius, gens=None, seed=0,
                                  delta_budget=40_000, eps_grid=(0, 1, 2),
                                  separation_cap=None):
    """The four desk-scale checks for a hyperbolically embedded family."""
    ball = cayley_ball(model, radius, gens)
    small = cayley_ball(model, max(radius - 2, 1), gens)
    flags = []

    # (i) coned hyperbolicity, radius-stable
    cg, _ = coned_over_cosets(ball, subs)
    cg_small, _ = coned_over_cosets(small, subs)
    d_big = four_point_delta(cg.coned, budget=delta_budget, seed=seed).delta
    d_small = four_point_delta(cg_small.coned, budget=delta_budget,
                               seed=seed).delta
    hyperbolicity = {"delta": d_big, "delta_smaller_radius": d_small,
                     "passed": d_big == d_small}

    # (ii) properness of the relative metric, radius-stable profile
    properness = {"passed": True, "per_subgroup": {}}
    for sub in subs:
        t_big = relative_metric(ball, sub, family=subs)
        t_small = relative_metric(small, sub, family=subs)
        p_big, p_small = t_big.profile(), t_small.profile()
        small_total = len(t_small.elements)
        stable = True
        witness = None
        for n, count in sorted(p_small.items()):
            if count >= small_total:
                break   # the smaller profile is exhausted from here on
            if p_big.get(n, 0) != count:
                stable = False
                witness = {"n": n, "count_small": count,
                           "count_big": p_big.get(n, 0)}
                break
        unreached = sum(1 for d in t_big.row_of_identity() if d is None)
        properness["per_subgroup"][sub.label] = {
            "profile": p_big, "stable": stable, "witness": witness,
            "unreached": unreached}
        if not stable:
            properness["passed"] = False

    # (iii) quasi-isometric embedding constants
    qi = {"passed": True, "per_subgroup": {}}
    for sub in subs:
        members = subgroup_ball_vertices(ball, sub)
        words = [ball.words[v] for v in members]
        try:
            intrinsic = _intrinsic_lengths(model, sub, words)
        except Inconclusive:
            qi["per_subgroup"][sub.label] = {"passed": False,
                                             "reason": "enumeration budget"}
            qi["passed"] = False
            continue
        lam = 1.0
        origin = ball.id_of(())
        row = ball.graph.oracle().row(origin)
        for v, w in zip(members, words):
            dh = intrinsic[w]
            dt = int(row[v])
            if dh is None:
                continue
            lam = max(lam, dh / (dt + 1.0), dt / (dh + 1.0))
        qi["per_subgroup"][sub.label] = {"lambda": lam, "passed": True,
                                         "elements": len(members)}
    # (iv) separation of cosets; crossing members legitimately give
    # R(eps) ~ 2*eps, so the unbounded proxy only fires above that scale
    if separation_cap is None:
        separation_cap = radius
    caps = {int(e): max(separation_cap, 2 * int(e) + 2) for e in eps_grid}
    separation = {"passed": True, "R": {}, "witness": None,
                  "cap": caps}
    member_sets = {sub.label: subgroup_ball_vertices(ball, sub)
                   for sub in subs}
    R = {int(e): 0 for e in eps_grid}
    oracle = ball.graph.oracle()
    for sub_j in subs:
        for c in enumerate_cosets(ball, sub_j):
            coset = coset_subgraph(ball, c)
            dist = bfs_distances(ball.graph, coset.vertex_array())
            for sub_i in subs:
                if (sub_i is sub_j and c.representative == ()):
                    continue
                hi = np.asarray(member_sets[sub_i.label], dtype=np.int64)
                for e in eps_grid:
                    inside = hi[dist[hi] <= e]
                    if len(inside) > 1:
                        diam = oracle.diameter_of_set(inside)
                        if diam > R[int(e)]:
                            R[int(e)] = diam
                            if diam >= caps[int(e)]:
                                separation["passed"] = False
                                separation["witness"] = {
                                    "g": ball.model.format(c.representative),
                                    "i": sub_i.label, "j": sub_j.label,
                                    "eps": int(e), "diam": diam}
    separation["R"] = R

    return HHEmbeddingWitness(tuple(ball.gens), radius, hyperbolicity,
                              properness, qi, separation, flags)


def check_hh_embedded(base, subs, seed=0, **kwargs):
    """Three-part verdict for hierarchical embedding against a base instance.

    The base instance must carry its Cayley tag (CS realized as a Cayley
    graph with the inclusion projection); each subgroup must be generated
    by its intersection with that generating set; and the family must be
    hyperbolically embedded over the same generators.
    """
    if not base.meta.get("cayley"):
        raise StructureMismatch("base CS is not tagged as a Cayley graph")
    ball = base.meta["ball"]
    gens = tuple(base.meta["cs_generating_set"])
    if not subs:
        return {"passed": True, "vacuous": True, "parts": {}}

    parts = {}
    generated = {"passed": True, "per_subgroup": {}}
    for sub in subs:
        letters_in_h = [g for g in gens
                        if subgroup_membership(ball.model, sub,
                                               ball.model.parse(g))]
        members = set(subgroup_ball_vertices(ball, sub))
        reach = {ball.id_of(())}
        stack = [ball.id_of(())]
        while stack:
            v = stack.pop()
            for g in letters_in_h:
                for token in (g, g + "'"):
                    w2 = ball.model.multiply(ball.words[v],
                                             ball.model.parse(token))
                    j = ball.index.get(w2)
                    if j is not None and j in members and j not in reach:
                        reach.add(j)
                        stack.append(j)
        missing = sorted(members - reach)
        entry = {"generators_in_T": letters_in_h,
                 "covered": len(reach), "of": len(members)}
        if missing:
            entry["witness"] = ball.graph.label_of(missing[0])
            generated["passed"] = False
        generated["per_subgroup"][sub.label] = entry
    parts["generated_by_T"] = generated
    parts["cs_is_cayley"] = {"passed": True, "gens": list(gens)}
    witness = check_hyperbolically_embedded(ball.model, subs, ball.radius,
                                            gens=gens, seed=seed, **kwargs)
    parts["hyperbolically_embedded"] = witness.to_dict()
    passed = generated["passed"] and witness.passed
    return {"passed": passed, "vacuous": False, "parts": parts,
            "witness": witness}


def projection_uniform_bound(base, sub, pair_budget=20_000, seed=0):
    """max over proper indices and cosets of the projection diameter."""
    proper = [u for u in range(base.n_indices()) if u != base.maximal]
    if not proper:
        return {"C": 0, "witness": None, "vacuous": True}
    ball = base.meta.get("ball")
    if ball is None:
        raise StructureMismatch("base instance carries no ball metadata")
    cosets = enumerate_cosets(ball, sub)
    pairs = [(u, c) for u in proper for c in range(len(cosets))]
    idx, spec = sample_indices(len(pairs), pair_budget, seed)
    C = 0
    witness = None
    coset_verts = {}
    for k in idx:
        u, ci = pairs[int(k)]
        if ci not in coset_verts:
            coset_verts[ci], _ = coset_vertices(ball, cosets[ci])
        verts = coset_verts[ci]
        table = base.projections[u]
        image = sorted({int(p) for v in verts for p in table.get(int(v))})
        d = base.space_oracle(u).diameter_of_set(image)
        if d > C:
            C = d
            witness = {"U": base.labels[u],
                       "g": ball.model.format(cosets[ci].representative)}
    return {"C": C, "witness": witness, "vacuous": False,
            "sample": spec.to_dict()}


# ---------------------------------------------------------------------------
# the absorption construction

@dataclass
class AugmentedStructure:
    base: HHSInstance
    subgroup_structures: list     # (SubgroupSpec, sub instance)
    result: HHSInstance
    provenance: list              # per index: ("old", label) or
                                  # ("coset", sub label, rep word, sub index)
    phi_records: list
    coned: object                 # the ConedGraph realizing the new top space
    clamped: int                  # coset elements clamped into the sub ball

    def coset_level_indices(self):
        return [i for i, p in enumerate(self.provenance) if p[0] == "coset"]


def _sub_vertex_of(sub_ball, model, rep, word, clamp_log):
    """Coset element rep*h -> the sub-ball vertex of h, clamped if needed."""
    h = model.multiply(inverse_word(rep), word)
    hv = sub_ball.index.get(tuple(h))
    if hv is not None:
        return hv
    clamp_log.append(h)
    while h and tuple(h) not in sub_ball.index:
        h = h[:-1]
    return sub_ball.index[tuple(h)]


def build_augmented_structure(base, subgroup_structures, force=False,
                              embed_report=None, seed=0):
    """Absorb each subgroup's structure into the ambient one, per coset.

    The new index set is the old one plus one copy of every subgroup index
    per coset; the new top space is the old one coned over all cosets.
    Refuses (unless forced) when the hierarchical-embedding verdict fails.
    """
    if not base.meta.get("cayley"):
        raise StructureMismatch("base CS is not tagged as a Cayley graph")
    ball = base.meta["ball"]
    subs = [sub for sub, _ in subgroup_structures]
    if embed_report is None:
        embed_report = check_hh_embedded(base, subs, seed=seed)
    if not embed_report["passed"] and not force:
        raise EmbeddingViolated(
            "family is not hierarchically hyperbolically embedded; "
            "pass force=True to build anyway")

    X = base.X
    xmatrix = X.oracle().matrix()
    S_old = base.maximal
    cs_graph = base.spaces[S_old]
    if cs_graph.n != X.n:
        raise StructureMismatch("base CS must be carried by the X vertices")

    # cosets and their subgraphs, as subgraphs of CS
    coset_data = []   # (sub index, sub, sub_inst, rep, vertices array)
    clamp_log = []
    for si, (sub, sub_inst) in enumerate(subgroup_structures):
        sub_ball = sub_inst.meta.get("ball")
        if sub_ball is None:
            raise StructureMismatch("subgroup instance carries no ball")
        for c in enumerate_cosets(ball, sub):
            verts, _ = coset_vertices(ball, c)
            coset_data.append((si, sub, sub_inst, c.representative,
                               np.asarray(verts, dtype=np.int64)))
    family = [Subgraph(cs_graph, verts,
                       label=f"{sub.label}[{ball.model.format(rep)}]")
              for si, sub, sub_inst, rep, verts in coset_data]
    coned = build_coneoff(cs_graph, family)

    # index bookkeeping
    labels = list(base.labels)
    provenance = [("old", l) for l in base.labels]
    spaces = list(base.spaces)
    spaces[S_old] = coned.coned
    space_to_x = list(base.space_to_x)
    projections = list(base.projections)
    block_of = {}      # coset id -> (start, count) in the new index range
    sub_of_index = {}
    for ci, (si, sub, sub_inst, rep, verts) in enumerate(coset_data):
        start = len(labels)
        block_of[ci] = (start, sub_inst.n_indices())
        for u in range(sub_inst.n_indices()):
            lab = f"{sub.label}[{ball.model.format(rep)}].{sub_inst.labels[u]}"
            labels.append(lab)
            provenance.append(("coset", sub.label, rep, sub_inst.labels[u]))
            spaces.append(sub_inst.spaces[u])
            space_to_x.append(None)
            sub_of_index[start + u] = (ci, u)

        # projection tables: pi_(U,g) = pi_U o (pull back of the coset gate)
        sub_ball = sub_inst.meta["ball"]
        gate = _projection_sets(xmatrix, verts)
        pull = np.asarray([_sub_vertex_of(sub_ball, ball.model, rep,
                                          ball.words[int(v)], clamp_log)
                           for v in verts], dtype=np.int64)
        for u in range(sub_inst.n_indices()):
            table = sub_inst.projections[u]
            sets = []
            for x in range(X.n):
                gset = gate[x]
                vals = set()
                for gv in gset:
                    vals.update(int(p) for p in table.get(int(pull[gv])))
                sets.append(sorted(vals))
            projections.append(ProjectionTable.from_sets(sets))

    n_idx = len(labels)
    S = S_old
    rel = np.full((n_idx, n_idx), TRANSVERSE, dtype=np.int8)
    nb = base.n_indices()
    rel[:nb, :nb] = base.rel
    for ci in range(len(coset_data)):
        start, count = block_of[ci]
        si, sub, sub_inst, rep, verts = coset_data[ci]
        rel[start:start + count, start:start + count] = sub_inst.rel
        rel[start:start + count, S] = NESTED
        rel[S, start:start + count] = CONTAINS
    np.fill_diagonal(rel, EQUAL)

    coset_arrays = [verts for *_rest, verts in coset_data]

    def rho_provider(inst, u, v):
        if inst.rel[u, v] not in (NESTED, TRANSVERSE):
            return None
        u_new, v_new = u in sub_of_index, v in sub_of_index
        if not u_new and not v_new:
            return base.rho(u, v)
        if u_new and v == S:
            ci, uu = sub_of_index[u]
            return coset_arrays[ci].astype(np.int32)
        if u_new and v_new:
            ci, uu = sub_of_index[u]
            cj, vv = sub_of_index[v]
            if ci == cj:
                sub_inst = coset_data[ci][2]
                return sub_inst.rho(uu, vv)
        # cross pairs: compose through the gate of S_v
        rho_up = _rho_into_top(inst, u)
        if rho_up is None or len(rho_up) == 0:
            return None
        if v_new:
            table = inst.projections[v]
        elif not u_new and v == S:
            return base.rho(u, v)
        else:
            table = inst.projections[v]
        out = set()
        for x in np.asarray(rho_up, dtype=np.int64):
            out.update(int(p) for p in table.get(int(x)))
        return np.asarray(sorted(out), dtype=np.int32) if out else None

    def _rho_into_top(inst, u):
        """rho^u_S as X-vertices (the coset for new top indices)."""
        if u in sub_of_index:
            ci, uu = sub_of_index[u]
            si, sub, sub_inst, rep, verts = coset_data[ci]
            if uu == sub_inst.maximal:
                return coset_arrays[ci]
            r = sub_inst.rho(uu, sub_inst.maximal)
            if r is None:
                return None
            sub_ball = sub_inst.meta["ball"]
            carrier = sub_inst.space_to_x[sub_inst.maximal]
            if carrier is None:
                carrier = np.arange(sub_ball.graph.n)
            out = []
            for sv in np.asarray(r, dtype=np.int64):
                w = ball.model.multiply(rep, sub_ball.words[int(carrier[sv])])
                j = ball.index.get(w)
                if j is not None:
                    out.append(j)
            return np.asarray(sorted(out), dtype=np.int64) if out else None
        if u == S:
            return np.arange(X.n, dtype=np.int64)
        r = base.rho(u, S_old)
        return None if r is None else np.asarray(r, dtype=np.int64)

    def rho_down_provider(inst, w, v, verts_in):
        if w == S:
            # top-space vertices are X vertices: project straight down
            out = set()
            table = inst.projections[v]
            for x in np.asarray(verts_in, dtype=np.int64):
                out.update(int(p) for p in table.get(int(x)))
            return np.asarray(sorted(out), dtype=np.int32)
        if w in sub_of_index and v in sub_of_index:
            ci, ww = sub_of_index[w]
            cj, vv = sub_of_index[v]
            if ci == cj:
                return coset_data[ci][2].rho_down(ww, vv, verts_in)
        if w not in sub_of_index and v not in sub_of_index:
            return base.rho_down(w, v, verts_in)
        return None

    space_to_x[S] = np.arange(X.n, dtype=np.int64)
    meta = {"construction": "augmented", "radius": ball.radius,
            "cayley": True, "cs_generating_set": base.meta["cs_generating_set"],
            "ball": ball, "cosets": len(coset_data)}
    result = HHSInstance(X, labels, spaces, rel, S, projections,
                         rho_provider, rho_down_provider, space_to_x, meta)

    phi_records = []
    for si, (sub, sub_inst) in enumerate(subgroup_structures):
        ci = next(i for i, cd in enumerate(coset_data)
                  if cd[0] == si and cd[3] == ())
        start, count = block_of[ci]
        index_map = {sub_inst.labels[u]: labels[start + u]
                     for u in range(sub_inst.n_indices())}
        phi_records.append({"sub": sub.label, "identity_coset_block": start,
                            "index_map": index_map})
    return AugmentedStructure(base, list(subgroup_structures), result,
                              provenance, phi_records, coned,
                              len(clamp_log))


def _projection_sets(xmatrix, member_verts):
    """Tie-complete closest-point projection sets onto a vertex set."""
    block = xmatrix[:, member_verts]
    mins = block.min(axis=1)
    mask = block == mins[:, None]
    return [np.flatnonzero(mask[x]) for x in range(xmatrix.shape[0])]


def verify_augmented(aug, seed=0, equivariance_samples=100, battery_kwargs=None):
    """Full battery on the absorbed structure plus the morphism contract.

    For each subgroup embedding the index map must be injective and
    relation-preserving (exact), the index-space maps must commute with
    projections on the identity coset, and left multiplication by sampled
    subgroup elements must move projections the way it moves points.
    """
    result = aug.result
    battery = run_axiom_battery(result, seed=seed, **(battery_kwargs or {}))
    ball = result.meta["ball"]
    model = ball.model

    morphisms = []
    for (sub, sub_inst), record in zip(aug.subgroup_structures,
                                       aug.phi_records):
        start = record["identity_coset_block"]
        labels_ok = len(set(record["index_map"].values())) == len(
            record["index_map"])
        rel_ok = True
        for u in range(sub_inst.n_indices()):
            for v in range(sub_inst.n_indices()):
                if result.rel[start + u, start + v] != sub_inst.rel[u, v]:
                    rel_ok = False
        # projections commute on the identity coset: for h in H, the
        # absorbed projection of h equals the subgroup's own projection
        sub_ball = sub_inst.meta["ball"]
        commute_gap = 0
        members = subgroup_ball_vertices(ball, sub)
        for v in members:
            h = ball.words[v]
            hv = sub_ball.index.get(h)
            if hv is None:
                continue
            for u in range(sub_inst.n_indices()):
                mine = set(int(p) for p in result.pi(start + u, v))
                theirs = set(int(p) for p in sub_inst.pi(u, hv))
                if mine != theirs:
                    gap = sub_inst.space_oracle(u).diameter_of_set(
                        sorted(mine | theirs))
                    commute_gap = max(commute_gap, gap)

        # coarse equivariance of left multiplication by subgroup elements
        rng = rng_for(seed)
        eq_gap = 0
        checked = 0
        attempts = 0
        while checked < equivariance_samples and attempts < 20 * equivariance_samples:
            attempts += 1
            h = ball.words[members[int(rng.integers(0, len(members)))]]
            x = ball.words[int(rng.integers(0, ball.graph.n))]
            hx = model.multiply(h, x)
            if hx not in ball.index:
                continue
            hv = sub_ball.index.get(h)
            if hv is None:
                continue
            xv, hxv = ball.index[x], ball.index[hx]
            for u in range(sub_inst.n_indices()):
                carrier = sub_inst.space_to_x[u]
                if carrier is None:
                    continue
                # translate pi_U(x) by h inside the subgroup coordinates
                moved = set()
                for p in result.pi(start + u, xv):
                    word = model.multiply(h, sub_ball.words[int(carrier[p])])
                    j = sub_ball.index.get(word)
                    if j is not None:
                        moved.add(j)
                target = set(int(carrier[p])
                             for p in result.pi(start + u, hxv))
                target_words = {sub_ball.words[t] for t in target}
                moved_words = {sub_ball.words[m] for m in moved}
                if moved and target_words != moved_words:
                    both = sorted({sub_ball.index[w]
                                   for w in target_words | moved_words})
                    gap = sub_ball.graph.oracle().diameter_of_set(both)
                    eq_gap = max(eq_gap, gap)
            checked += 1
        morphisms.append({"sub": sub.label,
                          "index_map_injective": labels_ok,
                          "relations_preserved": rel_ok,
                          "projection_commute_gap": commute_gap,
                          "equivariance_gap": eq_gap,
                          "equivariance_samples": checked})
    passed = battery.passed and all(
        m["index_map_injective"] and m["relations_preserved"]
        and m["projection_commute_gap"] <= 1 and m["equivariance_gap"] <= 1
        for m in morphisms)
    return {"passed": passed, "battery": battery, "morphisms": morphisms,
            "clamped": aug.clamped, "seed": seed}


@dataclass
class DecompositionReport:
    input_path: tuple
    pieces: tuple              # (kind, vertex tuple); kind 'gamma' or 'beta'
    theta: int
    T: int
    per_index: list

    def to_dict(self):
        return {"theta": self.theta, "T": self.T,
                "pieces": [(k, len(p)) for k, p in self.pieces],
                "per_index": self.per_index[:8]}


def decomposition_projection_check(aug, x, y, theta):
    """Split a de-electrified top geodesic into coset runs and short rest.

    Coset pieces shorter than theta are merged into the neighboring
    segments (the coarser subdivision); the report measures the largest
    gap T between the projection diameter of the whole path and the best
    piece, over all proper old indices.
    """
    from .coneoff import de_electrify
    result = aug.result
    coned = aug.coned
    path = coned.coned.oracle().geodesic(x, y)
    record = de_electrify(coned, path)

    # rebuild as alternating segments, merging short coset pieces
    verts = record.output_path.vertices
    piece_at = {}
    for mi, piece in record.pieces:
        piece_at[piece[0]] = piece
    segments = []
    i = 0
    current = [verts[0]]
    while i + 1 <= len(verts) - 1:
        nxt = verts[i + 1]
        key = verts[i]
        piece = piece_at.get(key)
        if piece is not None and len(piece) - 1 > theta and \
                tuple(verts[i:i + len(piece)]) == tuple(piece):
            if len(current) > 1 or segments == []:
                segments.append(("gamma", tuple(current)))
            segments.append(("beta", tuple(piece)))
            i += len(piece) - 1
            current = [verts[i]]
        else:
            current.append(nxt)
            i += 1
    segments.append(("gamma", tuple(current)))

    old_proper = [u for u, p in enumerate(aug.provenance)
                  if p[0] == "old" and u != result.maximal]
    T = 0
    per_index = []
    if old_proper:
        xmap = result.space_to_x[result.maximal]
        for u in old_proper:
            table = result.projections[u]

            def diam_of(seg):
                image = sorted({int(p) for v in seg
                                for p in table.get(int(xmap[v]))})
                return result.space_oracle(u).diameter_of_set(image)

            whole = diam_of(verts)
            best = max((diam_of(seg) for kind, seg in segments), default=0)
            gap = whole - best
            per_index.append({"U": result.labels[u], "whole": whole,
                              "best_piece": best, "gap": gap})
            T = max(T, gap)
    return DecompositionReport(tuple(path), tuple(segments), theta, T,
                               per_index)
