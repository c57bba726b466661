"""Factor-system axioms, the simple-family criterion, and closures.

A candidate is a connected graph with a family of connected subgraphs.
The five axioms are checked literally on the built graph; quantities that
are infinite in the limit ("finite Hausdorff distance", "infinite
diameter") become radius-limited thresholds and the report says so.
Pair scans follow the shared sampling policy: exhaustive below the budget,
seeded above it, sample spec recorded either way.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import BudgetExceeded, FactorSystemViolated
from .graph_core import bfs_distances, connected_hull, four_point_delta
from .sampling import (DEFAULT_PAIR_BUDGET, SampleSpec, sample_indices,
                       sample_ordered_pairs)

DEFAULT_MEMBER_BUDGET = 400


@dataclass
class FactorSystemCandidate:
    graph: object
    family: tuple
    radius: int | None = None
    ball: object = None            # BallGraph metadata when group-backed

    def __post_init__(self):
        self.family = tuple(self.family)
        for m in self.family:
            if m.parent is not self.graph:
                raise ValueError("family member not a subgraph of the candidate graph")

    def labels(self):
        return [m.label or f"member{i}" for i, m in enumerate(self.family)]


@dataclass
class AxiomOutcome:
    passed: bool
    constant: object
    witnesses: list
    sample: SampleSpec | None = None
    details: dict = field(default_factory=dict)

    def to_dict(self):
        return {"passed": self.passed, "constant": self.constant,
                "witnesses": self.witnesses[:8],
                "sample": self.sample.to_dict() if self.sample else None,
                "details": self.details}


@dataclass
class FactorSystemReport:
    embedding: AxiomOutcome        # axiom 1: K
    projections: AxiomOutcome      # axiom 2: xi (with B-witnesses)
    coarse_containment: AxiomOutcome   # axiom 3
    chains: AxiomOutcome           # axiom 4: c
    separation: AxiomOutcome       # axiom 5
    xi_candidate: int = 0
    B: int = 0
    flags: list = field(default_factory=list)

    @property
    def passed(self):
        return all(o.passed for o in (self.embedding, self.projections,
                                      self.coarse_containment, self.chains,
                                      self.separation))

    @property
    def K(self):
        return self.embedding.constant

    @property
    def xi(self):
        return self.projections.constant

    @property
    def chain_bound(self):
        return self.chains.constant

    def to_dict(self):
        return {"passed": self.passed,
                "xi_candidate": self.xi_candidate, "B": self.B,
                "flags": self.flags,
                "axioms": {"embedding": self.embedding.to_dict(),
                           "projections": self.projections.to_dict(),
                           "coarse_containment": self.coarse_containment.to_dict(),
                           "chains": self.chains.to_dict(),
                           "separation": self.separation.to_dict()}}


def _pair_block(oracle, a_verts, b_verts):
    """d_Gamma on a_verts x b_verts as a (|a|,|b|) matrix."""
    aa = np.repeat(a_verts, len(b_verts))
    bb = np.tile(b_verts, len(a_verts))
    return oracle.pairs(aa, bb).reshape(len(a_verts), len(b_verts))


def _projection_from_block(block, a_verts):
    """Tie-complete projection of the column set onto the row set."""
    mins = block.min(axis=0)
    hit = (block == mins[None, :]).any(axis=1)
    return a_verts[hit]


def _set_diameter(oracle, verts, cap=250_000):
    verts = np.asarray(verts, dtype=np.int64)
    if len(verts) <= 1:
        return 0
    if len(verts) * (len(verts) - 1) // 2 > cap:
        raise BudgetExceeded("diameter scan over cap")
    ii, jj = np.triu_indices(len(verts), k=1)
    return int(oracle.pairs(verts[ii], verts[jj]).max())


def _containment_dag(family):
    """Proper-containment edges, pruned through a vertex->members index."""
    vsets = [frozenset(m.vertices) for m in family]
    holder = {}
    for i, m in enumerate(family):
        for v in m.vertices:
            holder.setdefault(v, []).append(i)
    above = [[] for _ in family]
    for i, m in enumerate(family):
        v0 = m.vertices[0]
        for j in holder[v0]:
            if j != i and vsets[i] < vsets[j]:
                above[i].append(j)
    return above, vsets


def _longest_chain(above):
    """Longest run of strict inclusions (number of links, not elements)."""
    n = len(above)
    memo = [-1] * n
    parent = [-1] * n

    def depth(i):
        if memo[i] >= 0:
            return memo[i]
        best = 0
        for j in above[i]:
            d = depth(j) + 1
            if d > best:
                best = d
                parent[i] = j
        memo[i] = best
        return best

    best_i = 0
    best = 0
    for i in range(n):
        if depth(i) > best:
            best = depth(i)
            best_i = i
    chain = [best_i]
    while parent[chain[-1]] >= 0:
        chain.append(parent[chain[-1]])
    return best, chain


def verify_factor_system(cand, pair_budget=DEFAULT_PAIR_BUDGET,
                         member_budget=DEFAULT_MEMBER_BUDGET, seed=0,
                         xi_candidate=None, B=None, axiom5_threshold=None,
                         delta_budget=20_000):
    """Check the five factor-system axioms and estimate their constants.

    Axiom 2 follows the dichotomy contract: every scanned ordered pair
    either has projection diameter <= the xi candidate or comes with
    nested members Hausdorff-close to the projection (all such witnesses
    are recorded).  Axiom 3's hypothesis is only informative for members
    larger than 2B, smaller ones are counted as unobservable at this
    radius.  Axiom 5's "finite Hausdorff distance" is a threshold scaled
    from the radius; boundary-hugging members sit just above it, the
    parallel-copies violation sits below.
    """
    graph, family = cand.graph, cand.family
    if not graph.is_connected:
        raise ValueError("factor-system candidate must be connected")
    oracle = graph.oracle()
    flags = []
    m = len(family)

    if xi_candidate is None:
        delta = four_point_delta(graph, budget=delta_budget, seed=seed).delta
        xi_candidate = int(2 * delta + 2)
    if B is None:
        B = xi_candidate
    if axiom5_threshold is None:
        basis = cand.radius if cand.radius is not None else int(oracle.row(0).max())
        axiom5_threshold = max(1, basis // 8)
        flags.append("axiom5-radius-limited")

    whole = [i for i, mem in enumerate(family) if len(mem) == graph.n]

    # ---- axiom 1: embedding + quasi-convexity constants per member
    member_idx, spec1 = sample_indices(m, member_budget, seed)
    K = 0.0
    worst1 = None
    for i in member_idx:
        mem = family[int(i)]
        verts = mem.vertex_array()
        if len(verts) == 1:
            continue
        rows = np.stack([oracle.row(int(v)) for v in verts])
        inner = mem.induced_graph().oracle()
        dist_to = bfs_distances(graph, verts)
        ii, jj = np.triu_indices(len(verts), k=1)
        d_outer = rows[ii, verts[jj]].astype(np.float64)
        d_inner = inner.pairs(ii, jj).astype(np.float64)
        k_embed = float((d_inner / (d_outer + 1.0)).max()) if len(ii) else 0.0
        q = 0
        for a, b in zip(ii, jj):
            on_geo = rows[a] + rows[b] == rows[a][verts[b]]
            q = max(q, int(dist_to[on_geo].max()))
        val = max(k_embed, float(q))
        if val > K:
            K = val
            worst1 = {"member": mem.label, "k_embed": k_embed, "q": q}
    ax1 = AxiomOutcome(True, K, [worst1] if worst1 else [], spec1)

    # ---- axiom 4: exact chain bound
    above, vsets = _containment_dag(family)
    c_links, chain = _longest_chain(above)
    dups = len(vsets) != len(set(vsets))
    details4 = {"convention": "links (strict inclusions) per chain"}
    if whole:
        details4["whole-graph-member"] = [family[i].label for i in whole]
        flags.append("degenerate-member-equals-graph")
    ax4 = AxiomOutcome(True, c_links,
                       [[family[i].label for i in chain]] if c_links else [],
                       None, details4)
    if dups:
        flags.append("duplicate-vertex-sets")

    # ---- pair scan: axioms 2, 3, 5
    us, vs, spec_pairs = sample_ordered_pairs(m, m, pair_budget, seed,
                                              skip_diagonal=True)
    xi_measured = 0
    ax2_witnesses = []
    ax2_failures = []
    ax3_failures = []
    ax3_skipped = 0
    ax5_failures = []
    member_arrays = [mem.vertex_array() for mem in family]
    member_diams = {}

    def diam_of(i):
        if i not in member_diams:
            member_diams[i] = _set_diameter(oracle, member_arrays[i])
        return member_diams[i]

    for i, j in zip(us, vs):
        i, j = int(i), int(j)
        hi, hj = member_arrays[i], member_arrays[j]
        block = _pair_block(oracle, hi, hj)
        proj = _projection_from_block(block, hi)
        pdiam = _set_diameter(oracle, proj)
        if pdiam > xi_candidate:
            found = []
            for u, vset in enumerate(vsets):
                if vset <= vsets[i]:
                    hu = member_arrays[u]
                    to_u = _pair_block(oracle, proj, hu)
                    dh = max(int(to_u.min(axis=1).max()),
                             int(to_u.min(axis=0).max()))
                    if dh <= B:
                        found.append(family[u].label)
            if found:
                ax2_witnesses.append({"pair": (family[i].label, family[j].label),
                                      "diam": pdiam, "nested": found})
            else:
                ax2_failures.append({"pair": (family[i].label, family[j].label),
                                     "diam": pdiam})
        else:
            xi_measured = max(xi_measured, pdiam)

        # axiom 3, hypothesis guarded by member size
        if diam_of(i) > 2 * B:
            within = _pair_block(oracle, hi, proj)
            dh3 = max(int(within.min(axis=1).max()),
                      int(within.min(axis=0).max()))
            if dh3 <= B and not (vsets[i] <= vsets[j]):
                ax3_failures.append({"pair": (family[i].label, family[j].label),
                                     "hausdorff": dh3})
        else:
            ax3_skipped += 1

        # axiom 5 on unordered pairs
        if i < j:
            dh5 = max(int(block.min(axis=1).max()), int(block.min(axis=0).max()))
            if dh5 <= axiom5_threshold and vsets[i] != vsets[j]:
                ax5_failures.append({"pair": (family[i].label, family[j].label),
                                     "hausdorff": dh5})

    ax2 = AxiomOutcome(not ax2_failures, xi_measured,
                       ax2_failures or ax2_witnesses, spec_pairs,
                       {"xi_candidate": xi_candidate, "B": B,
                        "nested_witness_pairs": len(ax2_witnesses)})
    ax3 = AxiomOutcome(not ax3_failures, B, ax3_failures, spec_pairs,
                       {"skipped_small_members": ax3_skipped,
                        "guard": "diam(H1) > 2B"})
    ax5 = AxiomOutcome(not ax5_failures, axiom5_threshold, ax5_failures,
                       spec_pairs, {"threshold": axiom5_threshold})

    return FactorSystemReport(ax1, ax2, ax3, ax4, ax5,
                              xi_candidate=xi_candidate, B=B, flags=flags)


def simple_family_check(cand, eps_grid=(0, 1, 2), pair_budget=DEFAULT_PAIR_BUDGET,
                        seed=0):
    """Table R(eps) = max diam(N_eps(H1) & H2) over distinct member pairs.

    Includes the infinite-diameter proxy: each member should reach
    diameter >= radius - (its distance from the basepoint), flagged
    otherwise.  Empty intersections have diameter 0 by convention.
    """
    graph, family = cand.graph, cand.family
    oracle = graph.oracle()
    m = len(family)
    eps_grid = sorted(set(int(e) for e in eps_grid))
    table = {e: 0 for e in eps_grid}
    witnesses = {e: None for e in eps_grid}
    member_arrays = [mem.vertex_array() for mem in family]

    us, vs, spec = sample_ordered_pairs(m, m, pair_budget, seed,
                                        skip_diagonal=True)
    for i, j in zip(us, vs):
        i, j = int(i), int(j)
        block = _pair_block(oracle, member_arrays[i], member_arrays[j])
        col_min = block.min(axis=0)
        for e in eps_grid:
            inside = member_arrays[j][col_min <= e]
            if len(inside) > 1:
                d = _set_diameter(oracle, inside)
                if d > table[e]:
                    table[e] = d
                    witnesses[e] = (family[i].label, family[j].label)

    flags = []
    small_members = []
    if cand.radius is not None:
        base_row = oracle.row(0)
        for mem in family:
            access = int(base_row[mem.vertex_array()].min())
            diam_needed = cand.radius - access
            if _set_diameter(oracle, mem.vertex_array()) < diam_needed:
                small_members.append(mem.label)
        if small_members:
            flags.append("diameter-proxy-violations")
    return {"R": table, "witnesses": witnesses, "sample": spec.to_dict(),
            "flags": flags, "small_members": small_members}


def build_hhs_from_factor_system(cand, force=False, report=None,
                                 verify_kwargs=None):
    """Assemble the induced hierarchical structure (see hhs_core).

    Index set = family + the whole graph; each index space is the cone-off
    of the member over strictly contained members; projections are
    closest-point projections; nesting is containment, no orthogonality,
    transversality otherwise.
    """
    if report is None:
        report = verify_factor_system(cand, **(verify_kwargs or {}))
    if not report.passed and not force:
        raise FactorSystemViolated(
            "factor-system axioms failed; pass force=True to build anyway")
    from .hhs_core import instance_from_factor_system
    return instance_from_factor_system(cand, report)


def family_from_cosets(ball, subs):
    """All coset subgraphs of the given subgroups in the ball."""
    from .groups import coset_subgraph, enumerate_cosets
    fam = []
    for sub in subs:
        for c in enumerate_cosets(ball, sub):
            fam.append(coset_subgraph(ball, c))
    return FactorSystemCandidate(ball.graph, fam, radius=ball.radius,
                                 ball=ball)


def build_group_factor_closure(ball, subs, budget=3,
                               pair_budget=DEFAULT_PAIR_BUDGET, seed=0,
                               xi_candidate=None):
    """Projection-closure approximation of the quasi-convex coset family.

    Start from all cosets of the subgroups; while some cross projection
    has diameter above the xi candidate, adjoin it as a new member
    (identifying members at Hausdorff distance <= 1); stop at a fixpoint
    or after ``budget`` rounds.
    """
    graph = ball.graph
    oracle = graph.oracle()
    cand = family_from_cosets(ball, subs)
    if xi_candidate is None:
        delta = four_point_delta(graph, budget=20_000, seed=seed).delta
        xi_candidate = int(2 * delta + 2)

    history = []
    family = list(cand.family)
    for rounds in range(budget + 1):
        member_arrays = [mem.vertex_array() for mem in family]
        m = len(family)
        us, vs, spec = sample_ordered_pairs(m, m, pair_budget, seed,
                                            skip_diagonal=True)
        new_members = []
        for i, j in zip(us, vs):
            i, j = int(i), int(j)
            block = _pair_block(oracle, member_arrays[i], member_arrays[j])
            proj = _projection_from_block(block, member_arrays[i])
            if _set_diameter(oracle, proj) > xi_candidate:
                new_members.append((i, j, proj))
        added = 0
        for i, j, proj in new_members:
            hull = connected_hull(graph, proj,
                                  label=f"proj[{family[i].label}<-{family[j].label}]")
            duplicate = False
            for mem in family:
                to_mem = _pair_block(oracle, hull.vertex_array(),
                                     mem.vertex_array())
                dh = max(int(to_mem.min(axis=1).max()),
                         int(to_mem.min(axis=0).max()))
                if dh <= 1:
                    duplicate = True
                    break
            if not duplicate:
                family.append(hull)
                added += 1
        history.append({"round": rounds, "projections_over_xi": len(new_members),
                        "added": added, "family_size": len(family)})
        if added == 0:
            return (FactorSystemCandidate(graph, family, radius=ball.radius,
                                          ball=ball),
                    {"iterations": rounds, "fixpoint": True,
                     "xi_candidate": xi_candidate, "history": history})
    raise BudgetExceeded(
        f"projection closure did not stabilize in {budget} rounds",
        partial=FactorSystemCandidate(graph, family, radius=ball.radius,
                                      ball=ball))
