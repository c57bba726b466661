"""Instance constructions and the axiom battery."""

import numpy as np
import pytest

from hhskit import groups as G
from hhskit.factor_system import build_hhs_from_factor_system, family_from_cosets
from hhskit.graph_core import MetricGraph, bfs_distances
from hhskit.groups import SubgroupSpec
from hhskit.hhs_core import (HHSInstance, ProjectionTable, check_bgi,
                             check_consistency, check_hqc,
                             check_large_links, check_partial_realization,
                             check_structural, check_uniqueness,
                             distance_formula_fit, find_hierarchy_path,
                             hqc_qc_equivalence, instance_from_ball,
                             normalize, product_hhs, realization_gap,
                             run_axiom_battery, trivial_instance)

F2 = G.free_group(["a", "b"])
SUB_A = SubgroupSpec(F2, ["a"], label="A")
SUB_B = SubgroupSpec(F2, ["b"], label="B")


@pytest.fixture(scope="module")
def factor4():
    return build_hhs_from_factor_system(
        family_from_cosets(G.cayley_ball(F2, 4), [SUB_A, SUB_B]))


def axis_vertices(inst, letter="a"):
    ok = {letter, letter + "'"}
    return sorted(v for v in range(inst.X.n)
                  if inst.X.labels[v] == "e"
                  or set(inst.X.labels[v].split()) <= ok)


def path_graph(n):
    return MetricGraph(n, [(i, i + 1) for i in range(n - 1)])


# ---------------------------------------------------------------------------
# structural

def test_trivial_instance_structural():
    inst = trivial_instance(path_graph(5))
    rep = check_structural(inst)
    assert rep.passed and rep.complexity == 1 and rep.xi == 0


def test_factor_instance_structural_exact(factor4):
    rep = check_structural(factor4)
    assert rep.passed
    # boundary singleton cosets nest into crossing axes, which nest into S:
    # the exhaustive relation scan gives complexity 3 on this family
    assert rep.complexity == 3
    assert rep.xi == 1           # members are coned to diameter 1 in CS
    assert rep.rho_sample.mode == "exhaustive" or rep.rho_sample.drawn > 0


def test_structural_catches_broken_relation(factor4):
    rel = factor4.rel.copy()
    # make orthogonality asymmetric between two transverse indices
    pair = np.argwhere(rel == 4)[0]
    rel[pair[0], pair[1]] = 3
    broken = HHSInstance(factor4.X, factor4.labels, factor4.spaces, rel,
                         factor4.maximal, factor4.projections,
                         factor4._rho_provider, factor4._rho_down_provider,
                         factor4.space_to_x, factor4.meta)
    rep = check_structural(broken, rho_pair_budget=10)
    assert not rep.passed


# ---------------------------------------------------------------------------
# consistency / large links / bgi / uniqueness

def test_single_index_checks_are_vacuous():
    inst = trivial_instance(path_graph(6))
    cons = check_consistency(inst)
    assert cons.kappa0 == 0
    ll = check_large_links(inst)
    assert all(v == 0.0 for v in ll["lambda_by_E"].values())
    bgi = check_bgi(inst)
    assert bgi["E_bgi"] == 0 and bgi["observations"] == 0


def test_factor_instance_constants(factor4):
    cons = check_consistency(factor4, seed=1)
    assert cons.kappa0 == 0
    bgi = check_bgi(factor4, seed=1)
    assert bgi["E_bgi"] == 0   # sampled shortlex geodesics off a member
    uniq = check_uniqueness(factor4, seed=1)                # project to a gate
    assert not uniq["saturated_at_grid_max"]


def test_uniqueness_trivial_instance_bounded_by_kappa():
    ball = G.cayley_ball(F2, 3)
    inst = instance_from_ball(ball)
    uniq = check_uniqueness(inst, kappa_grid=(1, 2, 3, 4), pair_budget=None)
    for kappa, theta in uniq["theta"].items():
        assert theta <= kappa  # d_S = d_X exactly on the trivial instance


def test_uniqueness_flags_collapsed_projection():
    g = path_graph(7)
    collapsed = HHSInstance(
        g, ["S"], [MetricGraph(1, [])], np.zeros((1, 1), dtype=np.int8), 0,
        [ProjectionTable(np.arange(8), np.zeros(7, dtype=np.int32))],
        lambda inst, u, v: None)
    uniq = check_uniqueness(collapsed, pair_budget=None)
    assert uniq["saturated_at_grid_max"]


# ---------------------------------------------------------------------------
# partial realization and products

def test_product_of_lines_is_grid_with_exact_realization():
    Zm = G.free_group(["a"])
    line1 = instance_from_ball(G.cayley_ball(Zm, 4), label="L1")
    line2 = instance_from_ball(G.cayley_ball(Zm, 4), label="L2")
    prod = product_hhs(line1, line2)
    assert check_structural(prod).passed
    # the coordinate point (3, -2): indices 0 = A.L1, 1 = B.L2
    ball = G.cayley_ball(Zm, 4)
    p1 = ball.id_of_text("a a a")
    p2 = ball.id_of_text("a' a'")
    gaps = realization_gap(prod, [(0, p1), (1, int(p2) + line1.spaces[0].n * 0)])
    # realizer at gap 0 exists and projects to the requested coordinates
    x = int(np.argmin(gaps))
    assert gaps[x] == 0
    assert int(prod.pi_rep(0)[x]) == p1
    assert int(prod.pi_rep(1)[x]) == p2
    pr = check_partial_realization(prod, seed=2)
    assert pr["alpha"] == 0 and not pr["no_realizer"]


def test_product_point_times_instance(factor4):
    point = trivial_instance(MetricGraph(1, []), label="pt")
    prod = product_hhs(point, factor4)
    assert prod.X.n == factor4.X.n
    assert check_structural(prod).passed
    assert prod.n_indices() == factor4.n_indices() + 2


def test_tree_times_tree_container_axiom():
    t1 = instance_from_ball(G.cayley_ball(F2, 2), label="T1")
    t2 = instance_from_ball(G.cayley_ball(F2, 2), label="T2")
    prod = product_hhs(t1, t2)
    rep = check_structural(prod)
    assert rep.passed and rep.details["container_cases"] >= 1


# ---------------------------------------------------------------------------
# distance formula

def test_distance_formula_trivial_exact():
    inst = instance_from_ball(G.cayley_ball(F2, 3))
    fit = distance_formula_fit(inst, s=1)
    assert (fit["K"], fit["C"], fit["violations"]) == (1, 0, 0)


def test_distance_formula_factor_instance(factor4):
    fit = distance_formula_fit(factor4, s=3)
    assert fit["violations"] == 0
    assert fit["K"] is not None


def test_distance_formula_summand_example():
    # pair e, a3b2 at s=1: the per-index summands are BFS-computable by hand
    ball = G.cayley_ball(F2, 5)
    inst = build_hhs_from_factor_system(
        family_from_cosets(ball, [SUB_A, SUB_B]))
    e = ball.id_of(())
    x = ball.id_of_text("a a a b b")
    assert int(inst.X.oracle().dist(e, x)) == 5
    total = 0
    for u in range(inst.n_indices()):
        d = int(inst.space_oracle(u).matrix()[inst.pi_rep(u)[e],
                                              inst.pi_rep(u)[x]])
        total += d if d >= 1 else 0
    # oracle: a-axis contributes 3, the b-coset at a3 contributes 2, the
    # coned top space contributes 2, gates elsewhere contribute 0
    assert total == 7


# ---------------------------------------------------------------------------
# hierarchy paths

def test_hierarchy_path_identity(factor4):
    res = find_hierarchy_path(factor4, 3, 3)
    assert res.D == 1.0 and res.success


def test_hierarchy_path_geodesic_in_tree(factor4):
    ball_words = factor4.X.labels
    y = ball_words.index("a a b b")
    res = find_hierarchy_path(factor4, 0, y, D_budget=4.0)
    assert res.success and res.D <= 4.0
    assert res.vertices[0] == 0 and res.vertices[-1] == y


# ---------------------------------------------------------------------------
# hierarchical quasi-convexity

def test_hqc_whole_space_is_zero(factor4):
    rep = check_hqc(factor4, range(factor4.X.n))
    assert rep.k0 == 0
    assert all(v == 0 for v in rep.k_table.values())


def test_hqc_axis_table_matches_exhaustive_oracle(factor4):
    # independent oracle: for each x, gap(x) = max over indices U of the
    # set distance d_CU(pi_U x, pi_U Y); k(r) = max d_X(x, Y) over gap <= r
    Y = axis_vertices(factor4)
    gaps = np.zeros(factor4.X.n, dtype=np.int64)
    for u in range(factor4.n_indices()):
        table = factor4.projections[u]
        proj = sorted({int(p) for v in Y for p in table.get(v)})
        dist = bfs_distances(factor4.spaces[u], proj).astype(np.int64)
        for x in range(factor4.X.n):
            gaps[x] = max(gaps[x], min(int(dist[p]) for p in table.get(x)))
    dist_y = bfs_distances(factor4.X, Y)
    rep = check_hqc(factor4, Y, r_grid=(0, 1, 2, 3))
    for r in (0, 1, 2, 3):
        expect = int(max(dist_y[gaps <= r], default=0))
        assert rep.k_table[r] == expect
    assert rep.k_table[0] == 0
    # monotone in r
    vals = [rep.k_table[r] for r in (0, 1, 2, 3)]
    assert vals == sorted(vals)


def test_hqc_qc_equivalence_on_axis(factor4):
    Y = axis_vertices(factor4)
    eq = hqc_qc_equivalence(factor4, Y)
    assert eq["q"] == 0 and eq["k0"] == 0
    assert eq["flags"] == []    # the tree is 0-hyperbolic


def test_hqc_qc_flags_non_hyperbolic():
    n = 14
    cyc = MetricGraph(n, [(i, (i + 1) % n) for i in range(n)])
    inst = trivial_instance(cyc)
    eq = hqc_qc_equivalence(inst, [0, 1, 2], delta_threshold=1.0)
    assert "NotHyperbolicFlag" in eq["flags"]


def test_hqc_sphere_fixture_large_constants(factor4):
    # vertices at full radius form a sphere: far from convex
    radius = factor4.meta["radius"]
    row0 = factor4.X.oracle().row(0)
    sphere = [v for v in range(factor4.X.n) if row0[v] == radius]
    eq = hqc_qc_equivalence(factor4, sphere)
    assert eq["q"] >= radius - 1
    assert eq["k0"] >= 1 or eq["k_table"][3] >= 1


# ---------------------------------------------------------------------------
# normalize

def test_normalize_identity_on_factor_instance(factor4):
    out, record = normalize(factor4)
    assert record["changed"] == []
    assert out.spaces[0] is factor4.spaces[0]


def test_normalize_removes_spur():
    g = path_graph(4)
    spur_space = MetricGraph(5, [(0, 1), (1, 2), (2, 3), (3, 4)])
    inst = HHSInstance(
        g, ["S"], [spur_space], np.zeros((1, 1), dtype=np.int8), 0,
        [ProjectionTable.identity(4)], lambda i, u, v: None,
        space_to_x=[np.arange(4)])
    out, record = normalize(inst)
    assert out.spaces[0].n == 4
    assert record["changed"][0]["removed"] == 1
    rep = check_structural(out, rho_pair_budget=10)
    assert rep.passed


# ---------------------------------------------------------------------------
# battery determinism and stability

def test_battery_reproducible(factor4):
    b1 = run_axiom_battery(factor4, seed=9)
    b2 = run_axiom_battery(factor4, seed=9)
    assert b1.to_dict() == b2.to_dict()


def test_constants_bundle_assembly(factor4):
    from hhskit.hhs_core import constants_bundle
    battery = run_axiom_battery(factor4, seed=9)
    fit = distance_formula_fit(factor4, s=3)
    hp = find_hierarchy_path(factor4, 0, 5)
    bundle = constants_bundle(battery, fit, hp)
    for key in ("delta", "xi", "complexity", "K", "kappa0", "E_bgi", "E_ll",
                "alpha", "lambda_by_E", "theta", "s", "K_df", "C_df", "D0"):
        assert key in bundle


def test_battery_stable_across_radii_small():
    stable = {}
    for r in (3, 4):
        inst = build_hhs_from_factor_system(
            family_from_cosets(G.cayley_ball(F2, r), [SUB_A, SUB_B]))
        stable[r] = run_axiom_battery(inst, seed=5).stable_constants()
    assert stable[3] == stable[4]
