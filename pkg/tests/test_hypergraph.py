"""Tests for the stepping-up 4-graph: edge rules, the K5 checker, alpha."""

import math
from itertools import combinations

import numpy as np
import pytest
from conftest import tuple_from_distinct_deltas

import stepup.hypergraph as hg
from stepup.coloring import PairColoring, find_good_triple, sample_coloring
from stepup.errors import (
    BudgetExceeded,
    MalformedTuple,
    NoNonEdge,
    SetTooSmall,
)
from stepup.hypergraph import (
    EdgeRule,
    StepUpHypergraph,
    _edge3_table,
    _msb_matrix,
    _scan_scalar_lex,
    _sweep_block,
    check_k5_free,
    classify_4tuple,
    exact_alpha,
    find_nonedge_in_5set,
    is_edge,
    is_independent,
)


def coloring_from_mask(D, mask):
    npairs = D * (D - 1) // 2
    bits = np.array([(mask >> i) & 1 for i in range(npairs)], dtype=np.uint8)
    return PairColoring(D, bits)


def constant_coloring(D, color=0):
    npairs = D * (D - 1) // 2
    return PairColoring(D, np.full(npairs, color, dtype=np.uint8))


def graph(D, seed):
    return StepUpHypergraph(sample_coloring(D, seed))


def pair_colors(D, assignment):
    """Coloring with the given {(a,b): color} entries, Red elsewhere."""
    npairs = D * (D - 1) // 2
    bits = np.zeros(npairs, dtype=np.uint8)
    phi = PairColoring(D, bits.copy())
    from stepup.coloring import pair_index

    for (a, b), c in assignment.items():
        bits[pair_index(min(a, b), max(a, b), D)] = c
    return PairColoring(D, bits)


# --- rule slots on worked examples -------------------------------------------

def test_rule_i_worked_example():
    # <0,2,6,14> has deltas 1 < 2 < 3; with phi(1,2)=phi(2,3)=Red and
    # phi(1,3)=Blue the rule (i) equation holds.
    phi = pair_colors(4, {(1, 2): 0, (2, 3): 0, (1, 3): 1})
    H = StepUpHypergraph(phi)
    assert classify_4tuple(H, (0, 2, 6, 14)) == (EdgeRule.RULE_I, True)
    # breaking the inequality side kills the edge
    phi2 = constant_coloring(4)
    assert classify_4tuple(StepUpHypergraph(phi2), (0, 2, 6, 14)) == (
        EdgeRule.RULE_I, False)


def test_rule_ii_worked_example():
    # <0,8,9,13> has deltas 3 > 0 < 2 with d1 > d3: rule (ii) slot, edge
    # exactly when phi(3,0) = phi(3,2) != phi(0,2).
    yes = pair_colors(4, {(0, 3): 1, (2, 3): 1, (0, 2): 0})
    no = pair_colors(4, {(0, 3): 1, (2, 3): 1, (0, 2): 1})
    assert classify_4tuple(StepUpHypergraph(yes), (0, 8, 9, 13)) == (
        EdgeRule.RULE_II, True)
    assert classify_4tuple(StepUpHypergraph(no), (0, 8, 9, 13)) == (
        EdgeRule.RULE_II, False)


def test_rule_iii_worked_example():
    # <0,4,5,13> has deltas 2 > 0 < 3 with d1 < d3; all-equal colors make it
    # an edge under rule (iii).
    H = StepUpHypergraph(constant_coloring(4, color=1))
    assert classify_4tuple(H, (0, 4, 5, 13)) == (EdgeRule.RULE_III, True)
    assert is_edge(H, (0, 4, 5, 13))
    mixed = pair_colors(4, {(0, 2): 1, (0, 3): 1, (2, 3): 0})
    assert classify_4tuple(StepUpHypergraph(mixed), (0, 4, 5, 13)) == (
        EdgeRule.RULE_III, False)


def test_local_max_never_an_edge():
    # <0,1,5,7> has deltas 0 < 2 > 1: no rule covers the pattern.
    for mask in range(8):
        H = StepUpHypergraph(coloring_from_mask(3, mask))
        assert classify_4tuple(H, (0, 1, 5, 7)) == (EdgeRule.NONE_SLOT, False)
    rng = np.random.default_rng(7)
    hits = 0
    while hits < 200:
        vs = np.sort(rng.choice(1 << 10, size=4, replace=False))
        vs = tuple(int(v) for v in vs)
        d1, d2, d3 = (
            (vs[0] ^ vs[1]).bit_length() - 1,
            (vs[1] ^ vs[2]).bit_length() - 1,
            (vs[2] ^ vs[3]).bit_length() - 1,
        )
        if not (d1 < d2 > d3):
            continue
        hits += 1
        assert not is_edge(graph(10, 1), vs)


def test_tuple_validation():
    H = graph(5, 0)
    with pytest.raises(MalformedTuple):
        classify_4tuple(H, (0, 1, 2))
    with pytest.raises(MalformedTuple):
        classify_4tuple(H, (0, 1, 2, 2))
    with pytest.raises(MalformedTuple):
        classify_4tuple(H, (0, 1, 2, 32))
    with pytest.raises(MalformedTuple):
        classify_4tuple(H, (3, 1, 2, 8))  # classify demands sorted input
    assert isinstance(is_edge(H, (3, 1, 2, 8)), bool)  # is_edge sorts


def test_is_edge_permutation_invariant():
    H = graph(12, 3)
    rng = np.random.default_rng(11)
    for _ in range(150):
        vs = rng.choice(1 << 12, size=4, replace=False)
        verdicts = set()
        for _ in range(6):
            rng.shuffle(vs)
            verdicts.add(is_edge(H, tuple(int(v) for v in vs)))
        assert len(verdicts) == 1


def test_classify_agrees_with_table_on_a_million_tuples():
    # Self-consistency sweep at D = 20: the scalar classifier, the flat
    # delta-triple table behind the K5 sweep, and is_edge on shuffled input
    # must tell the same story.
    D = 20
    H = graph(D, 3)
    rng = np.random.default_rng(0)
    vs = rng.integers(0, 1 << D, size=(10 ** 6, 4), dtype=np.int64)
    vs.sort(axis=1)
    vs = vs[(np.diff(vs, axis=1) > 0).all(axis=1)]
    x01 = vs[:, 0] ^ vs[:, 1]
    x12 = vs[:, 1] ^ vs[:, 2]
    x23 = vs[:, 2] ^ vs[:, 3]

    def msb(arr):
        _, e = np.frexp(arr.astype(np.float64))
        return (e - 1).astype(np.int64)

    d1, d2, d3 = msb(x01), msb(x12), msb(x23)
    table = _edge3_table(H.coloring)[(d1 * D + d2) * D + d3]
    scalar = np.fromiter(
        (classify_4tuple(H, tuple(row))[1] for row in vs),
        dtype=bool, count=len(vs))
    assert (table == scalar).all()
    sub = vs[:50_000].copy()
    rng.permuted(sub, axis=1, out=sub)
    shuffled = np.fromiter(
        (is_edge(H, tuple(row)) for row in sub), dtype=bool, count=len(sub))
    assert (shuffled == scalar[:50_000]).all()


def test_monotone_edges_match_good_triple_oracle():
    # On a monotone delta pattern the rule (i) equation is exactly the good
    # triple condition on the three delta values.
    rng = np.random.default_rng(5)
    H = graph(16, 9)
    count = 0
    while count < 400:
        ds = rng.choice(16, size=3, replace=False)
        ds = np.sort(ds)
        if rng.random() < 0.5:
            ds = ds[::-1]
        vs = tuple_from_distinct_deltas([int(d) for d in ds], rng)
        got = find_good_triple(H.coloring, tuple(int(d) for d in ds))
        assert is_edge(H, vs) == (got is not None)
        count += 1


# --- K5(4)-freeness -----------------------------------------------------------

def test_k5_free_d3_all_colorings_both_engines():
    assert math.comb(8, 5) == 56
    for mask in range(8):
        H = StepUpHypergraph(coloring_from_mask(3, mask))
        assert check_k5_free(H) is None
        assert _scan_scalar_lex(H, 8) is None


def test_k5_free_d5_random_colorings():
    for seed in range(6):
        assert check_k5_free(graph(5, seed)) is None
    # scalar reference agrees on a couple of them
    for seed in range(2):
        assert _scan_scalar_lex(graph(5, seed), 32) is None


def test_k5_free_every_coloring_not_only_certified():
    # freeness does not depend on phi being good-triple-free: all-Red is as
    # far from certified as it gets and must still pass
    for D in (3, 4, 5):
        assert check_k5_free(StepUpHypergraph(constant_coloring(D))) is None


def test_k5_checker_thread_invariance():
    H = graph(5, 0)
    assert check_k5_free(H, threads=2) is None
    assert check_k5_free(H, threads=1) is None


def test_k5_budget_and_vertex_cap():
    H8 = graph(8, 0)
    with pytest.raises(BudgetExceeded) as exc:
        check_k5_free(H8)
    assert exc.value.required == math.comb(256, 5)
    assert check_k5_free(H8, vertex_cap=40) is None
    assert check_k5_free(H8, vertex_cap=4) is None  # fewer than 5 vertices
    H3 = graph(3, 0)
    with pytest.raises(BudgetExceeded):
        check_k5_free(H3, budget=10)
    assert check_k5_free(H3, budget=10, force=True) is None


# --- the corrupted predicate --------------------------------------------------
#
# Reversing rule (ii)'s leading d1 > d2 comparison inside the valley-shape
# test it shares with rule (iii) leaves rule (ii) unsatisfiable and lets
# rule (iii)'s all-equal condition fire on increasing triples.  Any coloring
# that is monochromatic along an increasing delta chain then yields a K5;
# the checker has to catch it at D = 4.

def test_mutation_flipped_rule_ii_inequality_violates_at_d4():
    H = StepUpHypergraph(constant_coloring(4))
    assert check_k5_free(H) is None
    v = check_k5_free(H, _flip_rule2=True)
    assert v is not None
    assert v.vertices == (0, 1, 2, 4, 8)
    for sub in v.subsets:
        assert sub["is_edge"]
        assert sub["rule"] == "RuleIII"
        d = sub["deltas"]
        assert d[0] < d[1] < d[2]
    # the honest classifier rejects the same subsets
    for sub in combinations(v.vertices, 4):
        assert not is_edge(H, sub)


def test_mutation_violation_found_for_random_seed_too():
    # seed 5 is the first sampled coloring at D = 4 that the corrupted
    # classifier trips over
    H = StepUpHypergraph(sample_coloring(4, 5))
    assert check_k5_free(H) is None
    v = check_k5_free(H, _flip_rule2=True)
    assert v is not None and v.vertices == (0, 1, 2, 4, 8)


def test_corrupted_engines_and_threads_agree():
    H = StepUpHypergraph(constant_coloring(4))
    E3 = _edge3_table(H.coloring, flip_rule2=True)
    dt = _msb_matrix(16)
    assert _sweep_block(E3, dt, 4, 16, 2, 14)
    assert _scan_scalar_lex(H, 16, flip_rule2=True) == (0, 1, 2, 4, 8)
    v = check_k5_free(H, _flip_rule2=True, threads=2)
    assert v.vertices == (0, 1, 2, 4, 8)
    # verdict direction: classify under the flip flags the corrupted edge
    assert classify_4tuple(H, (0, 1, 2, 4), _flip_rule2=True) == (
        EdgeRule.RULE_III, True)
    assert classify_4tuple(H, (0, 1, 2, 4)) == (EdgeRule.RULE_I, False)


def test_corrupted_classifier_random_agreement():
    # scalar corrupted classifier vs corrupted table, random tuples at D = 6
    D = 6
    H = graph(D, 2)
    E3 = _edge3_table(H.coloring, flip_rule2=True)
    rng = np.random.default_rng(4)
    for _ in range(2000):
        vs = np.sort(rng.choice(1 << D, size=4, replace=False))
        vs = tuple(int(v) for v in vs)
        d1 = (vs[0] ^ vs[1]).bit_length() - 1
        d2 = (vs[1] ^ vs[2]).bit_length() - 1
        d3 = (vs[2] ^ vs[3]).bit_length() - 1
        want = bool(E3[(d1 * D + d2) * D + d3])
        assert classify_4tuple(H, vs, _flip_rule2=True)[1] == want


# --- non-edge extraction from 5-sets ------------------------------------------

def test_find_nonedge_spec_examples():
    H = graph(3, 0)
    sub = find_nonedge_in_5set(H, (0, 1, 2, 3, 4))
    assert sub == (0, 1, 2, 3)  # delta pattern 0 < 1 > 0 is a local max
    assert classify_4tuple(H, sub) == (EdgeRule.NONE_SLOT, False)
    # monotone 5-set whose first 4-subtuple fails rule (i): all-Red makes
    # every rule (i) equation fail
    H4 = StepUpHypergraph(constant_coloring(4))
    assert find_nonedge_in_5set(H4, (0, 1, 2, 4, 8)) == (0, 1, 2, 4)


def test_find_nonedge_random_sweep_d24():
    H = graph(24, 12)
    rng = np.random.default_rng(3)
    for _ in range(10 ** 4):
        vs = np.sort(rng.choice(1 << 24, size=5, replace=False))
        vs = tuple(int(v) for v in vs)
        sub = find_nonedge_in_5set(H, vs)
        assert set(sub) < set(vs)
        assert not is_edge(H, sub)


def test_find_nonedge_validation_and_bug_trap(monkeypatch):
    H = graph(4, 0)
    with pytest.raises(MalformedTuple):
        find_nonedge_in_5set(H, (0, 1, 2, 3))
    with pytest.raises(MalformedTuple):
        find_nonedge_in_5set(H, (0, 1, 2, 3, 3))
    monkeypatch.setattr(hg, "is_edge", lambda H, e: True)
    with pytest.raises(NoNonEdge) as exc:
        find_nonedge_in_5set(H, (0, 1, 2, 3, 4))
    assert exc.value.vertices == (0, 1, 2, 3, 4)


# --- independence -------------------------------------------------------------

def bad_subset_table(H):
    """bad[mask] == True iff the vertex set of mask contains an edge."""
    V = H.vertex_count
    bad = np.zeros(1 << V, dtype=bool)
    for sub in combinations(range(V), 4):
        if is_edge(H, sub):
            bad[sum(1 << v for v in sub)] = True
    idx = np.arange(1 << V)
    for b in range(V):
        has = (idx >> b) & 1 == 1
        bad[idx[has]] |= bad[idx[has] ^ (1 << b)]
    return bad


def test_is_independent_examples():
    H = StepUpHypergraph(constant_coloring(4, color=1))
    w = is_independent(H, (0, 4, 5, 13))  # known rule (iii) edge
    assert w is not None
    assert w.vertices == (0, 4, 5, 13)
    assert w.branch == "DirectScanBranch"
    assert w.rule == EdgeRule.RULE_III
    assert w.validate(H)
    d = w.as_dict()
    assert d["vertices"] == [0, 4, 5, 13] and d["rule"] == "RuleIII"

    H2 = graph(2, 0)
    assert is_independent(H2, (0, 1, 2, 3)) is None

    with pytest.raises(SetTooSmall):
        is_independent(H, (0, 1, 2))
    with pytest.raises(MalformedTuple):
        is_independent(H, (0, 1, 2, 2, 5))
    with pytest.raises(BudgetExceeded):
        is_independent(H, range(12), budget=100)


def test_is_independent_agrees_with_bitmask_oracle():
    rng = np.random.default_rng(17)
    for seed in range(5):
        H = graph(4, seed)
        bad = bad_subset_table(H)
        # every 4-subset, plus random larger queries across all sizes
        for sub in combinations(range(16), 4):
            mask = sum(1 << v for v in sub)
            assert (is_independent(H, sub) is None) == (not bad[mask])
        for _ in range(300):
            k = int(rng.integers(5, 13))
            q = tuple(int(v) for v in rng.choice(16, size=k, replace=False))
            mask = sum(1 << v for v in q)
            assert (is_independent(H, q) is None) == (not bad[mask])


# --- exact independence number ------------------------------------------------

def test_exact_alpha_d2_trivial():
    r = exact_alpha(graph(2, 0))
    assert r.alpha == 4
    assert r.witness == (0, 1, 2, 3)
    assert r.method == "bitmask"


def test_exact_alpha_d3_matches_brute_oracle_all_colorings():
    for mask in range(8):
        H = StepUpHypergraph(coloring_from_mask(3, mask))
        best = 0
        for m in range(256):
            q = [v for v in range(8) if (m >> v) & 1]
            if len(q) < 4:
                best = max(best, len(q))
                continue
            if all(not is_edge(H, sub) for sub in combinations(q, 4)):
                best = max(best, len(q))
        assert exact_alpha(H).alpha == best


def test_exact_alpha_d4_matches_bitmask_oracle():
    idx = np.arange(1 << 16, dtype=np.uint32)
    sizes = np.bitwise_count(idx).astype(np.int8)
    for seed in range(5):
        H = graph(4, seed)
        bad = bad_subset_table(H)
        want = int(sizes[~bad].max())
        r = exact_alpha(H)
        assert r.alpha == want
        assert is_independent(H, r.witness) is None
        assert len(r.witness) == r.alpha


def test_exact_alpha_d5_branch_and_bound():
    r = exact_alpha(graph(5, 1))
    assert r.alpha == 12
    assert r.method == "branch-and-bound"
    assert r.nodes == 1_838_983
    assert r.witness == (0, 1, 2, 4, 5, 6, 7, 16, 18, 19, 24, 25)
    assert is_independent(graph(5, 1), r.witness) is None


def test_exact_alpha_ge_greedy_invariant():
    for seed in (2, 3):
        H = graph(4, seed)
        chosen = []
        for v in range(16):
            trial = chosen + [v]
            if len(trial) < 4 or all(
                    not is_edge(H, sub) for sub in combinations(trial, 4)):
                chosen.append(v)
        assert exact_alpha(H).alpha >= len(chosen)


def test_exact_alpha_budgets():
    with pytest.raises(BudgetExceeded):
        exact_alpha(graph(6, 0))
    with pytest.raises(BudgetExceeded):
        exact_alpha(graph(5, 0), node_budget=1000)
