"""The stepping-up 4-graph H on {0,...,2^D - 1}.

A sorted 4-tuple with consecutive deltas (d1, d2, d3) falls into exactly
one structural slot: monotone (rule i), valley with d1 > d3 (rule ii),
valley with d1 < d3 (rule iii), or local-max (never an edge).  The pair
coloring phi then decides edge membership inside the slot:

    rule i:   phi(d1,d2) = phi(d2,d3) != phi(d1,d3)
    rule ii:  phi(d1,d2) = phi(d1,d3) != phi(d2,d3)
    rule iii: phi(d1,d2) = phi(d1,d3) = phi(d2,d3)

In the valley slots d1 = d3 is impossible for genuine vertex tuples
(Property III), so that case is asserted, never branched on.

K5(4)-freeness of H holds for EVERY phi; check_k5_free verifies it
exhaustively at desk scale.  Enumerating binom(2^D, 5) five-sets one
python tuple at a time is hopeless already at D = 7, so the checker runs
a blockwise numpy sweep over a precomputed delta-triple edge table and
falls back to a plain lexicographic scalar scan (kept as the reference
implementation) only to pin down the first violation if the sweep ever
detects one.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from itertools import combinations
from typing import Iterable, Optional

import numpy as np

from .coloring import PairColoring
from .delta import delta, delta_sequence
from .errors import (
    BudgetExceeded,
    InvalidD,
    InvalidParams,
    MalformedTuple,
    NoNonEdge,
    SetTooSmall,
)

__all__ = [
    "EdgeRule",
    "StepUpHypergraph",
    "EdgeWitness",
    "FiveSetViolation",
    "AlphaResult",
    "classify_4tuple",
    "is_edge",
    "check_k5_free",
    "find_nonedge_in_5set",
    "is_independent",
    "exact_alpha",
]

K5_BUDGET_DEFAULT = 5 * 10 ** 9
INDEPENDENT_BUDGET_DEFAULT = 10 ** 8


class EdgeRule(Enum):
    RULE_I = "RuleI"
    RULE_II = "RuleII"
    RULE_III = "RuleIII"
    NONE_SLOT = "None"


class StepUpHypergraph:
    """Lazily evaluated 4-graph; edges are never materialized."""

    def __init__(self, coloring: PairColoring, D: Optional[int] = None):
        D = coloring.D if D is None else D
        if not 2 <= D <= 64:
            raise InvalidD(f"need 2 <= D <= 64, got {D}")
        if coloring.D != D:
            raise InvalidParams(
                f"coloring is over [0,{coloring.D}) but D={D}")
        self.D = D
        self.coloring = coloring

    @property
    def vertex_count(self) -> int:
        return 1 << self.D

    def __repr__(self):
        return f"StepUpHypergraph(D={self.D}, phi_seed={self.coloring.seed})"


@dataclass
class EdgeWitness:
    """A 4-tuple certified as an edge, plus how it was derived."""

    vertices: tuple[int, int, int, int]
    deltas: tuple[int, int, int]
    rule: EdgeRule
    colors: list[tuple[int, int, int]]       # (a, b, phi(a,b)) consulted
    branch: str                              # DirectScanBranch | MonotoneRunBranch | AnchorChainBranch
    candidate_index: Optional[int] = None
    trace: dict = field(default_factory=dict)

    def validate(self, H: StepUpHypergraph) -> bool:
        return is_edge(H, self.vertices)

    def as_dict(self) -> dict:
        return {
            "vertices": [int(v) for v in self.vertices],
            "deltas": [int(d) for d in self.deltas],
            "rule": self.rule.value,
            "colors": [[int(a), int(b), int(c)] for a, b, c in self.colors],
            "branch": self.branch,
            "candidate_index": self.candidate_index,
            "trace": self.trace,
        }


@dataclass
class FiveSetViolation:
    vertices: tuple[int, int, int, int, int]
    subsets: list[dict]  # per 4-subset: vertices, deltas, rule, is_edge

    def as_dict(self) -> dict:
        return {"vertices": [int(v) for v in self.vertices],
                "subsets": self.subsets}


@dataclass
class AlphaResult:
    alpha: int
    witness: tuple[int, ...]
    method: str
    nodes: int = 0

    def as_dict(self) -> dict:
        return {"alpha": self.alpha, "witness": [int(v) for v in self.witness],
                "method": self.method, "nodes": self.nodes}


def _slot(d1: int, d2: int, d3: int) -> EdgeRule:
    """Structural rule slot of a consecutive-delta triple."""
    if d1 < d2:
        if d2 < d3:
            return EdgeRule.RULE_I
        return EdgeRule.NONE_SLOT  # local max d1 < d2 > d3
    if d2 > d3:
        return EdgeRule.RULE_I  # decreasing
    # valley d1 > d2 < d3
    assert d1 != d3, "valley with d1 == d3 violates Property III"
    return EdgeRule.RULE_II if d1 > d3 else EdgeRule.RULE_III


def _validate_4tuple(H: StepUpHypergraph, e) -> tuple[int, int, int, int]:
    vs = tuple(int(v) for v in e)
    if len(vs) != 4:
        raise MalformedTuple(f"need exactly 4 vertices, got {len(vs)}")
    if len(set(vs)) != 4:
        raise MalformedTuple(f"vertices must be distinct: {vs}")
    if any(not 0 <= v < H.vertex_count for v in vs):
        raise MalformedTuple(f"vertices outside [0, 2^{H.D}): {vs}")
    return vs


def classify_4tuple(H: StepUpHypergraph, e,
                    _flip_rule2: bool = False) -> tuple[EdgeRule, bool]:
    """Rule slot and edge verdict for a strictly increasing 4-tuple."""
    vs = _validate_4tuple(H, e)
    if any(a >= b for a, b in zip(vs, vs[1:])):
        raise MalformedTuple(f"4-tuple must be strictly increasing: {vs}")
    d1, d2, d3 = (delta(vs[0], vs[1]), delta(vs[1], vs[2]), delta(vs[2], vs[3]))
    phi = H.coloring
    if _flip_rule2:
        # Deliberately corrupted classifier; only the mutation tests set the
        # flag.  Rule (ii)'s leading d1 > d2 comparison is reversed inside
        # the valley-shape test the rule shares with rule (iii): rule (ii)
        # can then never fire, valleys stop being edges, and rule (iii)'s
        # all-equal condition misfires on increasing triples.
        if not (d1 < d2 < d3 or d1 > d2 > d3):
            return EdgeRule.NONE_SLOT, False
        c12 = phi.color(d1, d2)
        c23 = phi.color(d2, d3)
        c13 = phi.color(d1, d3)
        if c12 == c23 != c13:
            return EdgeRule.RULE_I, True
        if d1 < d2 < d3 and c12 == c13 == c23:
            return EdgeRule.RULE_III, True
        return EdgeRule.RULE_I, False
    rule = _slot(d1, d2, d3)
    if rule == EdgeRule.NONE_SLOT:
        return rule, False
    c12 = phi.color(d1, d2)
    c23 = phi.color(d2, d3)
    c13 = phi.color(d1, d3)
    if rule == EdgeRule.RULE_I:
        return rule, c12 == c23 != c13
    if rule == EdgeRule.RULE_II:
        return rule, c12 == c13 != c23
    return rule, c12 == c13 == c23


def is_edge(H: StepUpHypergraph, e) -> bool:
    """Edge predicate on any 4 distinct vertices; sorts, then classifies."""
    vs = _validate_4tuple(H, e)
    _, verdict = classify_4tuple(H, tuple(sorted(vs)))
    return verdict


def _edge_witness_for(H: StepUpHypergraph, vs: tuple[int, int, int, int],
                      branch: str, **kw) -> EdgeWitness:
    rule, verdict = classify_4tuple(H, vs)
    assert verdict, "witness constructor called on a non-edge"
    d1, d2, d3 = delta_sequence(vs)
    phi = H.coloring
    colors = [(min(a, b), max(a, b), phi.color(a, b))
              for a, b in ((d1, d2), (d2, d3), (d1, d3))]
    return EdgeWitness(vertices=vs, deltas=(d1, d2, d3), rule=rule,
                       colors=colors, branch=branch, **kw)


# --- K5(4)-freeness ----------------------------------------------------------

def _msb_matrix(V: int) -> np.ndarray:
    idx = np.arange(V, dtype=np.uint64)
    x = np.bitwise_xor(idx[:, None], idx[None, :])
    _, e = np.frexp(x.astype(np.float64))
    return (e - 1).astype(np.int64)  # diagonal is -1, never consulted


def _edge3_table(phi: PairColoring, flip_rule2: bool = False) -> np.ndarray:
    """Flattened D^3 lookup: is (d1,d2,d3) an edge-making delta triple."""
    D = phi.D
    pm = phi.as_matrix().astype(np.int16)
    a = np.arange(D)[:, None, None]
    b = np.arange(D)[None, :, None]
    c = np.arange(D)[None, None, :]
    pab = pm[a, b]
    pbc = pm[b, c]
    pac = pm[a, c]
    mono = ((a < b) & (b < c)) | ((a > b) & (b > c))
    e_mono = mono & (pab == pbc) & (pab != pac)
    # flip_rule2 reverses rule (ii)'s leading d1 > d2 comparison inside the
    # valley mask the rule shares with rule (iii); mutation tests only.
    valley = ((a < b) if flip_rule2 else (a > b)) & (b < c)
    e_rule2 = valley & (a > c) & (pab == pac) & (pab != pbc)
    e_rule3 = valley & (a < c) & (pab == pac) & (pac == pbc)
    return (e_mono | e_rule2 | e_rule3).reshape(-1)


def _sweep_block(E3, dt, D, V, v3_lo, v3_hi, row_chunk=512) -> bool:
    """Any K5 among 5-sets with middle vertex in [v3_lo, v3_hi)?"""
    for v3 in range(max(2, v3_lo), min(v3_hi, V - 2)):
        i1, i2 = np.triu_indices(v3, 1)
        c1 = dt[i1, i2]
        c2 = dt[i2, v3]
        v45 = np.arange(v3 + 1, V)
        d3 = dt[v3, v3 + 1:V]
        d4 = dt[np.ix_(v45, v45)]
        upper = np.triu(np.ones((len(v45), len(v45)), dtype=bool), 1)
        m34 = np.maximum(d3[:, None], d4)
        m12 = np.maximum(c1, c2)
        for s in range(0, len(c1), row_chunk):
            cc1 = c1[s:s + row_chunk]
            cc2 = c2[s:s + row_chunk]
            i12 = (cc1 * D + cc2) * D
            e_s1234 = E3[i12[:, None] + d3]
            if not e_s1234.any():
                continue
            e_s1235 = E3[i12[:, None, None] + m34]
            m23 = np.maximum(cc2[:, None], d3)
            e_s1245 = E3[((cc1[:, None] * D + m23) * D)[:, :, None] + d4]
            mm12 = m12[s:s + row_chunk]
            e_s1345 = E3[((mm12[:, None] * D + d3) * D)[:, :, None] + d4]
            e_s2345 = E3[((cc2[:, None] * D + d3) * D)[:, :, None] + d4]
            bad = (e_s1234[:, :, None] & e_s1235 & e_s1245
                   & e_s1345 & e_s2345 & upper)
            if bad.any():
                return True
    return False


def _sweep_block_star(args):
    E3, dt, D, V, lo, hi = args
    return _sweep_block(E3, dt, D, V, lo, hi)


def _scan_scalar_lex(H: StepUpHypergraph, V: int,
                     flip_rule2: bool = False) -> Optional[tuple]:
    """Reference engine: lexicographic 5-set scan with early exit.

    Consecutive deltas are cached per enumeration prefix.  Returns the
    first 5-set whose four-subsets are all edges, or None.
    """
    pm = H.coloring.as_matrix()
    D = H.D
    dt = _msb_matrix(V)

    def edge3(d1, d2, d3) -> bool:
        x, y, z = pm[d1, d2], pm[d2, d3], pm[d1, d3]
        if d1 < d2 < d3:
            if flip_rule2 and x == y == z:
                return True  # corrupted rule (iii) firing on increasing runs
            return x == y != z
        if d1 > d2 > d3:
            return x == y != z
        if flip_rule2 or d1 < d2:
            return False  # local max; under the flip valleys match no rule
        if d1 > d3:
            return x == z != y
        return x == y == z

    for v1 in range(V - 4):
        for v2 in range(v1 + 1, V - 3):
            d12 = dt[v1, v2]
            for v3 in range(v2 + 1, V - 2):
                d23 = dt[v2, v3]
                d13 = max(d12, d23)
                for v4 in range(v3 + 1, V - 1):
                    d34 = dt[v3, v4]
                    if not edge3(d12, d23, d34):
                        continue
                    d24 = max(d23, d34)
                    for v5 in range(v4 + 1, V):
                        d45 = dt[v4, v5]
                        if (edge3(d23, d34, d45)
                                and edge3(d13, d34, d45)
                                and edge3(d12, d24, d45)
                                and edge3(d12, d23, max(d34, d45))):
                            return (v1, v2, v3, v4, v5)
    return None


def _violation_report(H: StepUpHypergraph, vs: tuple,
                      flip_rule2: bool) -> FiveSetViolation:
    subsets = []
    for sub in combinations(vs, 4):
        rule, verdict = classify_4tuple(H, sub, _flip_rule2=flip_rule2)
        subsets.append({
            "vertices": list(sub),
            "deltas": [int(d) for d in delta_sequence(sub)],
            "rule": rule.value,
            "is_edge": bool(verdict),
        })
    assert all(s["is_edge"] for s in subsets)
    return FiveSetViolation(vertices=vs, subsets=subsets)


def check_k5_free(
    H: StepUpHypergraph,
    vertex_cap: Optional[int] = None,
    *,
    budget: int = K5_BUDGET_DEFAULT,
    force: bool = False,
    threads: int = 1,
    _flip_rule2: bool = False,
) -> Optional[FiveSetViolation]:
    """Exhaustively verify that no 5-set of {0,...,V-1} induces a K5(4).

    V defaults to 2^D, clamped by vertex_cap.  Returns None (the theorem
    says always) or the lexicographically first violating 5-set, which
    signals an implementation bug and is reported verbatim.  Thread count
    never changes the verdict: any detection is re-resolved by the scalar
    lexicographic reference scan.
    """
    V = H.vertex_count if vertex_cap is None else min(vertex_cap, H.vertex_count)
    if V < 5:
        return None
    total = math.comb(V, 5)
    if total > budget and not force:
        raise BudgetExceeded(
            f"binom({V},5) = {total} five-sets exceed budget {budget}; "
            "pass force to run anyway", required=total, budget=budget)

    E3 = _edge3_table(H.coloring, flip_rule2=_flip_rule2)
    dt = _msb_matrix(V)

    hit = False
    if threads <= 1:
        hit = _sweep_block(E3, dt, H.D, V, 2, V - 2)
    else:
        lo_list = list(range(2, V - 2))
        if lo_list:
            bounds = np.array_split(np.array(lo_list), threads)
            jobs = [(E3, dt, H.D, V, int(b[0]), int(b[-1]) + 1)
                    for b in bounds if len(b)]
            with ProcessPoolExecutor(max_workers=threads) as pool:
                hit = any(pool.map(_sweep_block_star, jobs))

    if not hit:
        return None
    first = _scan_scalar_lex(H, V, flip_rule2=_flip_rule2)
    assert first is not None, (
        "block sweep detected a K5 but the scalar reference scan found "
        "none; the engines disagree")
    return _violation_report(H, first, _flip_rule2)


def find_nonedge_in_5set(H: StepUpHypergraph, P) -> tuple[int, int, int, int]:
    """First (lexicographic) non-edge 4-subset of a sorted 5-set."""
    vs = tuple(int(v) for v in P)
    if len(vs) != 5 or any(a >= b for a, b in zip(vs, vs[1:])):
        raise MalformedTuple(f"need 5 strictly increasing vertices, got {vs}")
    for sub in combinations(vs, 4):
        if not is_edge(H, sub):
            return sub
    raise NoNonEdge(
        f"5-set {vs} spans a complete K5(4); the edge predicate is broken",
        vertices=vs)


def is_independent(H: StepUpHypergraph, Q,
                   *, budget: int = INDEPENDENT_BUDGET_DEFAULT
                   ) -> Optional[EdgeWitness]:
    """None if Q spans no edge; otherwise the first edge in lex subset order."""
    vs = sorted(int(v) for v in Q)
    if len(set(vs)) != len(vs):
        raise MalformedTuple("independent-set query requires distinct vertices")
    if len(vs) < 4:
        raise SetTooSmall(f"need at least 4 vertices, got {len(vs)}")
    if any(not 0 <= v < H.vertex_count for v in vs):
        raise MalformedTuple("vertices outside [0, 2^D)")
    total = math.comb(len(vs), 4)
    if total > budget:
        raise BudgetExceeded(
            f"binom({len(vs)},4) = {total} exceeds budget {budget}",
            required=total, budget=budget)
    for sub in combinations(vs, 4):
        if is_edge(H, sub):
            return _edge_witness_for(H, sub, branch="DirectScanBranch")
    return None


# --- exact independence number ----------------------------------------------

def _edge_masks(H: StepUpHypergraph, V: int) -> list[int]:
    masks = []
    for sub in combinations(range(V), 4):
        if is_edge(H, sub):
            m = 0
            for v in sub:
                m |= 1 << v
            masks.append(m)
    return masks


def _alpha_bitmask(H: StepUpHypergraph) -> AlphaResult:
    V = H.vertex_count
    masks = _edge_masks(H, V)
    subsets = np.arange(1 << V, dtype=np.uint32)
    bad = np.zeros(1 << V, dtype=bool)
    for m in masks:
        mm = np.uint32(m)
        bad |= (subsets & mm) == mm
    sizes = np.bitwise_count(subsets).astype(np.int8)
    sizes[bad] = -1
    alpha = int(sizes.max())
    pick = int(np.argmax(sizes == alpha))
    witness = tuple(v for v in range(V) if (pick >> v) & 1)
    return AlphaResult(alpha=alpha, witness=witness, method="bitmask")


def _alpha_branch_and_bound(H: StepUpHypergraph, node_budget: int) -> AlphaResult:
    V = H.vertex_count
    by_max: list[list[int]] = [[] for _ in range(V)]
    for m in _edge_masks(H, V):
        top = m.bit_length() - 1
        by_max[top].append(m & ~(1 << top))

    # greedy seed: take vertices in order unless they complete an edge
    def completes_edge(chosen_mask: int, v: int) -> bool:
        for lower in by_max[v]:
            if chosen_mask & lower == lower:
                return True
        return False

    greedy_mask = 0
    for v in range(V):
        if not completes_edge(greedy_mask, v):
            greedy_mask |= 1 << v
    best_mask = greedy_mask
    best_size = bin(greedy_mask).count("1")

    nodes = 0

    def rec(v: int, chosen_mask: int, size: int):
        nonlocal best_mask, best_size, nodes
        nodes += 1
        if nodes > node_budget:
            raise BudgetExceeded(
                f"branch-and-bound exceeded {node_budget} nodes",
                required=nodes, budget=node_budget)
        if size + (V - v) <= best_size:
            return
        if v == V:
            if size > best_size:
                best_size, best_mask = size, chosen_mask
            return
        if not completes_edge(chosen_mask, v):
            rec(v + 1, chosen_mask | (1 << v), size + 1)
        rec(v + 1, chosen_mask, size)

    rec(0, 0, 0)
    witness = tuple(v for v in range(V) if (best_mask >> v) & 1)
    return AlphaResult(alpha=best_size, witness=witness,
                       method="branch-and-bound", nodes=nodes)


def exact_alpha(H: StepUpHypergraph, *,
                node_budget: int = 20_000_000) -> AlphaResult:
    """Exact maximum independent set size; exhaustive for D <= 4,
    branch-and-bound at D = 5, BudgetExceeded beyond."""
    if H.D <= 4:
        result = _alpha_bitmask(H)
    elif H.D == 5:
        result = _alpha_branch_and_bound(H, node_budget)
    else:
        raise BudgetExceeded(
            f"exact_alpha supports D <= 5, got D={H.D}",
            required=1 << H.D, budget=32)
    assert is_independent(H, result.witness) is None
    return result
