"""Layered witness extraction: exhibit an edge inside any large vertex set.

Given a candidate independent set Q and a good-triple-free pair coloring,
the extractor makes the smallness of the independence number executable.
Either some layer of nested strict local maxima of delta(Q) contains a
monotone run of length n, whose good triple maps directly to a rule (i)
edge, or seven layers exist and a pigeonhole-pinned chain of anchor
positions produces a fixed list of candidate 4-tuples of which one must
be an edge.  Both branches return a validated EdgeWitness with a full
trace; every way the search can fail is a typed error.

Positions throughout index the delta sequence of Q: position p stands for
the consecutive pair (Q[p], Q[p+1]), so vertex indices p and p+1 are both
meaningful for any position p.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from itertools import combinations
from typing import Optional, Union

import numpy as np

from .coloring import PairColoring, find_good_triple
from .delta import PropertyReport, consecutive_deltas, delta_sequence
from .errors import (
    InsufficientLayers,
    InvalidD,
    InvalidN,
    InvalidParams,
    IoError,
    MalformedTuple,
    NeedMoreVertices,
    NoGoodTripleInRun,
    ProofGapTrap,
    SetTooSmall,
)
from .hypergraph import EdgeWitness, StepUpHypergraph, _edge_witness_for, is_edge

__all__ = [
    "LayerStack",
    "MonotoneRun",
    "Anchors",
    "build_layers",
    "edge_from_monotone_run",
    "select_anchors",
    "extract_edge",
    "verify_star_property",
    "guarantee_threshold",
    "random_subset",
    "save_q",
    "load_q",
]

LAYER_DEPTH = 7
SMALL_Q_DIRECT = 24  # below this, scanning all 4-subsets beats layering

_Q_HEADER_RE = re.compile(rb"^STEPUP-Q v1 count=(\d+) bits=(\d+)\n")


def guarantee_threshold(n: int) -> int:
    """Size of Q above which extraction failure is a defect, (2n)^7 + 1."""
    return (2 * n) ** 7 + 1


@dataclass
class MonotoneRun:
    """n consecutive positions of one layer with strictly monotone deltas."""

    layer: int
    positions: tuple[int, ...]
    direction: str  # "Increasing" | "Decreasing"
    values: tuple[int, ...]

    def as_dict(self) -> dict:
        return {
            "layer": self.layer,
            "positions": [int(p) for p in self.positions],
            "direction": self.direction,
            "values": [int(v) for v in self.values],
        }


@dataclass
class LayerStack:
    """Nested strict-local-maxima layers over the delta sequence of Q.

    layers[0] is every position; layers[t] holds the positions of delta
    values that are strict local maxima with respect to layers[t-1].  beta
    keeps the targets (m-1)/(2n)^t as diagnostics only: the all-maxima
    policy makes each layer a superset of the first-beta_t prefix the
    counting argument reasons about, and observed sizes are recorded, not
    asserted.
    """

    q: np.ndarray
    deltas: np.ndarray
    layers: list[np.ndarray]
    n: int
    beta: tuple[float, ...]

    @property
    def layer_sizes(self) -> list[int]:
        return [int(layer.size) for layer in self.layers]

    def beta_report(self) -> list[dict]:
        out = []
        for t, size in enumerate(self.layer_sizes):
            target = self.beta[t] if t < len(self.beta) else 0.0
            out.append({"layer": t, "size": size, "beta": target,
                        "meets_beta": size >= target})
        return out

    def as_dict(self) -> dict:
        return {"size": int(self.q.size), "n": self.n,
                "layer_sizes": self.layer_sizes,
                "beta": [float(b) for b in self.beta]}


@dataclass
class Anchors:
    """Positions a, b1..b3, c..f pinned by the seven-layer argument.

    B1 and B3 are the pigeonhole pair (b_i, b_j) whose delta colors against
    delta_a agree; levels records the layer each anchor was drawn from.
    """

    a: int
    b1: int
    b2: int
    b3: int
    B1: int
    B3: int
    c: int
    d: int
    e: int
    f: int
    pigeonhole_pair: tuple[int, int]
    levels: dict
    deltas: dict

    def as_dict(self) -> dict:
        return {
            "a": self.a, "b1": self.b1, "b2": self.b2, "b3": self.b3,
            "B1": self.B1, "B3": self.B3,
            "c": self.c, "d": self.d, "e": self.e, "f": self.f,
            "pigeonhole_pair": list(self.pigeonhole_pair),
            "levels": {k: int(v) for k, v in self.levels.items()},
            "deltas": {k: int(v) for k, v in self.deltas.items()},
        }


def _as_vertex_array(Q) -> np.ndarray:
    q = np.asarray(Q, dtype=np.uint64)
    if q.ndim != 1:
        raise MalformedTuple("Q must be a one-dimensional vertex sequence")
    return q


def _find_run(vals: np.ndarray, n: int) -> Optional[tuple[int, str]]:
    """Leftmost window of n strictly monotone consecutive values, if any."""
    if vals.size < n:
        return None
    s = np.sign(np.diff(vals.astype(np.int32)))
    change = np.flatnonzero(s[1:] != s[:-1]) + 1
    starts = np.concatenate(([0], change))
    ends = np.concatenate((change, [s.size]))
    ok = (s[starts] != 0) & (ends - starts >= n - 1)
    hits = np.flatnonzero(ok)
    if hits.size == 0:
        return None
    st = int(starts[hits[0]])
    return st, ("Increasing" if s[st] > 0 else "Decreasing")


def build_layers(Q, n: int) -> Union[LayerStack, MonotoneRun]:
    """Grow local-maxima layers to depth 7, or stop at the first n-run.

    Scans each layer left to right before condensing it: a strictly
    monotone run of n consecutive delta values short-circuits the whole
    construction, since it already carries an edge.  Layers collect ALL
    interior strict local maxima of the previous layer, a superset of the
    prefix the counting argument needs, which keeps the builder total for
    small Q as well.
    """
    if n < 3:
        raise InvalidN(f"run-length parameter must be >= 3, got {n}")
    q = _as_vertex_array(Q)
    if q.size < 2:
        raise SetTooSmall(f"need at least 2 vertices, got {q.size}")
    deltas = consecutive_deltas(q)
    m = int(q.size)
    beta = tuple((m - 1) / (2 * n) ** t for t in range(LAYER_DEPTH + 1))
    layers = [np.arange(m - 1, dtype=np.int32)]
    for t in range(1, LAYER_DEPTH + 1):
        prev = layers[-1]
        vals = deltas[prev]
        hit = _find_run(vals, n)
        if hit is not None:
            st, direction = hit
            pos = prev[st:st + n]
            return MonotoneRun(
                layer=t - 1,
                positions=tuple(int(p) for p in pos),
                direction=direction,
                values=tuple(int(v) for v in deltas[pos]),
            )
        inner = vals[1:-1]
        mask = (inner > vals[:-2]) & (inner > vals[2:])
        nxt = prev[1:-1][mask]
        if nxt.size == 0:
            raise InsufficientLayers(
                f"layer {t} came out empty: |Q| = {m} cannot sustain depth "
                f"{LAYER_DEPTH} and has no monotone run of length {n}",
                trace={"layer": t,
                       "sizes": [int(l.size) for l in layers]})
        layers.append(nxt.astype(np.int32))
    return LayerStack(q=q, deltas=deltas, layers=layers, n=n, beta=beta)


def edge_from_monotone_run(H: StepUpHypergraph, Q,
                           run: MonotoneRun) -> EdgeWitness:
    """Map a good triple among a monotone run's deltas to a rule (i) edge.

    Increasing run with the good triple at positions p < q < r gives
    (v_p, v_{p+1}, v_{q+1}, v_{r+1}); a decreasing run, whose values meet
    the triple in reverse, gives (v_p, v_q, v_r, v_{r+1}).  Property (*)
    plus the span property force the tuple's delta sequence to equal the
    triple in value order, which is re-measured before returning.
    """
    q = _as_vertex_array(Q)
    gt = find_good_triple(H.coloring, run.values)
    if gt is None:
        raise NoGoodTripleInRun(
            f"no good triple among run deltas {run.values}; the coloring "
            "is not certified at this scale",
            trace={"run": run.as_dict()})
    vals = list(run.values)
    if run.direction == "Increasing":
        p, qq, r = (run.positions[vals.index(v)] for v in (gt.a, gt.b, gt.c))
        vs = (int(q[p]), int(q[p + 1]), int(q[qq + 1]), int(q[r + 1]))
        expect = (gt.a, gt.b, gt.c)
    else:
        p, qq, r = (run.positions[vals.index(v)] for v in (gt.c, gt.b, gt.a))
        vs = (int(q[p]), int(q[qq]), int(q[r]), int(q[r + 1]))
        expect = (gt.c, gt.b, gt.a)
    trace = {"run": run.as_dict(), "good_triple": [gt.a, gt.b, gt.c],
             "mapped_positions": [int(p), int(qq), int(r)]}
    if delta_sequence(vs) != expect or not is_edge(H, vs):
        raise ProofGapTrap(
            f"run-mapped tuple {vs} should be a rule (i) edge with deltas "
            f"{expect} but is not; layering or span reasoning is broken",
            trace=trace)
    return _edge_witness_for(H, vs, branch="MonotoneRunBranch", trace=trace)


def _left_in(layer: np.ndarray, pos: int, level: int) -> int:
    i = int(np.searchsorted(layer, pos))
    if i == 0:
        raise InsufficientLayers(
            f"position {pos} has no left neighbor in layer {level}")
    return int(layer[i - 1])


def _right_in(layer: np.ndarray, pos: int, level: int) -> int:
    i = int(np.searchsorted(layer, pos, side="right"))
    if i == layer.size:
        raise InsufficientLayers(
            f"position {pos} has no right neighbor in layer {level}")
    return int(layer[i])


def select_anchors(stack: LayerStack, phi: PairColoring) -> Anchors:
    """Pick the anchor chain a, b1..b3, c..f off a full 7-layer stack.

    All neighbor lookups go one layer below the element's own layer, so
    every strict-maximum element is interior there and the lookups cannot
    run off an end on a stack produced by build_layers.
    """
    if len(stack.layers) < LAYER_DEPTH + 1:
        raise InsufficientLayers(
            f"anchor selection needs {LAYER_DEPTH + 1} layers, stack has "
            f"{len(stack.layers)}")
    L = stack.layers
    dl = stack.deltas
    a = int(L[7][0])
    b1 = _left_in(L[6], a, 6)
    b2 = _right_in(L[5], b1, 5)
    b3 = _right_in(L[4], b2, 4)
    assert b1 < b2 < b3 < a, "anchor positions out of order"
    assert dl[b3] < dl[b2] < dl[b1] < dl[a], "anchor deltas out of order"
    colors = [int(phi.color(int(dl[b]), int(dl[a]))) for b in (b1, b2, b3)]
    for i, j in ((1, 3), (1, 2), (2, 3)):
        if colors[i - 1] == colors[j - 1]:
            pair = (i, j)
            break
    bs = (b1, b2, b3)
    B1, B3 = bs[pair[0] - 1], bs[pair[1] - 1]
    ell = LAYER_DEPTH - pair[1]  # layer level of B3
    c = _left_in(L[ell - 1], B3, ell - 1)
    d = _right_in(L[ell - 2], c, ell - 2)
    e = _left_in(L[ell - 3], d, ell - 3)
    f = _right_in(L[ell - 4], e, ell - 4)
    assert c < e < f < d < B3, "descent chain positions out of order"
    assert dl[B3] > dl[c] > dl[d] > dl[e] > dl[f], \
        "descent chain deltas out of order"
    names = {"a": a, "b1": b1, "b2": b2, "b3": b3,
             "B1": B1, "B3": B3, "c": c, "d": d, "e": e, "f": f}
    levels = {"a": 7, "b1": 6, "b2": 5, "b3": 4, "B1": 7 - pair[0],
              "B3": ell, "c": ell - 1, "d": ell - 2, "e": ell - 3,
              "f": ell - 4}
    return Anchors(a=a, b1=b1, b2=b2, b3=b3, B1=B1, B3=B3,
                   c=c, d=d, e=e, f=f, pigeonhole_pair=pair, levels=levels,
                   deltas={k: int(dl[v]) for k, v in names.items()})


def _anchor_candidates(A: Anchors) -> list[tuple[int, int, int, int]]:
    """The fixed candidate chain, as position tuples in proof order."""
    chain = []
    for x in (A.c, A.d, A.e, A.f):
        chain.append((x, x + 1, A.B3 + 1, A.a + 1))
        chain.append((A.B1, A.B3, A.B3 + 1, A.a + 1))
        chain.append((A.B1, x, x + 1, A.a + 1))
        chain.append((A.B1, x, x + 1, A.B3 + 1))
    chain += [
        (A.c, A.d, A.d + 1, A.B3 + 1),
        (A.c, A.e, A.e + 1, A.B3 + 1),
        (A.c, A.f, A.f + 1, A.B3 + 1),
        (A.e, A.f, A.f + 1, A.B3 + 1),
        (A.c, A.e, A.e + 1, A.d + 1),
        (A.c, A.f, A.f + 1, A.d + 1),
        (A.e, A.f, A.f + 1, A.d + 1),
    ]
    return chain


def extract_edge(H: StepUpHypergraph, Q, n: int) -> EdgeWitness:
    """Produce a validated edge inside Q, or fail with a typed reason.

    Small Q is scanned directly.  Otherwise build_layers either yields a
    monotone run (mapped through its good triple) or a 7-layer stack whose
    anchors give the candidate chain; the first candidate passing is_edge
    wins.  Failure on Q of at least (2n)^7 + 1 vertices with a certified
    coloring is impossible, so it raises the ProofGapTrap bug trap instead
    of NeedMoreVertices.
    """
    q = _as_vertex_array(Q)
    if q.size and int(q[-1]) >= H.vertex_count:
        raise MalformedTuple(
            f"Q contains vertices >= 2^{H.D}")
    if q.size < 4:
        raise SetTooSmall(f"need at least 4 vertices, got {q.size}")
    guaranteed = q.size >= guarantee_threshold(n)

    if q.size <= SMALL_Q_DIRECT:
        if n < 3:
            raise InvalidN(f"run-length parameter must be >= 3, got {n}")
        if not (q[:-1] < q[1:]).all():
            raise MalformedTuple("Q must be strictly increasing")
        for sub in combinations(range(q.size), 4):
            vs = tuple(int(q[i]) for i in sub)
            if is_edge(H, vs):
                return _edge_witness_for(H, vs, branch="DirectScanBranch",
                                         trace={"path": "small-q scan"})
        raise NeedMoreVertices(
            f"|Q| = {q.size} is below the direct-scan threshold and spans "
            "no edge", trace={"size": int(q.size)})

    try:
        built = build_layers(q, n)
    except InsufficientLayers as exc:
        if guaranteed:
            raise ProofGapTrap(
                f"layering failed on |Q| = {q.size} >= (2n)^7 + 1: "
                f"{exc}", trace=exc.trace) from exc
        raise NeedMoreVertices(
            f"layering failed: {exc}", trace=exc.trace) from exc

    if isinstance(built, MonotoneRun):
        return edge_from_monotone_run(H, q, built)

    stack = built
    anchors = select_anchors(stack, H.coloring)
    tested = []
    for k, pos in enumerate(_anchor_candidates(anchors)):
        entry = {"index": k, "positions": [int(p) for p in pos]}
        if len(set(pos)) < 4:
            entry["verdict"] = "skipped"
            tested.append(entry)
            continue
        vs = tuple(int(stack.q[p]) for p in sorted(pos))
        verdict = is_edge(H, vs)
        entry["verdict"] = bool(verdict)
        tested.append(entry)
        if verdict:
            trace = {"stack": stack.as_dict(),
                     "beta_report": stack.beta_report(),
                     "anchors": anchors.as_dict(),
                     "candidates": tested}
            return _edge_witness_for(H, vs, branch="AnchorChainBranch",
                                     candidate_index=k, trace=trace)
    dump = {"stack": stack.as_dict(), "anchors": anchors.as_dict(),
            "candidates": tested}
    if guaranteed:
        raise ProofGapTrap(
            "all anchor-chain candidates failed on a Q large enough for "
            "the guarantee; this must be unreachable", trace=dump)
    raise NeedMoreVertices(
        f"anchor-chain candidates all failed on |Q| = {q.size} below the "
        f"guarantee threshold {guarantee_threshold(n)}", trace=dump)


def verify_star_property(stack: LayerStack) -> PropertyReport:
    """Check per-layer domination and dropped-element dominance.

    Within any layer t >= 1, consecutive positions a < b must have
    distinct deltas and dominate everything strictly between them.
    Between layers, an element of layer t absent from layer t+1 must
    still dominate the closed interval spanned by its layer t-1
    neighbors.
    """
    deltas = stack.deltas
    dpad = np.concatenate([deltas, np.array([-1], dtype=deltas.dtype)])
    checks = {"star_pairs": 0, "drop_dominance": 0}

    def fail(info):
        return PropertyReport(ok=False, checks=checks, counterexample=info)

    for t in range(1, len(stack.layers)):
        P = stack.layers[t]
        if P.size >= 2:
            a, b = P[:-1].astype(np.int64), P[1:].astype(np.int64)
            checks["star_pairs"] += int(a.size)
            equal = deltas[a] == deltas[b]
            if equal.any():
                k = int(np.argmax(equal))
                return fail({"check": "star", "layer": t,
                             "left": int(a[k]), "right": int(b[k]),
                             "reason": "equal deltas"})
            idx = np.empty(2 * a.size, dtype=np.int64)
            idx[0::2] = a + 1
            idx[1::2] = b
            interior = np.maximum.reduceat(dpad, idx)[0::2]
            gap = b > a + 1
            bound = np.maximum(deltas[a], deltas[b])
            bad = gap & (interior >= bound)
            if bad.any():
                k = int(np.argmax(bad))
                lo, hi = int(a[k]), int(b[k])
                x = lo + 1 + int(np.argmax(deltas[lo + 1:hi]))
                return fail({"check": "star", "layer": t, "left": lo,
                             "right": hi, "position": x,
                             "reason": "interior delta not dominated"})
        nxt = stack.layers[t + 1] if t + 1 < len(stack.layers) else P[:0]
        drop = np.setdiff1d(P, nxt, assume_unique=True).astype(np.int64)
        if drop.size == 0:
            continue
        prev = stack.layers[t - 1]
        loc = np.searchsorted(prev, drop)
        if (loc == 0).any() or (loc >= prev.size - 1).any():
            k = int(np.argmax((loc == 0) | (loc >= prev.size - 1)))
            return fail({"check": "drop_dominance", "layer": t,
                         "position": int(drop[k]),
                         "reason": "element not interior to layer below"})
        jm = prev[loc - 1].astype(np.int64)
        jp = prev[loc + 1].astype(np.int64)
        checks["drop_dominance"] += int(drop.size)
        idx = np.empty(4 * drop.size, dtype=np.int64)
        idx[0::4] = jm
        idx[1::4] = drop
        idx[2::4] = drop + 1
        idx[3::4] = jp + 1
        red = np.maximum.reduceat(dpad, idx)
        flank = np.maximum(red[0::4], red[2::4])
        bad = flank >= deltas[drop]
        if bad.any():
            k = int(np.argmax(bad))
            return fail({"check": "drop_dominance", "layer": t,
                         "position": int(drop[k]),
                         "left": int(jm[k]), "right": int(jp[k]),
                         "reason": "neighborhood not dominated"})
    return PropertyReport(ok=True, checks=checks, counterexample=None)


# --- Q generation and file I/O ------------------------------------------------

def random_subset(D: int, m: int, seed: int) -> np.ndarray:
    """m distinct vertices drawn uniformly from [0, 2^D), sorted.

    Small universes go through a full permutation; larger ones keep the
    first m distinct values of an iid stream, which by exchangeability is
    also a uniform m-subset.
    """
    if not 2 <= D <= 64:
        raise InvalidD(f"need 2 <= D <= 64, got {D}")
    if not 1 <= m <= (1 << D):
        raise InvalidParams(f"cannot draw {m} distinct vertices from 2^{D}")
    rng = np.random.default_rng(seed)
    if D <= 26:
        out = rng.permutation(1 << D)[:m].astype(np.uint64)
        out.sort()
        return out
    drawn = np.empty(0, dtype=np.uint64)
    while True:
        need = m - np.unique(drawn).size
        if need <= 0:
            break
        extra = rng.integers(0, 1 << D, size=2 * need + 16, dtype=np.uint64)
        drawn = np.concatenate([drawn, extra])
    vals, first = np.unique(drawn, return_index=True)
    keep = vals[np.argsort(first)][:m]
    keep.sort()
    return keep


def save_q(q: np.ndarray, D: int, path) -> None:
    q = _as_vertex_array(q)
    header = f"STEPUP-Q v1 count={q.size} bits={D}\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(q.astype("<u8").tobytes())


def load_q(path) -> tuple[np.ndarray, int]:
    with open(path, "rb") as fh:
        blob = fh.read()
    m = _Q_HEADER_RE.match(blob)
    if not m:
        raise IoError(f"{path}: not a STEPUP-Q v1 file")
    count, D = int(m.group(1)), int(m.group(2))
    if not 2 <= D <= 64:
        raise IoError(f"{path}: bad bits={D}")
    body = blob[m.end():]
    if len(body) != 8 * count:
        raise IoError(
            f"{path}: expected {8 * count} vertex bytes, got {len(body)}")
    q = np.frombuffer(body, dtype="<u8").astype(np.uint64)
    if count == 0:
        raise IoError(f"{path}: empty vertex list")
    if not (q[:-1] < q[1:]).all():
        raise IoError(f"{path}: vertices not strictly increasing")
    if int(q[-1]) >= (1 << D):
        raise IoError(f"{path}: vertex {int(q[-1])} outside [0, 2^{D})")
    return q, D
