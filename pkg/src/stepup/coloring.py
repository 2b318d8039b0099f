"""Pair colorings of {0,...,D-1} and the good-triple property.

A coloring assigns Red/Blue to every unordered pair of delta values.  A
triple a < b < c is *good* when phi(a,b) = phi(b,c) != phi(a,c).  The
property that matters downstream is that every n-subset of [0, D) contains
a good triple; certification checks it exhaustively or by sampling.

Random colorings have this property only when binom(D,n)*(3/4)^(n
choose 3 packing) is small, so besides plain seeded sampling there is a
search loop that repairs near-misses by simulated annealing on the count
of good-triple-free subsets, then re-certifies the result from scratch.

Also here: the greedy partial Steiner (n,3,2) packing and the log-space
failure probability bound, both small self-contained proof ingredients.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from itertools import combinations, islice
from typing import Iterable, Optional, Union

import numpy as np

from .errors import (
    BudgetExceeded,
    InvalidD,
    InvalidN,
    InvalidParams,
    IoError,
    SetTooSmall,
)

__all__ = [
    "RED",
    "BLUE",
    "PairColoring",
    "GoodTriple",
    "CertificationResult",
    "SearchResult",
    "SteinerSystem",
    "pair_index",
    "sample_coloring",
    "find_good_triple",
    "certify_good_property",
    "search_certified_coloring",
    "greedy_steiner",
    "failure_probability_bound",
    "log_failure_probability_bound",
    "save_coloring",
    "load_coloring",
]

RED = 0
BLUE = 1

EXACT_CAP_DEFAULT = 10 ** 7

_HEADER_RE = re.compile(rb"^STEPUP-PHI v1 D=(\d+) seed=(-?\d+)\n")


def pair_index(a: int, b: int, D: int) -> int:
    """Rank of the pair a < b in lexicographic (a, b) order."""
    return a * D - a * (a + 1) // 2 + (b - a - 1)


class PairColoring:
    """Symmetric 2-coloring of the pairs of {0,...,D-1}.

    Colors are stored as one uint8 per pair (Red=0, Blue=1) in
    lexicographic pair order.  seed records how the bits were drawn;
    -1 means the bits did not come from sample_coloring directly
    (repaired or loaded from an untagged source).
    """

    def __init__(self, D: int, bits: np.ndarray, seed: int = -1):
        if D < 2:
            raise InvalidD(f"need D >= 2, got {D}")
        npairs = D * (D - 1) // 2
        bits = np.asarray(bits, dtype=np.uint8)
        if bits.shape != (npairs,):
            raise InvalidParams(
                f"expected {npairs} pair colors for D={D}, got shape {bits.shape}")
        if bits.max(initial=0) > 1:
            raise InvalidParams("colors must be 0 (Red) or 1 (Blue)")
        self.D = D
        self.bits = bits
        self.bits.setflags(write=False)
        self.seed = int(seed)

    def color(self, a: int, b: int) -> int:
        if a == b:
            raise InvalidParams(f"pair color undefined for equal values a=b={a}")
        if not (0 <= a < self.D and 0 <= b < self.D):
            raise InvalidParams(f"values ({a},{b}) outside [0,{self.D})")
        if a > b:
            a, b = b, a
        return int(self.bits[pair_index(a, b, self.D)])

    def as_matrix(self) -> np.ndarray:
        """Dense symmetric D x D color matrix; the diagonal is never consulted."""
        m = np.zeros((self.D, self.D), dtype=np.uint8)
        iu = np.triu_indices(self.D, 1)
        m[iu] = self.bits
        m.T[iu] = self.bits
        return m

    def __eq__(self, other):
        if not isinstance(other, PairColoring):
            return NotImplemented
        return self.D == other.D and np.array_equal(self.bits, other.bits)

    def __hash__(self):
        return hash((self.D, self.bits.tobytes()))

    def __repr__(self):
        return f"PairColoring(D={self.D}, seed={self.seed})"


@dataclass(frozen=True)
class GoodTriple:
    a: int
    b: int
    c: int
    colors: tuple[int, int, int]  # phi(a,b), phi(b,c), phi(a,c)

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.a, self.b, self.c)


@dataclass
class CertificationResult:
    verdict: str                  # Certified | Refuted | Estimated
    mode: str                     # Exact | Sampled
    D: int
    n: int
    subsets_checked: int
    total: int
    counterexample: Optional[tuple[int, ...]] = None
    seed: Optional[int] = None    # sampling seed, when mode is Sampled

    @property
    def certified(self) -> bool:
        return self.verdict == "Certified"

    def as_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "mode": self.mode,
            "D": self.D,
            "n": self.n,
            "subsets_checked": self.subsets_checked,
            "total": self.total,
            "counterexample": list(self.counterexample) if self.counterexample else None,
            "seed": self.seed,
        }


def sample_coloring(D: int, seed: int) -> PairColoring:
    """Uniform random coloring, deterministic in (D, seed)."""
    if D < 2:
        raise InvalidD(f"need D >= 2, got {D}")
    rng = np.random.default_rng(seed)
    bits = rng.integers(0, 2, size=D * (D - 1) // 2, dtype=np.uint8)
    return PairColoring(D, bits, seed=seed)


def find_good_triple(phi: PairColoring, values: Iterable[int]) -> Optional[GoodTriple]:
    """Lexicographically first good triple among the given values, or None."""
    vals = sorted(set(int(v) for v in values))
    if len(vals) < 3:
        raise SetTooSmall(f"need at least 3 distinct values, got {len(vals)}")
    if vals[0] < 0 or vals[-1] >= phi.D:
        raise InvalidParams(f"values outside [0,{phi.D}): {vals[0]}..{vals[-1]}")
    for a, b, c in combinations(vals, 3):
        cab = phi.color(a, b)
        cbc = phi.color(b, c)
        cac = phi.color(a, c)
        if cab == cbc != cac:
            return GoodTriple(a, b, c, (cab, cbc, cac))
    return None


def _subset_matrix(D: int, n: int, start, count: int) -> np.ndarray:
    """`count` consecutive lexicographic n-subsets of range(D) from iterator."""
    flat = np.fromiter(
        (v for combo in islice(start, count) for v in combo),
        dtype=np.int16,
    )
    return flat.reshape(-1, n)


def _good_any(phi_matrix: np.ndarray, subsets: np.ndarray) -> np.ndarray:
    """Row mask: does each subset (sorted values) contain a good triple."""
    n = subsets.shape[1]
    good = np.zeros(len(subsets), dtype=bool)
    for i, j, k in combinations(range(n), 3):
        a, b, c = subsets[:, i], subsets[:, j], subsets[:, k]
        cab = phi_matrix[a, b]
        cbc = phi_matrix[b, c]
        cac = phi_matrix[a, c]
        good |= (cab == cbc) & (cab != cac)
    return good


def certify_good_property(
    phi: PairColoring,
    n: int,
    mode: str = "exact",
    *,
    trials: Optional[int] = None,
    seed: Optional[int] = None,
    cap: int = EXACT_CAP_DEFAULT,
) -> CertificationResult:
    """Check that every n-subset of [0, D) contains a good triple.

    Exact mode enumerates all binom(D, n) subsets in lexicographic order
    and returns Certified, or Refuted with the first bad subset.  Above
    `cap` subsets it raises BudgetExceeded: switch to sampled mode, which
    draws `trials` uniform n-subsets under `seed` and returns Estimated
    when none of them is bad.
    """
    D = phi.D
    if not 3 <= n <= D:
        raise InvalidN(f"need 3 <= n <= D={D}, got n={n}")
    mode_l = mode.lower()
    pm = phi.as_matrix()

    if mode_l == "exact":
        total = math.comb(D, n)
        if total > cap:
            raise BudgetExceeded(
                f"binom({D},{n}) = {total} exceeds exact cap {cap}; use sampled mode",
                required=total, budget=cap)
        gen = combinations(range(D), n)
        checked = 0
        chunk = 1 << 16
        while checked < total:
            block = _subset_matrix(D, n, gen, min(chunk, total - checked))
            good = _good_any(pm, block)
            if not good.all():
                row = int(np.argmin(good))
                bad = tuple(int(v) for v in block[row])
                assert find_good_triple(phi, bad) is None
                return CertificationResult(
                    verdict="Refuted", mode="Exact", D=D, n=n,
                    subsets_checked=checked + row + 1, total=total,
                    counterexample=bad)
            checked += len(block)
        return CertificationResult(
            verdict="Certified", mode="Exact", D=D, n=n,
            subsets_checked=total, total=total)

    if mode_l == "sampled":
        if trials is None or trials < 1:
            raise InvalidParams("sampled mode requires a positive trials count")
        rng = np.random.default_rng(seed)
        done = 0
        chunk = 1 << 16
        while done < trials:
            take = min(chunk, trials - done)
            keys = rng.random((take, D))
            idx = np.argpartition(keys, n - 1, axis=1)[:, :n]
            block = np.sort(idx, axis=1).astype(np.int16)
            good = _good_any(pm, block)
            if not good.all():
                row = int(np.argmin(good))
                bad = tuple(int(v) for v in block[row])
                assert find_good_triple(phi, bad) is None
                return CertificationResult(
                    verdict="Refuted", mode="Sampled", D=D, n=n,
                    subsets_checked=done + row + 1, total=trials,
                    counterexample=bad, seed=seed)
            done += take
        return CertificationResult(
            verdict="Estimated", mode="Sampled", D=D, n=n,
            subsets_checked=trials, total=trials, seed=seed)

    raise InvalidParams(f"unknown certification mode {mode!r}")


def _certify_exact_scalar(phi: PairColoring, n: int) -> CertificationResult:
    """Plain-python reference for the exact mode, used for cross-checks."""
    D = phi.D
    total = math.comb(D, n)
    for count, subset in enumerate(combinations(range(D), n), start=1):
        if find_good_triple(phi, subset) is None:
            return CertificationResult(
                verdict="Refuted", mode="Exact", D=D, n=n,
                subsets_checked=count, total=total, counterexample=subset)
    return CertificationResult(
        verdict="Certified", mode="Exact", D=D, n=n,
        subsets_checked=total, total=total)


# --- annealing repair -------------------------------------------------------
#
# State: per-subset count of good triples (gc) for all binom(D, n) subsets,
# plus per-triple goodness flags.  Flipping one pair's color touches the
# D-2 triples through that pair and, through them, binom(D-3, n-3) subsets
# each; the tables below make that update a handful of gathers.

class _RepairTables:
    def __init__(self, D: int, n: int):
        self.D = D
        self.n = n
        self.npairs = D * (D - 1) // 2
        self.ntriples = math.comb(D, 3)
        self.nsubsets = math.comb(D, n)

        comb_table = np.zeros((D + 1, n + 1), dtype=np.int64)
        for x in range(D + 1):
            for k in range(n + 1):
                comb_table[x, k] = math.comb(x, k)

        triples = np.array(list(combinations(range(D), 3)), dtype=np.int16)
        self.triples = triples
        ta, tb, tc = triples[:, 0], triples[:, 1], triples[:, 2]
        self.tri_pairs = np.stack([
            _pair_index_arr(ta, tb, D),
            _pair_index_arr(tb, tc, D),
            _pair_index_arr(ta, tc, D),
        ], axis=1).astype(np.int32)

        # colex rank of a sorted n-subset: sum of C(v_i, i+1)
        rest_pairs = np.array(list(combinations(range(D - 3), n - 3)),
                              dtype=np.int16).reshape(-1, n - 3)
        self.subs_per_triple = len(rest_pairs)
        tri_to_subs = np.empty((self.ntriples, self.subs_per_triple), dtype=np.int32)
        all_vals = np.arange(D, dtype=np.int16)
        for t in range(self.ntriples):
            a, b, c = triples[t]
            rest = np.delete(all_vals, [a, b, c])
            cols = rest[rest_pairs] if n > 3 else np.empty((1, 0), dtype=np.int16)
            full = np.concatenate(
                [np.broadcast_to(triples[t], (len(cols), 3)), cols], axis=1)
            full = np.sort(full, axis=1)
            rank = np.zeros(len(full), dtype=np.int64)
            for pos in range(n):
                rank += comb_table[full[:, pos], pos + 1]
            tri_to_subs[t] = rank

        # per-pair update tables
        self.pair_tris: list[np.ndarray] = []
        self.pair_sub_uniq: list[np.ndarray] = []
        self.pair_sub_pos: list[np.ndarray] = []
        pair_members = [[] for _ in range(self.npairs)]
        for t in range(self.ntriples):
            for p in self.tri_pairs[t]:
                pair_members[p].append(t)
        for p in range(self.npairs):
            tris = np.array(pair_members[p], dtype=np.int32)
            flat = tri_to_subs[tris].ravel()
            uniq, pos = np.unique(flat, return_inverse=True)
            self.pair_tris.append(tris)
            self.pair_sub_uniq.append(uniq.astype(np.int64))
            self.pair_sub_pos.append(pos.astype(np.int64))
        self.tri_to_subs = tri_to_subs

    def initial_state(self, bits: np.ndarray):
        colors = bits[self.tri_pairs]
        good = (colors[:, 0] == colors[:, 1]) & (colors[:, 0] != colors[:, 2])
        gc = np.bincount(
            self.tri_to_subs.ravel(),
            weights=np.repeat(good, self.subs_per_triple),
            minlength=self.nsubsets,
        ).astype(np.int32)
        return good, gc


def _pair_index_arr(a, b, D):
    return a.astype(np.int64) * D - a.astype(np.int64) * (a + 1) // 2 + (b - a - 1)


_REPAIR_TABLE_CACHE: dict[tuple[int, int], _RepairTables] = {}


def _repair_tables(D: int, n: int) -> _RepairTables:
    key = (D, n)
    if key not in _REPAIR_TABLE_CACHE:
        _REPAIR_TABLE_CACHE[key] = _RepairTables(D, n)
    return _REPAIR_TABLE_CACHE[key]


def _anneal_repair(bits: np.ndarray, D: int, n: int, rng: np.random.Generator,
                   steps: int, t_start: float = 2.0, t_end: float = 0.01):
    """Minimize the number of good-triple-free subsets by pair flips.

    Returns (bits, steps_done, bad_count).  Stops early at zero bad
    subsets.  Deterministic in (bits, rng state, steps).
    """
    tab = _repair_tables(D, n)
    bits = bits.copy()
    good, gc = tab.initial_state(bits)
    nbad = int((gc == 0).sum())
    if nbad == 0:
        return bits, 0, 0
    decay = (t_end / t_start) ** (1.0 / max(1, steps))
    temp = t_start
    for step in range(1, steps + 1):
        temp *= decay
        p = int(rng.integers(tab.npairs))
        tris = tab.pair_tris[p]
        cols = bits[tab.tri_pairs[tris]]
        flip_col = tab.tri_pairs[tris] == p
        cols = np.where(flip_col, cols ^ 1, cols)
        new_good = (cols[:, 0] == cols[:, 1]) & (cols[:, 0] != cols[:, 2])
        dtri = new_good.astype(np.int8) - good[tris].astype(np.int8)
        if not dtri.any():
            continue
        uniq = tab.pair_sub_uniq[p]
        dsub = np.bincount(
            tab.pair_sub_pos[p],
            weights=np.repeat(dtri, tab.subs_per_triple),
            minlength=len(uniq),
        )
        old_vals = gc[uniq]
        new_vals = old_vals + dsub.astype(np.int32)
        dbad = int((new_vals == 0).sum()) - int((old_vals == 0).sum())
        if dbad <= 0 or rng.random() < math.exp(-dbad / temp):
            bits[p] ^= 1
            gc[uniq] = new_vals
            good[tris] = new_good
            nbad += dbad
            if nbad == 0:
                return bits, step, 0
    return bits, steps, nbad


@dataclass
class SearchResult:
    success: bool
    coloring: PairColoring
    certification: CertificationResult
    attempts: int
    repaired: bool
    anneal_steps: int
    best_bad_count: int

    def as_dict(self) -> dict:
        return {
            "success": self.success,
            "attempts": self.attempts,
            "repaired": self.repaired,
            "anneal_steps": self.anneal_steps,
            "best_bad_count": self.best_bad_count,
            "certification": self.certification.as_dict(),
            "coloring_seed": self.coloring.seed,
        }


def search_certified_coloring(
    D: int,
    n: int,
    *,
    attempts: int = 16,
    repair_steps: int = 200_000,
    base_seed: int = 0,
    cap: int = EXACT_CAP_DEFAULT,
) -> SearchResult:
    """Search for a coloring certified in Exact mode at (D, n).

    Attempt k draws sample_coloring(D, base_seed + k) and certifies it.
    A refuted draw is repaired by seeded annealing on the bad-subset
    count; a repair that reaches zero is independently re-certified from
    scratch before being accepted (the annealer's bookkeeping is never
    trusted as a verdict).  Returns the first certified coloring, or the
    best refuted attempt with success=False.
    """
    if not 3 <= n <= D:
        raise InvalidN(f"need 3 <= n <= D={D}, got n={n}")
    best: Optional[tuple[int, PairColoring, CertificationResult, bool, int]] = None
    for k in range(attempts):
        seed = base_seed + k
        phi = sample_coloring(D, seed)
        res = certify_good_property(phi, n, "exact", cap=cap)
        if res.certified:
            return SearchResult(True, phi, res, k + 1, False, 0, 0)
        rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
        new_bits, steps_used, nbad = _anneal_repair(
            phi.bits, D, n, rng, repair_steps)
        if nbad == 0:
            repaired = PairColoring(D, new_bits, seed=-1)
            res2 = certify_good_property(repaired, n, "exact", cap=cap)
            assert res2.certified, (
                "annealer bad-count reached zero but exact certification "
                "refuted; the two routes must agree")
            return SearchResult(True, repaired, res2, k + 1, True, steps_used, 0)
        if best is None or nbad < best[0]:
            best = (nbad, phi, res, True, steps_used)
    nbad, phi, res, repaired, steps_used = best
    return SearchResult(False, phi, res, attempts, repaired, steps_used, nbad)


# --- Steiner packing --------------------------------------------------------

@dataclass
class SteinerSystem:
    n: int
    seed: int
    triples: list[tuple[int, int, int]] = field(default_factory=list)

    def pair_disjoint(self) -> bool:
        seen = set()
        for t in self.triples:
            for p in combinations(t, 2):
                if p in seen:
                    return False
                seen.add(p)
        return True

    def as_dict(self) -> dict:
        return {"n": self.n, "seed": self.seed, "count": len(self.triples),
                "triples": [list(t) for t in self.triples]}


def _all_triples(n: int) -> np.ndarray:
    """All C(n,3) sorted triples of range(n), vectorized construction."""
    j, k = np.triu_indices(n, 1)
    reps = j.astype(np.int64)
    tj = np.repeat(j, reps)
    tk = np.repeat(k, reps)
    offsets = np.concatenate([[0], np.cumsum(reps)[:-1]])
    ti = np.arange(reps.sum(), dtype=np.int64) - np.repeat(offsets, reps)
    return np.stack([ti.astype(np.int32), tj.astype(np.int32),
                     tk.astype(np.int32)], axis=1)


def _greedy_scalar(triples: np.ndarray, n: int) -> list[int]:
    """Reference greedy: accept a triple iff its three pairs are unused."""
    used = set()
    out = []
    for row, (a, b, c) in enumerate(triples.tolist()):
        pairs = ((a, b), (a, c), (b, c))
        if any(p in used for p in pairs):
            continue
        used.update(pairs)
        out.append(row)
    return out


def _greedy_vector(triples: np.ndarray, n: int) -> list[int]:
    """Chunked greedy equivalent to _greedy_scalar on the same order."""
    npairs = n * (n - 1) // 2
    a, b, c = triples[:, 0], triples[:, 1], triples[:, 2]
    pid = np.stack([
        _pair_index_arr(a, b, n),
        _pair_index_arr(a, c, n),
        _pair_index_arr(b, c, n),
    ], axis=1)
    used = np.zeros(npairs, dtype=bool)
    accepted: list[int] = []
    chunk = 16384
    sentinel = np.iinfo(np.int64).max
    for start in range(0, len(pid), chunk):
        block = pid[start:start + chunk]
        rows = np.arange(len(block), dtype=np.int64)
        alive = ~(used[block[:, 0]] | used[block[:, 1]] | used[block[:, 2]])
        while alive.any():
            live_rows = rows[alive]
            live = block[alive]
            first_user = np.full(npairs, sentinel, dtype=np.int64)
            for col in range(3):
                np.minimum.at(first_user, live[:, col], live_rows)
            take = ((first_user[live[:, 0]] == live_rows)
                    & (first_user[live[:, 1]] == live_rows)
                    & (first_user[live[:, 2]] == live_rows))
            chosen = live[take]
            accepted.extend((start + live_rows[take]).tolist())
            used[chosen.ravel()] = True
            alive &= ~(used[block[:, 0]] | used[block[:, 1]] | used[block[:, 2]])
    accepted.sort()
    return accepted


def greedy_steiner(n: int, seed: int) -> SteinerSystem:
    """Greedy pair-disjoint triple packing over a seeded random triple order.

    Runs to completion, so the result is maximal; the Turan argument then
    gives |triples| >= n(n-2)/12 (unused pairs are triangle-free, hence at
    most n^2/4 of them).
    """
    if n < 3:
        raise InvalidN(f"need n >= 3, got {n}")
    rng = np.random.default_rng(seed)
    triples = _all_triples(n)
    order = rng.permutation(len(triples))
    shuffled = triples[order]
    rows = _greedy_vector(shuffled, n)
    chosen = [tuple(int(v) for v in shuffled[r]) for r in rows]
    sys = SteinerSystem(n=n, seed=seed, triples=chosen)
    assert len(sys.triples) * 12 >= n * (n - 2), "greedy fell below Turan floor"
    return sys


# --- probability bound ------------------------------------------------------

def log_failure_probability_bound(D: int, n: int, cprime: float) -> float:
    """Natural log of binom(D,n) * (3/4)^(cprime * n^2)."""
    if not 3 <= n <= D:
        raise InvalidParams(f"need 3 <= n <= D, got D={D} n={n}")
    if cprime < 0:
        raise InvalidParams(f"need cprime >= 0, got {cprime}")
    return math.log(math.comb(D, n)) + float(cprime) * n * n * math.log(0.75)


def failure_probability_bound(D: int, n: int, cprime: float) -> float:
    """binom(D,n) * (3/4)^(cprime * n^2), evaluated in log space.

    cprime = 0 is allowed as a testing boundary (the value is then exactly
    binom(D,n)).  May underflow to 0.0 for very large cprime * n^2.
    """
    return math.exp(log_failure_probability_bound(D, n, cprime))


# --- file format -------------------------------------------------------------

def save_coloring(phi: PairColoring, path) -> None:
    header = f"STEPUP-PHI v1 D={phi.D} seed={phi.seed}\n".encode("ascii")
    packed = np.packbits(phi.bits, bitorder="little").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(packed)


def load_coloring(path) -> PairColoring:
    with open(path, "rb") as fh:
        blob = fh.read()
    m = _HEADER_RE.match(blob)
    if not m:
        raise IoError(f"{path}: not a STEPUP-PHI v1 file")
    D = int(m.group(1))
    seed = int(m.group(2))
    if D < 2:
        raise IoError(f"{path}: bad D={D}")
    npairs = D * (D - 1) // 2
    nbytes = (npairs + 7) // 8
    body = blob[m.end():]
    if len(body) != nbytes:
        raise IoError(
            f"{path}: expected {nbytes} color bytes for D={D}, got {len(body)}")
    bits = np.unpackbits(
        np.frombuffer(body, dtype=np.uint8), bitorder="little")[:npairs]
    return PairColoring(D, bits, seed=seed)
