"""Shared helpers for the test suite."""

from __future__ import annotations

import numpy as np


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One visible line per acceptance criterion, after the test run."""
    try:
        import test_acceptance
    except ImportError:
        return
    results = getattr(test_acceptance, "RESULTS", {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(results):
        ok, label, detail = results[num]
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {num}: {label}"
        if detail:
            line += f" ({detail})"
        terminalreporter.write_line(line)


def tuple_from_distinct_deltas(deltas, rng=None, pad_bits=()):
    """Build a strictly increasing vertex tuple realizing a delta sequence.

    Works whenever the requested deltas are pairwise distinct: starting from
    a base containing none of those bits, each step sets one fresh bit, so
    the consecutive delta is exactly that bit index and the tuple increases.
    """
    ds = list(deltas)
    assert len(set(ds)) == len(ds), "realizer needs pairwise distinct deltas"
    base = 0
    for b in pad_bits:
        assert b not in ds
        base |= 1 << b
    if rng is not None:
        free = [b for b in range(max(ds) + 1) if b not in ds]
        for b in free:
            if rng.random() < 0.5:
                base |= 1 << b
    out = [base]
    for d in ds:
        out.append(out[-1] | (1 << d))
    return tuple(out)


def random_increasing_tuples(rng, count, length, bits):
    """Batch of strictly increasing vertex tuples as a (count, length) array."""
    hi = 1 << bits
    step_hi = max(2, hi // (length + 1))
    v0 = rng.integers(0, step_hi, size=(count, 1), dtype=np.uint64)
    steps = rng.integers(1, step_hi, size=(count, length - 1), dtype=np.uint64)
    return np.concatenate([v0, steps], axis=1).cumsum(axis=1, dtype=np.uint64)
