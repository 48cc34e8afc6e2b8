import numpy as np
from hypothesis import given, strategies as st

from mmdiff.rng import BLOCK, Stage, block_ranges, blocked_rows, stream


def test_stream_is_reproducible():
    a = stream(3, Stage.LANGEVIN, 1, 2).standard_normal(5)
    b = stream(3, Stage.LANGEVIN, 1, 2).standard_normal(5)
    assert np.array_equal(a, b)


def test_streams_differ_by_stage_and_key():
    base = stream(3, Stage.LANGEVIN, 0).random(4)
    assert not np.array_equal(base, stream(3, Stage.LABELS, 0).random(4))
    assert not np.array_equal(base, stream(3, Stage.LANGEVIN, 1).random(4))
    assert not np.array_equal(base, stream(4, Stage.LANGEVIN, 0).random(4))


def test_block_ranges_cover():
    spans = list(block_ranges(2500, 1000))
    assert spans == [(0, 0, 1000), (1, 1000, 2000), (2, 2000, 2500)]


@given(st.integers(0, 3000), st.integers(0, 3000), st.integers(0, 3000))
def test_blocked_rows_partition_invariant(a, b, c):
    lo, mid, hi = sorted((a, b, c))
    draw = lambda g, m: g.random((m, 2))
    whole = blocked_rows(9, Stage.SAMPLE, (), lo, hi, draw)
    if hi == lo:
        assert whole is None
        return
    parts = [p for p in (blocked_rows(9, Stage.SAMPLE, (), lo, mid, draw),
                         blocked_rows(9, Stage.SAMPLE, (), mid, hi, draw)) if p is not None]
    assert np.array_equal(whole, np.concatenate(parts))
    assert whole.shape == (hi - lo, 2)


def test_blocked_rows_uses_block_streams():
    rows = blocked_rows(1, Stage.SAMPLE, (), 0, BLOCK + 1, lambda g, m: g.random(m))
    assert rows[BLOCK] == stream(1, Stage.SAMPLE, 1).random(BLOCK)[0]
