import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prodmatch.bdd import build_equality_bdd, check_structure
from prodmatch.errors import SplitAtTerminalLayer
from prodmatch.ilp import IlpInstance, make_row
from prodmatch.splitting import plan_chunks, split_bdd, split_instance

from bruteforce import row_solutions


def join_accepted(left, right, aux_ids):
    """Joint accepted set of a coupled pair, projected onto the originals."""
    aux = set(aux_ids)
    left_aux_cols = [i for i, v in enumerate(left.variables) if int(v) in aux]
    right_aux_cols = [i for i, v in enumerate(right.variables) if int(v) in aux]
    by_choice = {}
    for bits in left.enumerate_accepted():
        key = tuple(bits[c] for c in left_aux_cols)
        prefix = tuple(b for i, b in enumerate(bits) if i not in set(left_aux_cols))
        by_choice.setdefault(key, []).append(prefix)
    joined = set()
    for bits in right.enumerate_accepted():
        key = tuple(bits[c] for c in right_aux_cols)
        suffix = tuple(b for i, b in enumerate(bits) if i not in set(right_aux_cols))
        for prefix in by_choice.get(key, ()):
            joined.add(prefix + suffix)
    return joined


def test_reference_cardinality_split_introduces_three_aux_variables():
    bdd = build_equality_bdd([1] * 8, 2, range(8))
    ids = itertools.count(100)
    result = split_bdd(bdd, 4, ids)
    assert len(result.aux_ids) == 3
    check_structure(result.left)
    check_structure(result.right)
    assert list(result.left.variables) == [0, 1, 2, 3, 100, 101, 102]
    assert list(result.right.variables) == [100, 101, 102, 4, 5, 6, 7]

    joined = join_accepted(result.left, result.right, result.aux_ids)
    assert len(joined) == 28
    assert joined == set(bdd.enumerate_accepted())


def test_split_one_hot_selection():
    bdd = build_equality_bdd([1] * 8, 2, range(8))
    result = split_bdd(bdd, 4, itertools.count(100))
    for bits in result.left.enumerate_accepted():
        assert sum(bits[4:]) == 1
    for bits in result.right.enumerate_accepted():
        assert sum(bits[:3]) == 1


def test_split_rejects_boundary_indices():
    bdd = build_equality_bdd([1, 1, 1], 1, range(3))
    with pytest.raises(SplitAtTerminalLayer):
        split_bdd(bdd, 0, itertools.count(10))
    with pytest.raises(SplitAtTerminalLayer):
        split_bdd(bdd, 3, itertools.count(10))


@settings(max_examples=60, deadline=None)
@given(
    coeffs=st.lists(st.integers(min_value=-3, max_value=3), min_size=2, max_size=8),
    rhs=st.integers(min_value=-4, max_value=4),
    data=st.data(),
)
def test_split_preserves_accepted_set_and_minima(coeffs, rhs, data):
    if not row_solutions(coeffs, rhs):
        return
    bdd = build_equality_bdd(coeffs, rhs, range(len(coeffs)))
    cut = data.draw(st.integers(min_value=1, max_value=len(coeffs) - 1))
    result = split_bdd(bdd, cut, itertools.count(1000))
    check_structure(result.left)
    check_structure(result.right)

    original = set(bdd.enumerate_accepted())
    assert join_accepted(result.left, result.right, result.aux_ids) == original

    costs = np.asarray(
        data.draw(
            st.lists(
                st.integers(min_value=-5, max_value=5),
                min_size=len(coeffs),
                max_size=len(coeffs),
            )
        ),
        dtype=np.float64,
    )
    # coupled minimum with agreement on the one-hot selection
    aux = set(result.aux_ids)
    best = np.inf
    left_costs = [0.0 if int(v) in aux else costs[int(v)] for v in result.left.variables]
    right_costs = [0.0 if int(v) in aux else costs[int(v)] for v in result.right.variables]
    lmin = {}
    for bits in result.left.enumerate_accepted():
        key = bits[cut:]
        val = float(np.dot(bits, left_costs))
        lmin[key] = min(lmin.get(key, np.inf), val)
    k = len(result.aux_ids)
    for bits in result.right.enumerate_accepted():
        key = bits[:k]
        if key in lmin:
            best = min(best, lmin[key] + float(np.dot(bits, right_costs)))
    assert best == pytest.approx(bdd.min_assignment(costs)[0], abs=1e-12)


def test_plan_chunks_spans():
    rows = [make_row(range(20), [1] * 20, 2)]
    inst = IlpInstance.from_rows(np.zeros(20), rows)
    assert plan_chunks(inst, 128) == []
    assert plan_chunks(inst, 8) == [(0, [8, 16])]


def test_split_instance_piece_sizes_and_order():
    rows = [make_row(range(20), [1] * 20, 2), make_row([0, 5], [1, 1], 1)]
    inst = IlpInstance.from_rows(np.zeros(20), rows)
    split = split_instance(inst, chunk_size=8)
    assert split.num_constraints == 4  # 3 pieces + untouched short row
    originals = set(range(20))
    for bdd in split.constraints:
        n_orig = sum(1 for v in bdd.variables if int(v) in originals)
        assert n_orig <= 8
    # auxiliary variables carry zero cost and sit at their boundary in the order
    assert split.num_variables > 20
    assert (split.costs[20:] == 0).all()
    pos = split.positions
    for bdd in split.constraints:
        p = pos[bdd.variables]
        assert (np.diff(p) > 0).all()


def test_split_instance_noop_for_short_rows():
    inst = IlpInstance.from_rows(np.zeros(4), [make_row(range(4), [1] * 4, 1)])
    assert split_instance(inst, chunk_size=128) is inst
