"""Splitting long diagrams into coupled chains of short ones.

A diagram over variables ``x_1..x_n`` cut after layer ``i`` becomes two
diagrams coupled through fresh one-hot variables ``y_1..y_k``, one per node
of the crossing layer: the left part accepts a prefix together with
``y = e_t`` exactly when the prefix reaches crossing node ``t``; the right
part reads the one-hot selection and continues the original suffix from
that node.  Projected onto the original variables, the coupled pair accepts
exactly the original set, at the price of a (possibly) weaker Lagrangian
relaxation.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .bdd import FALSE_T, TRUE_T, Bdd
from .errors import SplitAtTerminalLayer
from .ilp import IlpInstance

DEFAULT_CHUNK_SIZE = 128


@dataclass(frozen=True)
class SplitResult:
    left: Bdd
    right: Bdd
    aux_ids: list[int]


def split_bdd(bdd: Bdd, split_after_layer: int, fresh_ids: Iterator[int]) -> SplitResult:
    """Cut one diagram after ``split_after_layer`` (1-based prefix length).

    The number of auxiliary variables equals the node count of the crossing
    layer.  Both returned diagrams are reduced and co-reachable by
    construction.
    """
    n = bdd.num_variables
    if not 1 <= split_after_layer < n:
        raise SplitAtTerminalLayer(
            f"split index {split_after_layer} outside [1, {n - 1}]"
        )
    i = split_after_layer
    k = len(bdd.zeros[i])
    aux_ids = [next(fresh_ids) for _ in range(k)]

    # Left: original prefix, then a lattice pinning y to the one-hot e_t.
    # Prefix arcs into the old crossing layer already use local indices
    # 0..k-1, which match the "pending node t" positions of the first
    # lattice layer, so they transfer unchanged.
    left_zeros = [z.copy() for z in bdd.zeros[:i]]
    left_ones = [o.copy() for o in bdd.ones[:i]]
    for q in range(k):
        pending = k - q  # nodes still awaiting their one-bit
        width = pending + (1 if q > 0 else 0)
        z = np.full(width, FALSE_T, dtype=np.int32)
        o = np.full(width, FALSE_T, dtype=np.int32)
        last = q + 1 == k
        for t in range(q, k):
            p = t - q
            if t == q:
                o[p] = TRUE_T if last else k - q - 1  # into the done chain
            else:
                z[p] = t - q - 1 if not last else FALSE_T
        if q > 0:
            z[pending] = TRUE_T if last else k - q - 1
        left_zeros.append(z)
        left_ones.append(o)
    left = Bdd(list(bdd.variables[:i]) + aux_ids, left_zeros, left_ones)

    # Right: a lattice decoding the one-hot selection, then the original
    # suffix.  "placed at t" nodes sit at position t+1; position 0 means no
    # bit has been placed yet.
    right_zeros = []
    right_ones = []
    for q in range(k):
        width = q + 1
        z = np.full(width, FALSE_T, dtype=np.int32)
        o = np.full(width, FALSE_T, dtype=np.int32)
        last = q + 1 == k
        o[0] = q if last else q + 1  # place the bit at t == q
        if not last:
            z[0] = 0
        for t in range(q):
            z[t + 1] = t if last else t + 1
        right_zeros.append(z)
        right_ones.append(o)
    right_zeros.extend(z.copy() for z in bdd.zeros[i:])
    right_ones.extend(o.copy() for o in bdd.ones[i:])
    right = Bdd(aux_ids + list(bdd.variables[i:]), right_zeros, right_ones)

    return SplitResult(left, right, aux_ids)


def plan_chunks(instance: IlpInstance, chunk_size: int) -> list[tuple[int, list[int]]]:
    """Which constraints to cut, and after which original layers.

    Cuts land every ``chunk_size`` original variables, so each resulting
    piece spans at most ``chunk_size`` of them (plus its coupling
    variables).  Short constraints are left alone.
    """
    if chunk_size < 2:
        raise ValueError("chunk_size must be at least 2")
    schedule = []
    for j, bdd in enumerate(instance.constraints):
        n = bdd.num_variables
        if n > chunk_size:
            schedule.append((j, list(range(chunk_size, n, chunk_size))))
    return schedule


def split_instance(
    instance: IlpInstance, chunk_size: int = DEFAULT_CHUNK_SIZE
) -> IlpInstance:
    """Apply the chunk plan, appending zero-cost auxiliary variables.

    Auxiliary ids are numbered after all original variables; in the
    visitation order they are inserted right at their split boundary (see
    IlpInstance).  Returns the instance unchanged when nothing needs
    splitting.
    """
    schedule = dict(plan_chunks(instance, chunk_size))
    if not schedule:
        return instance
    fresh = itertools.count(instance.num_variables)
    insertions: dict[int, list[int]] = {}
    new_constraints = []
    for j, bdd in enumerate(instance.constraints):
        positions = schedule.get(j)
        if not positions:
            new_constraints.append(bdd)
            continue
        rest = bdd
        prev = 0
        aux_prefix = 0
        for p in positions:
            result = split_bdd(rest, aux_prefix + (p - prev), fresh)
            anchor = int(bdd.variables[p - 1])
            insertions.setdefault(anchor, []).extend(result.aux_ids)
            new_constraints.append(result.left)
            rest = result.right
            aux_prefix = len(result.aux_ids)
            prev = p
        new_constraints.append(rest)
    num_aux = next(fresh) - instance.num_variables
    costs = np.concatenate([instance.costs, np.zeros(num_aux)])
    order = []
    for v in instance.variable_order:
        order.append(int(v))
        order.extend(insertions.get(int(v), ()))
    return IlpInstance(costs, new_constraints, rows=None, variable_order=np.asarray(order))
