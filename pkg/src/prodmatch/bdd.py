"""Layered binary decision diagrams for 0-1 linear equality constraints.

Each constraint of the integer program is compiled into a layered DAG whose
root-to-TRUE paths are exactly the feasible 0-1 assignments of that
constraint.  Layer ``l`` holds the nodes that branch on the ``l``-th variable
of the diagram; every arc goes to the next layer or to a terminal (no skip
arcs).  Arc targets are stored per layer as int32 arrays with local indices
into the next layer, or one of the sentinels below.

The diagrams here are reduced (no two nodes of a layer share both targets)
and co-reachable (every node lies on some accepting path).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np
from numba import njit

from .errors import EmptyFeasibleSet

FALSE_T = -1
TRUE_T = -2

# Cost vectors are plain float arrays aligned with ``Bdd.variables``; only
# one-arcs carry the cost of their layer, zero-arcs are free.
ArcCosts = np.ndarray


@dataclass(frozen=True)
class MinMarginalPair:
    """Best path costs with one variable clamped to 0 (``m0``) or 1 (``m1``).

    Either side is ``inf`` when that branch has no accepting path; both at
    once cannot happen in a co-reachable diagram.
    """

    m0: float
    m1: float

    @property
    def difference(self) -> float:
        """m1 - m0 with infinities kept symbolic (never inf - inf)."""
        if np.isinf(self.m1) and np.isinf(self.m0):
            raise ValueError("min-marginal pair with no feasible branch")
        if np.isinf(self.m1):
            return np.inf
        if np.isinf(self.m0):
            return -np.inf
        return self.m1 - self.m0


class Bdd:
    """One constraint's feasible set as a layered decision diagram.

    Immutable after construction; all mutating operations return new
    diagrams.  ``variables`` lists the global variable ids, one per layer.
    """

    __slots__ = ("variables", "zeros", "ones")

    def __init__(
        self,
        variables: Sequence[int],
        zeros: Sequence[np.ndarray],
        ones: Sequence[np.ndarray],
    ):
        variables = np.asarray(variables, dtype=np.int64)
        if variables.ndim != 1 or len(variables) == 0:
            raise ValueError("a diagram needs at least one variable")
        if len(set(variables.tolist())) != len(variables):
            raise ValueError("duplicate variable in constraint")
        if len(zeros) != len(variables) or len(ones) != len(variables):
            raise ValueError("layer count must match variable count")
        zeros = [np.asarray(z, dtype=np.int32) for z in zeros]
        ones = [np.asarray(o, dtype=np.int32) for o in ones]
        if len(zeros[0]) != 1:
            raise ValueError("first layer must hold exactly the root node")
        for z, o in zip(zeros, ones):
            if len(z) != len(o) or len(z) == 0:
                raise ValueError("malformed layer")
        self.variables = variables
        self.zeros = zeros
        self.ones = ones

    # -- basic shape ----------------------------------------------------

    @property
    def num_variables(self) -> int:
        return len(self.variables)

    @property
    def widths(self) -> list[int]:
        return [len(z) for z in self.zeros]

    @property
    def num_nodes(self) -> int:
        return sum(len(z) for z in self.zeros)

    def __repr__(self) -> str:
        return f"Bdd({self.num_variables} vars, {self.num_nodes} nodes)"

    # -- evaluation ------------------------------------------------------

    def accepts(self, bits: Sequence[int]) -> bool:
        """Whether the 0-1 assignment (aligned with ``variables``) is feasible."""
        if len(bits) != self.num_variables:
            raise ValueError("assignment length mismatch")
        node = 0
        for layer, bit in enumerate(bits):
            arcs = self.ones[layer] if bit else self.zeros[layer]
            target = int(arcs[node])
            if target == FALSE_T:
                return False
            if target == TRUE_T:
                return layer == self.num_variables - 1
            node = target
        raise AssertionError("last layer must end in a terminal")

    def _terminal_step(self, targets: np.ndarray, nxt: np.ndarray | None) -> np.ndarray:
        """Distance-to-TRUE contributed by following ``targets`` once."""
        out = np.full(len(targets), np.inf)
        out[targets == TRUE_T] = 0.0
        if nxt is not None:
            mask = targets >= 0
            out[mask] = nxt[targets[mask]]
        return out

    def backward_distances(self, costs: ArcCosts) -> list[np.ndarray]:
        """Per node, least cost of reaching TRUE; index [layer][node]."""
        costs = np.asarray(costs, dtype=np.float64)
        n = self.num_variables
        dist: list[np.ndarray] = [np.empty(0)] * n
        nxt: np.ndarray | None = None
        for layer in range(n - 1, -1, -1):
            via0 = self._terminal_step(self.zeros[layer], nxt)
            via1 = costs[layer] + self._terminal_step(self.ones[layer], nxt)
            dist[layer] = np.minimum(via0, via1)
            nxt = dist[layer]
        return dist

    def forward_distances(self, costs: ArcCosts) -> tuple[list[np.ndarray], float]:
        """Per node, least cost from the root; also the terminal TRUE distance."""
        costs = np.asarray(costs, dtype=np.float64)
        n = self.num_variables
        dist: list[np.ndarray] = [np.zeros(1)]
        true_dist = np.inf
        for layer in range(n):
            cur = dist[layer]
            if layer + 1 < n:
                nxt = np.full(len(self.zeros[layer + 1]), np.inf)
            for arcs, cost in ((self.zeros[layer], 0.0), (self.ones[layer], costs[layer])):
                reached = cur + cost
                if layer + 1 < n:
                    mask = arcs >= 0
                    np.minimum.at(nxt, arcs[mask], reached[mask])
                true_mask = arcs == TRUE_T
                if true_mask.any():
                    true_dist = min(true_dist, float(reached[true_mask].min()))
            if layer + 1 < n:
                dist.append(nxt)
        return dist, true_dist

    def min_assignment(self, costs: ArcCosts) -> tuple[float, tuple[int, ...]]:
        """Cheapest accepted assignment under per-layer one-arc costs.

        Ties are broken by preferring the zero-arc at the earliest layer,
        which yields the lexicographically smallest minimiser.
        """
        costs = np.asarray(costs, dtype=np.float64)
        dist = self.backward_distances(costs)
        bits: list[int] = []
        node = 0
        n = self.num_variables
        for layer in range(n):
            nxt = dist[layer + 1] if layer + 1 < n else None
            via0 = float(self._terminal_step(self.zeros[layer][node : node + 1], nxt)[0])
            via1 = costs[layer] + float(
                self._terminal_step(self.ones[layer][node : node + 1], nxt)[0]
            )
            if via0 <= via1:
                bits.append(0)
                node = int(self.zeros[layer][node])
            else:
                bits.append(1)
                node = int(self.ones[layer][node])
        return float(dist[0][0]), tuple(bits)

    def min_marginals(self, costs: ArcCosts) -> list[MinMarginalPair]:
        """Per layer, the best path cost with that layer's variable clamped.

        One forward and one backward sweep; the two are combined at each
        layer.  A clamped branch without any accepting path yields ``inf``.
        """
        costs = np.asarray(costs, dtype=np.float64)
        fwd, _ = self.forward_distances(costs)
        bwd = self.backward_distances(costs)
        out = []
        n = self.num_variables
        for layer in range(n):
            nxt = bwd[layer + 1] if layer + 1 < n else None
            via0 = fwd[layer] + self._terminal_step(self.zeros[layer], nxt)
            via1 = fwd[layer] + costs[layer] + self._terminal_step(self.ones[layer], nxt)
            out.append(MinMarginalPair(float(via0.min()), float(via1.min())))
        return out

    def count_accepting_paths(self) -> int:
        """Number of accepted assignments (exact, arbitrary precision)."""
        counts: list[int] | None = None
        for layer in range(self.num_variables - 1, -1, -1):
            new_counts = []
            for z, o in zip(self.zeros[layer], self.ones[layer]):
                c = 0
                for t in (int(z), int(o)):
                    if t == TRUE_T:
                        c += 1
                    elif t >= 0:
                        c += counts[t]
                new_counts.append(c)
            counts = new_counts
        return counts[0]

    def enumerate_accepted(self) -> Iterator[tuple[int, ...]]:
        """Yield every accepted assignment; test oracle, small diagrams only."""
        n = self.num_variables
        stack: list[tuple[int, int, tuple[int, ...]]] = [(0, 0, ())]
        while stack:
            layer, node, prefix = stack.pop()
            for bit in (1, 0):
                arcs = self.ones[layer] if bit else self.zeros[layer]
                target = int(arcs[node])
                if target == FALSE_T:
                    continue
                if target == TRUE_T:
                    yield prefix + (bit,)
                else:
                    stack.append((layer + 1, target, prefix + (bit,)))

    # -- restriction ------------------------------------------------------

    def condition(self, fixes: Mapping[int, int]) -> "Bdd":
        """Clamp some of this diagram's variables and re-reduce.

        The clamped layers stay in place (the variable is merely forced).
        Raises EmptyFeasibleSet when nothing remains accepted.
        """
        zeros = [z.copy() for z in self.zeros]
        ones = [o.copy() for o in self.ones]
        var_layer = {int(v): l for l, v in enumerate(self.variables)}
        touched = False
        for var, bit in fixes.items():
            layer = var_layer.get(int(var))
            if layer is None:
                continue
            touched = True
            if bit:
                zeros[layer][:] = FALSE_T
            else:
                ones[layer][:] = FALSE_T
        if not touched:
            return self
        return reduce_bdd(Bdd(self.variables, zeros, ones))

    def is_constant_true(self) -> bool:
        """Whether every assignment of the free layers is accepted."""
        for layer in range(self.num_variables):
            z, o = self.zeros[layer], self.ones[layer]
            if len(z) != 1:
                return False
            targets = {int(z[0]), int(o[0])}
            if FALSE_T in targets or len(targets) != 1:
                return False
        return True


def reduce_bdd(bdd: Bdd) -> Bdd:
    """Prune dead and unreachable nodes, then merge isomorphic ones.

    First-occurrence order is kept per layer, so reducing an already
    reduced diagram returns an identical structure.
    """
    n = bdd.num_variables
    zeros = [z.copy() for z in bdd.zeros]
    ones = [o.copy() for o in bdd.ones]

    # Bottom-up: a node survives iff some arc leads to TRUE or a survivor.
    alive: list[np.ndarray] = [np.empty(0, bool)] * n
    for layer in range(n - 1, -1, -1):
        for arcs in (zeros[layer], ones[layer]):
            if layer + 1 < n:
                mask = arcs >= 0
                dead = mask.copy()
                dead[mask] = ~alive[layer + 1][arcs[mask]]
                arcs[dead] = FALSE_T
        alive[layer] = (zeros[layer] != FALSE_T) | (ones[layer] != FALSE_T)
    if not alive[0][0]:
        raise EmptyFeasibleSet("constraint has no accepting assignment")

    # Top-down reachability from the root.
    reach: list[np.ndarray] = [np.ones(1, bool)]
    for layer in range(n - 1):
        nxt = np.zeros(len(zeros[layer + 1]), bool)
        for arcs in (zeros[layer], ones[layer]):
            mask = reach[layer] & (arcs >= 0)
            nxt[arcs[mask]] = True
        reach.append(nxt)

    # Bottom-up compaction and merge of isomorphic survivors.
    new_zeros: list[np.ndarray] = [np.empty(0, np.int32)] * n
    new_ones: list[np.ndarray] = [np.empty(0, np.int32)] * n
    remap: np.ndarray | None = None  # old id in layer+1 -> new id or FALSE_T
    for layer in range(n - 1, -1, -1):
        keep = alive[layer] & reach[layer]
        z = zeros[layer][keep]
        o = ones[layer][keep]
        if remap is not None:
            z = np.where(z >= 0, remap[np.maximum(z, 0)], z).astype(np.int32)
            o = np.where(o >= 0, remap[np.maximum(o, 0)], o).astype(np.int32)
        # stable first-occurrence dedup on (zero-target, one-target)
        keys = (z.astype(np.int64) + 2) * (len(zeros[layer]) + 3) + (o.astype(np.int64) + 2)
        _, first, inverse = np.unique(keys, return_index=True, return_inverse=True)
        order = np.argsort(first, kind="stable")
        rank = np.empty(len(order), dtype=np.int64)
        rank[order] = np.arange(len(order))
        ids_kept = rank[inverse]
        remap = np.full(len(zeros[layer]), FALSE_T, dtype=np.int64)
        remap[np.flatnonzero(keep)] = ids_kept
        sel = first[order]
        new_zeros[layer] = z[sel].astype(np.int32)
        new_ones[layer] = o[sel].astype(np.int32)
    return Bdd(bdd.variables, new_zeros, new_ones)


def check_structure(bdd: Bdd) -> None:
    """Assert all structural invariants; raises ValueError on violation."""
    n = bdd.num_variables
    if len(bdd.zeros[0]) != 1:
        raise ValueError("root layer width must be 1")
    for layer in range(n):
        width_next = len(bdd.zeros[layer + 1]) if layer + 1 < n else 0
        for arcs in (bdd.zeros[layer], bdd.ones[layer]):
            if arcs.min(initial=0) < TRUE_T:
                raise ValueError("arc target below sentinel range")
            if layer + 1 < n:
                if (arcs == TRUE_T).any():
                    raise ValueError("inner arc to TRUE (skip arcs are forbidden)")
                if arcs.max(initial=-1) >= width_next:
                    raise ValueError("arc target beyond next layer")
            elif (arcs >= 0).any():
                raise ValueError("last layer must target terminals only")
        z64 = bdd.zeros[layer].astype(np.int64)
        pairs = (z64 + 2) * (max(width_next, 1) + 3) + (bdd.ones[layer].astype(np.int64) + 2)
        if len(np.unique(pairs)) != len(pairs):
            raise ValueError(f"layer {layer} holds isomorphic nodes (not reduced)")
    reduced = reduce_bdd(bdd)
    if reduced.widths != bdd.widths:
        raise ValueError("diagram contains dead or unreachable nodes")


@njit(cache=True)
def _equality_tables(coeffs: np.ndarray, rhs: int):  # pragma: no cover - jitted
    """Node tables of the reduced diagram for sum(coeffs * x) == rhs.

    States are partial sums, windowed by what the remaining suffix can still
    contribute; an exact forward/backward reachability pass trims sums the
    window admits but no 0-1 completion attains.  Returns per-layer widths
    plus flattened zero/one target tables (local next-layer indices), or an
    empty widths array when the constraint is infeasible.
    """
    n = coeffs.shape[0]
    minrem = np.zeros(n + 1, np.int64)
    maxrem = np.zeros(n + 1, np.int64)
    for l in range(n - 1, -1, -1):
        a = coeffs[l]
        minrem[l] = minrem[l + 1] + (a if a < 0 else 0)
        maxrem[l] = maxrem[l + 1] + (a if a > 0 else 0)
    lo = np.zeros(n + 1, np.int64)
    hi = np.zeros(n + 1, np.int64)
    for l in range(n):
        a = coeffs[l]
        lo[l + 1] = lo[l] + (a if a < 0 else 0)
        hi[l + 1] = hi[l] + (a if a > 0 else 0)
    wlo = np.empty(n + 1, np.int64)
    whi = np.empty(n + 1, np.int64)
    off = np.zeros(n + 2, np.int64)
    for l in range(n + 1):
        wl = lo[l] if lo[l] > rhs - maxrem[l] else rhs - maxrem[l]
        wh = hi[l] if hi[l] < rhs - minrem[l] else rhs - minrem[l]
        wlo[l] = wl
        whi[l] = wh
        width = wh - wl + 1
        if width < 0:
            width = 0
        off[l + 1] = off[l] + width
    total = off[n + 1]
    empty = (np.zeros(0, np.int64), np.zeros(0, np.int32), np.zeros(0, np.int32))
    if total == 0:
        return empty

    reach = np.zeros(total, np.bool_)
    if wlo[0] <= 0 <= whi[0]:
        reach[off[0] - wlo[0]] = True
    else:
        return empty
    for l in range(n):
        a = coeffs[l]
        for s in range(wlo[l], whi[l] + 1):
            if reach[off[l] + s - wlo[l]]:
                if wlo[l + 1] <= s <= whi[l + 1]:
                    reach[off[l + 1] + s - wlo[l + 1]] = True
                s2 = s + a
                if wlo[l + 1] <= s2 <= whi[l + 1]:
                    reach[off[l + 1] + s2 - wlo[l + 1]] = True

    co = np.zeros(total, np.bool_)
    if wlo[n] <= rhs <= whi[n]:
        co[off[n] + rhs - wlo[n]] = True
    else:
        return empty
    for l in range(n - 1, -1, -1):
        a = coeffs[l]
        for s in range(wlo[l], whi[l] + 1):
            ok = False
            if wlo[l + 1] <= s <= whi[l + 1]:
                ok = co[off[l + 1] + s - wlo[l + 1]]
            if not ok:
                s2 = s + a
                if wlo[l + 1] <= s2 <= whi[l + 1]:
                    ok = co[off[l + 1] + s2 - wlo[l + 1]]
            co[off[l] + s - wlo[l]] = ok

    idx = np.full(total, -1, np.int64)
    widths = np.zeros(n, np.int64)
    for l in range(n):
        cnt = 0
        for k in range(off[l], off[l + 1]):
            if reach[k] and co[k]:
                idx[k] = cnt
                cnt += 1
        widths[l] = cnt
    if widths[0] == 0:
        return empty

    node_off = np.zeros(n + 1, np.int64)
    for l in range(n):
        node_off[l + 1] = node_off[l] + widths[l]
    zero_flat = np.empty(node_off[n], np.int32)
    one_flat = np.empty(node_off[n], np.int32)
    for l in range(n):
        a = coeffs[l]
        for s in range(wlo[l], whi[l] + 1):
            i = idx[off[l] + s - wlo[l]]
            if i < 0:
                continue
            pos = node_off[l] + i
            if l == n - 1:
                zero_flat[pos] = TRUE_T if s == rhs else FALSE_T
                one_flat[pos] = TRUE_T if s + a == rhs else FALSE_T
            else:
                t0 = np.int64(FALSE_T)
                if wlo[l + 1] <= s <= whi[l + 1]:
                    t0 = idx[off[l + 1] + s - wlo[l + 1]]
                    if t0 < 0:
                        t0 = FALSE_T
                zero_flat[pos] = t0
                s2 = s + a
                t1 = np.int64(FALSE_T)
                if wlo[l + 1] <= s2 <= whi[l + 1]:
                    t1 = idx[off[l + 1] + s2 - wlo[l + 1]]
                    if t1 < 0:
                        t1 = FALSE_T
                one_flat[pos] = t1
    return widths, zero_flat, one_flat


def build_equality_bdd(
    coefficients: Iterable[int], rhs: int, variables: Sequence[int]
) -> Bdd:
    """Compile one integer equality row into a reduced, co-reachable diagram.

    Accepts exactly the 0-1 assignments with sum(coefficients * x) == rhs.
    Raises EmptyFeasibleSet when no assignment satisfies the row.
    """
    coeffs = np.asarray(list(coefficients), dtype=np.int64)
    variables = list(variables)
    if len(coeffs) != len(variables):
        raise ValueError("one coefficient per variable required")
    if len(coeffs) == 0:
        raise ValueError("empty constraint row")
    widths, zero_flat, one_flat = _equality_tables(coeffs, int(rhs))
    if len(widths) == 0:
        raise EmptyFeasibleSet(f"no 0-1 solution of row == {rhs}")
    zeros, ones = [], []
    pos = 0
    for w in widths:
        zeros.append(zero_flat[pos : pos + w])
        ones.append(one_flat[pos : pos + w])
        pos += w
    return Bdd(variables, zeros, ones)
