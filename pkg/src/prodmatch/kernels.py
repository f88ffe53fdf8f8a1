"""Flat array layout and jitted sweep kernels for all diagrams of an instance.

The per-constraint diagrams are concatenated into one node table so that the
per-iteration work (shortest-path sweeps, min-marginal extraction, averaging
passes) runs as tight loops over contiguous arrays.  Node targets use the
same sentinels as :mod:`prodmatch.bdd` (-1 FALSE, -2 TRUE) but hold global
node indices.

Sweeps that touch each diagram independently run ``prange`` over diagrams;
every parallel iteration writes only its own node range and its own slot of
the output, so results are bitwise independent of the thread count.
"""

from __future__ import annotations

import os

os.environ.setdefault("NUMBA_NUM_THREADS", "8")

import numba
import numpy as np
from numba import njit, prange

INF = np.inf


def set_threads(n: int) -> int:
    """Clamp and apply the worker thread count; returns the effective value."""
    limit = numba.config.NUMBA_NUM_THREADS
    effective = max(1, min(int(n), limit))
    numba.set_num_threads(effective)
    return effective


class FlatBdds:
    """All diagrams of one instance, flattened.

    Layers are numbered globally and contiguously per diagram; ``lam`` and
    every other per-dual-coordinate vector is indexed by that global layer
    id, i.e. one entry per (variable, constraint) incidence.
    """

    def __init__(self, instance):
        constraints = instance.constraints
        nb = len(constraints)
        layer_counts = np.fromiter(
            (b.num_variables for b in constraints), dtype=np.int64, count=nb
        )
        self.bdd_layer_lo = np.zeros(nb + 1, dtype=np.int64)
        np.cumsum(layer_counts, out=self.bdd_layer_lo[1:])
        num_layers = int(self.bdd_layer_lo[-1])

        widths = np.fromiter(
            (len(z) for b in constraints for z in b.zeros),
            dtype=np.int64,
            count=num_layers,
        )
        self.layer_node_lo = np.zeros(num_layers + 1, dtype=np.int64)
        np.cumsum(widths, out=self.layer_node_lo[1:])
        self.layer_var = (
            np.concatenate([b.variables for b in constraints])
            if nb
            else np.zeros(0, np.int64)
        )
        self.layer_bdd = np.repeat(np.arange(nb, dtype=np.int64), layer_counts)

        zero_local = (
            np.concatenate([z for b in constraints for z in b.zeros])
            if num_layers
            else np.zeros(0, np.int32)
        ).astype(np.int64)
        one_local = (
            np.concatenate([o for b in constraints for o in b.ones])
            if num_layers
            else np.zeros(0, np.int32)
        ).astype(np.int64)
        shift = np.repeat(self.layer_node_lo[1:], widths)
        self.zero_t = np.where(zero_local >= 0, zero_local + shift, zero_local)
        self.one_t = np.where(one_local >= 0, one_local + shift, one_local)

        positions = instance.positions
        num_positions = instance.num_variables
        pos_of_layer = positions[self.layer_var]
        self.proc_layers = np.argsort(pos_of_layer, kind="stable").astype(np.int64)
        counts = np.bincount(pos_of_layer, minlength=num_positions)
        self.proc_ptr = np.zeros(num_positions + 1, dtype=np.int64)
        np.cumsum(counts, out=self.proc_ptr[1:])
        self.max_degree = int(counts.max()) if num_positions else 0

        self.num_bdds = nb
        self.num_layers = num_layers
        self.num_nodes = int(self.layer_node_lo[-1])


@njit(cache=True, parallel=True)
def k_backward(bdd_layer_lo, layer_node_lo, zero_t, one_t, lam, B, bounds):
    """Distance-to-TRUE for every node; per-diagram optimum in ``bounds``."""
    nb = bdd_layer_lo.shape[0] - 1
    for j in prange(nb):
        l_lo = bdd_layer_lo[j]
        l_hi = bdd_layer_lo[j + 1]
        for l in range(l_hi - 1, l_lo - 1, -1):
            lam_l = lam[l]
            for v in range(layer_node_lo[l], layer_node_lo[l + 1]):
                t0 = zero_t[v]
                if t0 == -2:
                    c0 = 0.0
                elif t0 == -1:
                    c0 = INF
                else:
                    c0 = B[t0]
                t1 = one_t[v]
                if t1 == -2:
                    c1 = lam_l
                elif t1 == -1:
                    c1 = INF
                else:
                    c1 = lam_l + B[t1]
                B[v] = c0 if c0 <= c1 else c1
        bounds[j] = B[layer_node_lo[l_lo]]


@njit(cache=True, parallel=True)
def k_forward(bdd_layer_lo, layer_node_lo, zero_t, one_t, lam, F, bounds):
    """Distance-from-root for every node; per-diagram optimum in ``bounds``."""
    nb = bdd_layer_lo.shape[0] - 1
    for j in prange(nb):
        l_lo = bdd_layer_lo[j]
        l_hi = bdd_layer_lo[j + 1]
        root = layer_node_lo[l_lo]
        for v in range(root, layer_node_lo[l_lo + 1]):
            F[v] = INF
        F[root] = 0.0
        tbound = INF
        for l in range(l_lo, l_hi):
            if l + 1 < l_hi:
                for w in range(layer_node_lo[l + 1], layer_node_lo[l + 2]):
                    F[w] = INF
            lam_l = lam[l]
            for v in range(layer_node_lo[l], layer_node_lo[l + 1]):
                fv = F[v]
                if fv == INF:
                    continue
                t0 = zero_t[v]
                if t0 >= 0:
                    if fv < F[t0]:
                        F[t0] = fv
                elif t0 == -2:
                    if fv < tbound:
                        tbound = fv
                t1 = one_t[v]
                c = fv + lam_l
                if t1 >= 0:
                    if c < F[t1]:
                        F[t1] = c
                elif t1 == -2:
                    if c < tbound:
                        tbound = c
        bounds[j] = tbound


@njit(cache=True)
def k_mma_forward(
    bdd_layer_lo,
    layer_node_lo,
    layer_bdd,
    zero_t,
    one_t,
    proc_ptr,
    proc_layers,
    lam,
    F,
    B,
    bounds,
    m0s,
    m1s,
):
    """One monotone averaging pass in ascending variable order.

    Requires ``B`` valid for the current ``lam``; rebuilds ``F``
    incrementally and leaves per-diagram optima of the updated ``lam`` in
    ``bounds``.  Infinite min-marginals (clamped branches) are excluded
    from the average and their coordinates left untouched, so no dual
    value ever becomes non-finite.
    """
    nb = bdd_layer_lo.shape[0] - 1
    for j in range(nb):
        l_lo = bdd_layer_lo[j]
        root = layer_node_lo[l_lo]
        for v in range(root, layer_node_lo[l_lo + 1]):
            F[v] = INF
        F[root] = 0.0
        bounds[j] = INF
    num_pos = proc_ptr.shape[0] - 1
    for p in range(num_pos):
        lo = proc_ptr[p]
        hi = proc_ptr[p + 1]
        if hi == lo:
            continue
        fsum = 0.0
        fcnt = 0
        for t in range(lo, hi):
            l = proc_layers[t]
            lam_l = lam[l]
            m0 = INF
            m1 = INF
            for v in range(layer_node_lo[l], layer_node_lo[l + 1]):
                fv = F[v]
                if fv == INF:
                    continue
                t0 = zero_t[v]
                if t0 == -2:
                    c0 = fv
                elif t0 == -1:
                    c0 = INF
                else:
                    c0 = fv + B[t0]
                if c0 < m0:
                    m0 = c0
                t1 = one_t[v]
                if t1 == -2:
                    c1 = fv + lam_l
                elif t1 == -1:
                    c1 = INF
                else:
                    c1 = fv + lam_l + B[t1]
                if c1 < m1:
                    m1 = c1
            m0s[t - lo] = m0
            m1s[t - lo] = m1
            if m0 < INF and m1 < INF:
                fsum += m1 - m0
                fcnt += 1
        if fcnt > 0:
            avg = fsum / fcnt
            for t in range(lo, hi):
                m0 = m0s[t - lo]
                m1 = m1s[t - lo]
                if m0 < INF and m1 < INF:
                    lam[proc_layers[t]] += avg - (m1 - m0)
        for t in range(lo, hi):
            l = proc_layers[t]
            j = layer_bdd[l]
            lam_l = lam[l]
            last = l + 1 == bdd_layer_lo[j + 1]
            if not last:
                for w in range(layer_node_lo[l + 1], layer_node_lo[l + 2]):
                    F[w] = INF
            tb = bounds[j]
            for v in range(layer_node_lo[l], layer_node_lo[l + 1]):
                fv = F[v]
                if fv == INF:
                    continue
                t0 = zero_t[v]
                if t0 >= 0:
                    if fv < F[t0]:
                        F[t0] = fv
                elif t0 == -2:
                    if fv < tb:
                        tb = fv
                t1 = one_t[v]
                c = fv + lam_l
                if t1 >= 0:
                    if c < F[t1]:
                        F[t1] = c
                elif t1 == -2:
                    if c < tb:
                        tb = c
            bounds[j] = tb
    return 0


@njit(cache=True)
def k_mma_backward(
    bdd_layer_lo,
    layer_node_lo,
    layer_bdd,
    zero_t,
    one_t,
    proc_ptr,
    proc_layers,
    lam,
    F,
    B,
    bounds,
    m0s,
    m1s,
):
    """Mirror of :func:`k_mma_forward` in descending variable order.

    Requires ``F`` valid; rebuilds ``B`` incrementally.
    """
    num_pos = proc_ptr.shape[0] - 1
    for p in range(num_pos - 1, -1, -1):
        lo = proc_ptr[p]
        hi = proc_ptr[p + 1]
        if hi == lo:
            continue
        fsum = 0.0
        fcnt = 0
        for t in range(lo, hi):
            l = proc_layers[t]
            lam_l = lam[l]
            m0 = INF
            m1 = INF
            for v in range(layer_node_lo[l], layer_node_lo[l + 1]):
                fv = F[v]
                if fv == INF:
                    continue
                t0 = zero_t[v]
                if t0 == -2:
                    c0 = fv
                elif t0 == -1:
                    c0 = INF
                else:
                    c0 = fv + B[t0]
                if c0 < m0:
                    m0 = c0
                t1 = one_t[v]
                if t1 == -2:
                    c1 = fv + lam_l
                elif t1 == -1:
                    c1 = INF
                else:
                    c1 = fv + lam_l + B[t1]
                if c1 < m1:
                    m1 = c1
            m0s[t - lo] = m0
            m1s[t - lo] = m1
            if m0 < INF and m1 < INF:
                fsum += m1 - m0
                fcnt += 1
        if fcnt > 0:
            avg = fsum / fcnt
            for t in range(lo, hi):
                m0 = m0s[t - lo]
                m1 = m1s[t - lo]
                if m0 < INF and m1 < INF:
                    lam[proc_layers[t]] += avg - (m1 - m0)
        for t in range(lo, hi):
            l = proc_layers[t]
            lam_l = lam[l]
            for v in range(layer_node_lo[l], layer_node_lo[l + 1]):
                t0 = zero_t[v]
                if t0 == -2:
                    c0 = 0.0
                elif t0 == -1:
                    c0 = INF
                else:
                    c0 = B[t0]
                t1 = one_t[v]
                if t1 == -2:
                    c1 = lam_l
                elif t1 == -1:
                    c1 = INF
                else:
                    c1 = lam_l + B[t1]
                B[v] = c0 if c0 <= c1 else c1
    nb = bdd_layer_lo.shape[0] - 1
    for j in range(nb):
        bounds[j] = B[layer_node_lo[bdd_layer_lo[j]]]
    return 0


@njit(cache=True, parallel=True)
def k_min_marginals(
    bdd_layer_lo, layer_node_lo, layer_bdd, zero_t, one_t, lam, F, B, m0_out, m1_out
):
    """Per-layer clamped optima; needs F and B both fresh for ``lam``."""
    num_layers = layer_bdd.shape[0]
    for l in prange(num_layers):
        lam_l = lam[l]
        m0 = INF
        m1 = INF
        for v in range(layer_node_lo[l], layer_node_lo[l + 1]):
            fv = F[v]
            if fv == INF:
                continue
            t0 = zero_t[v]
            if t0 == -2:
                c0 = fv
            elif t0 == -1:
                c0 = INF
            else:
                c0 = fv + B[t0]
            if c0 < m0:
                m0 = c0
            t1 = one_t[v]
            if t1 == -2:
                c1 = fv + lam_l
            elif t1 == -1:
                c1 = INF
            else:
                c1 = fv + lam_l + B[t1]
            if c1 < m1:
                m1 = c1
        m0_out[l] = m0
        m1_out[l] = m1


@njit(cache=True, parallel=True)
def k_argmin(bdd_layer_lo, layer_node_lo, zero_t, one_t, lam, B, bits):
    """Per diagram, walk the cheapest path preferring zero-arcs on ties."""
    nb = bdd_layer_lo.shape[0] - 1
    for j in prange(nb):
        l_lo = bdd_layer_lo[j]
        l_hi = bdd_layer_lo[j + 1]
        v = layer_node_lo[l_lo]
        for l in range(l_lo, l_hi):
            t0 = zero_t[v]
            if t0 == -2:
                c0 = 0.0
            elif t0 == -1:
                c0 = INF
            else:
                c0 = B[t0]
            t1 = one_t[v]
            if t1 == -2:
                c1 = lam[l]
            elif t1 == -1:
                c1 = INF
            else:
                c1 = lam[l] + B[t1]
            if c0 <= c1:
                bits[l] = 0.0
                nxt = t0
            else:
                bits[l] = 1.0
                nxt = t1
            if nxt >= 0:
                v = nxt
