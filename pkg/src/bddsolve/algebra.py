"""Message passing over decision diagrams, generic in the weight algebra.

A sweep assigns every node two values: the best way to reach it from the
root (forward) and the best completion down to the true terminal
(backward).  "Best" is defined by an algebra: values along a path are
accumulated with `combine`, alternatives are folded with `merge`.  The
min-sum instance yields optimal values and per-variable min-marginals, the
counting instance path counts, and the log-partition instance smoothed
(soft-min) values; only the pair of operators changes.

Arc weights: a node's 1-arc carries the weight `arc_weight(theta)` for that
level's parameter theta, 0-arcs are free.  Callers are responsible for the
parameter scale (e.g. passing -lambda/alpha and rescaling results when
smoothing).

These reference routines favour clarity; the dual solver inlines
specialised copies of the two instances it iterates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from .bdd import FALSE, TRUE, Bdd

INF = math.inf


def log_sum_exp(a, b):
    """log(e^a + e^b) without overflow; -inf behaves as log(0)."""
    if a == -INF:
        return b
    if b == -INF:
        return a
    hi, lo = (a, b) if a >= b else (b, a)
    return hi + math.log1p(math.exp(lo - hi))


@dataclass(frozen=True)
class MarginalAlgebra:
    """Operator pair (plus identities) defining one message-passing semantics.

    Attributes
    ----------
    combine : accumulate weights along a single path.
    merge : fold the values of alternative paths.
    path_identity : value of the empty path (neutral for combine).
    merge_identity : value of "no alternatives" (neutral for merge).
    arc_weight : weight a 1-arc contributes, given the level parameter.
    """

    name: str
    combine: Callable
    merge: Callable
    path_identity: object
    merge_identity: object
    arc_weight: Callable

    def __repr__(self):
        return f"MarginalAlgebra({self.name})"


MIN_MARGINAL = MarginalAlgebra(
    name="min_marginal",
    combine=lambda a, b: a + b,
    merge=min,
    path_identity=0.0,
    merge_identity=INF,
    arc_weight=lambda theta: theta,
)

LOG_PARTITION = MarginalAlgebra(
    name="log_partition",
    combine=lambda a, b: a + b,
    merge=log_sum_exp,
    path_identity=0.0,
    merge_identity=-INF,
    arc_weight=lambda theta: theta,
)

COUNTING = MarginalAlgebra(
    name="counting",
    combine=lambda a, b: a * b,
    merge=lambda a, b: a + b,
    path_identity=1,
    merge_identity=0,
    arc_weight=lambda theta: 1,
)


class MessageStore:
    """Forward/backward value arrays for one diagram, indexed by node id."""

    __slots__ = ("fw", "bw")

    def __init__(self, bdd: Bdd, algebra: MarginalAlgebra):
        n = len(bdd.lo)
        self.fw = [algebra.merge_identity] * n
        self.bw = [algebra.merge_identity] * n
        self.reset(bdd, algebra)

    def reset(self, bdd: Bdd, algebra: MarginalAlgebra):
        """Seed terminals and the root; interior values await the sweeps."""
        for arr in (self.fw, self.bw):
            for i in range(len(arr)):
                arr[i] = algebra.merge_identity
        self.bw[TRUE] = algebra.path_identity
        if bdd.root >= 2:
            self.fw[bdd.root] = algebra.path_identity


def backward_step(bdd: Bdd, store: MessageStore, level: int, theta, algebra: MarginalAlgebra):
    """Recompute backward values of `level` from the level below."""
    bw, lo, hi = store.bw, bdd.lo, bdd.hi
    w = algebra.arc_weight(theta)
    combine, merge = algebra.combine, algebra.merge
    for v in bdd.level_nodes[level]:
        if bdd.alive[v]:
            bw[v] = merge(bw[lo[v]], combine(w, bw[hi[v]]))


def forward_step(bdd: Bdd, store: MessageStore, level: int, theta, algebra: MarginalAlgebra):
    """Push forward values from `level` one level down (overwriting there)."""
    if level + 1 >= bdd.num_levels:
        raise ValueError("forward_step has no level below the last")
    fw, lo, hi = store.fw, bdd.lo, bdd.hi
    w = algebra.arc_weight(theta)
    combine, merge = algebra.combine, algebra.merge
    ident = algebra.merge_identity
    for v in bdd.level_nodes[level + 1]:
        fw[v] = ident
    for v in bdd.level_nodes[level]:
        if not bdd.alive[v]:
            continue
        base = fw[v]
        c = lo[v]
        if c >= 2:
            fw[c] = merge(fw[c], base)
        c = hi[v]
        if c >= 2:
            fw[c] = merge(fw[c], combine(base, w))


def aggregate_marginals(bdd: Bdd, store: MessageStore, level: int, theta, algebra: MarginalAlgebra):
    """Fold fw/arc/bw over a level into the pair of per-value marginals.

    Returns (value over paths with the level's variable at 0, same at 1) in
    the algebra's domain; assumes fw is current at `level` and bw below it.
    """
    fw, bw, lo, hi = store.fw, store.bw, bdd.lo, bdd.hi
    w = algebra.arc_weight(theta)
    combine, merge = algebra.combine, algebra.merge
    m0 = m1 = algebra.merge_identity
    for v in bdd.level_nodes[level]:
        if not bdd.alive[v]:
            continue
        base = fw[v]
        m0 = merge(m0, combine(base, bw[lo[v]]))
        m1 = merge(m1, combine(combine(base, w), bw[hi[v]]))
    return m0, m1


def backward_sweep(bdd: Bdd, store: MessageStore, thetas, algebra: MarginalAlgebra):
    """Full bottom-up pass; afterwards bw is current at every level."""
    store.bw[TRUE] = algebra.path_identity
    store.bw[FALSE] = algebra.merge_identity
    for level in range(bdd.num_levels - 1, -1, -1):
        backward_step(bdd, store, level, thetas[level], algebra)


def marginal_sweep(bdd: Bdd, store: MessageStore, thetas, algebra: MarginalAlgebra):
    """Fresh marginals for every level: one backward plus one forward pass."""
    if bdd.root < 2:
        return []
    backward_sweep(bdd, store, thetas, algebra)
    if bdd.root >= 2:
        store.fw[bdd.root] = algebra.path_identity
    out = []
    for level in range(bdd.num_levels):
        out.append(aggregate_marginals(bdd, store, level, thetas[level], algebra))
        if level + 1 < bdd.num_levels:
            forward_step(bdd, store, level, thetas[level], algebra)
    return out


def subproblem_energy(bdd: Bdd, store: MessageStore, algebra: MarginalAlgebra):
    """Merged value over all accepted paths, read at the root.

    Requires a completed backward sweep.  Sentinel diagrams need no sweep:
    an always-true row contributes the empty path, an empty one nothing.
    """
    if bdd.root == TRUE:
        return algebra.path_identity
    if bdd.root == FALSE:
        return algebra.merge_identity
    return store.bw[bdd.root]


def forward_energy(bdd: Bdd, store: MessageStore, theta, algebra: MarginalAlgebra):
    """Same value as `subproblem_energy`, read from the last level's fw side."""
    if bdd.root == TRUE:
        return algebra.path_identity
    if bdd.root == FALSE:
        return algebra.merge_identity
    fw, lo, hi = store.fw, bdd.lo, bdd.hi
    w = algebra.arc_weight(theta)
    combine, merge = algebra.combine, algebra.merge
    total = algebra.merge_identity
    for v in bdd.level_nodes[bdd.num_levels - 1]:
        if not bdd.alive[v]:
            continue
        if lo[v] == TRUE:
            total = merge(total, fw[v])
        if hi[v] == TRUE:
            total = merge(total, combine(fw[v], w))
    return total
