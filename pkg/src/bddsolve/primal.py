"""Depth-first rounding of a dual state into a feasible assignment.

Variables are ordered and given preferred values by their aggregated
min-marginal difference (the margin): the sum over covering diagrams of
"cost of taking 1 minus cost of taking 0" under the current cost split.  A
nonpositive margin prefers 1.  The search fixes one variable at a time in
every covering diagram, propagates literals the diagrams then force, and
backtracks chronologically on conflict; diagram mutations are journalled,
so unwinding a branch restores them bit for bit.  Budgets cap the number
of branch attempts; exhausting the tree without a budget stop is a proof
of infeasibility.

Margins always come from plain min-sum sweeps over the raw cost copies,
whether or not the dual ascent was smoothed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .algebra import COUNTING, MIN_MARGINAL, MessageStore, marginal_sweep

INF = math.inf

NEG_MARGIN = "neg_mm"
ABS_MARGIN = "abs_mm"
COUNT_ALIGNED = "reduction_aligned"
STRATEGIES = (NEG_MARGIN, ABS_MARGIN, COUNT_ALIGNED)

SOLVED = "solved"
BUDGET = "budget"
INFEASIBLE = "infeasible"


@dataclass
class PrimalScores:
    """Variable margins and the derived search order.

    margins[i] is the aggregated min-marginal difference of variable i
    (+inf/-inf when some diagram forces it, NaN on a forced conflict);
    preference[i] the value tried first; order lists covered variables,
    most urgent first.
    """

    margins: dict
    preference: dict
    order: list
    strategy: str


@dataclass
class PrimalResult:
    status: str  # "solved" | "budget" | "infeasible"
    assignment: dict | None
    attempts: int


def compute_scores(state, strategy=NEG_MARGIN) -> PrimalScores:
    """Score every covered variable from fresh min-sum sweeps.

    neg_mm ranks by -margin (strong 1-preferences first), abs_mm by
    |margin| (most decided first), reduction_aligned by margin signed with
    the diagrams' solution-count imbalance (most contentious first); count
    sweeps run only for that strategy.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    margins = {}
    counts = {} if strategy == COUNT_ALIGNED else None
    for j, bdd in enumerate(state.bdds):
        if bdd.root < 2:
            continue
        store = MessageStore(bdd, MIN_MARGINAL)
        pairs = marginal_sweep(bdd, store, state.duals[j], MIN_MARGINAL)
        if counts is not None:
            cstore = MessageStore(bdd, COUNTING)
            cpairs = marginal_sweep(bdd, cstore, [0] * bdd.num_levels, COUNTING)
        for lev, var in enumerate(bdd.support):
            m0, m1 = pairs[lev]
            if m1 == INF:
                d = math.nan if m0 == INF else INF
            elif m0 == INF:
                d = -INF
            else:
                d = m1 - m0
            margins[var] = margins.get(var, 0.0) + d
            if counts is not None:
                n0, n1 = cpairs[lev]
                counts[var] = counts.get(var, 0) + (n1 - n0)

    preference = {}
    score = {}
    for var, m in margins.items():
        preference[var] = 1 if m <= 0 else 0  # NaN compares false -> 0
        if math.isnan(m):
            score[var] = INF  # conflicting forcings: fail fast
        elif strategy == NEG_MARGIN:
            score[var] = -m
        elif strategy == ABS_MARGIN:
            score[var] = abs(m)
        else:
            r = counts[var]
            score[var] = 0.0 if r == 0 else (m if r > 0 else -m)
    order = sorted(margins, key=lambda v: (-score[v], v))
    return PrimalScores(margins, preference, order, strategy)


def checkpoint_all(bdds):
    return [b.checkpoint() for b in bdds]


def rollback_all(bdds, tokens):
    for b, t in zip(bdds, tokens):
        b.rollback(t)


def restriction_propagation(bdds, slots, assignment, var, value, newly):
    """Fix var=value everywhere it appears, then chase forced literals.

    Returns False as soon as some diagram empties or a forced literal
    contradicts an existing assignment; the caller rolls back.  On success
    `assignment` has gained the variable and everything it implied, all
    appended to `newly` for the caller's undo list.  Every touched diagram
    must have an open checkpoint.
    """
    queue = [(var, value)]
    qi = 0
    while qi < len(queue):
        v, b = queue[qi]
        qi += 1
        prev = assignment.get(v)
        if prev is not None:
            if prev != b:
                return False
            continue
        assignment[v] = b
        newly.append(v)
        for j, _lev in slots.get(v, ()):
            bdd = bdds[j]
            if not bdd.fix(v, b):
                return False
            for fv, fb in bdd.forced_literals():
                prev = assignment.get(fv)
                if prev is None:
                    queue.append((fv, fb))
                elif prev != fb:
                    return False
    return True


def primal_search(state, preassigned=None, strategy=NEG_MARGIN, budget=None) -> PrimalResult:
    """Search for a feasible assignment guided by the dual's margins.

    `preassigned` values (e.g. variables no diagram covers) are adopted
    as-is.  `budget` caps branch attempts (None = unlimited; an exhausted
    budget reports "budget", never "infeasible").  The diagrams are
    restored to their entry state on every exit path.
    """
    bdds = state.bdds
    slots = state.slots
    scores = compute_scores(state, strategy)
    assignment = dict(preassigned or {})
    order = scores.order
    attempts = 0

    def try_branch(var, value):
        nonlocal attempts
        attempts += 1
        tokens = checkpoint_all(bdds)
        newly = []
        if restriction_propagation(bdds, slots, assignment, var, value, newly):
            return tokens, newly
        for v in newly:
            del assignment[v]
        rollback_all(bdds, tokens)
        return None

    frames = []  # [var, value, flipped, tokens, newly, order_index]
    status = None
    idx = 0
    while status is None:
        while idx < len(order) and order[idx] in assignment:
            idx += 1
        if idx == len(order):
            status = SOLVED
            break
        var = order[idx]
        pref = scores.preference[var]
        advanced = False
        for value, flipped in ((pref, False), (1 - pref, True)):
            if budget is not None and attempts >= budget:
                status = BUDGET
                break
            got = try_branch(var, value)
            if got is not None:
                frames.append([var, value, flipped, got[0], got[1], idx])
                advanced = True
                break
        if status is not None or advanced:
            continue
        # both values failed here: climb until some frame still has a flip
        while frames:
            fvar, fvalue, fflipped, ftokens, fnewly, fidx = frames.pop()
            for v in fnewly:
                del assignment[v]
            rollback_all(bdds, ftokens)
            if fflipped:
                continue
            if budget is not None and attempts >= budget:
                status = BUDGET
                break
            got = try_branch(fvar, 1 - fvalue)
            if got is not None:
                frames.append([fvar, 1 - fvalue, True, got[0], got[1], fidx])
                idx = fidx
                break
        else:
            status = INFEASIBLE
        if status == BUDGET:
            break

    result = dict(assignment) if status == SOLVED else None
    if frames:  # one rollback to the oldest checkpoint undoes everything
        rollback_all(bdds, frames[0][3])
    return PrimalResult(status, result, attempts)
