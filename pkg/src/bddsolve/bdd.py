"""Per-constraint binary decision diagrams with reversible variable fixation.

Each diagram encodes the feasible set of one integer linear row over its
support, ordered by the global variable order.  Every root-to-true path
visits every support level exactly once, so nodes whose two children agree
are kept rather than skipped.  Mutations (arc redirects, node removals) go
through a journal so checkpointed states can be restored exactly.
"""

from __future__ import annotations

from .model import LinearConstraint, Relation

FALSE = 0
TRUE = 1

DEFAULT_STATE_BUDGET = 1 << 22
DEFAULT_ENUMERATION_CAP = 25

_ARC = 0
_DEACT = 1


class BddError(Exception):
    pass


class BddBuildError(BddError):
    """Construction exceeded the per-level state budget."""


class Bdd:
    """Leveled decision diagram for one constraint.

    Node ids are integers; 0 and 1 are the false/true terminals, internal
    nodes start at 2 and are numbered level by level in creation order, so
    two builds of the same row are identical.
    """

    __slots__ = (
        "constraint_name",
        "support",
        "root",
        "lo",
        "hi",
        "node_level",
        "level_nodes",
        "alive",
        "pred",
        "indeg",
        "journal",
        "_level_of",
        "_checkpoints",
        "_next_token",
    )

    def __init__(self, constraint_name, support, root, lo, hi, node_level, level_nodes, pred, indeg):
        self.constraint_name = constraint_name
        self.support = tuple(support)
        self.root = root
        self.lo = lo
        self.hi = hi
        self.node_level = node_level
        self.level_nodes = level_nodes
        self.alive = [True] * len(lo)
        self.pred = pred
        self.indeg = indeg
        self.journal = []
        self._level_of = {v: k for k, v in enumerate(self.support)}
        self._checkpoints = []
        self._next_token = 0

    # -- queries ------------------------------------------------------------

    @property
    def num_levels(self):
        return len(self.support)

    def level_of(self, var):
        return self._level_of[var]

    def is_empty(self):
        if self.root == FALSE:
            return True
        if self.root == TRUE:
            return False
        return self.indeg[TRUE] == 0

    def node_count(self):
        """Live internal nodes."""
        return sum(self.alive[2:]) if len(self.alive) > 2 else 0

    def live_nodes(self, level):
        alive = self.alive
        return [v for v in self.level_nodes[level] if alive[v]]

    def solutions(self, cap=DEFAULT_ENUMERATION_CAP):
        """All satisfying assignments over the support, as 0/1 tuples."""
        if len(self.support) > cap:
            raise BddError(f"support of {len(self.support)} exceeds enumeration cap {cap}")
        if self.is_empty():
            return set()
        if self.root == TRUE:
            return {()}
        out = set()
        lo, hi = self.lo, self.hi
        stack = [(self.root, ())]
        while stack:
            v, prefix = stack.pop()
            for bit, child in ((0, lo[v]), (1, hi[v])):
                if child == FALSE:
                    continue
                path = prefix + (bit,)
                if child == TRUE:
                    out.add(path)
                else:
                    stack.append((child, path))
        return out

    def forced_literals(self):
        """(variable, value) pairs forced on every remaining true-path.

        A level forces value 1 when every live node's 0-arc is dead, and 0
        symmetrically.
        """
        if self.root == TRUE or self.is_empty():
            return []
        lo, hi, alive = self.lo, self.hi, self.alive
        forced = []
        for lev, var in enumerate(self.support):
            all_lo_dead = True
            all_hi_dead = True
            for v in self.level_nodes[lev]:
                if not alive[v]:
                    continue
                if lo[v] != FALSE:
                    all_lo_dead = False
                if hi[v] != FALSE:
                    all_hi_dead = False
                if not (all_lo_dead or all_hi_dead):
                    break
            if all_lo_dead:
                forced.append((var, 1))
            elif all_hi_dead:
                forced.append((var, 0))
        return forced

    # -- mutation -----------------------------------------------------------

    def checkpoint(self):
        """Mark the journal; rolling back restores today's exact state."""
        self._next_token += 1
        token = self._next_token
        self._checkpoints.append((token, len(self.journal)))
        return token

    def rollback(self, token):
        """Undo every mutation after `token`; later checkpoints die with it."""
        for idx in range(len(self._checkpoints) - 1, -1, -1):
            if self._checkpoints[idx][0] == token:
                break
        else:
            raise BddError(f"unknown checkpoint {token!r}")
        mark = self._checkpoints[idx][1]
        del self._checkpoints[idx:]
        journal = self.journal
        lo, hi, alive, indeg = self.lo, self.hi, self.alive, self.indeg
        while len(journal) > mark:
            entry = journal.pop()
            if entry[0] == _ARC:
                _, u, bit, old = entry
                arr = hi if bit else lo
                indeg[arr[u]] -= 1
                arr[u] = old
                indeg[old] += 1
            else:
                v = entry[1]
                alive[v] = True
                indeg[lo[v]] += 1
                indeg[hi[v]] += 1

    def fix(self, var, value):
        """Restrict to assignments with var == value; False means emptied.

        Requires an open checkpoint so the restriction can be undone.  Arcs
        for the discarded value are redirected to the false terminal; nodes
        left unreachable or cut off from the true terminal are removed.
        """
        if not self._checkpoints:
            raise BddError("fix requires an open checkpoint")
        if self.root == TRUE:
            raise BddError(f"variable {var} not in support")
        if self.root == FALSE:
            return False
        lev = self._level_of.get(var)
        if lev is None:
            raise BddError(f"variable {var} not in support")
        lo, hi, alive, indeg, journal = self.lo, self.hi, self.alive, self.indeg, self.journal
        arr = lo if value else hi
        bit = 0 if value else 1
        for v in self.level_nodes[lev]:
            if not alive[v]:
                continue
            target = arr[v]
            if target != FALSE:
                journal.append((_ARC, v, bit, target))
                arr[v] = FALSE
                indeg[FALSE] += 1
                indeg[target] -= 1
                if target >= 2:
                    if indeg[target] == 0:
                        self._remove_unreachable(target)
                elif target == TRUE and indeg[TRUE] == 0:
                    return False
            if lo[v] == FALSE and hi[v] == FALSE:
                self._remove_deadend(v)
        return self.indeg[TRUE] > 0

    def _remove_unreachable(self, start):
        """Drop nodes with no incoming arcs, cascading toward the terminals."""
        lo, hi, alive, indeg, journal = self.lo, self.hi, self.alive, self.indeg, self.journal
        stack = [start]
        while stack:
            v = stack.pop()
            if not alive[v]:
                continue
            journal.append((_DEACT, v))
            alive[v] = False
            for child in (lo[v], hi[v]):
                indeg[child] -= 1
                if child >= 2 and indeg[child] == 0:
                    stack.append(child)

    def _remove_deadend(self, start):
        """Drop nodes whose both arcs are dead, redirecting parents upward."""
        lo, hi, alive, indeg, journal = self.lo, self.hi, self.alive, self.indeg, self.journal
        stack = [start]
        while stack:
            v = stack.pop()
            if not alive[v]:
                continue
            for u, bit in self.pred[v]:
                if not alive[u]:
                    continue
                arr = hi if bit else lo
                if arr[u] != v:
                    continue
                journal.append((_ARC, u, bit, v))
                arr[u] = FALSE
                indeg[FALSE] += 1
                indeg[v] -= 1
                if lo[u] == FALSE and hi[u] == FALSE:
                    stack.append(u)
            journal.append((_DEACT, v))
            alive[v] = False
            indeg[lo[v]] -= 1
            indeg[hi[v]] -= 1

    # -- diagnostics ----------------------------------------------------------

    def to_dot(self, var_names=None):
        """GraphViz text: dotted 0-arcs, solid 1-arcs, boxed terminals."""
        label = (lambda i: var_names[i]) if var_names is not None else (lambda i: f"x{i}")
        lines = [f"digraph \"{self.constraint_name}\" {{", "  rankdir=TB;"]
        lines.append('  t1 [label="T", shape=box];')
        lines.append('  t0 [label="F", shape=box];')
        if self.root >= 2:
            names = {FALSE: "t0", TRUE: "t1"}
            for lev in range(self.num_levels):
                for v in self.live_nodes(lev):
                    names[v] = f"n{v}"
                    lines.append(f'  n{v} [label="{label(self.support[lev])}"];')
            for lev in range(self.num_levels):
                for v in self.live_nodes(lev):
                    lines.append(f"  n{v} -> {names[self.lo[v]]} [style=dotted];")
                    lines.append(f"  n{v} -> {names[self.hi[v]]};")
        lines.append("}")
        return "\n".join(lines) + "\n"

    def check_invariants(self, reduced=False):
        """Raise unless the live graph is a well-formed leveled diagram.

        `reduced` additionally requires no two live same-level nodes to share
        both children (guaranteed for fresh builds, not after fixation).
        """
        if self.root in (TRUE, FALSE):
            return
        k = self.num_levels
        live = set()
        for lev in range(k):
            for v in self.level_nodes[lev]:
                if self.alive[v]:
                    if self.node_level[v] != lev:
                        raise BddError("node filed under the wrong level")
                    live.add(v)
        if self.is_empty():
            return
        if not self.alive[self.root] or self.node_level[self.root] != 0:
            raise BddError("root is not a live level-0 node")
        # arcs stay inside the next level or hit a terminal; true-arcs only from the last level
        reach = {self.root}
        for lev in range(k):
            for v in self.level_nodes[lev]:
                if not self.alive[v]:
                    continue
                for child in (self.lo[v], self.hi[v]):
                    if child == FALSE:
                        continue
                    if child == TRUE:
                        if lev != k - 1:
                            raise BddError("true terminal reached before the last level")
                    else:
                        if not self.alive[child]:
                            raise BddError("live node points at a removed node")
                        if self.node_level[child] != lev + 1:
                            raise BddError("arc skips a level")
                        if v in reach:
                            reach.add(child)
        if reach != live:
            raise BddError("live nodes unreachable from the root")
        # every live node can still reach the true terminal
        can = {TRUE}
        for lev in range(k - 1, -1, -1):
            for v in self.level_nodes[lev]:
                if self.alive[v] and (self.lo[v] in can or self.hi[v] in can):
                    can.add(v)
        if live - can:
            raise BddError("live node cut off from the true terminal")
        # incoming-arc counters agree with the arcs
        counts = [0] * len(self.lo)
        for v in live:
            counts[self.lo[v]] += 1
            counts[self.hi[v]] += 1
        for v in live | {TRUE}:
            if counts[v] != self.indeg[v]:
                raise BddError("incoming-arc counter out of sync")
        if reduced:
            for lev in range(k):
                pairs = set()
                for v in self.live_nodes(lev):
                    key = (self.lo[v], self.hi[v])
                    if key in pairs:
                        raise BddError("two same-level nodes share both children")
                    pairs.add(key)


def _sentinel(constraint_name, support, satisfiable):
    k = len(support)
    return Bdd(
        constraint_name,
        support,
        TRUE if satisfiable else FALSE,
        [FALSE, FALSE],
        [FALSE, FALSE],
        [-1, -1],
        [[] for _ in range(k)],
        [[], []],
        [0, 0],
    )


def build_bdd(constraint: LinearConstraint, positions=None, state_budget=DEFAULT_STATE_BUDGET) -> Bdd:
    """Compile one row into a reduced leveled diagram.

    Support is sorted by `positions` (global order ranks; identity when
    omitted).  A dynamic program walks partial sums, collapsing residuals
    that admit every completion or none; a bottom-up pass then merges nodes
    with equal children and drops states that cannot reach the true terminal.
    Unsatisfiable rows give an empty sentinel.
    """
    if positions is None:
        key = lambda i: i
    else:
        key = positions.__getitem__
    support = sorted(constraint.support(), key=key)
    coeff_of = dict(constraint.terms)
    coeffs = [coeff_of[i] for i in support]
    rhs = constraint.rhs
    relation = constraint.relation
    if relation is Relation.GE:
        coeffs = [-a for a in coeffs]
        rhs = -rhs
        relation = Relation.LE
    k = len(support)
    if k == 0:
        ok = (0 == rhs) if relation is Relation.EQ else (0 <= rhs)
        return _sentinel(constraint.name, support, ok)

    suffix_min = [0] * (k + 1)
    suffix_max = [0] * (k + 1)
    for t in range(k - 1, -1, -1):
        a = coeffs[t]
        suffix_min[t] = suffix_min[t + 1] + (a if a < 0 else 0)
        suffix_max[t] = suffix_max[t + 1] + (a if a > 0 else 0)

    exact = relation is Relation.EQ

    def normalize(r, lev):
        if r < suffix_min[lev]:
            return None
        if exact:
            return r if r <= suffix_max[lev] else None
        return r if r < suffix_max[lev] else suffix_max[lev]

    root_state = normalize(rhs, 0)
    if root_state is None:
        return _sentinel(constraint.name, support, False)

    # forward dynamic program over residuals; children encoded as terminal
    # ids or next-level local index + 2
    layer = {root_state: 0}
    children = []
    for lev in range(k):
        a = coeffs[lev]
        nxt = {}
        row = []
        last = lev + 1 == k
        for r in layer:
            pair = []
            for bit in (0, 1):
                r2 = r - a if bit else r
                if last:
                    sat = (r2 == 0) if exact else (r2 >= 0)
                    pair.append(TRUE if sat else FALSE)
                    continue
                rn = normalize(r2, lev + 1)
                if rn is None:
                    pair.append(FALSE)
                    continue
                local = nxt.get(rn)
                if local is None:
                    local = len(nxt)
                    if local >= state_budget:
                        raise BddBuildError(
                            f"constraint {constraint.name!r} exceeds the per-level state budget"
                        )
                    nxt[rn] = local
                pair.append(local + 2)
            row.append((pair[0], pair[1]))
        children.append(row)
        layer = nxt

    # bottom-up reduction: merge equal-children states, drop dead ends
    reduced = [None] * k
    rep_below = None
    for lev in range(k - 1, -1, -1):
        seen = {}
        kept = []
        reps = []
        for lo_c, hi_c in children[lev]:
            l = lo_c if lo_c < 2 else rep_below[lo_c - 2]
            h = hi_c if hi_c < 2 else rep_below[hi_c - 2]
            if l == FALSE and h == FALSE:
                reps.append(FALSE)
                continue
            token = seen.get((l, h))
            if token is None:
                token = len(kept) + 2
                seen[(l, h)] = token
                kept.append((l, h))
            reps.append(token)
        reduced[lev] = kept
        rep_below = reps
    root_token = rep_below[0]
    if root_token == FALSE:
        return _sentinel(constraint.name, support, False)

    # top-down assembly in first-reference order gives deterministic ids
    level_tokens = []
    current = [root_token]
    for lev in range(k):
        level_tokens.append(current)
        nxt = []
        seen = set()
        for t in current:
            for child in reduced[lev][t - 2]:
                if child >= 2 and child not in seen:
                    seen.add(child)
                    nxt.append(child)
        current = nxt

    ids = []
    next_id = 2
    for lev in range(k):
        mapping = {}
        for t in level_tokens[lev]:
            mapping[t] = next_id
            next_id += 1
        ids.append(mapping)
    total = next_id
    lo = [FALSE] * total
    hi = [FALSE] * total
    node_level = [-1] * total
    level_nodes = []
    for lev in range(k):
        mapping = ids[lev]
        level_nodes.append(list(mapping.values()))
        below = ids[lev + 1] if lev + 1 < k else None
        for t, v in mapping.items():
            l, h = reduced[lev][t - 2]
            lo[v] = l if l < 2 else below[l]
            hi[v] = h if h < 2 else below[h]
            node_level[v] = lev

    pred = [[] for _ in range(total)]
    indeg = [0] * total
    for lev in range(k):
        for v in level_nodes[lev]:
            for bit, child in ((0, lo[v]), (1, hi[v])):
                indeg[child] += 1
                if child >= 2:
                    pred[child].append((v, bit))

    return Bdd(constraint.name, support, 2, lo, hi, node_level, level_nodes, pred, indeg)
