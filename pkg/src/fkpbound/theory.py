"""Decision procedure for conjunctions of clock, selection and value literals.

The three sorts share no variables, so a conjunction splits into three
independent fragments:

* clocks: a totally ordered domain.  ``a < b`` is a strict edge, ``not a < b``
  the non-strict edge ``b <= a``, ``a = b`` two non-strict edges.  The
  fragment is consistent iff no strongly connected component holds a strict
  edge or both ends of a disequality.
* selections: equality closure by union-find; a disequality inside a class
  is a conflict.
* values: integers.  Positive literals and ``v <= k`` are difference
  constraints, checked by Bellman-Ford; ``v != 0`` and ``u + 1 != v`` are
  disequalities, checked against differences the constraints force.

Every model returned is checked literal by literal.  When the greedy value
construction cannot place a variable, exhaustive search inside the bounds
takes over.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .logic import (
    FiniteModel,
    Literal,
    Op,
    Sort,
    Var,
    eval_literal,
    literal_vars,
)


class TheoryError(Exception):
    pass


class BoundExhausted(TheoryError):
    """The literals are satisfiable but no model fits the requested bounds."""


class BudgetExceeded(TheoryError):
    """Exhaustive search was refused or stopped at the configured budget."""


class ContractViolation(TheoryError):
    pass


@dataclass(frozen=True)
class DomainBounds:
    """Sizes of the finite structure: clocks 0..clock_size-1, selections
    0..sel_size-1, values val_min..val_max."""

    clock_size: int
    sel_size: int
    val_min: int = 0
    val_max: int = 1

    def __post_init__(self):
        if self.clock_size < 1 or self.sel_size < 1 or self.val_max < self.val_min:
            raise ValueError("domain sizes must be at least 1")

    @classmethod
    def for_structure(cls, p) -> "DomainBounds":
        # values go up to N+1: the witnesses for the assertion conflict need it
        return cls(len(p.events) + len(p.reads), p.n + 1, 0, p.n + 1)

    def domain(self, sort: Sort) -> range:
        if sort is Sort.CLOCK:
            return range(self.clock_size)
        if sort is Sort.SEL:
            return range(self.sel_size)
        return range(self.val_min, self.val_max + 1)


DEFAULT_BUDGET = 2_000_000


def split_by_sort(lits: Iterable[Literal]) -> dict[Sort, list[Literal]]:
    out = {Sort.CLOCK: [], Sort.SEL: [], Sort.VAL: []}
    for lit in lits:
        out[lit.atom.sort].append(lit)
    for s in out:
        out[s].sort(key=lambda x: x.key)
    return out


# --------------------------------------------------------------------------
# clocks


def _scc(nodes: Sequence[Var], succ: dict[Var, list[Var]]) -> dict[Var, int]:
    """Tarjan; component ids come out in reverse topological order."""
    index: dict[Var, int] = {}
    low: dict[Var, int] = {}
    comp: dict[Var, int] = {}
    stack: list[Var] = []
    on = set()
    counter = [0, 0]

    def visit(v):
        index[v] = low[v] = counter[0]
        counter[0] += 1
        stack.append(v)
        on.add(v)
        for w in succ[v]:
            if w not in index:
                visit(w)
                low[v] = min(low[v], low[w])
            elif w in on:
                low[v] = min(low[v], index[w])
        if low[v] == index[v]:
            while True:
                w = stack.pop()
                on.discard(w)
                comp[w] = counter[1]
                if w == v:
                    break
            counter[1] += 1

    for v in nodes:
        if v not in index:
            visit(v)
    return comp


def _path(src: Var, dst: Var, edges: dict[Var, list[tuple[Var, Literal]]], allowed) -> list[Literal]:
    """Literals along a BFS path src -> dst using only nodes in ``allowed``."""
    if src == dst:
        return []
    prev: dict[Var, tuple[Var, Literal]] = {}
    frontier = [src]
    seen = {src}
    while frontier:
        nxt = []
        for u in frontier:
            for v, lit in edges.get(u, ()):
                if v in seen or v not in allowed:
                    continue
                seen.add(v)
                prev[v] = (u, lit)
                if v == dst:
                    out = []
                    while v != src:
                        u2, l2 = prev[v]
                        out.append(l2)
                        v = u2
                    return out[::-1]
                nxt.append(v)
        frontier = nxt
    raise TheoryError("no path inside component")  # pragma: no cover


def _check_clocks(lits: list[Literal]):
    """Returns ('sat', assignment) or ('unsat', core)."""
    nodes = sorted(literal_vars(lits), key=lambda v: v.key)
    succ: dict[Var, list[Var]] = {v: [] for v in nodes}
    labelled: dict[Var, list[tuple[Var, Literal]]] = {v: [] for v in nodes}
    strict: list[tuple[Var, Var, Literal]] = []
    diseq: list[tuple[Var, Var, Literal]] = []

    def edge(u, v, lit, is_strict):
        succ[u].append(v)
        labelled[u].append((v, lit))
        if is_strict:
            strict.append((u, v, lit))

    for lit in lits:
        a, b = lit.atom.args
        if lit.atom.op is Op.LT:
            if lit.positive:
                edge(a, b, lit, True)
            else:
                edge(b, a, lit, False)
        elif lit.positive:
            edge(a, b, lit, False)
            edge(b, a, lit, False)
        else:
            diseq.append((a, b, lit))
    comp = _scc(nodes, succ)
    for u, v, lit in strict:
        if comp[u] == comp[v]:
            members = {x for x in nodes if comp[x] == comp[u]}
            return "unsat", _dedupe([lit] + _path(v, u, labelled, members))
    for a, b, lit in diseq:
        if comp[a] == comp[b]:
            members = {x for x in nodes if comp[x] == comp[a]}
            return "unsat", _dedupe([lit] + _path(a, b, labelled, members) + _path(b, a, labelled, members))
    k = max(comp.values(), default=-1) + 1
    return "sat", {v: k - 1 - comp[v] for v in nodes}


def _dedupe(lits: list[Literal]) -> list[Literal]:
    return list(dict.fromkeys(lits))


# --------------------------------------------------------------------------
# selections


def _check_sels(lits: list[Literal]):
    nodes = sorted(literal_vars(lits), key=lambda v: v.key)
    parent = {v: v for v in nodes}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    eq_edges: dict[Var, list[tuple[Var, Literal]]] = {v: [] for v in nodes}
    diseq = []
    for lit in lits:
        a, b = lit.atom.args
        if lit.positive:
            eq_edges[a].append((b, lit))
            eq_edges[b].append((a, lit))
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[max(ra, rb, key=lambda v: v.key)] = min(ra, rb, key=lambda v: v.key)
        else:
            diseq.append((a, b, lit))
    for a, b, lit in diseq:
        if find(a) == find(b):
            return "unsat", _dedupe([lit] + _path(a, b, eq_edges, set(nodes)))
    roots = sorted({find(v) for v in nodes}, key=lambda v: v.key)
    conflicts: dict[Var, set[Var]] = {r: set() for r in roots}
    for a, b, _ in diseq:
        conflicts[find(a)].add(find(b))
        conflicts[find(b)].add(find(a))
    colour: dict[Var, int] = {}
    for r in roots:
        used = {colour[o] for o in conflicts[r] if o in colour}
        c = 0
        while c in used:
            c += 1
        colour[r] = c
    return "sat", {v: colour[find(v)] for v in nodes}


# --------------------------------------------------------------------------
# values

_Z = Var("rval", -1)  # the constant 0, as a node of the constraint graph


def _val_constraints(lits: list[Literal], bounds: DomainBounds | None):
    """Edges (u, v, w, lit) meaning val[v] - val[u] <= w; disequalities
    (x, y, c, lit) meaning val[x] - val[y] != c."""
    edges = []
    diseq = []
    for lit in lits:
        at = lit.atom
        if at.op is Op.VZERO:
            (v,) = at.args
            if lit.positive:
                edges += [(_Z, v, 0, lit), (v, _Z, 0, lit)]
            else:
                diseq.append((v, _Z, 0, lit))
        elif at.op is Op.VSUCC:
            u, v = at.args
            if lit.positive:
                edges += [(u, v, 1, lit), (v, u, -1, lit)]
            else:
                diseq.append((v, u, 1, lit))
        else:
            (v,) = at.args
            k = at.const
            if lit.positive:
                edges.append((v, _Z, -(k + 1), lit))
            else:
                edges.append((_Z, v, k, lit))
    nodes = [_Z] + sorted(literal_vars(lits), key=lambda v: v.key)
    if bounds is not None:
        for v in nodes[1:]:
            edges.append((_Z, v, bounds.val_max, None))
            edges.append((v, _Z, -bounds.val_min, None))
    return nodes, edges, diseq


def _negative_cycle(nodes, edges) -> list | None:
    dist = {v: 0 for v in nodes}
    pred: dict[Var, tuple] = {}
    last = None
    for _ in range(len(nodes)):
        last = None
        for e in edges:
            u, v, w, _ = e
            if dist[u] + w < dist[v]:
                dist[v] = dist[u] + w
                pred[v] = e
                last = v
        if last is None:
            return None
    x = last
    for _ in range(len(nodes)):
        x = pred[x][0]
    cycle = []
    y = x
    while True:
        e = pred[y]
        cycle.append(e)
        y = e[0]
        if y == x:
            break
    return cycle[::-1]


def _floyd(nodes, edges):
    idx = {v: i for i, v in enumerate(nodes)}
    n = len(nodes)
    D = [[math.inf] * n for _ in range(n)]
    nxt: list[list[tuple | None]] = [[None] * n for _ in range(n)]
    for i in range(n):
        D[i][i] = 0
    for e in edges:
        u, v, w, _ = e
        i, j = idx[u], idx[v]
        if w < D[i][j]:
            D[i][j] = w
            nxt[i][j] = e
    via = [[-1] * n for _ in range(n)]
    for k in range(n):
        Dk = D[k]
        for i in range(n):
            dik = D[i][k]
            if dik == math.inf:
                continue
            Di = D[i]
            for j in range(n):
                s = dik + Dk[j]
                if s < Di[j]:
                    Di[j] = s
                    via[i][j] = k
    return idx, D, nxt, via


def _floyd_path(i, j, nxt, via) -> list:
    k = via[i][j]
    if k == -1:
        e = nxt[i][j]
        return [] if e is None else [e]
    return _floyd_path(i, k, nxt, via) + _floyd_path(k, j, nxt, via)


def _check_vals(lits: list[Literal], bounds: DomainBounds | None):
    """Returns ('sat', assignment), ('unsat', core) or ('unknown', None)."""
    nodes, edges, diseq = _val_constraints(lits, bounds)
    cyc = _negative_cycle(nodes, edges)
    if cyc is not None:
        return "unsat", _dedupe([e[3] for e in cyc if e[3] is not None])
    idx, D, nxt, via = _floyd(nodes, edges)
    for x, y, c, lit in diseq:
        i, j = idx[x], idx[y]
        # x - y <= D[j][i] and y - x <= D[i][j]
        if D[j][i] == c and D[i][j] == -c:
            core = [lit] + [e[3] for e in _floyd_path(j, i, nxt, via) + _floyd_path(i, j, nxt, via)]
            return "unsat", _dedupe([l for l in core if l is not None])
    # greedy placement, one variable at a time, keeping the closure exact
    n = len(nodes)
    value: dict[int, int] = {0: 0}
    forbid: dict[int, list[tuple[int, int]]] = {i: [] for i in range(n)}
    for x, y, c, _ in diseq:
        forbid[idx[x]].append((idx[y], c))  # val[x] != val[y] + c
        forbid[idx[y]].append((idx[x], -c))  # val[y] != val[x] - c
    for vi in range(1, n):
        lo, hi = -math.inf, math.inf
        for ui, uval in value.items():
            lo = max(lo, uval - D[vi][ui])
            hi = min(hi, uval + D[ui][vi])
        bad = {value[o] + c for o, c in forbid[vi] if o in value}
        start = 0 if lo <= 0 <= hi else (lo if lo > 0 else hi)
        choice = None
        for step in range(len(bad) + 1):
            for cand in (start + step, start - step):
                if lo <= cand <= hi and cand not in bad:
                    choice = cand
                    break
            if choice is not None:
                break
        if choice is None:
            return "unknown", None
        value[vi] = int(choice)
        # pin vi to choice relative to Z (index 0)
        for a in range(n):
            Da = D[a]
            for b in range(n):
                s = min(Da[0] + choice + D[vi][b], Da[vi] - choice + D[0][b])
                if s < Da[b]:
                    Da[b] = s
    return "sat", {nodes[i]: v for i, v in value.items() if i != 0}


# --------------------------------------------------------------------------
# exhaustive search


def _components(lits: list[Literal]) -> list[tuple[list[Var], list[Literal]]]:
    parent: dict[Var, Var] = {}

    def find(x):
        parent.setdefault(x, x)
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for lit in lits:
        args = lit.atom.args
        find(args[0])
        for a in args[1:]:
            ra, rb = find(args[0]), find(a)
            if ra != rb:
                parent[rb] = ra
    groups: dict[Var, tuple[list[Var], list[Literal]]] = {}
    for v in sorted(parent, key=lambda v: v.key):
        groups.setdefault(find(v), ([], []))[0].append(v)
    for lit in lits:
        groups[find(lit.atom.args[0])][1].append(lit)
    return list(groups.values())


class _Search:
    def __init__(self, budget: int):
        self.budget = budget
        self.nodes = 0

    def tick(self):
        self.nodes += 1
        if self.nodes > self.budget:
            raise BudgetExceeded(f"exhaustive search exceeded its budget of {self.budget} nodes")


def _search_clauses(
    variables: list[Var],
    clauses: list[Sequence[Literal]],
    bounds: DomainBounds,
    search: _Search,
) -> dict[Var, int] | None:
    """Depth-first search for an assignment satisfying every clause.

    A clause is evaluated as soon as its last variable (in search order) is set.
    """
    pos = {v: i for i, v in enumerate(variables)}
    due: list[list[Sequence[Literal]]] = [[] for _ in variables]
    for c in clauses:
        vs = {v for lit in c for v in lit.atom.args}
        if not vs:
            continue
        due[max(pos[v] for v in vs)].append(c)
    model = FiniteModel()
    doms = [list(bounds.domain(v.sort)) for v in variables]

    def rec(i):
        if i == len(variables):
            return True
        v = variables[i]
        for x in doms[i]:
            search.tick()
            model[v] = x
            if all(any(eval_literal(model, lit) for lit in c) for c in due[i]):
                if rec(i + 1):
                    return True
        model._table(v).pop(v, None)
        return False

    if any(len(c) == 0 for c in clauses):
        return None
    if not rec(0):
        return None
    return {v: model[v] for v in variables}


def find_model_bounded(
    lits: Iterable[Literal], bounds: DomainBounds, budget: int = DEFAULT_BUDGET
) -> FiniteModel | None:
    """Exhaustive search for a model inside ``bounds``; None if none exists there.

    Independent connected components of the literal graph are searched
    separately, so the cost is the sum of the per-component searches.
    """
    lits = sorted(set(lits), key=lambda x: x.key)
    for sort, group in split_by_sort(lits).items():
        for vs, _ in _components(group):
            size = len(bounds.domain(sort)) ** len(vs)
            if size > budget:
                raise BudgetExceeded(
                    f"{len(vs)} {sort.value} variables over {len(bounds.domain(sort))} values exceeds budget {budget}"
                )
    search = _Search(budget)
    model = FiniteModel()
    for group in split_by_sort(lits).values():
        for vs, comp_lits in _components(group):
            sol = _search_clauses(vs, [[l] for l in comp_lits], bounds, search)
            if sol is None:
                return None
            for v, x in sol.items():
                model[v] = x
    _verify(model, lits)
    return model


def search_formula_model(
    clauses: Sequence[Iterable[Literal]], bounds: DomainBounds, budget: int = DEFAULT_BUDGET
) -> FiniteModel | None:
    """Exhaustive bounded-model search for a whole CNF over theory literals.

    Variables are tried selections first, then values, then clocks, which lets
    the value constraints prune most selection choices early.
    """
    clauses = [list(c) for c in clauses]
    order = {Sort.SEL: 0, Sort.VAL: 1, Sort.CLOCK: 2}
    variables = sorted(
        {v for c in clauses for lit in c for v in lit.atom.args},
        key=lambda v: (order[v.sort], v.key),
    )
    sol = _search_clauses(variables, clauses, bounds, _Search(budget))
    if sol is None:
        return None
    model = FiniteModel()
    for v, x in sol.items():
        model[v] = x
    for c in clauses:
        if not any(eval_literal(model, lit) for lit in c):
            raise TheoryError("search returned a model falsifying a clause")  # pragma: no cover
    return model


# --------------------------------------------------------------------------
# entry points


def _verify(model: FiniteModel, lits: Iterable[Literal]) -> None:
    for lit in lits:
        if not eval_literal(model, lit):
            raise TheoryError(f"constructed model falsifies {lit}")


def _fallback_bounds(lits: list[Literal], bounds: DomainBounds | None) -> DomainBounds:
    if bounds is not None:
        return bounds
    vs = literal_vars(lits)
    ks = [abs(l.atom.const) + 1 for l in lits if l.atom.const is not None]
    span = len(vs) + max(ks, default=0) + 2
    return DomainBounds(max(1, len(vs)), max(1, len(vs)), -span, span)


def _solve_fragments(lits: list[Literal], bounds: DomainBounds | None, want_model: bool):
    """Returns (model or None, core or None)."""
    groups = split_by_sort(lits)
    parts = {}
    for sort, fn in ((Sort.CLOCK, _check_clocks), (Sort.SEL, _check_sels)):
        status, payload = fn(groups[sort])
        if status == "unsat":
            return None, payload
        parts[sort] = payload
    status, payload = _check_vals(groups[Sort.VAL], bounds)
    if status == "unsat":
        return None, payload
    parts[Sort.VAL] = payload
    if status == "unknown":
        fb = _fallback_bounds(groups[Sort.VAL], bounds)
        m = find_model_bounded(groups[Sort.VAL], fb)
        if m is None:
            if bounds is not None:
                return None, groups[Sort.VAL]
            raise BoundExhausted("value disequalities could not be placed inside the search box")
        parts[Sort.VAL] = m.val
    if not want_model:
        return True, None
    model = FiniteModel()
    for sort in (Sort.CLOCK, Sort.SEL, Sort.VAL):
        assignment = parts[sort]
        if bounds is not None and sort is not Sort.VAL:
            dom = bounds.domain(sort)
            if assignment and max(assignment.values()) >= len(dom):
                m = find_model_bounded(groups[sort], bounds)
                if m is None:
                    raise BoundExhausted(
                        f"{sort.value} fragment is satisfiable but needs more than {len(dom)} domain elements"
                    )
                assignment = m._table(next(iter(assignment)))
        for v, x in assignment.items():
            model[v] = x
    _verify(model, lits)
    return model, None


def check_conjunction(lits: Iterable[Literal], bounds: DomainBounds | None = None) -> FiniteModel | None:
    """Decide a conjunction of theory literals; a verified model, or None if unsatisfiable.

    With ``bounds`` the value variables range over ``val_min..val_max``, and
    the clock and selection models must fit their domain sizes (otherwise
    BoundExhausted).  Without bounds values range over all integers.
    """
    lits = sorted(set(lits), key=lambda x: x.key)
    model, _ = _solve_fragments(lits, bounds, want_model=True)
    return model


def is_consistent(lits: Iterable[Literal]) -> bool:
    lits = sorted(set(lits), key=lambda x: x.key)
    ok, _ = _solve_fragments(lits, None, want_model=False)
    return ok is not None


def explain_conflict(lits: Iterable[Literal]) -> list[Literal] | None:
    """An unsatisfiable subset of ``lits`` (not necessarily minimal), or None if satisfiable."""
    lits = sorted(set(lits), key=lambda x: x.key)
    ok, core = _solve_fragments(lits, None, want_model=False)
    return None if ok is not None else core


def minimize_conflict(lits: Iterable[Literal]) -> list[Literal]:
    """Deletion-based minimal unsatisfiable subset.

    The input is first cut down to the explanation found by the decision
    procedure, then each literal is dropped in canonical order if the rest
    stays unsatisfiable.  The result is checked: unsatisfiable, and every
    single deletion satisfiable.
    """
    lits = sorted(set(lits), key=lambda x: x.key)
    core = explain_conflict(lits)
    if core is None:
        raise ContractViolation("minimize_conflict called on a satisfiable set")
    core = sorted(set(core), key=lambda x: x.key)
    i = 0
    while i < len(core):
        trial = core[:i] + core[i + 1 :]
        if not is_consistent(trial):
            core = trial
        else:
            i += 1
    if is_consistent(core):
        raise TheoryError("minimized conflict is satisfiable")  # pragma: no cover
    for j in range(len(core)):
        if not is_consistent(core[:j] + core[j + 1 :]):
            raise TheoryError("minimized conflict is not minimal")  # pragma: no cover
    return core
