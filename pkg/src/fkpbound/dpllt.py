"""A small DPLL(T) engine over a fixed atom alphabet, with proof logging.

The propositional core is CDCL with two watched literals, activity-based
branching and first-UIP learning.  Every learned clause is justified by the
resolution steps that produced it, and every theory lemma by a T-learn step,
so an unsatisfiable run yields a trace that ``check_proof`` replays without
trusting the engine.

Theory checks run on full propositional assignments by default.  In eager
mode they also run at every propagation fixpoint.  Either way lemmas mention
only atoms of the input, and are minimized before learning.
"""

from __future__ import annotations

import random
import re
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from .logic import (
    AbstractionMap,
    Atom,
    Literal,
    LogicError,
    Op,
    Var,
    clause_satisfied,
    is_tautology,
    resolve,
)
from .theory import TheoryError, check_conjunction, is_consistent, minimize_conflict


@dataclass(frozen=True)
class Input:
    index: int


@dataclass(frozen=True)
class Res:
    i: int
    j: int
    pivot: int


@dataclass(frozen=True)
class TLearn:
    lemma: tuple[Literal, ...]
    clause: frozenset[int]


ProofStep = Input | Res | TLearn


@dataclass
class ProofTrace:
    steps: list[ProofStep]
    alpha: int

    @property
    def t_learn_count(self) -> int:
        return sum(1 for s in self.steps if isinstance(s, TLearn))

    def lemmas(self) -> list[tuple[int, tuple[Literal, ...]]]:
        return [(k, s.lemma) for k, s in enumerate(self.steps) if isinstance(s, TLearn)]


@dataclass
class SolveStats:
    t_learn_count: int = 0
    propositional_conflicts: int = 0
    decisions: int = 0
    restarts: int = 0
    propagations: int = 0
    theory_checks: int = 0
    elapsed_s: float = 0.0


@dataclass
class SolveResult:
    status: str  # "unsat" | "sat" | "unknown"
    stats: SolveStats
    trace: ProofTrace | None = None
    assignment: frozenset[int] | None = None
    model: object = None


class _Unsat(Exception):
    pass


class _Engine:
    """CDCL over DIMACS-style literals.

    ``theory`` maps a list of true propositional literals to a list of
    propositional literals forming a theory conflict (all currently true), or
    None when consistent.
    """

    def __init__(
        self,
        clauses: Sequence[Iterable[int]],
        num_vars: int,
        seed: int = 0,
        theory: Callable[[list[int]], "list[int] | None"] | None = None,
        lemma_of: Callable[[list[int]], tuple] | None = None,
        eager: bool = False,
        decay: float = 0.95,
    ):
        self.nv = num_vars
        self.value = [0] * (num_vars + 1)
        self.level = [0] * (num_vars + 1)
        self.reason = [-1] * (num_vars + 1)
        self.pos = [0] * (num_vars + 1)
        self.trail: list[int] = []
        self.trail_lim: list[int] = []
        self.qhead = 0
        self.clauses: list[list[int]] = []
        self.step_of: list[int] = []
        self.steps: list[ProofStep] = []
        self.watches: dict[int, list[int]] = {}
        rng = random.Random(seed)
        # a tiny seeded perturbation orders the initially tied variables
        self.activity = [0.0] + [rng.random() * 1e-6 for _ in range(num_vars)]
        self.inc = 1.0
        self.decay = decay
        self.phase = [False] * (num_vars + 1)
        self.theory = theory
        self.lemma_of = lemma_of
        self.eager = eager
        self.stats = SolveStats()
        self.input_clauses = [sorted(set(c), key=lambda x: (abs(x), x)) for c in clauses]
        self.alpha = len(self.input_clauses)

    # -- basic operations

    def lit_val(self, lit: int) -> int:
        v = self.value[abs(lit)]
        return v if lit > 0 else -v

    def decision_level(self) -> int:
        return len(self.trail_lim)

    def assign(self, lit: int, reason: int) -> None:
        var = abs(lit)
        self.value[var] = 1 if lit > 0 else -1
        self.level[var] = self.decision_level()
        self.reason[var] = reason
        self.pos[var] = len(self.trail)
        self.phase[var] = lit > 0
        self.trail.append(lit)

    def cancel_until(self, lvl: int) -> None:
        if self.decision_level() <= lvl:
            return
        start = self.trail_lim[lvl]
        for lit in self.trail[start:]:
            var = abs(lit)
            self.value[var] = 0
            self.reason[var] = -1
        del self.trail[start:]
        del self.trail_lim[lvl:]
        self.qhead = len(self.trail)

    def add_clause(self, lits: list[int], step: int) -> int:
        cid = len(self.clauses)
        self.clauses.append(lits)
        self.step_of.append(step)
        if len(lits) >= 2:
            self.watches.setdefault(lits[0], []).append(cid)
            self.watches.setdefault(lits[1], []).append(cid)
        return cid

    def new_step(self, step: ProofStep) -> int:
        self.steps.append(step)
        return len(self.steps) - 1

    # -- propagation

    def propagate(self) -> int:
        while self.qhead < len(self.trail):
            p = self.trail[self.qhead]
            self.qhead += 1
            self.stats.propagations += 1
            false_lit = -p
            ws = self.watches.get(false_lit)
            if not ws:
                continue
            keep: list[int] = []
            conflict = -1
            for n, cid in enumerate(ws):
                c = self.clauses[cid]
                if c[0] == false_lit:
                    c[0], c[1] = c[1], c[0]
                first = c[0]
                if self.lit_val(first) == 1:
                    keep.append(cid)
                    continue
                for k in range(2, len(c)):
                    if self.lit_val(c[k]) != -1:
                        c[1], c[k] = c[k], c[1]
                        self.watches.setdefault(c[1], []).append(cid)
                        break
                else:
                    keep.append(cid)
                    if self.lit_val(first) == -1:
                        conflict = cid
                        keep.extend(ws[n + 1 :])
                        break
                    self.assign(first, cid)
            self.watches[false_lit] = keep
            if conflict != -1:
                return conflict
        return -1

    # -- conflict analysis

    def bump(self, var: int) -> None:
        self.activity[var] += self.inc
        if self.activity[var] > 1e100:
            self.activity = [a * 1e-100 for a in self.activity]
            self.inc *= 1e-100

    def derive_empty(self, clause: set[int], step: int) -> None:
        """Resolve a clause false at level 0 down to the empty clause."""
        while clause:
            lit = max(clause, key=lambda x: self.pos[abs(x)])
            var = abs(lit)
            r = self.reason[var]
            if r < 0:
                raise AssertionError("level-0 literal without a reason")  # pragma: no cover
            res = resolve(clause, self.clauses[r], var)
            clause = set(res.clause)
            step = self.new_step(Res(step, self.step_of[r], var))
        raise _Unsat

    def handle_conflict(self, clause_lits: Iterable[int], step: int, known_cid: int = -1) -> None:
        """Learn from a clause false under the current assignment and backjump."""
        clause = set(clause_lits)
        if not clause:
            raise _Unsat
        d = max(self.level[abs(l)] for l in clause)
        if d == 0:
            self.cancel_until(0)
            self.derive_empty(clause, step)
        self.cancel_until(d)
        idx = len(self.trail) - 1
        seen_vars = set()
        resolved = False
        while True:
            n_d = sum(1 for l in clause if self.level[abs(l)] == d)
            if n_d <= 1:
                break
            while True:
                p = self.trail[idx]
                idx -= 1
                if -p in clause:
                    break
            var = abs(p)
            r = self.reason[var]
            seen_vars.add(var)
            clause = set(resolve(clause, self.clauses[r], var).clause)
            step = self.new_step(Res(step, self.step_of[r], var))
            resolved = True
        for l in clause:
            seen_vars.add(abs(l))
        for v in seen_vars:
            self.bump(v)
        self.inc /= self.decay
        uip = next(l for l in clause if self.level[abs(l)] == d)
        rest = sorted(clause - {uip}, key=lambda l: -self.level[abs(l)])
        back = self.level[abs(rest[0])] if rest else 0
        self.cancel_until(back)
        lits = [uip] + rest
        if not resolved and known_cid >= 0:
            cid = known_cid
            # re-seat the watches on the asserting literal and the deepest other one
            self._rewatch(cid, lits)
        else:
            cid = self.add_clause(lits, step)
        if len(lits) == 1:
            self.cancel_until(0)
        self.assign(uip, cid)

    def _rewatch(self, cid: int, lits: list[int]) -> None:
        c = self.clauses[cid]
        if len(c) >= 2:
            for w in (c[0], c[1]):
                self.watches[w].remove(cid)
        c[:] = lits
        if len(c) >= 2:
            self.watches.setdefault(c[0], []).append(cid)
            self.watches.setdefault(c[1], []).append(cid)

    def theory_conflict(self, plits: list[int]) -> None:
        lemma = self.lemma_of(plits)
        clause = [-l for l in plits]
        step = self.new_step(TLearn(lemma, frozenset(clause)))
        self.stats.t_learn_count += 1
        ordered = sorted(clause, key=lambda l: -self.level[abs(l)])
        cid = self.add_clause(ordered, step) if ordered else -1
        self.handle_conflict(clause, step, known_cid=cid)

    # -- search

    def pick(self) -> int:
        best, best_a = 0, -1.0
        act = self.activity
        val = self.value
        for v in range(1, self.nv + 1):
            if val[v] == 0 and act[v] > best_a:
                best, best_a = v, act[v]
        return best

    def true_lits(self) -> list[int]:
        return [v if self.value[v] > 0 else -v for v in range(1, self.nv + 1) if self.value[v] != 0]

    def run(self, max_conflicts: int | None = None, time_limit: float | None = None) -> str:
        t0 = time.perf_counter()
        try:
            return self._run(max_conflicts, time_limit, t0)
        except _Unsat:
            return "unsat"
        finally:
            self.stats.elapsed_s = time.perf_counter() - t0

    def _run(self, max_conflicts, time_limit, t0) -> str:
        units = []
        for k, c in enumerate(self.input_clauses):
            step = self.new_step(Input(k))
            if not c:
                raise _Unsat
            cid = self.add_clause(list(c), step)
            if len(c) == 1:
                units.append(cid)
        for cid in units:
            lit = self.clauses[cid][0]
            v = self.lit_val(lit)
            if v == 0:
                self.assign(lit, cid)
            elif v == -1:
                self.derive_empty({lit}, self.step_of[cid])
        while True:
            if max_conflicts is not None and self.stats.propositional_conflicts + self.stats.t_learn_count >= max_conflicts:
                return "unknown"
            if time_limit is not None and time.perf_counter() - t0 > time_limit:
                return "unknown"
            confl = self.propagate()
            if confl != -1:
                self.stats.propositional_conflicts += 1
                self.handle_conflict(self.clauses[confl], self.step_of[confl], known_cid=-1)
                continue
            if self.theory is not None and self.eager and self.decision_level() > 0:
                self.stats.theory_checks += 1
                core = self.theory(self.true_lits())
                if core is not None:
                    self.theory_conflict(core)
                    continue
            var = self.pick()
            if var == 0:
                if self.theory is None:
                    return "sat"
                self.stats.theory_checks += 1
                core = self.theory(self.true_lits())
                if core is None:
                    return "sat"
                self.theory_conflict(core)
                continue
            self.stats.decisions += 1
            self.trail_lim.append(len(self.trail))
            self.assign(var if self.phase[var] else -var, -1)


def solve_propositional(clauses: Sequence[Iterable[int]], num_vars: int, seed: int = 0) -> frozenset[int] | None:
    """Plain SAT: a satisfying full assignment, or None."""
    eng = _Engine(clauses, num_vars, seed)
    status = eng.run()
    if status == "unsat":
        return None
    return frozenset(eng.true_lits())


def _theory_callbacks(amap: AbstractionMap):
    def theory_lits(plits: list[int]) -> list[Literal]:
        return [amap.literal(p) for p in plits]

    def check(plits: list[int]) -> list[int] | None:
        lits = theory_lits(plits)
        if is_consistent(lits):
            return None
        core = minimize_conflict(lits)
        return [amap.lit(l) for l in core]

    def lemma_of(plits: list[int]) -> tuple[Literal, ...]:
        return tuple(sorted(theory_lits(plits), key=lambda l: l.key))

    return check, lemma_of


def solve(
    inst,
    seed: int = 0,
    eager: bool = False,
    max_conflicts: int | None = None,
    time_limit: float | None = None,
) -> SolveResult:
    """Run DPLL(T) on an encoded instance.

    Unsat results carry a proof trace, Sat results a full propositional
    assignment and a theory model checked against every clause.
    """
    amap = inst.amap
    prop = [sorted(c) for c in inst.cnf.prop_clauses]
    check, lemma_of = _theory_callbacks(amap)
    eng = _Engine(prop, len(amap), seed, theory=check, lemma_of=lemma_of, eager=eager)
    status = eng.run(max_conflicts, time_limit)
    stats = eng.stats
    if status == "unsat":
        return SolveResult("unsat", stats, trace=ProofTrace(eng.steps, eng.alpha))
    if status == "unknown":
        return SolveResult("unknown", stats)
    assignment = frozenset(eng.true_lits())
    lits = [amap.literal(p) for p in assignment]
    model = check_conjunction(lits)
    for c in prop:
        if not clause_satisfied(assignment, c):
            raise AssertionError("propositional model falsifies a clause")  # pragma: no cover
    return SolveResult("sat", stats, assignment=assignment, model=model)


# --------------------------------------------------------------------------
# checking


@dataclass
class CheckResult:
    valid: bool
    t_learn_count: int
    first_error: tuple[int, str] | None = None


def check_proof(trace: ProofTrace, inst) -> CheckResult:
    """Replay a trace against an instance, trusting nothing the engine computed."""
    amap = inst.amap
    inputs = inst.cnf.prop_clauses
    derived: list[frozenset[int]] = []
    t_count = 0

    def fail(k: int, msg: str) -> CheckResult:
        return CheckResult(False, t_count, (k, msg))

    if not trace.steps:
        return fail(0, "empty trace")
    if not 0 <= trace.alpha <= len(trace.steps):
        return fail(0, f"alpha {trace.alpha} out of range")
    for k, step in enumerate(trace.steps):
        if k < trace.alpha:
            if not isinstance(step, Input):
                return fail(k, "expected an input step")
            if step.index != k or not 0 <= step.index < len(inputs):
                return fail(k, f"input step cites clause {step.index}, expected {k}")
            derived.append(inputs[step.index])
        elif isinstance(step, Input):
            return fail(k, "input step after the input prefix")
        elif isinstance(step, Res):
            if not (0 <= step.i < k and 0 <= step.j < k):
                return fail(k, f"resolution cites step outside 0..{k - 1}")
            try:
                res = resolve(derived[step.i], derived[step.j], step.pivot)
            except LogicError as exc:
                return fail(k, str(exc))
            if res.tautological:
                return fail(k, "resolvent is tautological")
            derived.append(res.clause)
        elif isinstance(step, TLearn):
            try:
                expect = frozenset(-amap.lit(l) for l in step.lemma)
            except LogicError as exc:
                return fail(k, str(exc))
            if expect != step.clause:
                return fail(k, "t-learn clause is not the negated lemma")
            if is_tautology(step.clause):
                return fail(k, "t-learn lemma contains complementary literals")
            try:
                if is_consistent(step.lemma):
                    return fail(k, "t-learn lemma is theory-satisfiable")
            except TheoryError as exc:
                return fail(k, f"theory oracle gave no verdict: {exc}")
            t_count += 1
            derived.append(step.clause)
        else:
            return fail(k, f"unknown step {step!r}")
    if derived[-1]:
        return fail(len(derived) - 1, "final clause is not empty")
    return CheckResult(True, t_count, None)


def derived_clauses(trace: ProofTrace, inst) -> list[frozenset[int]]:
    """Clause of every step of a trace already known to be valid."""
    out: list[frozenset[int]] = []
    inputs = inst.cnf.prop_clauses
    for s in trace.steps:
        if isinstance(s, Input):
            out.append(inputs[s.index])
        elif isinstance(s, Res):
            out.append(resolve(out[s.i], out[s.j], s.pivot).clause)
        else:
            out.append(s.clause)
    return out


def random_mutation(trace: ProofTrace, inst, rng: random.Random) -> tuple[list[ProofStep], int]:
    """Change one step of a valid trace so that exactly that step becomes invalid.

    Returns the mutated step list and the index the checker must report.
    Used to fuzz the checker.
    """
    steps = list(trace.steps)
    derived = derived_clauses(trace, inst)
    while True:
        kind = rng.choice(["input", "pivot", "antecedent", "forward", "lemma_drop", "clause_flip", "truncate"])
        if kind == "input":
            k = rng.randrange(trace.alpha)
            new = rng.choice([j for j in range(trace.alpha) if j != k])
            steps[k] = Input(new)
            return steps, k
        res_steps = [i for i, s in enumerate(steps) if isinstance(s, Res)]
        t_steps = [i for i, s in enumerate(steps) if isinstance(s, TLearn)]
        if kind == "pivot" and res_steps:
            k = rng.choice(res_steps)
            s = steps[k]
            a, b = derived[s.i], derived[s.j]
            bad = [v for v in range(1, len(inst.amap) + 1) if not ((v in a and -v in b) or (-v in a and v in b))]
            steps[k] = Res(s.i, s.j, rng.choice(bad))
            return steps, k
        if kind == "antecedent" and res_steps:
            k = rng.choice(res_steps)
            s = steps[k]
            a = derived[s.i]
            bad = [j for j in range(k) if not ((s.pivot in a and -s.pivot in derived[j]) or (-s.pivot in a and s.pivot in derived[j]))]
            if bad:
                steps[k] = Res(s.i, rng.choice(bad), s.pivot)
                return steps, k
        if kind == "forward" and res_steps:
            k = rng.choice(res_steps)
            s = steps[k]
            steps[k] = Res(s.i, k + rng.randrange(0, 3), s.pivot)
            return steps, k
        if kind == "lemma_drop" and t_steps:
            k = rng.choice(t_steps)
            s = steps[k]
            drop = rng.randrange(len(s.lemma))
            lemma = s.lemma[:drop] + s.lemma[drop + 1:]
            steps[k] = TLearn(lemma, frozenset(-inst.amap.lit(l) for l in lemma))
            return steps, k
        if kind == "clause_flip" and t_steps:
            k = rng.choice(t_steps)
            s = steps[k]
            lit = rng.choice(sorted(s.clause))
            steps[k] = TLearn(s.lemma, (s.clause - {lit}) | {-lit})
            return steps, k
        if kind == "truncate":
            k = rng.randrange(trace.alpha, len(steps) - 1)
            if derived[k]:
                return steps[: k + 1], k


# --------------------------------------------------------------------------
# text format


def format_literal(lit: Literal, names: Callable[[int], str]) -> str:
    at = lit.atom
    args = [f"{v.kind}:{names(v.event)}" for v in at.args]
    if at.const is not None:
        args.append(str(at.const))
    text = f"{at.op.name.lower()}({','.join(args)})"
    return text if lit.positive else "!" + text


_LIT_RE = re.compile(r"^(!?)([a-z]+)\(([^()]*)\)$")


def parse_literal(text: str, ids: Callable[[str], int]) -> Literal:
    m = _LIT_RE.match(text)
    if not m:
        raise ValueError(f"malformed literal {text!r}")
    neg, opname, inner = m.groups()
    try:
        op = Op[opname.upper()]
    except KeyError:
        raise ValueError(f"unknown atom kind {opname!r}") from None
    parts = inner.split(",") if inner else []
    const = None
    if op is Op.VGT:
        if not parts:
            raise ValueError(f"malformed literal {text!r}")
        const = int(parts.pop())
    args = []
    for arg in parts:
        kind, _, name = arg.partition(":")
        try:
            args.append(Var(kind, ids(name)))
        except (LogicError, KeyError):
            raise ValueError(f"unknown variable {arg!r}") from None
    try:
        atom = Atom(op, tuple(args), const)
    except LogicError as exc:
        raise ValueError(str(exc)) from None
    return Literal(atom, not neg)


def write_trace(trace: ProofTrace, inst, comments: Sequence[str] = ()) -> str:
    p = inst.structure
    lines = [f"p fkp2013 {inst.encoding.value} {inst.n} {inst.bound}"]
    lines += [f"c {c}" for c in comments]
    for s in trace.steps:
        if isinstance(s, Input):
            lines.append(f"i {s.index}")
        elif isinstance(s, Res):
            lines.append(f"r {s.i} {s.j} {s.pivot}")
        else:
            lemma = " ".join(format_literal(l, p.name) for l in s.lemma)
            clause = " ".join(str(x) for x in sorted(s.clause, key=lambda x: (abs(x), x)))
            lines.append(f"t {lemma} ; {clause}".rstrip())
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class TraceHeader:
    encoding: str
    n: int
    bound: int


class TraceFormatError(ValueError):
    def __init__(self, line_no: int, msg: str):
        super().__init__(f"line {line_no}: {msg}")
        self.line_no = line_no


def read_header(text: str) -> TraceHeader:
    for no, line in enumerate(text.splitlines(), 1):
        if line.startswith("p "):
            parts = line.split()
            if len(parts) != 5 or parts[1] != "fkp2013":
                raise TraceFormatError(no, "header must read 'p fkp2013 <encoding> <n> <bound>'")
            return TraceHeader(parts[2], int(parts[3]), int(parts[4]))
        if line.strip() and not line.startswith("c"):
            break
    raise TraceFormatError(1, "missing header")


def parse_trace(text: str, inst) -> ProofTrace:
    p = inst.structure
    ids = {e.name: e.id for e in p.events}
    steps: list[ProofStep] = []
    alpha = None
    for no, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("c") or line.startswith("p"):
            continue
        tag, _, rest = line.partition(" ")
        try:
            if tag == "i":
                steps.append(Input(int(rest)))
            elif tag == "r":
                i, j, piv = (int(x) for x in rest.split())
                steps.append(Res(i, j, piv))
            elif tag == "t":
                lemma_txt, sep, clause_txt = rest.partition(";")
                if not sep:
                    raise ValueError("t-learn line needs ';' between lemma and clause")
                lemma = tuple(parse_literal(x, ids.__getitem__) for x in lemma_txt.split())
                clause = frozenset(int(x) for x in clause_txt.split())
                steps.append(TLearn(lemma, clause))
            else:
                raise ValueError(f"unknown line tag {tag!r}")
        except ValueError as exc:
            raise TraceFormatError(no, str(exc)) from None
        if alpha is None and not isinstance(steps[-1], Input):
            alpha = len(steps) - 1
    if alpha is None:
        alpha = len(steps)
    return ProofTrace(steps, alpha)
