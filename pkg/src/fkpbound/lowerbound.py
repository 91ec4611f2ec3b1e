"""Critical assignments of the fkp encodings and the N! lower-bound certificate.

For a permutation pi of the incrementer threads the run sigma(pi) executes
the threads one after another.  Its clocks and selections, together with a
value chain that overshoots the assertion, give a full assignment M_pi that
satisfies every clause propositionally and contains exactly one minimal
theory conflict: the chain

    rval(c0) = 0,  rval(c_{i-1}) + 1 = rval(c_i),  rval(c_N) > N

where c_0..c_{N-1} are the reads in execution order and c_N is the assertion
read.  Distinct permutations order the reads differently, so their conflicts
differ, and any refutation needs a separate theory lemma for each of the N!
assignments.
"""

from __future__ import annotations

import enum
import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .encoder import EncodedInstance, Encoding
from .logic import (
    FiniteModel,
    Literal,
    Op,
    Sort,
    clause_satisfied,
    clock,
    eval_atom,
    eval_literal,
    is_full_assignment,
    pos,
    rsel,
    rval,
    sup,
    vgt,
    vsucc,
    vzero,
    wsel,
)
from .theory import check_conjunction, is_consistent


class LowerBoundError(Exception):
    pass


class ConstructionDefect(LowerBoundError):
    pass


class Mode(enum.Enum):
    WITNESS = "witness"
    BRUTEFORCE = "bruteforce"

    @classmethod
    def parse(cls, s: "str | Mode") -> "Mode":
        if isinstance(s, Mode):
            return s
        key = s.strip().lower().replace("_", "").replace("-", "")
        table = {"witness": cls.WITNESS, "witnessonly": cls.WITNESS, "bruteforce": cls.BRUTEFORCE}
        if key not in table:
            raise ValueError(f"unknown mode {s!r}")
        return table[key]


Perm = tuple[int, ...]  # pi[k] is the thread executed in slot k+1


def _check_perm(pi: Sequence[int], n: int) -> Perm:
    pi = tuple(pi)
    if sorted(pi) != list(range(1, n + 1)):
        raise LowerBoundError(f"{pi} is not a permutation of 1..{n}")
    return pi


def sigma(pi: Sequence[int], p) -> list[int]:
    """Event ids of the run that executes threads in the order pi."""
    pi = _check_perm(pi, p.n)
    seq = [p.w_init]
    for t in pi:
        seq += [p.r(t), p.w(t)]
    seq.append(p.assert_read)
    return seq


def chain(pi: Sequence[int], p) -> list[int]:
    """Reads in execution order followed by the assertion read."""
    return [p.r(t) for t in pi] + [p.assert_read]


def conflict_literals(pi: Sequence[int], p) -> list[Literal]:
    c = chain(pi, p)
    lits = [pos(vzero(rval(c[0])))]
    lits += [pos(vsucc(rval(c[i - 1]), rval(c[i]))) for i in range(1, len(c))]
    lits.append(pos(vgt(rval(c[-1]), p.bound)))
    return lits


def base_model(pi: Sequence[int], p, quadratic: bool) -> FiniteModel:
    """Clocks, selections (and suprema) of the run sigma(pi); no values."""
    pi = _check_perm(pi, p.n)
    m = FiniteModel()
    for rank, e in enumerate(sigma(pi, p), 1):
        m[clock(e)] = rank
    m[wsel(p.w_init)] = 0
    prev_write = p.w_init
    for i, t in enumerate(pi, 1):
        m[wsel(p.w(t))] = i
        m[rsel(p.r(t))] = i - 1
        if quadratic:
            m[sup(p.r(t))] = m[clock(prev_write)]
        prev_write = p.w(t)
    m[rsel(p.assert_read)] = len(pi)
    if quadratic:
        m[sup(p.assert_read)] = m[clock(prev_write)]
    return m


def witness_values(pi: Sequence[int], p, dropped: int) -> dict:
    """Values along the chain satisfying every conflict literal except one.

    ``dropped`` indexes conflict_literals: 0 is the zero start, 1..N the
    successor links, N+1 the final comparison.
    """
    c = chain(pi, p)
    n = len(c) - 1
    if dropped == 0:
        vals = [k + 1 for k in range(n + 1)]
    elif dropped <= n:
        vals = [k if k < dropped else k + 1 for k in range(n + 1)]
    elif dropped == n + 1:
        vals = list(range(n + 1))
    else:
        raise LowerBoundError(f"conflict has no literal {dropped}")
    return {rval(r): v for r, v in zip(c, vals)}


def build_witness_models(pi: Sequence[int], inst: EncodedInstance) -> tuple[FiniteModel, dict[Literal, FiniteModel]]:
    p = inst.structure
    base = base_model(pi, p, inst.encoding is Encoding.QUADRATIC)
    lits = conflict_literals(pi, p)
    witnesses = {lit: base.merged(witness_values(pi, p, k)) for k, lit in enumerate(lits)}
    return base, witnesses


@dataclass(frozen=True)
class CriticalAssignmentRecord:
    pi: Perm
    theory_literals: frozenset[Literal]  # H_pi
    prop_assignment: frozenset[int]  # M_pi
    conflict: tuple[Literal, ...]
    base: FiniteModel = field(compare=False)
    witnesses: dict = field(compare=False)


def build_critical_assignment(pi: Sequence[int], inst: EncodedInstance) -> CriticalAssignmentRecord:
    p = inst.structure
    pi = _check_perm(pi, p.n)
    base, witnesses = build_witness_models(pi, inst)
    conflict = tuple(conflict_literals(pi, p))
    positive_vals = {l.atom for l in conflict}
    h = []
    for atom in inst.amap.atoms:
        if atom.sort is Sort.VAL:
            h.append(Literal(atom, atom in positive_vals))
        else:
            try:
                h.append(Literal(atom, eval_atom(base, atom)))
            except Exception as exc:
                raise ConstructionDefect(f"atom {atom} left unpolarized: {exc}") from None
    if not positive_vals <= set(inst.amap.atoms):
        raise ConstructionDefect("conflict literal outside the alphabet")
    hset = frozenset(h)
    m = frozenset(inst.amap.lit(l) for l in hset)
    if not is_full_assignment(m, len(inst.amap)):
        raise ConstructionDefect("assignment is not full")
    return CriticalAssignmentRecord(pi, hset, m, conflict, base, witnesses)


@dataclass
class Verdict:
    ok: bool
    failures: list[str]
    minimal_conflicts: int | None = None

    def __bool__(self) -> bool:
        return self.ok


def enumerate_minimal_conflicts(lits: Sequence[Literal], limit: int = 1000) -> list[list[Literal]]:
    """All minimal unsatisfiable subsets, by MUS/MSS alternation (MARCO).

    A propositional map over "literal k kept" tracks which subsets are still
    unexplored: every maximal satisfiable subset blocks its subsets, every
    minimal conflict blocks its supersets.
    """
    from .dpllt import solve_propositional

    lits = sorted(set(lits), key=lambda l: l.key)
    n = len(lits)
    blocks: list[list[int]] = []
    found: list[list[Literal]] = []
    while True:
        seed_model = solve_propositional(blocks, n)
        if seed_model is None:
            return found
        seed = [k for k in range(n) if (k + 1) in seed_model]
        chosen = [lits[k] for k in seed]
        if is_consistent(chosen):
            kept = set(seed)
            for k in range(n):
                if k not in kept and is_consistent([lits[j] for j in sorted(kept | {k})]):
                    kept.add(k)
            blocks.append([k + 1 for k in range(n) if k not in kept])
            if not blocks[-1]:
                return found
        else:
            core = list(seed)
            i = 0
            while i < len(core):
                trial = core[:i] + core[i + 1 :]
                if not is_consistent([lits[j] for j in trial]):
                    core = trial
                else:
                    i += 1
            found.append([lits[j] for j in core])
            if len(found) > limit:
                raise LowerBoundError(f"more than {limit} minimal conflicts")
            blocks.append([-(k + 1) for k in core])


def necessary_literals(lits: Sequence[Literal]) -> list[Literal]:
    """Literals whose removal makes the set satisfiable; every conflict contains them all."""
    lits = sorted(set(lits), key=lambda l: l.key)
    return [l for k, l in enumerate(lits) if is_consistent(lits[:k] + lits[k + 1 :])]


def verify_critical(rec: CriticalAssignmentRecord, inst: EncodedInstance, mode: "Mode | str" = Mode.WITNESS) -> Verdict:
    mode = Mode.parse(mode)
    p = inst.structure
    fails: list[str] = []
    atoms = [l.atom for l in rec.theory_literals]
    if len(set(atoms)) != len(atoms) or set(atoms) != set(inst.amap.atoms):
        fails.append("H is not a complete polarization of the alphabet")
    if rec.prop_assignment != frozenset(inst.amap.lit(l) for l in rec.theory_literals):
        fails.append("M is not the abstraction of H")
    if len(rec.conflict) != p.n + 2:
        fails.append(f"conflict has {len(rec.conflict)} literals, expected {p.n + 2}")
    if not set(rec.conflict) <= rec.theory_literals:
        fails.append("conflict is not contained in H")
    # (a) propositional satisfaction
    for k, c in enumerate(inst.cnf.prop_clauses):
        if not clause_satisfied(rec.prop_assignment, c):
            fails.append(f"(a) clause {k} ({inst.family_of[k].value}) falsified")
    # (b) the conflict is a conflict
    if check_conjunction(rec.conflict) is not None:
        fails.append("(b) conflict literals are theory-satisfiable")
    # (c) each witness satisfies H minus its literal
    for k, lit in enumerate(rec.conflict):
        w = rec.witnesses.get(lit)
        if w is None:
            fails.append(f"(c) no witness for conflict literal {k}")
            continue
        for h in rec.theory_literals:
            if h == lit:
                continue
            try:
                ok = eval_literal(w, h)
            except Exception:
                ok = False
            if not ok:
                fails.append(f"(c) witness {k} falsifies {h}")
                break
    count = None
    if mode is Mode.BRUTEFORCE and not fails:
        mus = enumerate_minimal_conflicts(sorted(rec.theory_literals, key=lambda l: l.key))
        count = len(mus)
        if count != 1 or set(mus[0]) != set(rec.conflict):
            fails.append(f"bruteforce found {count} minimal conflicts")
        nec = necessary_literals(rec.theory_literals)
        if set(nec) != set(rec.conflict):
            fails.append("necessary literals differ from the conflict")
    return Verdict(not fails, fails, count)


def noninterference_failures(records: Sequence[CriticalAssignmentRecord], inst: EncodedInstance) -> list[tuple[Perm, Perm]]:
    """Ordered pairs (pi, pi') with prop(conflict of pi) contained in M_pi'."""
    props = [(r.pi, frozenset(inst.amap.lit(l) for l in r.conflict)) for r in records]
    bad = []
    for pi, conf in props:
        for r2 in records:
            if r2.pi != pi and conf <= r2.prop_assignment:
                bad.append((pi, r2.pi))
    return bad


@dataclass
class LowerBoundCertificate:
    n: int
    encoding: str
    set_size: int
    criticality_verified: dict[str, bool]
    noninterference_verified: bool
    uniqueness_mode: str
    pairs_checked: int = 0
    failures: list[str] = field(default_factory=list)

    @property
    def established(self) -> bool:
        return (
            self.set_size == math.factorial(self.n)
            and len(self.criticality_verified) == self.set_size
            and all(self.criticality_verified.values())
            and self.noninterference_verified
        )

    def to_json(self) -> str:
        d = {
            "n": self.n,
            "encoding": self.encoding,
            "set_size": self.set_size,
            "criticality_verified": self.criticality_verified,
            "noninterference_verified": self.noninterference_verified,
            "uniqueness_mode": self.uniqueness_mode,
            "pairs_checked": self.pairs_checked,
            "established": self.established,
            "failures": self.failures,
        }
        return json.dumps(d, indent=2, sort_keys=True)

    def report(self) -> str:
        ok = sum(self.criticality_verified.values())
        lines = [
            f"fkp2013 N={self.n} encoding={self.encoding} mode={self.uniqueness_mode}",
            f"critical assignments: {ok}/{self.set_size} verified",
            f"non-interference: {'ok' if self.noninterference_verified else 'FAILED'} over {self.pairs_checked} ordered pairs",
            f"lower bound on t-learn steps: {self.set_size if self.established else 'not established'}",
        ]
        lines += [f"  failure: {f}" for f in self.failures[:20]]
        return "\n".join(lines)


def perm_key(pi: Perm) -> str:
    return "".join(str(t) for t in pi) if len(pi) < 10 else "-".join(map(str, pi))


def certify_lower_bound(
    n: int, encoding: "Encoding | str", mode: "Mode | str" = Mode.WITNESS, max_n: int = 5, inst: EncodedInstance | None = None
) -> LowerBoundCertificate:
    from .encoder import encode
    from .program import build_fkp

    if n < 1:
        raise LowerBoundError("n must be at least 1")
    if n > max_n:
        raise LowerBoundError(f"{math.factorial(n)} assignments exceed the budget (n <= {max_n})")
    mode = Mode.parse(mode)
    encoding = Encoding.parse(encoding)
    if inst is None:
        inst = encode(build_fkp(n), encoding)
    records = []
    crit = {}
    failures = []
    for pi in itertools.permutations(range(1, n + 1)):
        rec = build_critical_assignment(pi, inst)
        v = verify_critical(rec, inst, mode)
        crit[perm_key(pi)] = v.ok
        failures += [f"pi={perm_key(pi)}: {f}" for f in v.failures]
        records.append(rec)
    bad = noninterference_failures(records, inst)
    failures += [f"conflict of {perm_key(a)} inside M of {perm_key(b)}" for a, b in bad]
    size = len(records)
    return LowerBoundCertificate(
        n=n,
        encoding=encoding.value,
        set_size=size,
        criticality_verified=crit,
        noninterference_verified=not bad,
        uniqueness_mode=mode.value,
        pairs_checked=size * (size - 1),
        failures=failures,
    )


def lemma_coverage(lemmas: Iterable[Sequence[Literal]], records: Sequence[CriticalAssignmentRecord]) -> dict[Perm, int | None]:
    """For each critical assignment, the index of a lemma lying inside it.

    A refutation must falsify M_pi with some learned theory clause, i.e. hold
    a lemma contained in H_pi.  Any such lemma contains the unique conflict of
    H_pi, so the lemmas covering different assignments are pairwise distinct.
    """
    lemmas = [frozenset(l) for l in lemmas]
    out: dict[Perm, int | None] = {}
    for rec in records:
        out[rec.pi] = next((k for k, lem in enumerate(lemmas) if lem <= rec.theory_literals), None)
    return out
