"""Sorted variables, theory atoms, literals, clauses and the propositional abstraction.

Three sorts share one atom alphabet: clocks (event clocks and read suprema),
selection variables, and read values.  Atoms are built through the factory
functions below, which put symmetric atoms into canonical argument order so
each semantic atom has exactly one representation.

Propositional literals are signed integers in DIMACS style: variable index
``i`` (dense, from 0) appears as ``i + 1`` positively and ``-(i + 1)``
negatively.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Sequence


class LogicError(Exception):
    """Malformed logical object."""


class CanonicalizationError(LogicError):
    """An atom is not in canonical form, so two spellings could share a meaning."""


class UnassignedVariable(LogicError):
    def __init__(self, var: "Var"):
        super().__init__(f"variable {var} is not assigned by the model")
        self.var = var


class Sort(enum.Enum):
    CLOCK = "clock"
    SEL = "sel"
    VAL = "val"


# kind -> (sort, canonical rank)
_KINDS = {
    "clk": (Sort.CLOCK, 0),
    "sup": (Sort.CLOCK, 1),
    "wsel": (Sort.SEL, 2),
    "rsel": (Sort.SEL, 3),
    "rval": (Sort.VAL, 4),
}


@dataclass(frozen=True)
class Var:
    """A first-order constant attached to an event.

    ``kind`` is one of ``clk`` (clock of any event), ``sup`` (supremum clock of
    a read), ``wsel``/``rsel`` (selection of a write/read) and ``rval`` (value
    read by a read).  ``event`` is the dense event id.
    """

    kind: str
    event: int

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise LogicError(f"unknown variable kind {self.kind!r}")

    @property
    def sort(self) -> Sort:
        return _KINDS[self.kind][0]

    @property
    def key(self) -> tuple[int, int]:
        return (_KINDS[self.kind][1], self.event)

    def __lt__(self, other: "Var") -> bool:
        return self.key < other.key

    def __str__(self) -> str:
        return f"{self.kind}:{self.event}"


def clock(event: int) -> Var:
    return Var("clk", event)


def sup(read: int) -> Var:
    return Var("sup", read)


def wsel(write: int) -> Var:
    return Var("wsel", write)


def rsel(read: int) -> Var:
    return Var("rsel", read)


def rval(read: int) -> Var:
    return Var("rval", read)


class Op(enum.IntEnum):
    LT = 0
    CEQ = 1
    SEQ = 2
    VZERO = 3
    VSUCC = 4
    VGT = 5


_OP_SORT = {
    Op.LT: Sort.CLOCK,
    Op.CEQ: Sort.CLOCK,
    Op.SEQ: Sort.SEL,
    Op.VZERO: Sort.VAL,
    Op.VSUCC: Sort.VAL,
    Op.VGT: Sort.VAL,
}
_ARITY = {Op.LT: 2, Op.CEQ: 2, Op.SEQ: 2, Op.VZERO: 1, Op.VSUCC: 2, Op.VGT: 1}
_SYMMETRIC = {Op.CEQ, Op.SEQ}


@dataclass(frozen=True)
class Atom:
    """A theory atom.  Use the factory functions rather than this constructor.

    LT(a, b)      a < b over clocks
    CEQ(a, b)     a = b over clocks
    SEQ(s, t)     s = t over selections
    VZERO(v)      v = 0
    VSUCC(u, v)   u + 1 = v
    VGT(v, k)     v > k
    """

    op: Op
    args: tuple[Var, ...]
    const: int | None = None

    def __post_init__(self):
        if len(self.args) != _ARITY[self.op]:
            raise LogicError(f"{self.op.name} takes {_ARITY[self.op]} arguments")
        want = _OP_SORT[self.op]
        for a in self.args:
            if a.sort is not want:
                raise LogicError(f"{self.op.name} argument {a} is not of sort {want.value}")
        if (self.op is Op.VGT) != (self.const is not None):
            raise LogicError("only VGT carries an integer constant")
        # VSUCC(u, u) is legal: the RF3 family instantiates it and it is simply false.
        if self.op in (Op.LT, Op.CEQ, Op.SEQ) and self.args[0] == self.args[1]:
            raise LogicError(f"{self.op.name} with identical arguments {self.args[0]}")

    @property
    def sort(self) -> Sort:
        return _OP_SORT[self.op]

    @property
    def key(self) -> tuple:
        return (int(self.op), tuple(a.key for a in self.args), self.const or 0)

    def is_canonical(self) -> bool:
        if self.op in _SYMMETRIC:
            return self.args[0] < self.args[1]
        return True

    def __lt__(self, other: "Atom") -> bool:
        return self.key < other.key

    def __str__(self) -> str:
        inner = ",".join(str(a) for a in self.args)
        if self.const is not None:
            inner += f",{self.const}"
        return f"{self.op.name.lower()}({inner})"


def lt(a: Var, b: Var) -> Atom:
    return Atom(Op.LT, (a, b))


def ceq(a: Var, b: Var) -> Atom:
    return Atom(Op.CEQ, tuple(sorted((a, b))))


def seq(a: Var, b: Var) -> Atom:
    return Atom(Op.SEQ, tuple(sorted((a, b))))


def vzero(v: Var) -> Atom:
    return Atom(Op.VZERO, (v,))


def vsucc(u: Var, v: Var) -> Atom:
    return Atom(Op.VSUCC, (u, v))


def vgt(v: Var, k: int) -> Atom:
    return Atom(Op.VGT, (v,), int(k))


@dataclass(frozen=True)
class Literal:
    atom: Atom
    positive: bool = True

    def __neg__(self) -> "Literal":
        return Literal(self.atom, not self.positive)

    @property
    def key(self) -> tuple:
        return (self.atom.key, not self.positive)

    def __lt__(self, other: "Literal") -> bool:
        return self.key < other.key

    def __str__(self) -> str:
        return str(self.atom) if self.positive else f"!{self.atom}"


def pos(atom: Atom) -> Literal:
    return Literal(atom, True)


def neg(atom: Atom) -> Literal:
    return Literal(atom, False)


def make_clause(lits: Iterable[Literal]) -> frozenset[Literal]:
    """Build a theory clause, rejecting complementary pairs."""
    clause = frozenset(lits)
    atoms = [lit.atom for lit in clause]
    if len(set(atoms)) != len(atoms):
        raise LogicError("clause contains an atom in both polarities")
    return clause


Clause = frozenset  # of Literal
PropClause = frozenset  # of int


class AbstractionMap:
    """Bijection between the atoms of a formula and dense propositional variables."""

    def __init__(self, atoms: Iterable[Atom]):
        uniq = set(atoms)
        for a in uniq:
            if not a.is_canonical():
                raise CanonicalizationError(f"atom {a} is not in canonical argument order")
        self._atoms: tuple[Atom, ...] = tuple(sorted(uniq, key=lambda a: a.key))
        self._index = {a: i for i, a in enumerate(self._atoms)}

    def __len__(self) -> int:
        return len(self._atoms)

    def __contains__(self, atom: Atom) -> bool:
        return atom in self._index

    @property
    def atoms(self) -> tuple[Atom, ...]:
        return self._atoms

    def var(self, atom: Atom) -> int:
        try:
            return self._index[atom]
        except KeyError:
            raise LogicError(f"atom {atom} is outside the alphabet") from None

    def atom(self, var: int) -> Atom:
        return self._atoms[var]

    def lit(self, literal: Literal) -> int:
        v = self.var(literal.atom) + 1
        return v if literal.positive else -v

    def literal(self, plit: int) -> Literal:
        if plit == 0:
            raise LogicError("0 is not a propositional literal")
        return Literal(self._atoms[abs(plit) - 1], plit > 0)

    def clause(self, clause: Iterable[Literal]) -> frozenset[int]:
        return frozenset(self.lit(lit) for lit in clause)

    def literals(self, plits: Iterable[int]) -> list[Literal]:
        return [self.literal(p) for p in plits]


@dataclass(frozen=True)
class CnfFormula:
    clauses: tuple[frozenset[Literal], ...]
    amap: AbstractionMap = field(compare=False)

    @property
    def prop_clauses(self) -> list[frozenset[int]]:
        return [self.amap.clause(c) for c in self.clauses]

    @property
    def num_vars(self) -> int:
        return len(self.amap)


def build_abstraction(clauses: Sequence[Iterable[Literal]]) -> CnfFormula:
    """Attach an abstraction map to a clause list.

    Duplicate clauses are kept; literals inside a clause are deduplicated.
    """
    if not isinstance(clauses, (list, tuple)) or len(clauses) == 0:
        raise LogicError("a CNF needs a nonempty clause list")
    built = tuple(make_clause(c) for c in clauses)
    amap = AbstractionMap(lit.atom for c in built for lit in c)
    return CnfFormula(built, amap)


class Resolvent(NamedTuple):
    clause: frozenset[int]
    tautological: bool


def resolve(c1: Iterable[int], c2: Iterable[int], pivot: int) -> Resolvent:
    """Propositional resolution on variable ``pivot`` (a positive DIMACS variable).

    The pivot may occur positively in either clause as long as it occurs
    negatively in the other.
    """
    c1, c2 = frozenset(c1), frozenset(c2)
    if pivot <= 0:
        raise LogicError(f"pivot must be a positive variable, got {pivot}")
    if pivot in c1 and -pivot in c2:
        res = (c1 - {pivot}) | (c2 - {-pivot})
    elif -pivot in c1 and pivot in c2:
        res = (c1 - {-pivot}) | (c2 - {pivot})
    else:
        raise LogicError(f"pivot {pivot} does not occur with opposite polarities")
    return Resolvent(res, is_tautology(res))


def is_tautology(clause: Iterable[int]) -> bool:
    s = set(clause)
    return any(-x in s for x in s)


def make_assignment(lits: Iterable[int]) -> frozenset[int]:
    m = frozenset(lits)
    if 0 in m or any(-x in m for x in m):
        raise LogicError("assignment contains a variable in both polarities")
    return m


def is_full_assignment(assignment: frozenset[int], num_vars: int) -> bool:
    return all((v in assignment) or (-v in assignment) for v in range(1, num_vars + 1))


def clause_satisfied(assignment: frozenset[int] | set[int], clause: Iterable[int]) -> bool:
    return any(x in assignment for x in clause)


@dataclass
class FiniteModel:
    """Integer valuation of clock, selection and value variables."""

    clock: dict[Var, int] = field(default_factory=dict)
    sel: dict[Var, int] = field(default_factory=dict)
    val: dict[Var, int] = field(default_factory=dict)

    def _table(self, var: Var) -> dict[Var, int]:
        return {Sort.CLOCK: self.clock, Sort.SEL: self.sel, Sort.VAL: self.val}[var.sort]

    def __getitem__(self, var: Var) -> int:
        try:
            return self._table(var)[var]
        except KeyError:
            raise UnassignedVariable(var) from None

    def __setitem__(self, var: Var, value: int) -> None:
        self._table(var)[var] = int(value)

    def get(self, var: Var, default=None):
        return self._table(var).get(var, default)

    def copy(self) -> "FiniteModel":
        return FiniteModel(dict(self.clock), dict(self.sel), dict(self.val))

    def merged(self, other: Mapping[Var, int]) -> "FiniteModel":
        out = self.copy()
        for v, x in other.items():
            out[v] = x
        return out


def eval_atom(model: FiniteModel, atom: Atom) -> bool:
    a = [model[v] for v in atom.args]
    op = atom.op
    if op is Op.LT:
        return a[0] < a[1]
    if op in (Op.CEQ, Op.SEQ):
        return a[0] == a[1]
    if op is Op.VZERO:
        return a[0] == 0
    if op is Op.VSUCC:
        return a[0] + 1 == a[1]
    return a[0] > atom.const


def eval_literal(model: FiniteModel, lit: Literal) -> bool:
    return eval_atom(model, lit.atom) == lit.positive


def literal_vars(lits: Iterable[Literal]) -> set[Var]:
    return {v for lit in lits for v in lit.atom.args}
