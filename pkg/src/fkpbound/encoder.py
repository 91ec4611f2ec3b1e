"""Clausal partial-order encodings of a program structure.

Both encodings share PPO, WW, RW and RF_TO.  The cubic encoding adds the
read-from implications (RF3) and the from-read axiom (FR); the quadratic
encoding replaces FR by one supremum clock per read (RF2 and SUP).

Simplifications applied to both: guards are dropped (they are all True),
implications with conjunctive heads are split into one clause per conjunct,
the clock order is taken as total so WW and RW become disequalities, and the
non-strict ``a <= b`` is written as ``not (b < a)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from itertools import combinations

from .logic import (
    CnfFormula,
    Literal,
    build_abstraction,
    ceq,
    clock,
    lt,
    neg,
    pos,
    rsel,
    rval,
    seq,
    sup,
    vgt,
    vsucc,
    vzero,
    wsel,
)
from .program import ConstZero, ProgramStructure, ProgramError, validate_structure


class EncodingError(Exception):
    pass


class Family(enum.Enum):
    PPO = "PPO"
    WW = "WW"
    RW = "RW"
    RF_TO = "RF_TO"
    RF3 = "RF3"
    FR = "FR"
    RF2 = "RF2"
    SUP = "SUP"
    ASSERT = "ASSERT"


class Encoding(enum.Enum):
    CUBIC = "E3"
    QUADRATIC = "E2"

    @classmethod
    def parse(cls, s: "str | Encoding") -> "Encoding":
        if isinstance(s, Encoding):
            return s
        key = s.strip().upper()
        aliases = {"E3": cls.CUBIC, "CUBIC": cls.CUBIC, "E2": cls.QUADRATIC, "QUADRATIC": cls.QUADRATIC}
        if key not in aliases:
            raise ValueError(f"unknown encoding {s!r}")
        return aliases[key]


ORDER = {
    Encoding.CUBIC: (Family.PPO, Family.WW, Family.RW, Family.RF3, Family.FR, Family.RF_TO, Family.ASSERT),
    Encoding.QUADRATIC: (Family.PPO, Family.WW, Family.RW, Family.RF2, Family.SUP, Family.RF_TO, Family.ASSERT),
}


@dataclass(frozen=True)
class EncodedInstance:
    cnf: CnfFormula
    family_of: tuple[Family, ...]
    encoding: Encoding
    n: int
    structure: ProgramStructure

    @property
    def bound(self) -> int:
        return self.structure.bound

    @property
    def clauses(self):
        return self.cnf.clauses

    @property
    def amap(self):
        return self.cnf.amap

    def family_clauses(self, fam: Family) -> list[frozenset[Literal]]:
        return [c for c, f in zip(self.cnf.clauses, self.family_of) if f is fam]


def _value_atom(p: ProgramStructure, w: int, r: int):
    term = p.val[w]
    if isinstance(term, ConstZero):
        return vzero(rval(r))
    return vsucc(rval(term.read), rval(r))


def _check(p: ProgramStructure) -> None:
    diags = validate_structure(p)
    if diags:
        if "guards must be the constant True on every event" in diags:
            raise EncodingError("non-trivial guards are not supported")
        raise ProgramError("; ".join(diags))


def encode_family(p: ProgramStructure, fam: Family) -> list[list[Literal]]:
    """Clauses of one constraint family, in deterministic order."""
    _check(p)
    W = [e.id for e in p.writes]
    R = [e.id for e in p.reads]
    out: list[list[Literal]] = []
    if fam is Family.PPO:
        for a, b in sorted(p.ppo):
            out.append([pos(lt(clock(a), clock(b)))])
    elif fam is Family.WW:
        for w, w2 in combinations(W, 2):
            out.append([neg(ceq(clock(w), clock(w2)))])
            out.append([neg(seq(wsel(w), wsel(w2)))])
    elif fam is Family.RW:
        for w in W:
            for r in R:
                out.append([neg(ceq(clock(w), clock(r)))])
    elif fam is Family.RF_TO:
        for r in R:
            out.append([pos(seq(wsel(w), rsel(r))) for w in W])
    elif fam is Family.RF3:
        for w in W:
            for r in R:
                out.append([neg(seq(wsel(w), rsel(r))), pos(lt(clock(w), clock(r)))])
        for w in W:
            for r in R:
                out.append([neg(seq(wsel(w), rsel(r))), pos(_value_atom(p, w, r))])
    elif fam is Family.FR:
        # w == w' is vacuous under an irreflexive order and is skipped.
        for w in W:
            for w2 in W:
                if w == w2:
                    continue
                for r in R:
                    out.append([
                        neg(seq(wsel(w), rsel(r))),
                        neg(lt(clock(w), clock(w2))),
                        pos(lt(clock(r), clock(w2))),
                    ])
    elif fam is Family.RF2:
        for w in W:
            for r in R:
                s = neg(seq(wsel(w), rsel(r)))
                out.append([s, pos(ceq(clock(w), sup(r)))])
                out.append([s, pos(lt(clock(w), clock(r)))])
                out.append([s, pos(_value_atom(p, w, r))])
    elif fam is Family.SUP:
        # (w <= r) -> (w <= sup r)   ==   (r < w) or not (sup r < w)
        for w in W:
            for r in R:
                out.append([pos(lt(clock(r), clock(w))), neg(lt(sup(r), clock(w)))])
    elif fam is Family.ASSERT:
        ra, k = p.assertion
        out.append([pos(vgt(rval(ra), k))])
    else:  # pragma: no cover
        raise EncodingError(f"unknown family {fam}")
    return out


def _encode(p: ProgramStructure, encoding: Encoding) -> EncodedInstance:
    clauses: list[list[Literal]] = []
    tags: list[Family] = []
    for fam in ORDER[encoding]:
        fc = encode_family(p, fam)
        clauses.extend(fc)
        tags.extend([fam] * len(fc))
    return EncodedInstance(build_abstraction(clauses), tuple(tags), encoding, p.n, p)


def encode_cubic(p: ProgramStructure) -> EncodedInstance:
    return _encode(p, Encoding.CUBIC)


def encode_quadratic(p: ProgramStructure) -> EncodedInstance:
    return _encode(p, Encoding.QUADRATIC)


def encode(p: ProgramStructure, encoding: "Encoding | str") -> EncodedInstance:
    return _encode(p, Encoding.parse(encoding))


def closed_form_counts(n: int, encoding: Encoding) -> dict[Family, int]:
    """Per-family clause counts of the fkp instance with n threads (|W| = |R| = n+1)."""
    m = n + 1
    counts = {
        Family.PPO: 2 * n + 1,
        Family.WW: m * (m - 1),
        Family.RW: m * m,
        Family.RF_TO: m,
        Family.ASSERT: 1,
    }
    if encoding is Encoding.CUBIC:
        counts[Family.RF3] = 2 * m * m
        counts[Family.FR] = n * m * m
    else:
        counts[Family.RF2] = 3 * m * m
        counts[Family.SUP] = m * m
    return counts


@dataclass(frozen=True)
class ClauseStats:
    n: int
    encoding: Encoding
    counts: dict[Family, int]
    total: int
    atoms: int
    closed_form_ok: bool
    notes: tuple[str, ...]


def clause_stats(inst: EncodedInstance) -> ClauseStats:
    counts = {f: 0 for f in ORDER[inst.encoding]}
    for f in inst.family_of:
        counts[f] += 1
    n = inst.n
    expect = closed_form_counts(n, inst.encoding)
    ok = counts == expect
    if inst.encoding is Encoding.CUBIC:
        ok = ok and counts[Family.FR] == n * (n + 1) ** 2
    else:
        ok = ok and counts[Family.SUP] == (n + 1) ** 2
    notes = ("FR ranges over ordered pairs of distinct writes",) if inst.encoding is Encoding.CUBIC else ()
    return ClauseStats(n, inst.encoding, counts, len(inst.family_of), len(inst.amap), ok, notes)
