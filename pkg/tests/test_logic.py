import itertools

import pytest
from hypothesis import given, strategies as st

from fkpbound.logic import (
    AbstractionMap,
    CanonicalizationError,
    FiniteModel,
    Atom,
    Literal,
    LogicError,
    Op,
    UnassignedVariable,
    build_abstraction,
    ceq,
    clause_satisfied,
    clock,
    eval_literal,
    is_full_assignment,
    lt,
    make_assignment,
    make_clause,
    neg,
    pos,
    resolve,
    rsel,
    rval,
    seq,
    sup,
    vgt,
    vsucc,
    vzero,
    wsel,
)


def test_single_atom_formula():
    f = build_abstraction([[pos(lt(clock(1), clock(2)))]])
    assert len(f.amap) == 1
    assert f.amap.var(lt(clock(1), clock(2))) == 0
    assert f.prop_clauses == [frozenset({1})]


def test_shared_atom_gets_one_index():
    a = lt(clock(1), clock(2))
    f = build_abstraction([[pos(a)], [neg(a), pos(vzero(rval(3)))]])
    assert len(f.amap) == 2
    i = f.amap.var(a) + 1
    assert i in f.prop_clauses[0] and -i in f.prop_clauses[1]


def test_symmetric_atoms_canonical():
    assert ceq(clock(3), clock(1)) == ceq(clock(1), clock(3))
    assert seq(rsel(1), wsel(2)) == seq(wsel(2), rsel(1))
    raw = Atom(Op.CEQ, (clock(3), clock(1)))
    with pytest.raises(CanonicalizationError):
        AbstractionMap([raw])


def test_atom_sort_checks():
    with pytest.raises(LogicError):
        Atom(Op.LT, (clock(0), rval(1)))
    with pytest.raises(LogicError):
        lt(clock(1), clock(1))
    with pytest.raises(LogicError):
        Atom(Op.VGT, (rval(1),))
    # a read-from clause instantiates u + 1 = u, which is legal and false
    assert vsucc(rval(1), rval(1)).args == (rval(1), rval(1))


def test_clause_rejects_complementary_pair():
    a = lt(clock(0), clock(1))
    with pytest.raises(LogicError):
        make_clause([pos(a), neg(a)])
    assert make_clause([]) == frozenset()


def test_empty_cnf_rejected_but_empty_clause_allowed():
    with pytest.raises(LogicError):
        build_abstraction([])
    f = build_abstraction([[]])
    assert f.prop_clauses == [frozenset()]


def test_abstraction_roundtrip():
    atoms = [lt(clock(0), clock(1)), ceq(clock(0), sup(1)), seq(wsel(0), rsel(1)), vgt(rval(1), 2)]
    f = build_abstraction([[pos(a)] for a in atoms])
    for a in atoms:
        assert f.amap.atom(f.amap.var(a)) == a
        lit = neg(a)
        assert f.amap.literal(f.amap.lit(lit)) == lit


def test_eval_literal_examples():
    m = FiniteModel()
    m[clock(1)], m[clock(2)] = 0, 1
    assert eval_literal(m, pos(lt(clock(1), clock(2))))
    m[rval(5)] = 0
    assert not eval_literal(m, neg(vzero(rval(5))))
    with pytest.raises(UnassignedVariable, match="rval:6"):
        eval_literal(m, pos(vzero(rval(6))))


def test_resolve_examples():
    assert resolve({1, 2}, {-1}, 1).clause == frozenset({2})
    r = resolve({1}, {-1}, 1)
    assert r.clause == frozenset() and not r.tautological
    r = resolve({1, 2}, {-1, -2}, 1)
    assert r.clause == frozenset({2, -2}) and r.tautological
    assert resolve({-1, 3}, {1}, 1).clause == frozenset({3})
    with pytest.raises(LogicError):
        resolve({1, 2}, {2}, 1)


def test_clause_satisfied_examples():
    assert clause_satisfied({1}, {1, 2})
    assert not clause_satisfied({-1, -2}, {1, 2})
    assert not clause_satisfied({1, 2, 3}, set())


def test_assignments():
    with pytest.raises(LogicError):
        make_assignment([1, -1])
    assert is_full_assignment(make_assignment([1, -2]), 2)
    assert not is_full_assignment(make_assignment([1]), 2)


clauses_st = st.lists(st.integers(1, 6).flatmap(lambda v: st.sampled_from([v, -v])), min_size=1, max_size=5)


@given(clauses_st, clauses_st, st.integers(1, 6))
def test_resolution_sound_exhaustively(c1, c2, pivot):
    c1, c2 = set(c1) | {pivot}, set(c2) | {-pivot}
    if any(-x in c1 for x in c1 if x != pivot) or any(-x in c2 for x in c2 if x != -pivot):
        return
    res = resolve(c1, c2, pivot).clause
    for bits in itertools.product([1, -1], repeat=6):
        m = {s * (i + 1) for i, s in enumerate(bits)}
        if clause_satisfied(m, c1) and clause_satisfied(m, c2):
            assert clause_satisfied(m, res)


@given(st.integers(-3, 3), st.integers(-3, 3), st.integers(-2, 2))
def test_negation_flips_truth(x, y, k):
    m = FiniteModel()
    m[rval(1)], m[rval(2)], m[clock(1)], m[clock(2)] = x, y, x, y
    for a in [vzero(rval(1)), vsucc(rval(1), rval(2)), vgt(rval(2), k), lt(clock(1), clock(2))]:
        assert eval_literal(m, neg(a)) == (not eval_literal(m, pos(a)))
