import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from fkpbound.encoder import encode
from fkpbound.logic import FiniteModel, ceq, clock, eval_literal, lt, neg, pos, rsel, rval, seq, vgt, vsucc, vzero, wsel
from fkpbound.lowerbound import build_critical_assignment, conflict_literals
from fkpbound.program import build_fkp
from fkpbound.theory import (
    BoundExhausted,
    BudgetExceeded,
    ContractViolation,
    DomainBounds,
    check_conjunction,
    explain_conflict,
    find_model_bounded,
    is_consistent,
    minimize_conflict,
)

a, b, c = clock(0), clock(1), clock(2)
x, y, z = rval(1), rval(3), rval(5)


def test_strict_cycle_unsat():
    assert check_conjunction([pos(lt(a, b)), pos(lt(b, a))]) is None


def test_forced_chain():
    m = check_conjunction([pos(vzero(x)), pos(vsucc(x, y)), pos(vgt(y, 0))])
    assert m[x] == 0 and m[y] == 1


def test_nonstrict_cycle_merges():
    # a <= b <= a forces a = b, so a != b is unsat
    lits = [neg(lt(b, a)), neg(lt(a, b)), neg(ceq(a, b))]
    assert check_conjunction(lits) is None
    m = check_conjunction(lits[:2])
    assert m[a] == m[b]


def test_selection_fragment():
    s, t, u = wsel(0), rsel(1), rsel(3)
    assert check_conjunction([pos(seq(s, t)), pos(seq(t, u)), neg(seq(s, u))]) is None
    m = check_conjunction([pos(seq(s, t)), neg(seq(s, u))])
    assert m[s] == m[t] != m[u]


def test_value_disequalities():
    assert check_conjunction([pos(vzero(x)), neg(vzero(x))]) is None
    assert check_conjunction([pos(vsucc(x, y)), neg(vsucc(x, y))]) is None
    # v > 0, v <= 1 and v != ... forces v = 1
    assert check_conjunction([pos(vgt(x, 0)), neg(vgt(x, 1)), pos(vsucc(y, x)), neg(vzero(y))]) is None
    m = check_conjunction([neg(vzero(x)), neg(vsucc(x, y)), neg(vgt(y, 3))])
    for lit in [neg(vzero(x)), neg(vsucc(x, y)), neg(vgt(y, 3))]:
        assert eval_literal(m, lit)


def test_self_successor_is_false():
    assert check_conjunction([pos(vsucc(x, x))]) is None
    assert check_conjunction([neg(vsucc(x, x))]) is not None


def test_integers_unbounded_by_default():
    m = check_conjunction([pos(vsucc(x, y)), pos(vzero(y))])
    assert m[x] == -1
    assert check_conjunction([pos(vsucc(x, y)), pos(vzero(y))], DomainBounds(4, 4, 0, 3)) is None


def test_bound_exhausted_for_clocks():
    with pytest.raises(BoundExhausted):
        check_conjunction([pos(lt(a, b)), pos(lt(b, c))], DomainBounds(2, 2, 0, 1))


def test_bounded_search_examples():
    m = find_model_bounded([pos(lt(a, b))], DomainBounds(2, 1, 0, 0))
    assert (m[a], m[b]) == (0, 1)
    with pytest.raises(BudgetExceeded):
        find_model_bounded([pos(lt(clock(i), clock(i + 1))) for i in range(12)], DomainBounds(13, 1), budget=1000)


def records(n, enc="E3"):
    inst = encode(build_fkp(n), enc)
    return inst, build_critical_assignment(tuple(range(1, n + 1)), inst)


def test_conflict_identity_n2_unsat():
    inst, rec = records(2)
    assert len(rec.conflict) == 4
    assert check_conjunction(rec.conflict) is None


def test_full_h_has_no_bounded_model():
    inst, rec = records(2)
    assert find_model_bounded(rec.theory_literals, DomainBounds.for_structure(inst.structure)) is None


def test_h_minus_zero_literal_matches_witness():
    inst, rec = records(2)
    zero = conflict_literals((1, 2), inst.structure)[0]
    rest = rec.theory_literals - {zero}
    m = find_model_bounded(rest, DomainBounds.for_structure(inst.structure))
    assert m is not None
    # the values are forced up to the chain 1, 2, 3 by the remaining literals
    assert {v: m[v] for v in (rval(1), rval(3), rval(5))} == {rval(1): 1, rval(3): 2, rval(5): 3}
    assert rec.witnesses[zero].val == m.val


def test_minimize_examples():
    s, t = wsel(0), rsel(1)
    assert set(minimize_conflict([pos(lt(a, b)), pos(lt(b, a)), pos(seq(s, t))])) == {pos(lt(a, b)), pos(lt(b, a))}
    inst, rec = records(2)
    assert set(minimize_conflict(rec.theory_literals)) == set(rec.conflict)
    assert set(minimize_conflict(rec.conflict)) == set(rec.conflict)
    with pytest.raises(ContractViolation):
        minimize_conflict([pos(lt(a, b))])


def test_explanation_is_subset():
    lits = [pos(lt(a, b)), pos(lt(b, c)), pos(lt(c, a)), pos(vzero(x))]
    core = explain_conflict(lits)
    assert set(core) <= set(lits) and not is_consistent(core)
    assert explain_conflict(lits[:2]) is None


# ---------------------------------------------------------------- agreement

CLOCKS = [clock(i) for i in range(6)]
SELS = [wsel(0), wsel(2), rsel(1), rsel(3), rsel(5), wsel(4)]
VALS = [rval(1), rval(3), rval(5)]


def _pair(vs):
    return st.tuples(st.sampled_from(vs), st.sampled_from(vs)).filter(lambda p: p[0] != p[1])


clock_atom = st.one_of(_pair(CLOCKS).map(lambda p: lt(*p)), _pair(CLOCKS).map(lambda p: ceq(*p)))
sel_atom = _pair(SELS).map(lambda p: seq(*p))
val_atom = st.one_of(
    st.sampled_from(VALS).map(vzero),
    st.tuples(st.sampled_from(VALS), st.sampled_from(VALS)).map(lambda p: vsucc(*p)),
    st.tuples(st.sampled_from(VALS), st.integers(-1, 1)).map(lambda p: vgt(*p)),
)


def literal_sets(atoms, max_size):
    return st.lists(st.tuples(atoms, st.booleans()), min_size=1, max_size=max_size).map(
        lambda xs: [pos(a) if s else neg(a) for a, s in xs]
    )


def _agree(lits, bounds):
    m = check_conjunction(lits)
    ref = find_model_bounded(lits, bounds)
    assert (m is None) == (ref is None), lits
    if m is not None:
        assert all(eval_literal(m, l) for l in lits)


FAST = settings(max_examples=400, deadline=None, suppress_health_check=[HealthCheck.too_slow])


@FAST
@given(literal_sets(clock_atom, 9))
def test_clock_agreement(lits):
    _agree(lits, DomainBounds(6, 1, 0, 0))


@FAST
@given(literal_sets(sel_atom, 9))
def test_selection_agreement(lits):
    _agree(lits, DomainBounds(1, 6, 0, 0))


@FAST
@given(literal_sets(val_atom, 7))
def test_value_agreement(lits):
    # three variables with constants in -1..1: any integer model can be shifted into -8..8
    _agree(lits, DomainBounds(1, 1, -8, 8))


@settings(max_examples=200, deadline=None)
@given(literal_sets(val_atom, 7))
def test_value_agreement_bounded(lits):
    bounds = DomainBounds(1, 1, 0, 3)
    m = check_conjunction(lits, bounds)
    ref = find_model_bounded(lits, bounds)
    assert (m is None) == (ref is None)
    if m is not None:
        assert all(0 <= v <= 3 for v in m.val.values())


@settings(max_examples=150, deadline=None)
@given(literal_sets(st.one_of(clock_atom, sel_atom, val_atom), 8))
def test_minimization_contract(lits):
    if is_consistent(lits):
        return
    core = minimize_conflict(lits)
    assert not is_consistent(core)
    for k in range(len(core)):
        assert is_consistent(core[:k] + core[k + 1:])
