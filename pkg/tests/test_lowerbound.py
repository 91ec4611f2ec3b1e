import itertools
import json
import math
from dataclasses import replace

import pytest

from fkpbound.dpllt import solve
from fkpbound.encoder import Encoding, encode
from fkpbound.logic import clause_satisfied, clock, eval_literal, rsel, rval, sup, wsel
from fkpbound.lowerbound import (
    LowerBoundError,
    Mode,
    build_critical_assignment,
    build_witness_models,
    certify_lower_bound,
    conflict_literals,
    enumerate_minimal_conflicts,
    lemma_coverage,
    necessary_literals,
    noninterference_failures,
    sigma,
    verify_critical,
)
from fkpbound.program import build_fkp


def names(p, ids):
    return [p.name(i) for i in ids]


def test_sigma_examples():
    p = build_fkp(2)
    assert names(p, sigma((1, 2), p)) == ["winit", "r1", "w1", "r2", "w2", "rassert"]
    assert names(p, sigma((2, 1), p)) == ["winit", "r2", "w2", "r1", "w1", "rassert"]
    p1 = build_fkp(1)
    assert names(p1, sigma((1,), p1)) == ["winit", "r1", "w1", "rassert"]
    with pytest.raises(LowerBoundError):
        sigma((1,), p)


def test_base_model_identity_n2():
    inst = encode(build_fkp(2), "E2")
    base, _ = build_witness_models((1, 2), inst)
    assert [base[clock(e)] for e in range(6)] == [1, 2, 3, 4, 5, 6]
    assert base[wsel(0)] == base[rsel(1)] == 0
    assert base[wsel(2)] == base[rsel(3)] == 1
    assert base[wsel(4)] == base[rsel(5)] == 2
    # suprema: the clock of the write each read observes
    assert (base[sup(1)], base[sup(3)], base[sup(5)]) == (1, 3, 5)


def witness_chain(n, pi, k):
    inst = encode(build_fkp(n), "E3")
    p = inst.structure
    _, wit = build_witness_models(pi, inst)
    lit = conflict_literals(pi, p)[k]
    reads = [p.r(t) for t in pi] + [p.assert_read]
    return [wit[lit][rval(r)] for r in reads]


def test_witness_values_n2():
    # chain positions c0, c1, c2 = r_pi1, r_pi2, rassert
    assert witness_chain(2, (1, 2), 0) == [1, 2, 3]
    assert witness_chain(2, (1, 2), 1) == [0, 2, 3]
    assert witness_chain(2, (1, 2), 2) == [0, 1, 3]
    assert witness_chain(2, (1, 2), 3) == [0, 1, 2]
    assert witness_chain(2, (2, 1), 0) == [1, 2, 3]


def test_witness_values_n1():
    assert witness_chain(1, (1,), 2) == [0, 1]  # rassert = N


def test_conflict_identity_n2():
    p = build_fkp(2)
    lits = [str(l) for l in conflict_literals((1, 2), p)]
    assert lits == ["vzero(rval:1)", "vsucc(rval:1,rval:3)", "vsucc(rval:3,rval:5)", "vgt(rval:5,2)"]


@pytest.mark.parametrize("enc", list(Encoding))
def test_record_invariants(enc):
    inst = encode(build_fkp(3), enc)
    for pi in itertools.permutations((1, 2, 3)):
        rec = build_critical_assignment(pi, inst)
        assert len(rec.conflict) == 5
        assert set(rec.conflict) <= rec.theory_literals
        assert len(rec.prop_assignment) == len(inst.amap)
        assert all(clause_satisfied(rec.prop_assignment, c) for c in inst.cnf.prop_clauses)


def test_m_satisfies_all_60_clauses():
    inst = encode(build_fkp(2), "E3")
    rec = build_critical_assignment((1, 2), inst)
    assert len(inst.clauses) == 60
    assert all(clause_satisfied(rec.prop_assignment, c) for c in inst.cnf.prop_clauses)


def test_base_polarizes_clock_and_selection_literals():
    inst = encode(build_fkp(2), "E3")
    rec = build_critical_assignment((1, 2), inst)
    for l in rec.theory_literals:
        if l.atom.sort.value != "val":
            assert eval_literal(rec.base, l)


@pytest.mark.parametrize("n", [2, 3])
@pytest.mark.parametrize("enc", list(Encoding))
def test_verify_witness_mode(n, enc):
    inst = encode(build_fkp(n), enc)
    for pi in itertools.permutations(range(1, n + 1)):
        assert verify_critical(build_critical_assignment(pi, inst), inst).ok


@pytest.mark.parametrize("enc", list(Encoding))
def test_bruteforce_unique_conflict_n2(enc):
    inst = encode(build_fkp(2), enc)
    for pi in itertools.permutations((1, 2)):
        v = verify_critical(build_critical_assignment(pi, inst), inst, Mode.BRUTEFORCE)
        assert v.ok and v.minimal_conflicts == 1


def test_mus_enumeration_small():
    from fkpbound.logic import lt, neg, pos, vzero

    a, b, c = clock(0), clock(1), clock(2)
    lits = [pos(lt(a, b)), pos(lt(b, a)), pos(lt(b, c)), pos(lt(c, b)), pos(vzero(rval(1)))]
    mus = enumerate_minimal_conflicts(lits)
    assert sorted(sorted(str(l) for l in m) for m in mus) == [
        ["lt(clk:0,clk:1)", "lt(clk:1,clk:0)"],
        ["lt(clk:1,clk:2)", "lt(clk:2,clk:1)"],
    ]
    # two disjoint conflicts: no literal is necessary
    assert necessary_literals(lits) == []


def test_corrupted_record_fails():
    inst = encode(build_fkp(2), "E3")
    rec = build_critical_assignment((1, 2), inst)
    # flip one clock literal
    victim = next(l for l in sorted(rec.theory_literals, key=lambda l: l.key) if l.atom.sort.value == "clock" and l.positive)
    h = (rec.theory_literals - {victim}) | {-victim}
    bad = replace(rec, theory_literals=h, prop_assignment=frozenset(inst.amap.lit(l) for l in h))
    v = verify_critical(bad, inst)
    assert not v.ok
    assert any(f.startswith("(a)") or f.startswith("(c)") for f in v.failures)


def test_noninterference_detects_duplicate():
    inst = encode(build_fkp(2), "E3")
    r = build_critical_assignment((1, 2), inst)
    r2 = replace(r, pi=(2, 1))
    assert noninterference_failures([r, r2], inst)


@pytest.mark.parametrize("n,enc", [(3, "E3"), (4, "E2"), (1, "E3")])
def test_certificate(n, enc):
    cert = certify_lower_bound(n, enc)
    assert cert.established
    assert cert.set_size == math.factorial(n)
    d = json.loads(cert.to_json())
    assert d["established"] and d["set_size"] == math.factorial(n)
    assert "lower bound on t-learn steps" in cert.report()


def test_certificate_n5_pairs():
    cert = certify_lower_bound(5, "E3")
    assert cert.established and cert.set_size == 120 and cert.pairs_checked == 14280


def test_certificate_budget():
    with pytest.raises(LowerBoundError):
        certify_lower_bound(6, "E3")


@pytest.mark.parametrize("n", [3, 4])
@pytest.mark.parametrize("enc", list(Encoding))
def test_solver_lemmas_cover_every_critical_assignment(n, enc):
    inst = encode(build_fkp(n), enc)
    res = solve(inst)
    recs = [build_critical_assignment(pi, inst) for pi in itertools.permutations(range(1, n + 1))]
    cover = lemma_coverage([l for _, l in res.trace.lemmas()], recs)
    assert all(k is not None for k in cover.values())
    assert len(set(cover.values())) == math.factorial(n)
