import random

import pytest

from fkpbound.dpllt import (
    Input,
    ProofTrace,
    Res,
    TLearn,
    TraceFormatError,
    check_proof,
    parse_trace,
    random_mutation,
    read_header,
    solve,
    solve_propositional,
    write_trace,
)
from fkpbound.encoder import Encoding, encode
from fkpbound.logic import build_abstraction, clause_satisfied, clock, eval_literal, lt, neg, pos
from fkpbound.program import build_fkp


class Inst:
    """Minimal instance wrapper for hand-built formulas."""

    def __init__(self, clauses):
        self.cnf = build_abstraction(clauses)
        self.amap = self.cnf.amap


def test_propositionally_unsat():
    x = lt(clock(0), clock(1))
    inst = Inst([[pos(x)], [neg(x)]])
    r = solve(inst)
    assert r.status == "unsat" and r.stats.t_learn_count == 0
    assert check_proof(r.trace, inst).valid


def test_theory_unsat_single_lemma():
    a, b = clock(0), clock(1)
    inst = Inst([[pos(lt(a, b))], [pos(lt(b, a))]])
    r = solve(inst)
    assert r.status == "unsat" and r.stats.t_learn_count == 1
    c = check_proof(r.trace, inst)
    assert c.valid and c.t_learn_count == 1


def test_propositional_sat_core():
    assert solve_propositional([[1, 2], [-1, 2], [1, -2]], 2) == frozenset({1, 2})
    assert solve_propositional([[1, 2], [-1, 2], [1, -2], [-1, -2]], 2) is None
    # pigeonhole 3 into 2
    v = lambda p, h: 2 * p + h + 1
    cls = [[v(p, 0), v(p, 1)] for p in range(3)]
    cls += [[-v(p, h), -v(q, h)] for h in range(2) for p in range(3) for q in range(p + 1, 3)]
    assert solve_propositional(cls, 6) is None


@pytest.mark.parametrize("n", [1, 2, 3])
@pytest.mark.parametrize("enc", list(Encoding))
def test_unsat_with_valid_trace(n, enc):
    inst = encode(build_fkp(n), enc)
    r = solve(inst)
    assert r.status == "unsat"
    c = check_proof(r.trace, inst)
    assert c.valid, c.first_error
    assert c.t_learn_count == r.stats.t_learn_count == r.trace.t_learn_count
    assert r.stats.t_learn_count >= [1, 1, 2, 6][n]
    assert r.stats.restarts == 0


@pytest.mark.parametrize("enc", list(Encoding))
def test_mutated_sat_with_model(enc):
    inst = encode(build_fkp(3).with_bound(2), enc)
    r = solve(inst)
    assert r.status == "sat"
    assert all(clause_satisfied(r.assignment, c) for c in inst.cnf.prop_clauses)
    for p in r.assignment:
        assert eval_literal(r.model, inst.amap.literal(p))


def test_eager_mode_also_valid():
    inst = encode(build_fkp(3), "E2")
    r = solve(inst, eager=True)
    assert r.status == "unsat" and check_proof(r.trace, inst).valid and r.stats.t_learn_count >= 6


def test_budget_gives_unknown():
    inst = encode(build_fkp(4), "E3")
    r = solve(inst, max_conflicts=3)
    assert r.status == "unknown" and r.trace is None


def test_seed_determinism():
    inst = encode(build_fkp(3), "E3")
    a, b = solve(inst, seed=5), solve(inst, seed=5)
    assert a.trace.steps == b.trace.steps


def test_alphabet_fixed():
    inst = encode(build_fkp(3), "E3")
    r = solve(inst)
    for s in r.trace.steps:
        if isinstance(s, TLearn):
            assert all(l.atom in inst.amap for l in s.lemma)


def test_text_roundtrip():
    inst = encode(build_fkp(2), "E2")
    r = solve(inst)
    text = write_trace(r.trace, inst, ["hello"])
    assert text.startswith("p fkp2013 E2 2 2\nc hello\ni 0\n")
    h = read_header(text)
    assert (h.encoding, h.n, h.bound) == ("E2", 2, 2)
    back = parse_trace(text, inst)
    assert back.steps == r.trace.steps and back.alpha == r.trace.alpha
    with pytest.raises(TraceFormatError, match="line 3"):
        parse_trace("p fkp2013 E2 2 2\ni 0\nt lt(clk:nope,clk:r1) ; 1\n", inst)


# ---------------------------------------------------------------- checker

@pytest.fixture(scope="module")
def valid():
    inst = encode(build_fkp(3), "E3")
    return inst, solve(inst).trace


def test_satisfiable_lemma_rejected(valid):
    inst, trace = valid
    k = next(i for i, s in enumerate(trace.steps) if isinstance(s, TLearn))
    s = trace.steps[k]
    lemma = s.lemma[1:]
    steps = list(trace.steps)
    steps[k] = TLearn(lemma, frozenset(-inst.amap.lit(l) for l in lemma))
    r = check_proof(ProofTrace(steps, trace.alpha), inst)
    assert not r.valid and r.first_error[0] == k and "satisfiable" in r.first_error[1]


def test_missing_pivot_rejected(valid):
    inst, trace = valid
    k = next(i for i, s in enumerate(trace.steps) if isinstance(s, Res))
    steps = list(trace.steps)
    steps[k] = Res(steps[k].i, steps[k].j, len(inst.amap) + 7)
    r = check_proof(ProofTrace(steps, trace.alpha), inst)
    assert not r.valid and r.first_error[0] == k


def test_hundred_random_mutations_rejected(valid):
    inst, trace = valid
    assert check_proof(trace, inst).valid
    rng = random.Random(2026)
    for _ in range(100):
        steps, k = random_mutation(trace, inst, rng)
        r = check_proof(ProofTrace(steps, trace.alpha), inst)
        assert not r.valid
        assert r.first_error[0] == k
