"""Evaluator details not exercised elsewhere: clause normalization
helpers, sharing flags, reshape, and Dec-returning extraction."""

import pytest

from eslc import corpus
from eslc.evaluate import call, varr
from eslc.extract import ExtractOptions, kompile
from eslc.ir import Function, Let
from eslc.kaleid import KaleidBackend, interp_kaleid
from eslc.loader import load_sources
from eslc.normalize import (NotGroundable, ReductionPolicy, check_rewrite,
                            normalise_clause)


def test_normalise_clause_inlines_helpers_and_keeps_sharing():
    e = load_sources([("sh", corpus.SHARING)])
    d = e.env.lookup("ex8")
    cl = normalise_clause(d.payload.clauses[0], e.env)
    assert isinstance(cl.body, Let)  # a + a keeps its binding
    faithful = normalise_clause(d.payload.clauses[0], e.env,
                                ReductionPolicy(faithful_lets=True))
    assert not isinstance(faithful.body, Let)


def test_normalise_clause_on_absurd_clause_is_identity():
    e = load_sources([("ex", corpus.EX7)])
    d = e.env.lookup("ex11")
    cl = d.payload.clauses[0]
    assert normalise_clause(cl, e.env).body is None


def test_env_lookup_function_after_elaboration():
    e = load_sources([("log2", corpus.LOG2)])
    d = e.env.lookup("log2")
    assert isinstance(d.payload, Function) and len(d.payload.clauses) == 1
    assert len(e.env.lookup("log2'").payload.clauses) == 3


def test_faithful_lets_duplicates_in_extraction():
    e = load_sources([("sh", corpus.SHARING)])
    shared = kompile("ex8", [], [], KaleidBackend(), e.env, e.rules,
                     def_meta=e.def_meta)
    assert shared.count("x * x") == 1
    eager = kompile("ex8", [], [], KaleidBackend(), e.env, e.rules,
                    ExtractOptions(faithful_lets=True), e.def_meta)
    assert eager.count("x * x") == 2  # the bound sum is spelled out twice
    for text, name in [(shared, "shared"), (eager, "eager")]:
        assert interp_kaleid(text, "ex8", [3]) == 2 * (9 + 9 + 5), name


def test_rewrites_apply_during_extraction():
    src = corpus.REWRITES + """
useplus : Nat -> Nat
useplus x = (x + 0) * 2
"""
    e = load_sources([("t", src)])
    out = kompile("useplus", [], [], KaleidBackend(), e.env, e.rules,
                  def_meta=e.def_meta)
    assert "+ 0" not in out
    assert interp_kaleid(out, "useplus", [5]) == 10


def test_check_rewrite_not_groundable_for_function_variables():
    e = load_sources([("rw", corpus.REWRITES)])
    rule = next(r for r in e.rules.rules if r.name == "map-comp")
    with pytest.raises(NotGroundable):
        check_rewrite(rule, 10, e.env)


def test_reshape_checks_element_count():
    ok = """
flat23 : Ar Float 2 (2 ∷ 3 ∷ []) -> Ar Float 1 (6 ∷ [])
flat23 a = reshape (6 ∷ []) a
"""
    e = load_sources([("r", ok)])
    out = call(e.env, "flat23", [varr((2, 3), [1.0, 2, 3, 4, 5, 6])])
    assert out[1] == (6,)
    from eslc.elaborate import UnprovenConstraint
    bad = ok.replace("(6 ∷ [])", "(7 ∷ [])").replace("1 (6", "1 (7")
    with pytest.raises(UnprovenConstraint):
        load_sources([("r", bad)])


def test_dec_returning_function_extracts_to_comparison():
    src = "isEq : (a b : Nat) -> Dec (a ≡ b)\nisEq a b = a ≟ b\n"
    e = load_sources([("d", src)])
    out = kompile("isEq", ["_≟_"], [], KaleidBackend(), e.env, e.rules,
                  def_meta=e.def_meta)
    assert "a == b" in out
    assert interp_kaleid(out, "isEq", [4, 4]) == 1
    assert interp_kaleid(out, "isEq", [4, 5]) == 0


def test_accepted_bodies_contain_no_unknown():
    from eslc import ir
    e = load_sources([("log2", corpus.LOG2), ("ack", corpus.ACK)])

    def scan(t) -> bool:
        match t:
            case ir.Unknown():
                return True
            case ir.Var(_, a) | ir.Con(_, a) | ir.Def(_, a):
                return any(scan(x.value) for x in a)
            case ir.Lam(s, _):
                return scan(s.body)
            case ir.Let(b, s):
                return scan(b) or scan(s.body)
            case _:
                return False

    for name in e.env.names():
        d = e.env.lookup(name)
        if isinstance(d.payload, Function):
            for cl in d.payload.clauses:
                assert cl.body is None or not scan(cl.body), name


def test_fixture_format_shape_data_pairs():
    from eslc.loader import load_prelude
    from eslc.sac import SacBackend, interp_sac
    e = load_prelude()
    text = kompile("logistic", [], [], SacBackend(), e.env, e.rules,
                   def_meta=e.def_meta)
    # arrays as (shape, row-major data) pairs
    out = interp_sac(text, "logistic", [1, ((1,), [2]), ((2,), [0.0, 0.0])])
    assert list(out) == [0.5, 0.5]
