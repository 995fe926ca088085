"""Kaleidoscope backend: assertion synthesis, pattern and clause
compilation, term translation, printing, parsing, and the interpreter."""

import random

import pytest

from eslc import corpus
from eslc.builtins import mk_pi, seed_env
from eslc.extract import ExtractState, kompile
from eslc.harness import run_corpus_diff
from eslc.ir import Con, Def, Lit, PCon, PVar, Var, hid, vis
from eslc.kaleid import (Aborted, Assrt, KaleidBackend, KBin, KCall, KFun,
                         KLet, KNat, KVar, PatSt, UnsupportedPattern,
                         interp_kaleid, kompile_clpats, kompile_term,
                         kompile_ty, parse_kaleid, print_kaleid)
from eslc.loader import load_sources

ENV = seed_env()


def _st():
    return ExtractState(frozenset(), frozenset())


def _nat():
    return Def("Nat")


# -- kompile_ty ---------------------------------------------------------------


def test_fin_argument_assertion():
    sig = mk_pi([("n", _nat(), False), ("i", Def("Fin", (vis(Var(0)),)), False)],
                _nat())
    out = kompile_ty(sig, _st(), ENV)
    assert out == [Assrt("x_2", KBin("Lt", KVar("x_2"), KVar("x_1")))]


def test_lt_argument_assertion():
    sig = mk_pi([("m", _nat(), True), ("n", _nat(), False),
                 ("p", Def("_<_", (vis(Var(0)), vis(Var(1)))), False)], _nat())
    out = kompile_ty(sig, _st(), ENV)
    assert out == [Assrt("x_3", KBin("Lt", KVar("x_2"), KVar("x_1")))]


def test_return_fin_assertion():
    n_sq = Def("_*_", (vis(Var(0)), vis(Var(0))))
    sig = mk_pi([("n", _nat(), False)],
                Def("Fin", (vis(Def("_+_", (vis(Lit(1)), vis(n_sq)))),)))
    out = kompile_ty(sig, _st(), ENV)
    assert out[0].v == "__ret"


def test_dec_argument_assertion():
    sig = mk_pi([("a", _nat(), False), ("b", _nat(), False),
                 ("d", Def("Dec", (vis(Def("_<_", (vis(Var(1)), vis(Var(0))))),)),
                  False)], _nat())
    out = kompile_ty(sig, _st(), ENV)
    assert out == [Assrt("x_3", KBin("Eq", KVar("x_3"),
                                     KBin("Lt", KVar("x_1"), KVar("x_2"))))]


# -- kompile_clpats ------------------------------------------------------------


def test_zero_pattern():
    pst = kompile_clpats((), (vis(PCon("zero")),), [KVar("x1")],
                         PatSt([], []), _st())
    assert pst.conds == [KBin("Eq", KVar("x1"), KNat(0))]


def test_suc_and_zero_patterns():
    tel = (("m", vis(_nat())),)
    pats = (vis(PCon("suc", (vis(PVar(0)),))), vis(PCon("zero")))
    pst = kompile_clpats(tel, pats, [KVar("x1"), KVar("x2")], PatSt([], []), _st())
    assert pst.conds == [KBin("Gt", KVar("x1"), KNat(0)),
                         KBin("Eq", KVar("x2"), KNat(0))]
    assert pst.assigns == [("m", KBin("Minus", KVar("x1"), KNat(1)))]


def test_nested_suc_pattern():
    tel = (("x", vis(_nat())),)
    pats = (vis(PCon("suc", (vis(PCon("suc", (vis(PVar(0)),))),))),)
    pst = kompile_clpats(tel, pats, [KVar("e")], PatSt([], []), _st())
    e = KVar("e")
    em1 = KBin("Minus", e, KNat(1))
    assert pst.conds == [KBin("Gt", e, KNat(0)), KBin("Gt", em1, KNat(0))]
    assert pst.assigns == [("x", KBin("Minus", em1, KNat(1)))]


def test_fin_suc_pattern_gets_fresh_upper_bound():
    st = _st()
    tel = (("ub", vis(_nat())), ("i", vis(Def("Fin", (vis(Var(0)),)))))
    pats = (vis(PCon("fsuc", (hid(PVar(1)), vis(PVar(0))))),)
    pst = kompile_clpats(tel, pats, [KVar("e")], PatSt([], []), st)
    assert pst.conds == [KBin("Gt", KVar("e"), KNat(0))]
    assert ("ub", KVar("ub_1")) in pst.assigns
    assert ("i", KBin("Minus", KVar("e"), KNat(1))) in pst.assigns


def test_literal_pattern_direct():
    pst = kompile_clpats((), (vis(__import__("eslc.ir", fromlist=["PLit"]).PLit(7)),),
                         [KVar("e")], PatSt([], []), _st())
    assert pst.conds == [KBin("Eq", KVar("e"), KNat(7))]


def test_float_pattern_rejected():
    from eslc.ir import PLit
    with pytest.raises(UnsupportedPattern):
        kompile_clpats((), (vis(PLit(1.5)),), [KVar("e")], PatSt([], []), _st())


# -- kompile_term ----------------------------------------------------------------


def test_plus_translates_to_binop():
    t = Def("_+_", (vis(Var(0)), vis(Var(1))))
    out = kompile_term(t, ["a", "b"], _st(), ENV)
    assert out == KBin("Plus", KVar("a"), KVar("b"))


def test_from_bound_takes_hidden_witness():
    t = Def("fromN<", (hid(Def("_*_", (vis(Var(0)), vis(Var(0))))),
                       hid(Lit(5)), vis(Con("prf"))))
    out = kompile_term(t, ["n"], _st(), ENV)
    assert out == KBin("Times", KVar("n"), KVar("n"))


def test_div_helper_inline_formula():
    t = Def("div-helper", (vis(Lit(0)), vis(Lit(1)), vis(Var(0)), vis(Lit(0))))
    out = kompile_term(t, ["x"], _st(), ENV)
    assert print_kaleid([KFun("t", ("x",), out)]).splitlines()[1].strip() \
        == "0 + (x + 1 - 0) / (1 + 1)"


def test_general_call_pushes_pending():
    st = _st()
    env = seed_env()
    from eslc.ir import Clause, Definition, Function
    env.add(Definition("helper", mk_pi([("x", _nat(), False)], _nat()),
                       Function([Clause((("x", vis(_nat())),), (vis(PVar(0)),),
                                        Var(0))])))
    out = kompile_term(Def("helper", (vis(Lit(3)),)), [], st, env, caller="main")
    assert out == KCall("helper", (KNat(3),))
    assert list(st.pending) == ["helper"]


def test_proof_returning_calls_erase_to_one():
    e = load_sources([("t", "lem : (n : Nat) -> n < 1 + n\nlem n = prf\n"
                            "use : Nat -> Nat\nuse x = toN (fromN< (lem x))\n")])
    out = kompile("use", [], [], KaleidBackend(), e.env, e.rules,
                  def_meta=e.def_meta)
    assert "lem" not in out  # erased, never traversed
    assert interp_kaleid(out, "use", [9]) == 9


# -- printer and parser -------------------------------------------------------------


def test_print_golden_constant_function():
    f = KFun("f", ("x_1",), KLet("__ret", KNat(0), KVar("__ret")))
    assert print_kaleid([f]) == "def f (x_1):\n  let __ret = 0\n  __ret\n"


def test_print_assert_zero():
    from eslc.kaleid import KAssert
    f = KFun("f", (), KAssert(KNat(0)))
    assert "assert (0)" in print_kaleid([f])


def test_parse_roundtrip_of_emitted_programs():
    e = load_sources([("log2", corpus.LOG2), ("ack", corpus.ACK)])
    for entry, base in [("log2", ["n<1+n", "_<_"]), ("ack", [])]:
        text = kompile(entry, base, [], KaleidBackend(), e.env, e.rules,
                       def_meta=e.def_meta)
        fns = parse_kaleid(text)
        assert print_kaleid(fns) == text


# -- interpreter ----------------------------------------------------------------------


def _extract(sources, entry, base=()):
    e = load_sources(sources)
    return e, kompile(entry, list(base), [], KaleidBackend(), e.env, e.rules,
                      def_meta=e.def_meta)


def test_interp_ack():
    _, text = _extract([("ack", corpus.ACK)], "ack")
    assert interp_kaleid(text, "ack", [2, 3]) == 9
    assert interp_kaleid(text, "ack", [3, 3]) == 61


def test_interp_log2():
    _, text = _extract([("log2", corpus.LOG2)], "log2", ["n<1+n", "_<_"])
    assert interp_kaleid(text, "log2", [8]) == 3


def test_interp_absurd_aborts():
    _, text = _extract([("ex", corpus.EX7)], "ex11")
    assert isinstance(interp_kaleid(text, "ex11", [5, 1]), Aborted)


def test_divide_by_zero_aborts():
    out = interp_kaleid("def f (x_1):\n  let __ret = 1 / x_1\n  __ret\n",
                        "f", [0])
    assert isinstance(out, Aborted)


def test_and_short_circuits():
    text = ("def f (x_1):\n"
            "  let __ret = if ((x_1 > 0) && (1 / x_1 == 1)):\n"
            "    1\n"
            "  else:\n"
            "    0\n"
            "  __ret\n")
    assert interp_kaleid(text, "f", [0]) == 0  # no division attempted


def test_fin_encoding_sound_and_complete():
    e = load_sources([("t", "idFin : (n : Nat) -> Fin n -> Fin n\n"
                            "idFin n i = i\n")])
    fns = parse_kaleid(kompile("idFin", [], [], KaleidBackend(), e.env, e.rules,
                               def_meta=e.def_meta))
    for n in range(65):
        for v in range(n + 9):
            out = interp_kaleid(fns, "idFin", [n, v])
            if v < n:
                assert out == v, (n, v)
            else:
                assert isinstance(out, Aborted), (n, v)


def test_clause_order_of_disjoint_clauses_is_immaterial():
    swapped = """
ack : Nat -> Nat -> Nat
ack 0 n = 1 + n
ack (suc m) (suc n) = ack m (ack (suc m) n)
ack (suc m) 0 = ack m 1
"""
    _, t1 = _extract([("a", corpus.ACK)], "ack")
    _, t2 = _extract([("b", swapped)], "ack")
    for m in range(4):
        for n in range(6):
            assert interp_kaleid(t1, "ack", [m, n]) == \
                interp_kaleid(t2, "ack", [m, n])


def test_proof_positions_extract_to_one():
    _, text = _extract([("log2", corpus.LOG2)], "log2", ["n<1+n", "_<_"])
    fns = {f.name: f for f in parse_kaleid(text)}

    calls = []

    def scan(e):
        match e:
            case KCall("log2'", args):
                calls.append(args)
                [scan(a) for a in args]
            case KBin(_, l, r):
                scan(l), scan(r)
            case KLet(_, b, body):
                scan(b), scan(body)
            case _ if hasattr(e, "cond"):
                scan(e.cond), scan(e.then), scan(e.other)
            case _ if hasattr(e, "arg"):
                scan(e.arg)
            case _:
                pass

    scan(fns["log2'"].body)
    scan(fns["log2"].body)
    assert calls and all(args[2] == KNat(1) for args in calls)


def test_no_assert_strips_assertions():
    e = load_sources([("ex", corpus.EX7)])
    from eslc.extract import ExtractOptions
    text = kompile("exlt", [], [], KaleidBackend(), e.env, e.rules,
                   ExtractOptions(no_assert=True), e.def_meta)
    assert "assert" not in text


def test_differential_against_evaluator():
    row = run_corpus_diff(corpus.CORPUS["ack"], 200, 3)
    assert row.mismatches == 0
    row = run_corpus_diff(corpus.CORPUS["log2"], 200, 4)
    assert row.mismatches == 0
    row = run_corpus_diff(corpus.CORPUS["fib"], 100, 5)
    assert row.mismatches == 0


def test_violating_inputs_abort_before_use():
    e = load_sources([("ex", corpus.EX7)])
    text = kompile("exlt", [], [], KaleidBackend(), e.env, e.rules,
                   def_meta=e.def_meta)
    rng = random.Random(9)
    for _ in range(100):
        a = rng.randrange(0, 30)
        b = rng.randrange(0, a + 1)  # violates a < b
        out = interp_kaleid(text, "exlt", [a, b, 1])
        assert isinstance(out, Aborted)


def test_mixed_absurd_and_regular_clauses():
    src = """
guarded : (x : Nat) -> 0 < x -> Nat
guarded 1 () 
guarded x p = x
"""
    # a deliberately unreachable first clause keeps its guard and aborts
    src = src.replace("() \n", "()\n")
    e = load_sources([("g", src)])
    text = kompile("guarded", [], [], KaleidBackend(), e.env, e.rules,
                   def_meta=e.def_meta)
    assert "assert (0)" in text
    fns = parse_kaleid(text)
    assert isinstance(interp_kaleid(fns, "guarded", [1, 1]), Aborted)
    assert interp_kaleid(fns, "guarded", [2, 1]) == 2


def test_mutual_recursion_emits_each_once():
    src = """
odd : Nat -> Nat

even : Nat -> Nat
even 0 = 1
even (suc n) = odd n

odd 0 = 0
odd (suc n) = even n
"""
    e = load_sources([("m", src)])
    text = kompile("even", [], [], KaleidBackend(), e.env, e.rules,
                   def_meta=e.def_meta)
    assert text.count("def even") == 1 and text.count("def odd") == 1
    fns = parse_kaleid(text)
    assert [interp_kaleid(fns, "even", [k]) for k in range(5)] == [1, 0, 1, 0, 1]


def test_higher_order_entry_is_rejected():
    e = load_sources([("t", "twice : (Nat -> Nat) -> Nat -> Nat\n"
                            "twice f x = f (f x)\n")])
    from eslc.extract import ExtractError
    with pytest.raises(ExtractError):
        kompile("twice", [], [], KaleidBackend(), e.env, e.rules,
                def_meta=e.def_meta)


def test_empty_clause_list_is_an_error():
    from eslc.extract import ExtractError, ExtractState
    from eslc.kaleid import kompile_cls
    with pytest.raises(ExtractError):
        kompile_cls([], [], "__ret", ExtractState(frozenset(), frozenset()),
                    ENV, "t")
