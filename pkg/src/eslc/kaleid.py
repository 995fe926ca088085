"""Kaleidoscope backend: a scalar first-order target over naturals.

Dependent types in signatures become runtime assertions; pattern-matching
definitions become nested conditional chains; the reference interpreter
evaluates the emitted text (or its AST) with C-style booleans, truncating
subtraction and an abort-on-zero assert.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import ir
from .extract import (EmittedFunction, ExtractError, ExtractOptions,
                      ExtractState, kaleid_final_pass)
from .ir import (Arg, Clause, Con, Def, Definition, Env, Function, Lam, Let,
                 Lit, PAbsurd, PCon, PLit, PVar, Term, Unknown, Var, nat_view,
                 pi_spine)

OPS = ("Plus", "Minus", "Times", "Divide", "Eq", "Neq", "And", "Gt", "Lt")
_OP_TEXT = {"Plus": "+", "Minus": "-", "Times": "*", "Divide": "/",
            "Eq": "==", "Neq": "!=", "And": "&&", "Gt": ">", "Lt": "<"}
_OP_PREC = {"And": 1, "Eq": 2, "Neq": 2, "Gt": 2, "Lt": 2,
            "Plus": 3, "Minus": 3, "Times": 4, "Divide": 4}


class KExpr:
    __slots__ = ()


@dataclass(frozen=True, slots=True)
class KNat(KExpr):
    value: int


@dataclass(frozen=True, slots=True)
class KBin(KExpr):
    op: str
    lhs: KExpr
    rhs: KExpr

    def __post_init__(self):
        assert self.op in OPS


@dataclass(frozen=True, slots=True)
class KVar(KExpr):
    name: str


@dataclass(frozen=True, slots=True)
class KCall(KExpr):
    fn: str
    args: tuple[KExpr, ...]


@dataclass(frozen=True, slots=True)
class KFun(KExpr):
    name: str
    params: tuple[str, ...]
    body: KExpr


@dataclass(frozen=True, slots=True)
class KExtern(KExpr):
    name: str
    params: tuple[str, ...]


@dataclass(frozen=True, slots=True)
class KLet(KExpr):
    name: str
    bound: KExpr
    body: KExpr


@dataclass(frozen=True, slots=True)
class KAssert(KExpr):
    arg: KExpr


@dataclass(frozen=True, slots=True)
class KIf(KExpr):
    cond: KExpr
    then: KExpr
    other: KExpr


@dataclass(frozen=True)
class Assrt:
    v: str
    a: KExpr


@dataclass
class PatSt:
    conds: list[KExpr]
    assigns: list[tuple[str, KExpr]]


RET = "__ret"


class UnsupportedPattern(ExtractError):
    pass


class HigherOrderValue(ExtractError):
    pass


# --------------------------------------------------------------------------
# type -> assertions


def kompile_ty(sig: Term, state: ExtractState, env: Env) -> list[Assrt]:
    """Argument and return-value assertions from a normalized signature."""
    tel, ret = pi_spine(sig)
    out: list[Assrt] = []
    names: list[str] = []
    for j, (_, arg) in enumerate(tel):
        venv = list(reversed(names))
        pname = f"x_{j + 1}"
        a = _ty_assert(arg.value, pname, venv, state, env)
        if a is not None:
            out.append(a)
        names.append(pname)
    venv = list(reversed(names))
    r = _ty_assert(ret, RET, venv, state, env)
    if r is not None:
        out.append(r)
    return out


def _ty_assert(ty: Term, vname: str, venv: list[str], state, env) -> Assrt | None:
    match ty:
        case Def("Nat", ()):
            return None
        case Def("Fin", (Arg(e, _),)):
            return Assrt(vname, KBin("Lt", KVar(vname),
                                     kompile_term(e, venv, state, env)))
        case Def("_<_", (Arg(a, _), Arg(b, _))):
            return Assrt(vname, KBin("Lt", kompile_term(a, venv, state, env),
                                     kompile_term(b, venv, state, env)))
        case Def("_≡_", args):
            va = [x.value for x in args if not x.hidden]
            return Assrt(vname, KBin("Eq", kompile_term(va[0], venv, state, env),
                                     kompile_term(va[1], venv, state, env)))
        case Def("Dec", (Arg(p, _),)):
            inner = _ty_assert(p, vname, venv, state, env)
            if inner is None:
                raise ExtractError(f"undecidable Dec payload at {vname}")
            return Assrt(vname, KBin("Eq", KVar(vname), inner.a))
        case Def("Float", ()):
            raise ExtractError("this target has no floats, only naturals")
    raise ExtractError(f"unsupported type at {vname}: {ir.print_term(ty)}")


# --------------------------------------------------------------------------
# patterns -> conditions


def kompile_clpats(tel, pats, exprs: list[KExpr], pst: PatSt,
                   state: ExtractState) -> PatSt:
    """Worklist translation of one clause's patterns to conditions and
    assignments; constructor sub-patterns are prepended to the worklist."""
    work = list(zip([p.value for p in pats], exprs))
    while work:
        p, e = work.pop(0)
        match p:
            case PVar(idx):
                name = tel[len(tel) - 1 - idx][0]
                if not name.startswith("_"):
                    pst.assigns.append((name, e))
            case PAbsurd():
                pass
            case PLit(v):
                if not isinstance(v, int):
                    raise UnsupportedPattern("float patterns are not supported")
                pst.conds.append(KBin("Eq", e, KNat(v)))
            case PCon(("zero" | "fzero"), _):
                pst.conds.append(KBin("Eq", e, KNat(0)))
            case PCon("suc", (Arg(sub, _),)):
                pst.conds.append(KBin("Gt", e, KNat(0)))
                work.insert(0, (sub, KBin("Minus", e, KNat(1))))
            case PCon("fsuc", args):
                pst.conds.append(KBin("Gt", e, KNat(0)))
                sub = args[-1].value
                items = [(sub, KBin("Minus", e, KNat(1)))]
                if len(args) > 1:  # the hidden upper bound gets a fresh name
                    ub = state.fresh("ub_")
                    items.insert(0, (args[0].value, KVar(ub)))
                work[0:0] = items
            case PCon(name, _):
                raise UnsupportedPattern(f"cannot match {name} in this target")
            case _:
                raise UnsupportedPattern(repr(p))
    return pst


# --------------------------------------------------------------------------
# clauses -> conditional chain


def kompile_cls(clauses: list[Clause], var_names: list[str], ret: str,
                state: ExtractState, env: Env, caller: str) -> KExpr:
    if not clauses:
        raise ExtractError("empty clause list")
    branches: list[tuple[list[KExpr], KExpr]] = []
    for cl in clauses:
        pst = kompile_clpats(cl.telescope, list(cl.patterns),
                             [KVar(v) for v in var_names], PatSt([], []), state)
        if cl.body is None:
            body: KExpr = KAssert(KNat(0))
        else:
            venv = [name for name, _ in reversed(cl.telescope)]
            body = kompile_term(cl.body, venv, state, env, caller)
        for name, e in reversed(pst.assigns):
            body = KLet(name, e, body)
        branches.append((pst.conds, body))
    chain: KExpr | None = None
    if branches[-1][0]:  # last clause still guarded: synthesize a fallback
        chain = KAssert(KNat(0))
    for conds, body in reversed(branches):
        if not conds and chain is None:
            chain = body
            continue
        cond = conds[0] if conds else KNat(1)
        for c in conds[1:]:
            cond = KBin("And", cond, c)
        chain = KIf(cond, body, chain if chain is not None else KAssert(KNat(0)))
    assert chain is not None
    return chain


# --------------------------------------------------------------------------
# terms


def kompile_term(t: Term, venv: list[str], state: ExtractState, env: Env,
                 caller: str = "") -> KExpr:
    match t:
        case Lit(int(v)):
            return KNat(v)
        case Lit(_):
            raise ExtractError("this target has no floats, only naturals")
        case Var(i, ()):
            return KVar(venv[i])
        case Var(_, _):
            raise HigherOrderValue("applied variable is higher-order")
        case Con("prf", _):
            return KNat(1)
        case Con("yes", _):
            return KNat(1)
        case Con("no", _):
            return KNat(0)
        case Con(("suc" | "fsuc"), _):
            k, inner = _suc_spine(t)
            if inner is None:
                return KNat(k)
            return KBin("Plus", KNat(k),
                        kompile_term(inner, venv, state, env, caller))
        case Con(("zero" | "fzero"), _):
            return KNat(0)
        case Unknown():
            return KNat(0)  # erased position; reachable only behind asserts
        case Let(bound, scope):
            name = _fresh_binder(scope.name, venv, state)
            return KLet(name, kompile_term(bound, venv, state, env, caller),
                        kompile_term(scope.body, [name] + venv, state, env, caller))
        case Lam():
            raise HigherOrderValue("lambda cannot be translated")
        case Def(name, args):
            return _kompile_def(name, args, venv, state, env, caller)
        case Con(name, _):
            raise ExtractError(f"constructor {name} has no scalar translation")
    raise ExtractError(f"cannot translate {t!r}")


_BINOPS = {"_+_": "Plus", "_-_": "Minus", "_*_": "Times", "_/_": "Divide",
           "_≟_": "Eq", "_<?_": "Lt"}


def _kompile_def(name: str, args, venv, state, env, caller) -> KExpr:
    va = [a.value for a in args]
    if name in _BINOPS and len(va) == 2:
        return KBin(_BINOPS[name],
                    kompile_term(va[0], venv, state, env, caller),
                    kompile_term(va[1], venv, state, env, caller))
    if name == "div-helper" and len(va) == 4:
        k, m, n, j = (kompile_term(x, venv, state, env, caller) for x in va)
        return KBin("Plus", k,
                    KBin("Divide", KBin("Minus", KBin("Plus", n, m), j),
                         KBin("Plus", KNat(1), m)))
    if name == "fromN<":
        # the Fin is encoded by the bound's left endpoint, the hidden head
        return kompile_arglist(args, [0], venv, state, env, caller)[0]
    if name == "toN":
        return kompile_arglist(args, [len(args) - 1], venv, state, env, caller)[0]
    d = env.lookup(name) if name in env else None
    if d is not None and _returns_prop(d.signature):
        return KNat(1)  # proofs erase to the unit witness
    if d is None:
        raise ExtractError(f"unknown definition {name}")
    mask = mk_iota_mask(len(args))
    kargs = kompile_arglist(args, mask, venv, state, env, caller)
    state.push(name)
    if caller:
        state.note_dep(caller, name)
    return KCall(state.target_name(name, kaleid_final_pass), tuple(kargs))


def kompile_arglist(args: tuple[Arg, ...], mask: list[int], venv, state, env,
                    caller: str = "") -> list[KExpr]:
    return [kompile_term(args[i].value, venv, state, env, caller) for i in mask]


def mk_iota_mask(n: int) -> list[int]:
    return list(range(n))


def _suc_spine(t: Term) -> tuple[int, Term | None]:
    k = 0
    while isinstance(t, Con) and t.name in ("suc", "fsuc"):
        k += 1
        t = t.args[-1].value
    n = nat_view(t)
    if n is not None:
        return k + n, None
    return k, t


def _fresh_binder(name: str, venv: list[str], state: ExtractState) -> str:
    if name not in venv and name != RET and not name.startswith("x_"):
        return name
    return state.fresh(f"{name}_")


def _returns_prop(sig: Term) -> bool:
    _, ret = pi_spine(sig)
    return isinstance(ret, Def) and ret.name in ("_<_", "_≡_")


# --------------------------------------------------------------------------
# the backend object used by the extraction driver


class KaleidBackend:
    final_pass = staticmethod(kaleid_final_pass)

    def kompile_fun(self, name: str, d: Definition, state: ExtractState,
                    env: Env, opts: ExtractOptions) -> EmittedFunction:
        assert isinstance(d.payload, Function)
        tel, _ = pi_spine(d.signature)
        params = tuple(f"x_{j + 1}" for j in range(len(tel)))
        asserts = kompile_ty(d.signature, state, env)
        clauses = [_rename_clashes(c, set(params)) for c in d.payload.clauses]
        chain = kompile_cls(clauses, list(params), RET, state, env, name)
        hoisted: list[tuple[str, KExpr]] = []
        while isinstance(chain, KLet):  # single-branch assigns read better flat
            hoisted.append((chain.name, chain.bound))
            chain = chain.body
        body: KExpr = KVar(RET)
        for a in reversed([a for a in asserts if a.v == RET]):
            body = KLet(f"{RET}_assrt", KAssert(a.a), body)
        body = KLet(RET, chain, body)
        for n2, b2 in reversed(hoisted):
            body = KLet(n2, b2, body)
        for a in reversed([a for a in asserts if a.v != RET]):
            body = KLet(f"{a.v}_assrt", KAssert(a.a), body)
        fn = KFun(state.target_name(name, kaleid_final_pass), params, body)
        if opts.no_assert:
            fn = strip_asserts(fn)
        return EmittedFunction(state.names[name], print_kaleid([fn]),
                               state.deps.get(name, []))

    def assemble(self, fns: list[EmittedFunction], state: ExtractState,
                 opts: ExtractOptions) -> str:
        return "\n".join(f.code for f in fns)


def _rename_clashes(cl: Clause, taken: set[str]) -> Clause:
    """Telescope names that collide with parameter names get a suffix so
    the emitted lets never shadow the arguments."""
    seen: set[str] = set(taken)
    tele = []
    for n, ty in cl.telescope:
        base, k = n, 0
        while n in seen:
            k += 1
            n = f"{base}_{k}"
        if not n.startswith("_"):
            seen.add(n)
        tele.append((n, ty))
    return Clause(tuple(tele), cl.patterns, cl.body)


def strip_asserts(e: KExpr) -> KExpr:
    match e:
        case KAssert(_):
            return KNat(1)
        case KBin(op, l, r):
            return KBin(op, strip_asserts(l), strip_asserts(r))
        case KCall(f, args):
            return KCall(f, tuple(strip_asserts(a) for a in args))
        case KFun(n, p, b):
            return KFun(n, p, strip_asserts(b))
        case KLet(n, b, body):
            return KLet(n, strip_asserts(b), strip_asserts(body))
        case KIf(c, t, o):
            return KIf(strip_asserts(c), strip_asserts(t), strip_asserts(o))
        case _:
            return e


# --------------------------------------------------------------------------
# printer


def print_kaleid(fns: list[KExpr]) -> str:
    out = []
    for f in fns:
        match f:
            case KFun(name, params, body):
                out.append(f"def {name} ({', '.join(params)}):")
                out.extend(_print_block(body, 2))
            case KExtern(name, params):
                out.append(f"extern {name} ({', '.join(params)})")
            case _:
                raise ExtractError("only functions can appear at top level")
        out.append("")
    return "\n".join(out).rstrip() + "\n"


def _print_block(e: KExpr, ind: int) -> list[str]:
    pad = " " * ind
    lines: list[str] = []
    while isinstance(e, KLet):
        if isinstance(e.bound, KIf):
            lines.extend(_print_if(e.bound, ind, f"let {e.name} = "))
        else:
            lines.append(f"{pad}let {e.name} = {_pp(e.bound, 0)}")
        e = e.body
    if isinstance(e, KIf):
        lines.extend(_print_if(e, ind, ""))
    else:
        lines.append(pad + _pp(e, 0))
    return lines


def _print_if(e: KIf, ind: int, prefix: str) -> list[str]:
    pad = " " * ind
    lines = [f"{pad}{prefix}if ({_pp(e.cond, 0)}):"]
    lines.extend(_print_block(e.then, ind + 2))
    while isinstance(e.other, KIf):
        e = e.other
        lines.append(f"{pad}else if ({_pp(e.cond, 0)}):")
        lines.extend(_print_block(e.then, ind + 2))
    lines.append(f"{pad}else:")
    lines.extend(_print_block(e.other, ind + 2))
    return lines


def _pp(e: KExpr, prec: int) -> str:
    match e:
        case KNat(v):
            return str(v)
        case KVar(n):
            return n
        case KAssert(a):
            return f"assert ({_pp(a, 0)})"
        case KCall(f, args):
            return f"{f} ({', '.join(_pp(a, 0) for a in args)})"
        case KBin("And", l, r):
            s = f"({_pp(l, 0)}) && ({_pp(r, 0)})"
            return f"({s})" if prec > 1 else s
        case KBin(op, l, r):
            p = _OP_PREC[op]
            ls = _pp(l, p)
            rs = _pp(r, p + 1)
            s = f"{ls} {_OP_TEXT[op]} {rs}"
            return f"({s})" if prec > p else s
        case KLet(n, b, body):
            return f"let {n} = {_pp(b, 0)} in {_pp(body, 0)}"
        case KIf():
            raise ExtractError("conditionals print at statement level")
    raise ExtractError(f"unprintable {e!r}")


# --------------------------------------------------------------------------
# text parser (the interpreter accepts emitted programs)


class KParseError(ExtractError):
    pass


def parse_kaleid(text: str) -> list[KExpr]:
    lines = [(len(l) - len(l.lstrip()), l.strip())
             for l in text.splitlines() if l.strip()]
    fns: list[KExpr] = []
    i = 0
    while i < len(lines):
        ind, l = lines[i]
        if not l.startswith("def "):
            raise KParseError(f"expected a def, found {l!r}")
        head = l[4:]
        name, rest = head.split("(", 1)
        params = tuple(p.strip() for p in rest.rstrip(": )").split(",")
                       if p.strip())
        body, i = _parse_block(lines, i + 1, ind + 1)
        fns.append(KFun(name.strip(), params, body))
    return fns


def _parse_block(lines, i, min_ind):
    stmts: list[tuple[str, KExpr]] = []
    final: KExpr | None = None
    base_ind = lines[i][0]
    if base_ind < min_ind:
        raise KParseError("empty block")
    while i < len(lines):
        ind, l = lines[i]
        if ind < base_ind:
            break
        if l.startswith(("else if", "else:")):
            break
        if l.startswith("let "):
            name, rest = l[4:].split("=", 1)
            rest = rest.strip()
            if rest.startswith("if"):
                e, i = _parse_if(lines, i, base_ind, rest)
            else:
                e = _parse_expr_str(rest)
                i += 1
            stmts.append((name.strip(), e))
        elif l.startswith("if"):
            final, i = _parse_if(lines, i, base_ind, l)
            break
        else:
            final = _parse_expr_str(l)
            i += 1
            break
    if final is None:
        raise KParseError("block lacks a result expression")
    out = final
    for name, e in reversed(stmts):
        out = KLet(name, e, out)
    return out, i


def _parse_if(lines, i, base_ind, first: str):
    def cond_of(s: str) -> KExpr:
        s = s[s.index("if") + 2:].strip()
        if not s.endswith(":"):
            raise KParseError(f"malformed conditional {s!r}")
        return _parse_expr_str(s[:-1].strip())

    cond = cond_of(first)
    then, i = _parse_block(lines, i + 1, base_ind + 1)
    arms = [(cond, then)]
    other: KExpr | None = None
    while i < len(lines) and lines[i][0] == base_ind:
        ind, l = lines[i]
        if l.startswith("else if"):
            c = cond_of(l)
            b, i = _parse_block(lines, i + 1, base_ind + 1)
            arms.append((c, b))
        elif l.startswith("else:"):
            other, i = _parse_block(lines, i + 1, base_ind + 1)
            break
        else:
            break
    if other is None:
        raise KParseError("conditional lacks an else branch")
    for c, b in reversed(arms):
        other = KIf(c, b, other)
    return other, i


def _tokenize_expr(s: str) -> list[str]:
    toks, i = [], 0
    while i < len(s):
        c = s[i]
        if c.isspace():
            i += 1
            continue
        if s.startswith(("==", "!=", "&&"), i):
            toks.append(s[i:i + 2])
            i += 2
            continue
        if c in "()+-*/<>,":
            toks.append(c)
            i += 1
            continue
        j = i
        while j < len(s) and (s[j].isalnum() or s[j] in "_'"):
            j += 1
        if j == i:
            raise KParseError(f"bad character {c!r} in expression")
        toks.append(s[i:j])
        i = j
    return toks


def _parse_expr_str(s: str) -> KExpr:
    toks = _tokenize_expr(s)
    pos = [0]

    def peek():
        return toks[pos[0]] if pos[0] < len(toks) else None

    def take():
        t = toks[pos[0]]
        pos[0] += 1
        return t

    def atom() -> KExpr:
        t = take()
        if t == "(":
            e = level(1)
            if take() != ")":
                raise KParseError("unbalanced parens")
            return e
        if t.isdigit():
            return KNat(int(t))
        if t == "assert":
            if take() != "(":
                raise KParseError("assert needs parens")
            e = level(1)
            if take() != ")":
                raise KParseError("unbalanced assert")
            return KAssert(e)
        if peek() == "(":
            take()
            args = []
            if peek() != ")":
                args.append(level(1))
                while peek() == ",":
                    take()
                    args.append(level(1))
            if take() != ")":
                raise KParseError("unbalanced call")
            return KCall(t, tuple(args))
        return KVar(t)

    table = {"&&": ("And", 1), "==": ("Eq", 2), "!=": ("Neq", 2),
             ">": ("Gt", 2), "<": ("Lt", 2), "+": ("Plus", 3),
             "-": ("Minus", 3), "*": ("Times", 4), "/": ("Divide", 4)}

    def level(min_p: int) -> KExpr:
        lhs = atom()
        while True:
            t = peek()
            if t not in table:
                return lhs
            op, p = table[t]
            if p < min_p:
                return lhs
            take()
            rhs = level(p + 1)
            lhs = KBin(op, lhs, rhs)

    e = level(1)
    if pos[0] != len(toks):
        raise KParseError(f"trailing tokens in {s!r}")
    return e


# --------------------------------------------------------------------------
# interpreter


@dataclass(frozen=True)
class Aborted:
    reason: str


class _Abort(Exception):
    def __init__(self, reason: str):
        self.reason = reason


def interp_kaleid(program, entry: str, args: list[int]):
    """Big-step evaluation over naturals; Aborted is a value, not a crash."""
    import sys

    fns = parse_kaleid(program) if isinstance(program, str) else program
    table: dict[str, tuple[tuple[str, ...], object]] = {}
    compiled: dict[str, object] = {}

    def comp(e: KExpr):
        match e:
            case KNat(v):
                return lambda env: v
            case KVar(n):
                return lambda env: env[n]
            case KBin("And", l, r):
                lf, rf = comp(l), comp(r)
                return lambda env: (1 if rf(env) != 0 else 0) if lf(env) != 0 else 0
            case KBin("Plus", l, r):
                lf, rf = comp(l), comp(r)
                return lambda env: lf(env) + rf(env)
            case KBin("Minus", l, r):
                lf, rf = comp(l), comp(r)
                return lambda env: max(lf(env) - rf(env), 0)
            case KBin("Times", l, r):
                lf, rf = comp(l), comp(r)
                return lambda env: lf(env) * rf(env)
            case KBin("Divide", l, r):
                lf, rf = comp(l), comp(r)

                def dodiv(env):
                    b = rf(env)
                    if b == 0:
                        raise _Abort("division by zero")
                    return lf(env) // b
                return dodiv
            case KBin(op, l, r):
                lf, rf = comp(l), comp(r)
                import operator
                fn = {"Eq": operator.eq, "Neq": operator.ne,
                      "Gt": operator.gt, "Lt": operator.lt}[op]
                return lambda env: 1 if fn(lf(env), rf(env)) else 0
            case KAssert(a):
                af = comp(a)

                def doassert(env):
                    if af(env) == 0:
                        raise _Abort("assert (0)" if isinstance(a, KNat)
                                     else "assertion failed")
                    return 1
                return doassert
            case KLet(n, b, body):
                bf, bodyf = comp(b), comp(body)

                def dolet(env):
                    env[n] = bf(env)
                    return bodyf(env)
                return dolet
            case KIf(c, t, o):
                cf, tf, of = comp(c), comp(t), comp(o)
                return lambda env: tf(env) if cf(env) != 0 else of(env)
            case KCall(f, cargs):
                afs = [comp(a) for a in cargs]

                def docall(env):
                    params, bodyf = table[f]
                    if len(params) != len(afs):
                        raise _Abort(f"arity mismatch calling {f}")
                    return bodyf(dict(zip(params, [a(env) for a in afs])))
                return docall
        raise KParseError(f"cannot compile {e!r}")

    for f in fns:
        assert isinstance(f, KFun)
        table[f.name] = (f.params, comp(f.body))
    if entry not in table:
        raise ExtractError(f"unknown entry {entry}")
    params, bodyf = table[entry]
    if len(params) != len(args):
        raise ExtractError(f"{entry} expects {len(params)} arguments")
    old = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old, 100000))
    try:
        return bodyf(dict(zip(params, args)))
    except _Abort as ab:
        return Aborted(ab.reason)
    finally:
        sys.setrecursionlimit(old)
