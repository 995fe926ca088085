"""Big-step evaluator for closed programs, the source-level side of every
differential test.

Values: naturals and Fin encodings are Python ints, floats are floats,
vectors/indices/lists are tagged tuples, arrays are ("arr", shape, flat)
in row major order.  Functions evaluate eagerly; imap enumerates its whole
index space.
"""

from __future__ import annotations

import math
from itertools import product

from .ir import (Builtin, Con, Constructor, Datatype, Def, Env, EslError,
                 Function, Lam, Let, Lit, PAbsurd, PCon, PLit, Pi, PVar, Sort,
                 Term, Unknown, Var)

PRF = ("prf",)


class EvalError(EslError):
    pass


def eval_closed(t: Term, env: Env):
    return Eval(env).eval(t, [])


def call(env: Env, name: str, args: list):
    ev = Eval(env)
    return ev.apply_def(name, list(args))


class Eval:
    def __init__(self, env: Env):
        self.env = env

    def eval(self, t: Term, ctx: list):
        match t:
            case Lit(v):
                return v
            case Var(i, args):
                return self._apply(ctx[i], [self.eval(a.value, ctx) for a in args])
            case Con(name, args):
                return self.apply_con(name, [self.eval(a.value, ctx) for a in args])
            case Def(name, args):
                return self.apply_def(name, [self.eval(a.value, ctx) for a in args])
            case Lam(scope, _):
                return ("clo", scope.body, list(ctx))
            case Let(bound, scope):
                return self.eval(scope.body, [self.eval(bound, ctx)] + ctx)
            case Unknown():
                return PRF
            case Pi() | Sort():
                return ("type",)
        raise EvalError(f"cannot evaluate {t!r}")

    def _apply(self, f, args: list):
        for a in args:
            f = self._apply1(f, a)
        return f

    def _apply1(self, f, a):
        match f:
            case ("clo", body, ctx):
                return self.eval(body, [a] + ctx)
            case ("arrsel", arr):
                return _arr_index(arr, a)
            case ("pap-def", name, got):
                return self.apply_def(name, got + [a])
            case ("pap-con", name, got):
                return self.apply_con(name, got + [a])
        raise EvalError(f"cannot apply non-function value {f!r}")

    def apply_con(self, name: str, args: list):
        if name in ("zero", "fzero"):
            return 0
        if name in ("suc", "fsuc"):
            if len(args) < 1:
                return ("pap-con", name, args)
            return args[-1] + 1
        if name in ("vnil",):
            return ("vec", ())
        if name == "vcons":
            if len(args) < 2:
                return ("pap-con", name, args)
            h, t = args[-2], args[-1]
            return ("vec", (h,) + t[1])
        if name == "inil":
            return ("ix", ())
        if name == "icons":
            if len(args) < 2:
                return ("pap-con", name, args)
            h, t = args[-2], args[-1]
            return ("ix", (h,) + t[1])
        if name == "lnil":
            return ("list", ())
        if name == "lcons":
            if len(args) < 2:
                return ("pap-con", name, args)
            h, t = args[-2], args[-1]
            return ("list", (h,) + t[1])
        if name == "imap":
            if len(args) < 1:
                return ("pap-con", name, args)
            # hidden arguments carry element type, rank, and shape
            if len(args) < 4:
                raise EvalError("imap value lacks its shape argument")
            shape_v, f = args[-2], args[-1]
            shape = tuple(shape_v[1])
            flat = [self._apply1(f, ("ix", ix)) for ix in product(*map(range, shape))]
            return ("arr", shape, flat)
        if name == "yes":
            return ("dec", True)
        if name == "no":
            return ("dec", False)
        if name == "prf":
            return PRF
        raise EvalError(f"unknown constructor {name}")

    def apply_def(self, name: str, args: list):
        h = _PRIM.get(name)
        if h is not None:
            need, fn = h
            if len(args) < need:
                return ("pap-def", name, args)
            out = fn(self, args[:need])
            return self._apply(out, args[need:])
        d = self.env.lookup(name)
        payload = d.payload
        if isinstance(payload, Function):
            clauses = payload.clauses
            arity = len(clauses[0].patterns) if clauses else 0
            n_args = len(args)
            if n_args < arity:
                return ("pap-def", name, args)
            exact = n_args == arity
            head = args if exact else args[:arity]
            for cl in clauses:
                binds: dict[int, object] = {}
                if self._match_args(cl.patterns, head, binds):
                    if cl.body is None:
                        raise EvalError(f"{name}: reached an absurd clause")
                    # de Bruijn 0 is the last telescope entry
                    ctx = [binds.get(i, PRF) for i in range(len(cl.telescope))]
                    out = self.eval(cl.body, ctx)
                    return out if exact else self._apply(out, args[arity:])
            raise EvalError(f"{name}: no clause matches {head!r}")
        if isinstance(payload, Constructor):
            return self.apply_con(name, args)
        if isinstance(payload, Builtin) and payload.tag == "fin-from-bound":
            if len(args) < 3:
                return ("pap-def", name, args)
            return args[0]
        if isinstance(payload, Builtin) and payload.tag == "fin-to-nat":
            if len(args) < 2:
                return ("pap-def", name, args)
            return args[-1]
        if isinstance(payload, Datatype):
            return ("type",)
        raise EvalError(f"cannot evaluate definition {name}")

    def _match_args(self, pats, args, binds) -> bool:
        return all(self._match(p.value, a, binds) for p, a in zip(pats, args))

    def _match(self, p, v, binds) -> bool:
        if isinstance(p, PVar):
            binds[p.idx] = v
            return True
        if isinstance(p, PAbsurd):
            return False
        if isinstance(p, PLit):
            return v == p.value
        assert isinstance(p, PCon)
        name = p.name
        if name in ("zero", "fzero"):
            return v == 0
        if name in ("suc", "fsuc"):
            if not isinstance(v, int) or v == 0:
                return False
            for a in p.args[:-1]:
                if isinstance(a.value, PVar):
                    binds[a.value.idx] = PRF
            return self._match(p.args[-1].value, v - 1, binds)
        if name == "vcons":
            if v[0] != "vec" or not v[1]:
                return False
            pv = [a.value for a in p.args if not a.hidden]
            return self._match(pv[0], v[1][0], binds) and \
                self._match(pv[1], ("vec", v[1][1:]), binds)
        if name == "vnil":
            return v[0] == "vec" and not v[1]
        if name == "icons":
            if v[0] != "ix" or not v[1]:
                return False
            pv = [a.value for a in p.args if not a.hidden]
            return self._match(pv[0], v[1][0], binds) and \
                self._match(pv[1], ("ix", v[1][1:]), binds)
        if name == "inil":
            return v[0] == "ix" and not v[1]
        if name == "lcons":
            if v[0] != "list" or not v[1]:
                return False
            pv = [a.value for a in p.args if not a.hidden]
            return self._match(pv[0], v[1][0], binds) and \
                self._match(pv[1], ("list", v[1][1:]), binds)
        if name == "lnil":
            return v[0] == "list" and not v[1]
        if name == "imap":
            if v[0] != "arr":
                return False
            pv = [a.value for a in p.args if not a.hidden]
            return self._match(pv[0], ("arrsel", v), binds)
        if name in ("yes", "no"):
            return v[0] == "dec" and v[1] == (name == "yes")
        raise EvalError(f"unhandled pattern constructor {name}")


def _arr_index(arr, ix):
    _, shape, flat = arr
    comps = ix[1]
    if len(comps) != len(shape):
        raise EvalError("partial selection must go through sel")
    pos = 0
    for c, n in zip(comps, shape):
        if not 0 <= c < n:
            raise EvalError(f"index {comps} out of bounds for shape {shape}")
        pos = pos * n + c
    return flat[pos]


def _p_add(ev, a):
    return a[-2] + a[-1]


def _p_monus(ev, a):
    return max(a[-2] - a[-1], 0)


def _p_mul(ev, a):
    return a[-2] * a[-1]


def _p_div(ev, a):
    if a[-1] == 0:
        raise EvalError("division by zero")
    return a[-2] // a[-1]


def _p_mod(ev, a):
    if a[-1] == 0:
        raise EvalError("mod by zero")
    return a[-2] % a[-1]


def _p_div_helper(ev, a):
    k, m, n, j = a[-4:]
    return k + (n + m - j) // (1 + m)


def _p_mod_helper(ev, a):
    k, m, n, j = a[-4:]
    # accumulator semantics of the standard helper
    while True:
        if n == 0:
            return k
        if j == 0:
            k, n, j = 0, n - 1, m
        else:
            k, n, j = k + 1, n - 1, j - 1


def _p_fbin(op):
    def h(ev, a):
        x, y = a[-2], a[-1]
        if not isinstance(x, float) or not isinstance(y, float):
            raise EvalError("float operation on non-float")
        return op(x, y)
    return h


def _p_fdiv(ev, a):
    if a[-1] == 0.0:
        raise EvalError("float division by zero")
    return a[-2] / a[-1]


def _p_sel(ev, a):
    return _arr_index(a[-2], a[-1])


def _p_vidx(ev, a):
    i, v = a[-2], a[-1]
    if not 0 <= i < len(v[1]):
        raise EvalError(f"vector index {i} out of bounds")
    return v[1][i]


def _p_ravel(ev, a):
    arr = a[-1]
    n = 1
    for s in arr[1]:
        n *= s
    return ("arr", (n,), list(arr[2]))


def _p_reshape(ev, a):
    t, arr = a[-2], a[-1]
    shape = tuple(t[1])
    n = 1
    for s in shape:
        n *= s
    if n != len(arr[2]):
        raise EvalError("reshape changes the number of elements")
    return ("arr", shape, list(arr[2]))


def _p_ixc(ev, a):
    k, ix = a[-2], a[-1]
    return ix[1][k]


_PRIM = {
    "_+_": (2, _p_add),
    "_-_": (2, _p_monus),
    "_*_": (2, _p_mul),
    "_/_": (2, _p_div),
    "_%_": (2, _p_mod),
    "div-helper": (4, _p_div_helper),
    "mod-helper": (4, _p_mod_helper),
    "_+f_": (2, _p_fbin(lambda x, y: x + y)),
    "_-f_": (2, _p_fbin(lambda x, y: x - y)),
    "_*f_": (2, _p_fbin(lambda x, y: x * y)),
    "_/f_": (2, _p_fdiv),
    "expf": (1, lambda ev, a: math.exp(a[-1])),
    "_≟_": (2, lambda ev, a: ("dec", a[-2] == a[-1])),
    "_<?_": (2, lambda ev, a: ("dec", a[-2] < a[-1])),
    "fromN<": (3, lambda ev, a: a[-3]),
    "sel": (5, _p_sel),
    "vidx": (4, _p_vidx),
    "vreverse": (3, lambda ev, a: ("vec", tuple(reversed(a[-1][1])))),
    "vhd": (3, lambda ev, a: a[-1][1][0]),
    "vtl": (3, lambda ev, a: ("vec", a[-1][1][1:])),
    "vtake": (4, lambda ev, a: ("vec", a[-1][1][:a[-2]])),
    "vdrop": (4, lambda ev, a: ("vec", a[-1][1][a[-2]:])),
    "vappend": (5, lambda ev, a: ("vec", a[-2][1] + a[-1][1])),
    "_*v_": (3, lambda ev, a: ("vec", tuple(x * a[-1] for x in a[-2][1]))),
    "prodv": (2, lambda ev, a: math.prod(a[-1][1])),
    "ravel": (4, _p_ravel),
    "reshape": (6, _p_reshape),
    "ixc": (4, _p_ixc),
    "ixReverse": (3, lambda ev, a: ("ix", tuple(reversed(a[-1][1])))),
}


# value construction helpers for tests and the harness

def varr(shape, flat):
    return ("arr", tuple(shape), list(flat))


def vvec(items):
    return ("vec", tuple(items))


def vix(items):
    return ("ix", tuple(items))
