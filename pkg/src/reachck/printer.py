"""Pretty printer for terms, types, and qualifiers.

Output reparses to an alpha-equivalent AST; let-desugared applications are
printed back as let. Qualifier atoms print in a fixed order (variables,
locations, fresh) so output is deterministic.
"""

from __future__ import annotations

from .syntax import (Abs, All, App, Ascribe, Assign, Base, BoolLit, Deref,
                     FreshAtom, Fun, If, IsZero, LocAtom, LocTerm, Mul,
                     NatLit, Pred, Qualifier, QualifiedType, RefDual, RefNew,
                     Succ, TAbs, TApp, TVar, Term, Type, UnitLit, Var,
                     VarAtom, alpha_eq_qt)

# precedence levels for terms
_LOW, _ASSIGN, _MUL, _APP, _UNARY, _ATOM = range(6)


def qual_to_str(q: Qualifier) -> str:
    names = sorted(a.name for a in q.atoms if isinstance(a, VarAtom))
    locs = sorted(a.index for a in q.atoms if isinstance(a, LocAtom))
    parts = names + [f"@{i}" for i in locs]
    if any(isinstance(a, FreshAtom) for a in q.atoms):
        parts.append("fresh")
    return "{" + ",".join(parts) + "}"


def type_to_str(ty: Type) -> str:
    match ty:
        case Base(name):
            return name
        case TVar(name):
            return name
        case Fun(f, x, dom, cod):
            return f"({f}({x}: {qtype_to_str(dom)}) -> {qtype_to_str(cod)})"
        case All(f, X, xq, bound, body):
            return (f"forall {f}({X}^{xq} <: {qtype_to_str(bound)}). "
                    f"{qtype_to_str(body)}")
        case RefDual(binder, write, read):
            if alpha_eq_qt(write, read):
                if VarAtom(binder) not in write.qual:
                    return f"Ref[{qtype_to_str(write)}]"
                return f"mu {binder}. Ref[{qtype_to_str(write)}]"
            return (f"mu {binder}. Ref[{qtype_to_str(write)}, "
                    f"{qtype_to_str(read)}]")
    raise TypeError(f"not a type: {ty!r}")


def qtype_to_str(qt: QualifiedType) -> str:
    return f"{type_to_str(qt.ty)}^{qual_to_str(qt.qual)}"


def term_to_str(t: Term) -> str:
    return _term(t, _LOW)


def _paren(s: str, needed: bool) -> str:
    return f"({s})" if needed else s


def _term(t: Term, level: int) -> str:
    match t:
        case UnitLit():
            return "unit"
        case NatLit(v):
            return str(v)
        case BoolLit(v):
            return "true" if v else "false"
        case Var(name):
            return name
        case LocTerm(i):
            return f"@{i}"
        case App(Abs(_, param, domain, None, body, _) as fn, arg) if fn.from_let:
            annot = f" : {qtype_to_str(domain)}" if domain is not None else ""
            s = f"let {param}{annot} = {_term(arg, _LOW)} in {_term(body, _LOW)}"
            return _paren(s, level > _LOW)
        case Abs(f, x, dom, cod, body):
            if dom is None or cod is None:
                # let-desugared abstraction outside an application
                s = f"fun {f}({x}: ?) : ? => {_term(body, _LOW)}"
            else:
                s = (f"fun {f}({x}: {qtype_to_str(dom)}) : {qtype_to_str(cod)} "
                     f"=> {_term(body, _LOW)}")
            return _paren(s, level > _LOW)
        case TAbs(f, X, xq, bound, body):
            s = (f"tfun {f}({X}^{xq} <: {qtype_to_str(bound)}) => "
                 f"{_term(body, _LOW)}")
            return _paren(s, level > _LOW)
        case If(c, a, b):
            s = (f"if {_term(c, _LOW)} then {_term(a, _LOW)} "
                 f"else {_term(b, _LOW)}")
            return _paren(s, level > _LOW)
        case Assign(lhs, rhs):
            s = f"{_term(lhs, _MUL)} := {_term(rhs, _LOW)}"
            return _paren(s, level > _ASSIGN)
        case Mul(a, b):
            s = f"{_term(a, _APP)} * {_term(b, _APP)}"
            return _paren(s, level > _MUL)
        case App(fn, arg):
            s = f"{_term(fn, _APP)} {_term(arg, _UNARY)}"
            return _paren(s, level > _APP)
        case TApp(fn, targ):
            s = f"{_term(fn, _APP)}[{qtype_to_str(targ)}]"
            return _paren(s, level > _APP)
        case RefNew(x):
            return _paren(f"ref {_term(x, _UNARY)}", level > _UNARY)
        case Deref(x):
            return _paren(f"!{_term(x, _UNARY)}", level > _UNARY)
        case Succ(x):
            return _paren(f"succ {_term(x, _UNARY)}", level > _UNARY)
        case Pred(x):
            return _paren(f"pred {_term(x, _UNARY)}", level > _UNARY)
        case IsZero(x):
            return _paren(f"iszero {_term(x, _UNARY)}", level > _UNARY)
        case Ascribe(inner, target):
            return f"({_term(inner, _LOW)} : {qtype_to_str(target)})"
    raise TypeError(f"not a term: {t!r}")
