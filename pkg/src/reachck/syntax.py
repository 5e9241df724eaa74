"""Abstract syntax: qualifiers, types, terms, substitution, alpha-equivalence.

Binder conventions (named representation, capture-avoiding substitution):
  * function types  f(x: P) -> Q      f scopes over P and Q, x over Q only
  * forall types    forall f(X^x <: P). Q   f scopes over P and Q; X, x over Q
  * reference types mu b. Ref[W, R]   b scopes over both components
Terms mirror the types: an abstraction's self-name scopes over its
annotations and body, its parameter over the codomain annotation and body.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Optional, Union

from .errors import Span

# ---------------------------------------------------------------------------
# Qualifier atoms and qualifiers


@dataclass(frozen=True)
class VarAtom:
    name: str

    def __repr__(self):
        return self.name


@dataclass(frozen=True)
class LocAtom:
    index: int

    def __post_init__(self):
        if self.index < 0:
            raise ValueError("store locations are non-negative")

    def __repr__(self):
        return f"l{self.index}"


@dataclass(frozen=True)
class FreshAtom:
    def __repr__(self):
        return "fresh"


FRESH = FreshAtom()

Atom = Union[VarAtom, LocAtom, FreshAtom]


@dataclass(frozen=True)
class Qualifier:
    """A finite, duplicate-free set of atoms with extensional equality."""

    atoms: frozenset = frozenset()

    @staticmethod
    def of(*atoms: Atom) -> "Qualifier":
        return Qualifier(frozenset(atoms))

    @staticmethod
    def of_vars(*names: str) -> "Qualifier":
        return Qualifier(frozenset(VarAtom(n) for n in names))

    def __contains__(self, atom: Atom) -> bool:
        return atom in self.atoms

    def __iter__(self):
        return iter(self.atoms)

    def __len__(self):
        return len(self.atoms)

    def __or__(self, other: "Qualifier") -> "Qualifier":
        return Qualifier(self.atoms | other.atoms)

    def __and__(self, other: "Qualifier") -> "Qualifier":
        return Qualifier(self.atoms & other.atoms)

    def __sub__(self, other: "Qualifier") -> "Qualifier":
        return Qualifier(self.atoms - other.atoms)

    def __le__(self, other: "Qualifier") -> bool:
        return self.atoms <= other.atoms

    def minus(self, atom: Atom) -> "Qualifier":
        """Qualifier exclusion q (-) x."""
        return Qualifier(self.atoms - {atom})

    def add(self, atom: Atom) -> "Qualifier":
        return Qualifier(self.atoms | {atom})

    @property
    def has_fresh(self) -> bool:
        return FRESH in self.atoms

    def without_fresh(self) -> "Qualifier":
        return Qualifier(self.atoms - {FRESH})

    @property
    def var_names(self) -> frozenset:
        return frozenset(a.name for a in self.atoms if isinstance(a, VarAtom))

    @property
    def loc_indices(self) -> frozenset:
        return frozenset(a.index for a in self.atoms if isinstance(a, LocAtom))

    def subst(self, atom: Atom, replacement: "Qualifier") -> "Qualifier":
        """q[replacement/atom]: replace atom by a whole atom set."""
        if atom in self.atoms:
            return Qualifier(self.atoms - {atom}) | replacement
        return self

    def __repr__(self):
        if not self.atoms:
            return "{}"
        return "{" + ",".join(sorted(map(repr, self.atoms))) + "}"


EMPTY_QUAL = Qualifier()
FRESH_QUAL = Qualifier.of(FRESH)


def is_singleton_or_empty(q: Qualifier) -> bool:
    """Membership in P1 + {empty}: empty, one variable, or one location.

    Fresh alone does not qualify.
    """
    if not q.atoms:
        return True
    if len(q.atoms) != 1:
        return False
    (a,) = q.atoms
    return isinstance(a, (VarAtom, LocAtom))


def contains_fresh(q: Qualifier) -> bool:
    return q.has_fresh


# ---------------------------------------------------------------------------
# Types


class Type:
    pass


@dataclass(frozen=True)
class Base(Type):
    name: str

    def __repr__(self):
        return self.name


UNIT = Base("Unit")
NAT = Base("Nat")
BOOL = Base("Bool")
TOP = Base("Top")
BOT = Base("Bot")


@dataclass(frozen=True)
class TVar(Type):
    name: str

    def __repr__(self):
        return self.name


@dataclass(frozen=True)
class QualifiedType:
    ty: Type
    qual: Qualifier

    def __repr__(self):
        return f"{self.ty!r}^{self.qual!r}"


@dataclass(frozen=True)
class Fun(Type):
    self_name: str
    param: str
    domain: QualifiedType
    codomain: QualifiedType

    def __repr__(self):
        return f"({self.self_name}({self.param}: {self.domain!r}) -> {self.codomain!r})"


@dataclass(frozen=True)
class All(Type):
    self_name: str
    tvar: str
    qvar: str
    bound: QualifiedType
    body: QualifiedType

    def __repr__(self):
        return (f"(forall {self.self_name}({self.tvar}^{self.qvar} <: "
                f"{self.bound!r}). {self.body!r})")


@dataclass(frozen=True)
class RefDual(Type):
    """mu binder. Ref[write, read]; plain references collapse write = read."""

    binder: str
    write: QualifiedType
    read: QualifiedType

    def __repr__(self):
        return f"(mu {self.binder}. Ref[{self.write!r}, {self.read!r}])"

    @property
    def is_cyclic(self) -> bool:
        b = VarAtom(self.binder)
        return b in self.write.qual or b in self.read.qual


def plain_ref(referent: QualifiedType, binder: str = "z") -> RefDual:
    """Non-cyclic Ref[Q]: the binder occurs in neither component."""
    if VarAtom(binder) in referent.qual:
        binder = fresh_name(binder)
    return RefDual(binder, referent, referent)


# ---------------------------------------------------------------------------
# Terms

_SPAN = dict(default=None, compare=False, repr=False)


class Term:
    pass


@dataclass(frozen=True)
class UnitLit(Term):
    span: Optional[Span] = field(**_SPAN)


@dataclass(frozen=True)
class NatLit(Term):
    value: int
    span: Optional[Span] = field(**_SPAN)

    def __post_init__(self):
        if self.value < 0:
            raise ValueError("naturals are non-negative")


@dataclass(frozen=True)
class BoolLit(Term):
    value: bool
    span: Optional[Span] = field(**_SPAN)


@dataclass(frozen=True)
class Var(Term):
    name: str
    span: Optional[Span] = field(**_SPAN)


@dataclass(frozen=True)
class Abs(Term):
    """lambda self(param). body, optionally annotated with domain/codomain.

    Unannotated abstractions only arise from let-desugaring; the checker
    fills their annotations from the bound expression.
    """

    self_name: str
    param: str
    domain: Optional[QualifiedType]
    codomain: Optional[QualifiedType]
    body: Term
    from_let: bool = field(default=False, compare=False, repr=False)
    span: Optional[Span] = field(**_SPAN)


@dataclass(frozen=True)
class App(Term):
    fn: Term
    arg: Term
    span: Optional[Span] = field(**_SPAN)


@dataclass(frozen=True)
class RefNew(Term):
    init: Term
    span: Optional[Span] = field(**_SPAN)


@dataclass(frozen=True)
class Deref(Term):
    target: Term
    span: Optional[Span] = field(**_SPAN)


@dataclass(frozen=True)
class Assign(Term):
    lhs: Term
    rhs: Term
    span: Optional[Span] = field(**_SPAN)


@dataclass(frozen=True)
class TAbs(Term):
    self_name: str
    tvar: str
    qvar: str
    bound: QualifiedType
    body: Term
    span: Optional[Span] = field(**_SPAN)


@dataclass(frozen=True)
class TApp(Term):
    fn: Term
    targ: QualifiedType
    span: Optional[Span] = field(**_SPAN)


@dataclass(frozen=True)
class LocTerm(Term):
    index: int
    span: Optional[Span] = field(**_SPAN)


@dataclass(frozen=True)
class Succ(Term):
    arg: Term
    span: Optional[Span] = field(**_SPAN)


@dataclass(frozen=True)
class Pred(Term):
    arg: Term
    span: Optional[Span] = field(**_SPAN)


@dataclass(frozen=True)
class Mul(Term):
    left: Term
    right: Term
    span: Optional[Span] = field(**_SPAN)


@dataclass(frozen=True)
class IsZero(Term):
    arg: Term
    span: Optional[Span] = field(**_SPAN)


@dataclass(frozen=True)
class If(Term):
    cond: Term
    then: Term
    els: Term
    span: Optional[Span] = field(**_SPAN)


@dataclass(frozen=True)
class Ascribe(Term):
    term: Term
    target: QualifiedType
    span: Optional[Span] = field(**_SPAN)


def is_value(t: Term) -> bool:
    return isinstance(t, (Abs, TAbs, UnitLit, NatLit, BoolLit, LocTerm))


# ---------------------------------------------------------------------------
# Fresh names

_fresh_counter = itertools.count()


def fresh_name(base: str = "x") -> str:
    """A name no surface program can contain ('%' is not lexable)."""
    stem = base.split("%", 1)[0]
    return f"{stem}%{next(_fresh_counter)}"


# ---------------------------------------------------------------------------
# Free atoms and free type variables


def type_free_atoms(ty: Type) -> frozenset:
    """Var/Loc atoms free in qualifier positions of a type (never fresh)."""
    match ty:
        case Base() | TVar():
            return frozenset()
        case Fun(f, x, dom, cod):
            # the parameter does not scope over its own domain annotation
            free = qt_free_atoms(dom) | (qt_free_atoms(cod) - {VarAtom(x)})
            return free - {VarAtom(f)}
        case All(f, _X, xq, bound, body):
            free = qt_free_atoms(bound) | (qt_free_atoms(body) - {VarAtom(xq)})
            return free - {VarAtom(f)}
        case RefDual(b, w, r):
            return (qt_free_atoms(w) | qt_free_atoms(r)) - {VarAtom(b)}
    raise TypeError(f"not a type: {ty!r}")


def qt_free_atoms(qt: QualifiedType) -> frozenset:
    own = frozenset(a for a in qt.qual.atoms if not isinstance(a, FreshAtom))
    return own | type_free_atoms(qt.ty)


def type_free_tvars(ty: Type) -> frozenset:
    match ty:
        case Base():
            return frozenset()
        case TVar(name):
            return frozenset({name})
        case Fun(_, _, dom, cod):
            return qt_free_tvars(dom) | qt_free_tvars(cod)
        case All(_, X, _, bound, body):
            return qt_free_tvars(bound) | (qt_free_tvars(body) - {X})
        case RefDual(_, w, r):
            return qt_free_tvars(w) | qt_free_tvars(r)
    raise TypeError(f"not a type: {ty!r}")


def qt_free_tvars(qt: QualifiedType) -> frozenset:
    return type_free_tvars(qt.ty)


def free_atoms(t: Term) -> frozenset:
    """Free Var/Loc atoms of a term, including those inside annotations."""
    match t:
        case UnitLit() | NatLit() | BoolLit():
            return frozenset()
        case Var(name):
            return frozenset({VarAtom(name)})
        case LocTerm(index):
            return frozenset({LocAtom(index)})
        case Abs(f, x, dom, cod, body):
            free = frozenset() if dom is None else qt_free_atoms(dom)
            inner = free_atoms(body)
            if cod is not None:
                inner = inner | qt_free_atoms(cod)
            return (free | (inner - {VarAtom(x)})) - {VarAtom(f)}
        case App(fn, arg) | Mul(fn, arg) | Assign(fn, arg):
            return free_atoms(fn) | free_atoms(arg)
        case RefNew(t1) | Deref(t1) | Succ(t1) | Pred(t1) | IsZero(t1):
            return free_atoms(t1)
        case TAbs(f, _X, xq, bound, body):
            inner = free_atoms(body) - {VarAtom(xq)}
            return (qt_free_atoms(bound) | inner) - {VarAtom(f)}
        case TApp(fn, targ):
            return free_atoms(fn) | qt_free_atoms(targ)
        case If(c, t1, t2):
            return free_atoms(c) | free_atoms(t1) | free_atoms(t2)
        case Ascribe(t1, target):
            return free_atoms(t1) | qt_free_atoms(target)
    raise TypeError(f"not a term: {t!r}")


def free_term_vars(t: Term) -> frozenset:
    return frozenset(a.name for a in free_atoms(t) if isinstance(a, VarAtom))


def term_free_tvars(t: Term) -> frozenset:
    match t:
        case UnitLit() | NatLit() | BoolLit() | Var() | LocTerm():
            return frozenset()
        case Abs(_, _, dom, cod, body):
            free = frozenset() if dom is None else qt_free_tvars(dom)
            if cod is not None:
                free = free | qt_free_tvars(cod)
            return free | term_free_tvars(body)
        case App(a, b) | Mul(a, b) | Assign(a, b):
            return term_free_tvars(a) | term_free_tvars(b)
        case RefNew(t1) | Deref(t1) | Succ(t1) | Pred(t1) | IsZero(t1):
            return term_free_tvars(t1)
        case TAbs(_, X, _, bound, body):
            return qt_free_tvars(bound) | (term_free_tvars(body) - {X})
        case TApp(fn, targ):
            return term_free_tvars(fn) | qt_free_tvars(targ)
        case If(c, t1, t2):
            return term_free_tvars(c) | term_free_tvars(t1) | term_free_tvars(t2)
        case Ascribe(t1, target):
            return term_free_tvars(t1) | qt_free_tvars(target)
    raise TypeError(f"not a term: {t!r}")


# ---------------------------------------------------------------------------
# Substitution over types: qualifiers and type variables
#
# A single engine handles both so that beta_T (which substitutes a type for
# a type variable and an atom set for its qualifier binder at once) stays
# capture-avoiding in one pass.


@dataclass(frozen=True)
class TypeSubst:
    quals: tuple = ()   # pairs (var name, Qualifier)
    tvars: tuple = ()   # pairs (type var name, Type)

    @staticmethod
    def for_qual(name: str, q: Qualifier) -> "TypeSubst":
        return TypeSubst(quals=((name, q),))

    @staticmethod
    def for_quals(pairs: Iterable[tuple]) -> "TypeSubst":
        return TypeSubst(quals=tuple(pairs))

    def dropping(self, name: str) -> "TypeSubst":
        return TypeSubst(
            quals=tuple((n, q) for n, q in self.quals if n != name),
            tvars=self.tvars,
        )

    def dropping_tvar(self, name: str) -> "TypeSubst":
        return TypeSubst(
            quals=self.quals,
            tvars=tuple((n, t) for n, t in self.tvars if n != name),
        )

    def lookup_qual(self, name: str) -> Optional[Qualifier]:
        for n, q in self.quals:
            if n == name:
                return q
        return None

    def lookup_tvar(self, name: str) -> Optional[Type]:
        for n, t in self.tvars:
            if n == name:
                return t
        return None

    @property
    def is_empty(self) -> bool:
        return not self.quals and not self.tvars

    def replacement_atoms(self) -> frozenset:
        atoms = frozenset()
        for _, q in self.quals:
            atoms |= q.atoms
        for _, t in self.tvars:
            atoms |= type_free_atoms(t)
        return atoms

    def replacement_tvars(self) -> frozenset:
        names = frozenset()
        for _, t in self.tvars:
            names |= type_free_tvars(t)
        return names


def _subst_qual(q: Qualifier, s: TypeSubst) -> Qualifier:
    out = set()
    for a in q.atoms:
        rep = s.lookup_qual(a.name) if isinstance(a, VarAtom) else None
        if rep is None:
            out.add(a)
        else:
            out |= rep.atoms
    return Qualifier(frozenset(out))


def _avoid_capture_binder(binder: str, s: TypeSubst, relevant: bool):
    """Rename the binder if a replacement could capture it."""
    if not relevant:
        return binder, None
    if VarAtom(binder) in s.replacement_atoms():
        return fresh_name(binder), binder
    return binder, None


def subst_in_type(ty: Type, s: TypeSubst) -> Type:
    if s.is_empty:
        return ty
    match ty:
        case Base():
            return ty
        case TVar(name):
            rep = s.lookup_tvar(name)
            return rep if rep is not None else ty
        case Fun(f, x, dom, cod):
            s_f = s.dropping(f)
            f2, old_f = _avoid_capture_binder(f, s_f, True)
            if old_f is not None:
                dom = subst_in_qt(dom, TypeSubst.for_qual(old_f, Qualifier.of_vars(f2)))
                cod = subst_in_qt(cod, TypeSubst.for_qual(old_f, Qualifier.of_vars(f2)))
            dom2 = subst_in_qt(dom, s_f)
            s_x = s_f.dropping(x)
            x2, old_x = _avoid_capture_binder(x, s_x, True)
            if old_x is not None:
                cod = subst_in_qt(cod, TypeSubst.for_qual(old_x, Qualifier.of_vars(x2)))
            cod2 = subst_in_qt(cod, s_x)
            return Fun(f2, x2, dom2, cod2)
        case All(f, X, xq, bound, body):
            s_f = s.dropping(f)
            f2, old_f = _avoid_capture_binder(f, s_f, True)
            if old_f is not None:
                ren = TypeSubst.for_qual(old_f, Qualifier.of_vars(f2))
                bound = subst_in_qt(bound, ren)
                body = subst_in_qt(body, ren)
            bound2 = subst_in_qt(bound, s_f)
            s_b = s_f.dropping(xq).dropping_tvar(X)
            xq2, old_xq = _avoid_capture_binder(xq, s_b, True)
            if old_xq is not None:
                body = subst_in_qt(body, TypeSubst.for_qual(old_xq, Qualifier.of_vars(xq2)))
            X2 = X
            if X in s_b.replacement_tvars():
                X2 = fresh_name(X)
                body = subst_in_qt(body, TypeSubst(tvars=((X, TVar(X2)),)))
            body2 = subst_in_qt(body, s_b)
            return All(f2, X2, xq2, bound2, body2)
        case RefDual(b, w, r):
            s_b = s.dropping(b)
            b2, old_b = _avoid_capture_binder(b, s_b, True)
            if old_b is not None:
                ren = TypeSubst.for_qual(old_b, Qualifier.of_vars(b2))
                w = subst_in_qt(w, ren)
                r = subst_in_qt(r, ren)
            return RefDual(b2, subst_in_qt(w, s_b), subst_in_qt(r, s_b))
    raise TypeError(f"not a type: {ty!r}")


def subst_in_qt(qt: QualifiedType, s: TypeSubst) -> QualifiedType:
    return QualifiedType(subst_in_type(qt.ty, s), _subst_qual(qt.qual, s))


def subst_qual_in_type(ty: Type, name: str, q: Qualifier) -> Type:
    """T[q/name] on all qualifier positions; binders named `name` shield."""
    return subst_in_type(ty, TypeSubst.for_qual(name, q))


def subst_qual_in_qt(qt: QualifiedType, name: str, q: Qualifier) -> QualifiedType:
    return subst_in_qt(qt, TypeSubst.for_qual(name, q))


# ---------------------------------------------------------------------------
# Substitution over terms
#
# Beta substitutes simultaneously: the parameter and self-reference at the
# term level, and the same names inside annotation qualifiers (a value's
# qualifier is its set of free locations once the program is closed).


@dataclass(frozen=True)
class TermSubst:
    terms: tuple = ()   # pairs (name, Term)
    types: TypeSubst = TypeSubst()

    def dropping(self, name: str) -> "TermSubst":
        return TermSubst(
            terms=tuple((n, v) for n, v in self.terms if n != name),
            types=self.types.dropping(name),
        )

    def dropping_tvar(self, name: str) -> "TermSubst":
        return TermSubst(terms=self.terms, types=self.types.dropping_tvar(name))

    def lookup(self, name: str) -> Optional[Term]:
        for n, v in self.terms:
            if n == name:
                return v
        return None

    @property
    def is_empty(self) -> bool:
        return not self.terms and self.types.is_empty

    def replacement_atoms(self) -> frozenset:
        atoms = self.types.replacement_atoms()
        for _, v in self.terms:
            atoms |= free_atoms(v)
        return atoms


def value_qualifier(v: Term) -> Qualifier:
    """The minimal qualifier of a closed value: exactly its free locations."""
    return Qualifier(free_atoms(v))


def beta_subst(t: Term, x: str, v: Term, f: str, fn_val: Term) -> Term:
    """The beta contraction t[v/x, fn/f], annotations included."""
    return subst_in_term(t, TermSubst(
        terms=((x, v), (f, fn_val)),
        types=TypeSubst.for_quals(((x, value_qualifier(v)), (f, value_qualifier(fn_val)))),
    ))


def beta_t_subst(t: Term, X: str, xq: str, targ: QualifiedType, f: str, fn_val: Term) -> Term:
    """The beta_T contraction t[Q/X^x, tabs/f]."""
    return subst_in_term(t, TermSubst(
        terms=((f, fn_val),),
        types=TypeSubst(
            quals=((xq, targ.qual), (f, value_qualifier(fn_val))),
            tvars=((X, targ.ty),),
        ),
    ))


def subst_term_var(t: Term, x: str, v: Term) -> Term:
    """Plain capture-avoiding term substitution t[v/x]."""
    return subst_in_term(t, TermSubst(
        terms=((x, v),),
        types=TypeSubst.for_qual(x, value_qualifier(v)),
    ))


def _rename_term_binder(binder: str, s: TermSubst):
    if VarAtom(binder) in s.replacement_atoms():
        return fresh_name(binder), binder
    return binder, None


def _rename_in(t: Term, old: str, new: str) -> Term:
    return subst_in_term(t, TermSubst(
        terms=((old, Var(new)),),
        types=TypeSubst.for_qual(old, Qualifier.of_vars(new)),
    ))


def subst_in_term(t: Term, s: TermSubst) -> Term:
    if s.is_empty:
        return t
    ts = s.types

    def qt(q: Optional[QualifiedType]) -> Optional[QualifiedType]:
        return None if q is None else subst_in_qt(q, ts)

    match t:
        case UnitLit() | NatLit() | BoolLit() | LocTerm():
            return t
        case Var(name):
            rep = s.lookup(name)
            return rep if rep is not None else t
        case Abs(f, x, dom, cod, body, from_let):
            s_f = s.dropping(f)
            f2, old_f = _rename_term_binder(f, s_f)
            if old_f is not None:
                if dom is not None:
                    dom = subst_in_qt(dom, TypeSubst.for_qual(old_f, Qualifier.of_vars(f2)))
                if cod is not None:
                    cod = subst_in_qt(cod, TypeSubst.for_qual(old_f, Qualifier.of_vars(f2)))
                body = _rename_in(body, old_f, f2)
            dom2 = None if dom is None else subst_in_qt(dom, s_f.types)
            s_x = s_f.dropping(x)
            x2, old_x = _rename_term_binder(x, s_x)
            if old_x is not None:
                if cod is not None:
                    cod = subst_in_qt(cod, TypeSubst.for_qual(old_x, Qualifier.of_vars(x2)))
                body = _rename_in(body, old_x, x2)
            cod2 = None if cod is None else subst_in_qt(cod, s_x.types)
            return Abs(f2, x2, dom2, cod2, subst_in_term(body, s_x), from_let, span=t.span)
        case App(fn, arg):
            return App(subst_in_term(fn, s), subst_in_term(arg, s), span=t.span)
        case RefNew(t1):
            return RefNew(subst_in_term(t1, s), span=t.span)
        case Deref(t1):
            return Deref(subst_in_term(t1, s), span=t.span)
        case Assign(lhs, rhs):
            return Assign(subst_in_term(lhs, s), subst_in_term(rhs, s), span=t.span)
        case TAbs(f, X, xq, bound, body):
            s_f = s.dropping(f)
            f2, old_f = _rename_term_binder(f, s_f)
            if old_f is not None:
                bound = subst_in_qt(bound, TypeSubst.for_qual(old_f, Qualifier.of_vars(f2)))
                body = _rename_in(body, old_f, f2)
            bound2 = subst_in_qt(bound, s_f.types)
            s_b = s_f.dropping(xq).dropping_tvar(X)
            xq2, old_xq = _rename_term_binder(xq, s_b)
            if old_xq is not None:
                body = _rename_in(body, old_xq, xq2)
            X2 = X
            if X in s_b.types.replacement_tvars():
                X2 = fresh_name(X)
                body = subst_in_term(body, TermSubst(types=TypeSubst(tvars=((X, TVar(X2)),))))
            return TAbs(f2, X2, xq2, bound2, subst_in_term(body, s_b), span=t.span)
        case TApp(fn, targ):
            return TApp(subst_in_term(fn, s), subst_in_qt(targ, ts), span=t.span)
        case Succ(t1):
            return Succ(subst_in_term(t1, s), span=t.span)
        case Pred(t1):
            return Pred(subst_in_term(t1, s), span=t.span)
        case Mul(a, b):
            return Mul(subst_in_term(a, s), subst_in_term(b, s), span=t.span)
        case IsZero(t1):
            return IsZero(subst_in_term(t1, s), span=t.span)
        case If(c, t1, t2):
            return If(subst_in_term(c, s), subst_in_term(t1, s), subst_in_term(t2, s),
                      span=t.span)
        case Ascribe(t1, target):
            return Ascribe(subst_in_term(t1, s), subst_in_qt(target, ts), span=t.span)
    raise TypeError(f"not a term: {t!r}")


# ---------------------------------------------------------------------------
# Alpha-equivalence


def _aq_atom(a: Atom, b: Atom, env_l: dict, env_r: dict) -> bool:
    if isinstance(a, VarAtom) and isinstance(b, VarAtom):
        la, lb = env_l.get(a.name), env_r.get(b.name)
        if la is None and lb is None:
            return a.name == b.name
        return la is not None and la == lb
    return a == b


def _aq_qual(p: Qualifier, q: Qualifier, env_l: dict, env_r: dict) -> bool:
    if len(p.atoms) != len(q.atoms):
        return False
    remaining = set(q.atoms)
    for a in p.atoms:
        hit = next((b for b in remaining if _aq_atom(a, b, env_l, env_r)), None)
        if hit is None:
            return False
        remaining.discard(hit)
    return True


def _aq_type(s: Type, t: Type, env_l: dict, env_r: dict, tenv_l: dict, tenv_r: dict) -> bool:
    match (s, t):
        case (Base(n1), Base(n2)):
            return n1 == n2
        case (TVar(n1), TVar(n2)):
            l1, l2 = tenv_l.get(n1), tenv_r.get(n2)
            if l1 is None and l2 is None:
                return n1 == n2
            return l1 is not None and l1 == l2
        case (Fun(f1, x1, d1, c1), Fun(f2, x2, d2, c2)):
            lvl = len(env_l)
            el1 = {**env_l, f1: lvl}
            er1 = {**env_r, f2: lvl}
            if not _aq_qt(d1, d2, el1, er1, tenv_l, tenv_r):
                return False
            el2 = {**el1, x1: lvl + 1}
            er2 = {**er1, x2: lvl + 1}
            return _aq_qt(c1, c2, el2, er2, tenv_l, tenv_r)
        case (All(f1, X1, q1, b1, bd1), All(f2, X2, q2, b2, bd2)):
            lvl = len(env_l)
            el1 = {**env_l, f1: lvl}
            er1 = {**env_r, f2: lvl}
            if not _aq_qt(b1, b2, el1, er1, tenv_l, tenv_r):
                return False
            el2 = {**el1, q1: lvl + 1}
            er2 = {**er1, q2: lvl + 1}
            tl = {**tenv_l, X1: lvl}
            tr = {**tenv_r, X2: lvl}
            return _aq_qt(bd1, bd2, el2, er2, tl, tr)
        case (RefDual(b1, w1, r1), RefDual(b2, w2, r2)):
            lvl = len(env_l)
            el = {**env_l, b1: lvl}
            er = {**env_r, b2: lvl}
            return (_aq_qt(w1, w2, el, er, tenv_l, tenv_r)
                    and _aq_qt(r1, r2, el, er, tenv_l, tenv_r))
    return False


def _aq_qt(p: QualifiedType, q: QualifiedType, env_l, env_r, tenv_l, tenv_r) -> bool:
    return (_aq_qual(p.qual, q.qual, env_l, env_r)
            and _aq_type(p.ty, q.ty, env_l, env_r, tenv_l, tenv_r))


def alpha_eq_type(s: Type, t: Type) -> bool:
    return _aq_type(s, t, {}, {}, {}, {})


def alpha_eq_qt(p: QualifiedType, q: QualifiedType) -> bool:
    return _aq_qt(p, q, {}, {}, {}, {})


def _aq_term(s: Term, t: Term, env_l: dict, env_r: dict, tenv_l: dict, tenv_r: dict) -> bool:
    def qt_eq(a, b):
        if a is None or b is None:
            return a is b
        return _aq_qt(a, b, env_l, env_r, tenv_l, tenv_r)

    match (s, t):
        case (UnitLit(), UnitLit()):
            return True
        case (NatLit(v1), NatLit(v2)):
            return v1 == v2
        case (BoolLit(v1), BoolLit(v2)):
            return v1 == v2
        case (LocTerm(i1), LocTerm(i2)):
            return i1 == i2
        case (Var(n1), Var(n2)):
            l1, l2 = env_l.get(n1), env_r.get(n2)
            if l1 is None and l2 is None:
                return n1 == n2
            return l1 is not None and l1 == l2
        case (Abs(f1, x1, d1, c1, b1), Abs(f2, x2, d2, c2, b2)):
            lvl = len(env_l)
            el1 = {**env_l, f1: lvl}
            er1 = {**env_r, f2: lvl}
            if d1 is None or d2 is None:
                if (d1 is None) != (d2 is None):
                    return False
            elif not _aq_qt(d1, d2, el1, er1, tenv_l, tenv_r):
                return False
            el2 = {**el1, x1: lvl + 1}
            er2 = {**er1, x2: lvl + 1}
            if c1 is None or c2 is None:
                if (c1 is None) != (c2 is None):
                    return False
            elif not _aq_qt(c1, c2, el2, er2, tenv_l, tenv_r):
                return False
            return _aq_term(b1, b2, el2, er2, tenv_l, tenv_r)
        case (App(f1, a1), App(f2, a2)) | (Mul(f1, a1), Mul(f2, a2)) | \
             (Assign(f1, a1), Assign(f2, a2)):
            return (_aq_term(f1, f2, env_l, env_r, tenv_l, tenv_r)
                    and _aq_term(a1, a2, env_l, env_r, tenv_l, tenv_r))
        case (RefNew(a), RefNew(b)) | (Deref(a), Deref(b)) | (Succ(a), Succ(b)) | \
             (Pred(a), Pred(b)) | (IsZero(a), IsZero(b)):
            return _aq_term(a, b, env_l, env_r, tenv_l, tenv_r)
        case (TAbs(f1, X1, q1, bd1, b1), TAbs(f2, X2, q2, bd2, b2)):
            lvl = len(env_l)
            el1 = {**env_l, f1: lvl}
            er1 = {**env_r, f2: lvl}
            if not _aq_qt(bd1, bd2, el1, er1, tenv_l, tenv_r):
                return False
            el2 = {**el1, q1: lvl + 1}
            er2 = {**er1, q2: lvl + 1}
            tl = {**tenv_l, X1: lvl}
            tr = {**tenv_r, X2: lvl}
            return _aq_term(b1, b2, el2, er2, tl, tr)
        case (TApp(f1, q1), TApp(f2, q2)):
            return (_aq_term(f1, f2, env_l, env_r, tenv_l, tenv_r)
                    and _aq_qt(q1, q2, env_l, env_r, tenv_l, tenv_r))
        case (If(c1, t1, e1), If(c2, t2, e2)):
            return (_aq_term(c1, c2, env_l, env_r, tenv_l, tenv_r)
                    and _aq_term(t1, t2, env_l, env_r, tenv_l, tenv_r)
                    and _aq_term(e1, e2, env_l, env_r, tenv_l, tenv_r))
        case (Ascribe(t1, q1), Ascribe(t2, q2)):
            return (_aq_term(t1, t2, env_l, env_r, tenv_l, tenv_r)
                    and _aq_qt(q1, q2, env_l, env_r, tenv_l, tenv_r))
    return False


def alpha_eq(s: Term, t: Term) -> bool:
    return _aq_term(s, t, {}, {}, {}, {})
