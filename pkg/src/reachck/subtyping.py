"""Algorithmic subtyping: qualifiers, types, qualified types, and escaping.

Qualifier subtyping is decided as membership in a self-expanded right side
(absorbing q-self), with fuel-bounded left rewriting by q-var/q-qvar for
residual atoms. Transitivity is admissible, never a rule.

Reference subtyping follows the dual-component discipline: the write
component is contravariant, the read component covariant. The escape rule
may additionally move read-qualifier atoms into the outer qualifier,
abstracting them by the cyclic binder; nested reads escape iteratively.
"""

from __future__ import annotations

from typing import Optional

from .environments import Observation, TypingContext
from .syntax import (BOT, FRESH, TOP, All, Base, Fun, Qualifier,
                     QualifiedType, RefDual, TVar, Type, VarAtom,
                     alpha_eq_qt, alpha_eq_type, fresh_name,
                     subst_qual_in_qt)


def _self_expand(ctx: TypingContext, q: Qualifier) -> frozenset:
    """Close q under q-self: a member f absorbs its fresh-free declared set."""
    atoms = set(q.atoms)
    for _ in range(len(ctx) + 1):
        grown = set(atoms)
        for a in list(atoms):
            if not isinstance(a, VarAtom):
                continue
            qt = ctx.lookup_term(a.name)
            if qt is not None and not qt.qual.has_fresh:
                grown |= qt.qual.atoms
        if grown == atoms:
            break
        atoms = grown
    return frozenset(atoms)


def _rewrites(ctx: TypingContext, atom) -> Optional[Qualifier]:
    """The q-var/q-qvar left step for one atom, if it has a fresh-free bound."""
    if not isinstance(atom, VarAtom):
        return None
    qt = ctx.lookup_term(atom.name)
    if qt is not None:
        return qt.qual if not qt.qual.has_fresh else None
    tb = ctx.lookup_qvar(atom.name)
    if tb is not None and not tb.bound.qual.has_fresh:
        return tb.bound.qual
    return None


def sub_qual(ctx: TypingContext, p: Qualifier, q: Qualifier) -> bool:
    """Decide Gamma |- p <: q."""
    expanded = _self_expand(ctx, q)

    visiting: set = set()

    def atom_leq(a) -> bool:
        if a in expanded:
            return True
        if a in visiting:
            return False
        rw = _rewrites(ctx, a)
        if rw is None:
            return False
        visiting.add(a)
        ok = all(atom_leq(b) for b in rw.atoms)
        visiting.discard(a)
        return ok

    return all(atom_leq(a) for a in p.atoms)


def first_undischarged(ctx: TypingContext, p: Qualifier, q: Qualifier):
    """Diagnostic helper: one atom of p that does not embed into q."""
    for a in sorted(p.atoms, key=repr):
        if not sub_qual(ctx, Qualifier.of(a), q):
            return a
    return None


def explain_mismatch(ctx: TypingContext, p: QualifiedType,
                     q: QualifiedType) -> str:
    """Name the stage (type, qualifier, or escape) at which p <: q failed."""
    if not sub_type(ctx, p.ty, q.ty, outer=p.qual):
        if escape_requires(ctx, p.ty, q.ty, outer=p.qual) is not None:
            return "escape stage: the grown outer qualifier is not admissible"
        return f"type component: {p.ty!r} is not a subtype of {q.ty!r}"
    atom = first_undischarged(ctx, p.qual, q.qual)
    if atom is not None:
        return f"qualifier component: atom {atom!r} does not embed into {q.qual!r}"
    return "qualified subtyping failed"


def _align_binder(ty: RefDual, name: str) -> RefDual:
    ren = Qualifier.of_vars(name)
    return RefDual(name,
                   subst_qual_in_qt(ty.write, ty.binder, ren),
                   subst_qual_in_qt(ty.read, ty.binder, ren))


def _bind_ref_binder(ctx: TypingContext, name: str, lhs: RefDual,
                     outer: Optional[Qualifier]) -> TypingContext:
    # the binder stands for the reference's own qualifier; when that is
    # unknown (nested positions) it is kept inert by marking it fresh
    qual = outer if outer is not None else Qualifier.of(FRESH)
    try:
        return ctx.bind_term(name, QualifiedType(lhs, qual))
    except Exception:
        return ctx.bind_term(name, QualifiedType(lhs, Qualifier.of(FRESH)))


def sub_type(ctx: TypingContext, s: Type, t: Type,
             outer: Optional[Qualifier] = None) -> bool:
    """Syntax-directed Gamma |- s <: t (transitivity admissible)."""
    if s == BOT:
        return True
    if t == TOP:
        return True
    match (s, t):
        case (Base(n1), Base(n2)):
            return n1 == n2
        case (TVar(n1), TVar(n2)) if n1 == n2:
            return True
        case (Fun(), Fun()):
            name_f = fresh_name("f")
            name_x = fresh_name("x")
            sf = _align_fun(s, name_f, name_x)
            tf = _align_fun(t, name_f, name_x)
            if not sub_qtype(ctx, tf.domain, sf.domain):
                return False
            ctx1 = ctx.bind_term(name_f, QualifiedType(sf, Qualifier.of(FRESH)))
            ctx2 = ctx1.bind_term(name_x, tf.domain)
            return sub_qtype(ctx2, sf.codomain, tf.codomain)
        case (All(), All()):
            # no congruence rule for quantified types; reflexivity only
            return alpha_eq_type(s, t)
        case (RefDual(), RefDual()):
            name = fresh_name("mu")
            sa = _align_binder(s, name)
            ta = _align_binder(t, name)
            ctx_b = _bind_ref_binder(ctx, name, sa, outer)
            return (sub_qual(ctx_b, ta.write.qual, sa.write.qual)
                    and sub_qual(ctx_b, sa.read.qual, ta.read.qual)
                    and sub_type(ctx, ta.write.ty, sa.write.ty)
                    and sub_type(ctx, sa.read.ty, ta.read.ty))
    # s-tvar: widen a type variable through its declared bound
    if isinstance(s, TVar):
        tb = ctx.lookup_type(s.name)
        if tb is not None:
            return sub_type(ctx, tb.bound.ty, t, outer)
    return False


def _align_fun(f: Fun, name_f: str, name_x: str) -> Fun:
    ren_f = Qualifier.of_vars(name_f)
    ren_x = Qualifier.of_vars(name_x)
    dom = subst_qual_in_qt(f.domain, f.self_name, ren_f)
    cod = subst_qual_in_qt(
        subst_qual_in_qt(f.codomain, f.self_name, ren_f), f.param, ren_x)
    return Fun(name_f, name_x, dom, cod)


def sub_qtype(ctx: TypingContext, p: QualifiedType, q: QualifiedType) -> bool:
    """sq-sub: componentwise subtyping, no escaping."""
    if alpha_eq_qt(p, q):
        return True
    return sub_type(ctx, p.ty, q.ty, outer=p.qual) and sub_qual(ctx, p.qual, q.qual)


# ---------------------------------------------------------------------------
# Escaping (the t-esc search, iterated through nested read components)


def escape_requires(ctx: TypingContext, s: Type, t: Type,
                    outer: Optional[Qualifier] = None) -> Optional[frozenset]:
    """Fit s under t, allowing read-qualifier atoms to escape outward.

    Returns the set of atoms the outer qualifier must absorb (empty when
    plain subtyping suffices), or None when the types cannot be fitted.
    """
    if sub_type(ctx, s, t, outer):
        return frozenset()
    if not (isinstance(s, RefDual) and isinstance(t, RefDual)):
        return None
    name = fresh_name("mu")
    sa = _align_binder(s, name)
    ta = _align_binder(t, name)
    ctx_b = _bind_ref_binder(ctx, name, sa, outer)
    # write side is never escaped: contravariant, strict
    if not sub_qual(ctx_b, ta.write.qual, sa.write.qual):
        return None
    if not sub_type(ctx, ta.write.ty, sa.write.ty):
        return None
    # read side: atoms that do not embed must escape, which t-esc permits
    # only when the target read qualifier carries the cyclic binder
    escaped = frozenset(a for a in sa.read.qual.atoms
                        if not sub_qual(ctx_b, Qualifier.of(a), ta.read.qual))
    if escaped and VarAtom(name) not in ta.read.qual:
        return None
    if any(a == FRESH for a in escaped):
        return None
    nested = escape_requires(ctx_b, sa.read.ty, ta.read.ty)
    if nested is None:
        return None
    return escaped | nested


def sub_qtype_escape(ctx: TypingContext, phi: Observation,
                     p: QualifiedType, q: QualifiedType) -> bool:
    """Subsumption search at ascription sites: sq-sub, else iterated t-esc.

    The escape premises require the grown outer qualifier to stay inside
    the observation filter, so fresh-qualified sources cannot escape.
    """
    if sub_qtype(ctx, p, q):
        return True
    escaped = escape_requires(ctx, p.ty, q.ty, outer=p.qual)
    if escaped is None or not escaped:
        return False
    if p.qual.has_fresh:
        return False
    if not set(q.qual.without_fresh().atoms) <= set(phi):
        return False
    return (sub_qual(ctx, p.qual, q.qual)
            and sub_qual(ctx, Qualifier(escaped) | p.qual, q.qual))


def adapt_to_type(ctx: TypingContext, phi: Observation, src: QualifiedType,
                  target_ty: Type) -> Optional[Qualifier]:
    """Retype src at target_ty, growing its qualifier by escaped atoms.

    Used where a target type is dictated but the qualifier is the term's
    own (application arguments). Returns the resulting qualifier, or None.
    """
    if sub_type(ctx, src.ty, target_ty, outer=src.qual):
        return src.qual
    escaped = escape_requires(ctx, src.ty, target_ty, outer=src.qual)
    if escaped is None:
        return None
    if src.qual.has_fresh:
        return None
    grown = src.qual | Qualifier(escaped)
    if not set(grown.without_fresh().atoms) <= set(phi):
        return None
    return grown
