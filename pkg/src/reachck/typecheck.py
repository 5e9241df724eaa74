"""Bidirectional term typing with minimal qualifier synthesis.

Synthesis produces minimal qualifiers (variables get their singleton, fresh
allocations get the fresh marker); subsumption fires only at ascriptions
and checking-mode premises (assignment right-hand sides, application
arguments, abstraction bodies against their codomain annotation).

Rule dispatch decisions:
  * `ref t` synthesizes a collapsed dual reference at fresh; in checking
    mode against a cyclic target the cyclic introduction is used instead.
  * assignment tries the cyclic variable rule first, then the plain rule.
  * application dispatches on the fresh marker in the declared domain;
    location arguments must carry singleton qualifiers, other value
    arguments are exempt from the dependent-return guard.
  * `let x = e in b` is an application of an unannotated abstraction whose
    domain is filled from the bound expression (or the user annotation).
"""

from __future__ import annotations

from typing import Callable, Optional

from .environments import (EMPTY_CTX, EMPTY_STORE_TYPING, Observation,
                           StoreTyping, TypingContext, ContextError, lookup_var,
                           phi_of)
from .errors import ErrorKind, TypeCheckError
from .qualifiers import qtrans
from .subtyping import (escape_requires, explain_mismatch, sub_qtype,
                        sub_qtype_escape, sub_type)
from .syntax import (BOOL, BOT, FRESH, FRESH_QUAL, NAT, UNIT, Abs, All, App,
                     Ascribe, Assign, BoolLit, Deref, EMPTY_QUAL, Fun, If,
                     IsZero, LocAtom, LocTerm, Mul, NatLit, Pred, Qualifier,
                     QualifiedType, RefDual, RefNew, Succ, TAbs, TApp, TVar,
                     Term, Type, TypeSubst, UnitLit, Var, VarAtom, alpha_eq_qt,
                     alpha_eq_type, free_atoms, fresh_name, is_singleton_or_empty,
                     is_value, plain_ref, subst_in_qt, subst_qual_in_qt,
                     type_free_atoms)

UNIT_QT = QualifiedType(UNIT, EMPTY_QUAL)


def _widen(ctx: TypingContext, ty: Type, want) -> Optional[Type]:
    """Resolve type variables through their bounds until `want` is hit."""
    seen = set()
    while True:
        if isinstance(ty, want):
            return ty
        if isinstance(ty, TVar) and ty.name not in seen:
            seen.add(ty.name)
            tb = ctx.lookup_type(ty.name)
            if tb is not None:
                ty = tb.bound.ty
                continue
        return None


class Checker:
    def __init__(self, store_typing: StoreTyping = EMPTY_STORE_TYPING,
                 on_let: Optional[Callable[[str, QualifiedType], None]] = None):
        self.st = store_typing
        self.on_let = on_let

    # -- helpers ----------------------------------------------------------

    def _reach(self, ctx: TypingContext):
        return self.st.reach_env(ctx)

    def _reach_static(self, ctx: TypingContext):
        # the transitive-lookup relation is over variables: locations do
        # not propagate, which is what keeps runtime tracking shallow
        return EMPTY_STORE_TYPING.reach_env(ctx)

    def _observable(self, phi: Observation, q: Qualifier) -> bool:
        return set(q.without_fresh().atoms) <= set(phi)

    # -- synthesis ---------------------------------------------------------

    def synth(self, ctx: TypingContext, phi: Observation, t: Term) -> QualifiedType:
        qt = self._synth(ctx, phi, t)
        # minimality: every synthesized qualifier is observable or fresh
        assert self._observable(phi, qt.qual), \
            f"synthesized qualifier escapes the observation filter: {qt!r}"
        return qt

    def _synth(self, ctx: TypingContext, phi: Observation, t: Term) -> QualifiedType:
        match t:
            case UnitLit():
                return UNIT_QT
            case NatLit():
                return QualifiedType(NAT, EMPTY_QUAL)
            case BoolLit():
                return QualifiedType(BOOL, EMPTY_QUAL)
            case Var(name):
                qt = lookup_var(ctx, phi, name, t.span)
                return QualifiedType(qt.ty, Qualifier.of_vars(name))
            case LocTerm(index):
                return self._synth_loc(ctx, phi, t, index)
            case Abs():
                return self._synth_abs(ctx, phi, t)
            case TAbs():
                return self._synth_tabs(ctx, phi, t)
            case App():
                return self._synth_app(ctx, phi, t)
            case TApp():
                return self._synth_tapp(ctx, phi, t)
            case RefNew(init):
                init_qt = self.synth(ctx, phi, init)
                if init_qt.qual.has_fresh:
                    raise TypeCheckError(
                        ErrorKind.FRESH_REFERENT,
                        "references to fresh values are not allowed; bind the "
                        "initializer first", t.span)
                return QualifiedType(plain_ref(init_qt), FRESH_QUAL)
            case Deref(_):
                return self._synth_deref(ctx, phi, t)
            case Assign(_, _):
                return self._synth_assign(ctx, phi, t)
            case Succ(arg) | Pred(arg):
                qt = self._expect_base(ctx, phi, arg, NAT)
                return QualifiedType(NAT, qt.qual)
            case Mul(left, right):
                lq = self._expect_base(ctx, phi, left, NAT)
                rq = self._expect_base(ctx, phi, right, NAT)
                return QualifiedType(NAT, lq.qual | rq.qual)
            case IsZero(arg):
                self._expect_base(ctx, phi, arg, NAT)
                return QualifiedType(BOOL, EMPTY_QUAL)
            case If(cond, then, els):
                self._expect_base(ctx, phi, cond, BOOL)
                then_qt = self.synth(ctx, phi, then)
                else_qt = self.synth(ctx, phi, els)
                joined = self._join(ctx, then_qt.ty, else_qt.ty, t)
                return QualifiedType(joined, then_qt.qual | else_qt.qual)
            case Ascribe(inner, target):
                self.check(ctx, phi, inner, target)
                return target
        raise TypeCheckError(ErrorKind.SUBTYPE_FAILURE, f"unhandled term {t!r}", t.span)

    def _expect_base(self, ctx, phi, term, base) -> QualifiedType:
        qt = self.synth(ctx, phi, term)
        if not sub_type(ctx, qt.ty, base):
            raise TypeCheckError(ErrorKind.SUBTYPE_FAILURE,
                                 f"expected {base!r}, found {qt.ty!r}", term.span,
                                 expected=base, actual=qt.ty)
        return qt

    def _join(self, ctx, t1: Type, t2: Type, at: Term) -> Type:
        if sub_type(ctx, t1, t2):
            return t2
        if sub_type(ctx, t2, t1):
            return t1
        raise TypeCheckError(ErrorKind.SUBTYPE_FAILURE,
                             f"branch types do not agree: {t1!r} vs {t2!r}", at.span)

    # -- locations ---------------------------------------------------------

    def _synth_loc(self, ctx, phi, t, index: int) -> QualifiedType:
        entry = self.st.lookup(index)
        if entry is None:
            raise TypeCheckError(ErrorKind.UNBOUND_VARIABLE,
                                 f"location {index} is not in the store typing", t.span)
        visible = entry.qual.minus(VarAtom(entry.binder)).add(LocAtom(index))
        if not self._observable(phi, visible):
            missing = frozenset(visible.without_fresh().atoms) - frozenset(phi)
            raise TypeCheckError(
                ErrorKind.UNOBSERVABLE,
                f"location {index} or its referent qualifier is unobservable",
                t.span, missing=missing)
        referent = QualifiedType(entry.ty, entry.qual)
        return QualifiedType(RefDual(entry.binder, referent, referent),
                             Qualifier.of(LocAtom(index)))

    # -- abstractions ------------------------------------------------------

    def _captured(self, t: Term) -> Qualifier:
        return Qualifier(free_atoms(t))

    def _synth_abs(self, ctx, phi, t: Abs) -> QualifiedType:
        if t.domain is None:
            raise TypeCheckError(ErrorKind.ANNOTATION_REQUIRED,
                                 "abstraction needs a domain annotation", t.span)
        if t.codomain is None and not t.from_let:
            raise TypeCheckError(ErrorKind.ANNOTATION_REQUIRED,
                                 "abstraction needs a codomain annotation", t.span)
        # The abstraction qualifier must cover everything the body observes.
        # Start from the free atoms and widen by demand, staying inside phi;
        # any q within phi is admissible for the abstraction rule.
        q = self._captured(t)
        for _ in range(len(phi) + 1):
            if not self._observable(phi, q):
                missing = frozenset(q.without_fresh().atoms) - frozenset(phi)
                raise TypeCheckError(
                    ErrorKind.OBSERVATION_ESCAPE,
                    f"abstraction captures unobservable resources {q!r}",
                    t.span, missing=missing)
            try:
                return self._synth_abs_at(ctx, phi, t, q)
            except TypeCheckError as e:
                grow = self._capture_growth(e, phi, q, t)
                if grow is None:
                    raise
                q = q | Qualifier(grow)
        raise TypeCheckError(ErrorKind.OBSERVATION_ESCAPE,
                             "abstraction capture inference did not converge",
                             t.span)

    def _capture_growth(self, e: TypeCheckError, phi, q: Qualifier, t):
        """Atoms an observability failure asks for, if phi can supply them."""
        if e.kind not in (ErrorKind.UNOBSERVABLE, ErrorKind.OBSERVATION_ESCAPE):
            return None
        grow = frozenset(a for a in e.missing
                         if a in phi and a not in q.atoms
                         and a != VarAtom(t.param) and a != VarAtom(t.self_name))
        return grow or None

    def _synth_abs_at(self, ctx, phi, t: Abs, q: Qualifier) -> QualifiedType:
        phi_body = frozenset(q.atoms) | {VarAtom(t.param), VarAtom(t.self_name)}
        if t.codomain is not None:
            fun_ty = Fun(t.self_name, t.param, t.domain, t.codomain)
            try:
                ctx1 = ctx.bind_term(t.self_name, QualifiedType(fun_ty, q))
                ctx2 = ctx1.bind_term(t.param, t.domain)
            except ContextError as e:
                raise TypeCheckError(ErrorKind.UNBOUND_VARIABLE, str(e), t.span)
            self.check(ctx2, phi_body, t.body, t.codomain)
            return QualifiedType(fun_ty, q)
        # let-generated: the self name cannot occur; synthesize the codomain
        try:
            ctx2 = ctx.bind_term(t.param, t.domain)
        except ContextError as e:
            raise TypeCheckError(ErrorKind.UNBOUND_VARIABLE, str(e), t.span)
        body_qt = self.synth(ctx2, phi_body, t.body)
        return QualifiedType(Fun(t.self_name, t.param, t.domain, body_qt), q)

    def _synth_tabs(self, ctx, phi, t: TAbs) -> QualifiedType:
        q = self._captured(t)
        for _ in range(len(phi) + 1):
            if not self._observable(phi, q):
                missing = frozenset(q.without_fresh().atoms) - frozenset(phi)
                raise TypeCheckError(
                    ErrorKind.OBSERVATION_ESCAPE,
                    f"type abstraction captures unobservable resources {q!r}",
                    t.span, missing=missing)
            try:
                ctx1 = ctx.bind_type(t.tvar, t.qvar, t.bound)
            except ContextError as e:
                raise TypeCheckError(ErrorKind.UNBOUND_VARIABLE, str(e), t.span)
            phi_body = frozenset(q.atoms) | {VarAtom(t.qvar), VarAtom(t.self_name)}
            try:
                body_qt = self.synth(ctx1, phi_body, t.body)
            except TypeCheckError as e:
                grow = frozenset(a for a in e.missing
                                 if a in phi and a not in q.atoms
                                 and a != VarAtom(t.qvar)
                                 and a != VarAtom(t.self_name)) \
                    if e.kind in (ErrorKind.UNOBSERVABLE,
                                  ErrorKind.OBSERVATION_ESCAPE) else frozenset()
                if not grow:
                    raise
                q = q | Qualifier(grow)
                continue
            all_ty = All(t.self_name, t.tvar, t.qvar, t.bound, body_qt)
            return QualifiedType(all_ty, q)
        raise TypeCheckError(ErrorKind.OBSERVATION_ESCAPE,
                             "type abstraction capture inference did not "
                             "converge", t.span)

    # -- applications ------------------------------------------------------

    def _check_arg_at_type(self, ctx, phi, arg: Term, domain_ty: Type) -> Qualifier:
        """Fresh-application argument: fit the domain type, keep own qualifier.

        Cyclic reference introduction is pushed into `ref` arguments; other
        arguments may grow by escaping (the subsumption search).
        """
        if isinstance(arg, RefNew):
            rd = _widen(ctx, domain_ty, RefDual)
            if rd is not None:
                self.check(ctx, phi, arg, QualifiedType(domain_ty, FRESH_QUAL))
                return FRESH_QUAL
        arg_qt = self.synth(ctx, phi, arg)
        if sub_type(ctx, arg_qt.ty, domain_ty, outer=arg_qt.qual):
            return arg_qt.qual
        escaped = escape_requires(ctx, arg_qt.ty, domain_ty, outer=arg_qt.qual)
        if escaped is None or arg_qt.qual.has_fresh:
            raise TypeCheckError(ErrorKind.SUBTYPE_FAILURE,
                                 f"argument type {arg_qt.ty!r} does not fit the "
                                 f"declared domain {domain_ty!r}", arg.span,
                                 expected=domain_ty, actual=arg_qt.ty)
        grown = arg_qt.qual | Qualifier(escaped)
        if not self._observable(phi, grown):
            missing = frozenset(grown.without_fresh().atoms) - frozenset(phi)
            raise TypeCheckError(
                ErrorKind.UNOBSERVABLE,
                f"escaped qualifier {grown!r} is not fully observable",
                arg.span, missing=missing)
        return grown

    def _separation(self, ctx, phi, p_arg: Qualifier, q_fn: Qualifier,
                    declared: Qualifier, span):
        """t-app-fresh: closures may overlap only inside the declared part."""
        env = self._reach_static(ctx)
        allowed = qtrans(env, declared.without_fresh()) | FRESH_QUAL
        shared = qtrans(env, p_arg) & qtrans(env, q_fn)
        if not shared <= allowed:
            offending = shared - allowed
            raise TypeCheckError(
                ErrorKind.SEPARATION_VIOLATION,
                f"argument overlaps the function on {offending!r}", span)

    def _app_result(self, ctx, phi, fun: Fun, q_fn: Qualifier, p_eff: Qualifier,
                    arg: Term, span) -> QualifiedType:
        cod = fun.codomain
        u_free = type_free_atoms(cod.ty)
        x_atom, f_atom = VarAtom(fun.param), VarAtom(fun.self_name)
        if isinstance(arg, LocTerm) and not is_singleton_or_empty(p_eff):
            # an escaped location may carry referent atoms recoverable from
            # the store typing; anything beyond that is rejected
            entry = self.st.lookup(arg.index)
            recover = (qtrans(self._reach(ctx), entry.qual_at(arg.index))
                       if entry is not None else Qualifier())
            extra = p_eff.minus(LocAtom(arg.index)).without_fresh()
            if not extra <= recover:
                raise TypeCheckError(
                    ErrorKind.DEPENDENT_RETURN_ESCAPE,
                    "location arguments require a singleton qualifier", span)
        if not is_singleton_or_empty(p_eff):
            value_exempt = is_value(arg) and not isinstance(arg, LocTerm)
            if not value_exempt and x_atom in u_free:
                raise TypeCheckError(
                    ErrorKind.DEPENDENT_RETURN_ESCAPE,
                    f"argument qualifier {p_eff!r} is not a singleton but the "
                    f"parameter occurs in the result type", span)
        if p_eff.has_fresh and x_atom in u_free:
            raise TypeCheckError(
                ErrorKind.DEPENDENT_RETURN_ESCAPE,
                "fresh argument but the parameter occurs in the result type", span)
        if q_fn.has_fresh and f_atom in u_free:
            raise TypeCheckError(
                ErrorKind.DEPENDENT_RETURN_ESCAPE,
                "fresh function but its self-reference occurs in the result type",
                span)
        allowed = set(phi) | {FRESH, x_atom, f_atom}
        if not set(cod.qual.atoms) <= allowed:
            raise TypeCheckError(
                ErrorKind.OBSERVATION_ESCAPE,
                f"result qualifier {cod.qual!r} mentions unobservable resources",
                span, missing=frozenset(set(cod.qual.atoms) - allowed))
        subst = TypeSubst.for_quals(((fun.param, p_eff), (fun.self_name, q_fn)))
        return subst_in_qt(cod, subst)

    def _synth_app(self, ctx, phi, t: App) -> QualifiedType:
        if isinstance(t.fn, Abs) and (t.fn.from_let or t.fn.domain is None):
            return self._synth_let(ctx, phi, t)
        fn_qt = self.synth(ctx, phi, t.fn)
        fun = _widen(ctx, fn_qt.ty, Fun)
        if fun is None:
            raise TypeCheckError(ErrorKind.NOT_A_FUNCTION,
                                 f"cannot apply a term of type {fn_qt.ty!r}",
                                 t.span, actual=fn_qt.ty)
        if fun.domain.qual.has_fresh:
            p_eff = self._check_arg_at_type(ctx, phi, t.arg, fun.domain.ty)
            self._separation(ctx, phi, p_eff, fn_qt.qual,
                             fun.domain.qual.without_fresh(), t.span)
        else:
            self.check(ctx, phi, t.arg, fun.domain)
            p_eff = fun.domain.qual
        return self._app_result(ctx, phi, fun, fn_qt.qual, p_eff, t.arg, t.span)

    def _synth_let(self, ctx, phi, t: App) -> QualifiedType:
        """let x [: Q] = e in b, desugared as an application."""
        abs_t: Abs = t.fn
        if abs_t.domain is not None:
            domain = abs_t.domain
            if domain.qual.has_fresh:
                p_eff = self._check_arg_at_type(ctx, phi, t.arg, domain.ty)
            else:
                self.check(ctx, phi, t.arg, domain)
                p_eff = domain.qual
        else:
            domain = self.synth(ctx, phi, t.arg)
            p_eff = domain.qual
        if self.on_let is not None:
            self.on_let(abs_t.param, domain)
        filled = Abs(abs_t.self_name, abs_t.param, domain, abs_t.codomain,
                     abs_t.body, from_let=True, span=abs_t.span)
        fn_qt = self.synth(ctx, phi, filled)
        fun: Fun = fn_qt.ty
        if domain.qual.has_fresh:
            self._separation(ctx, phi, p_eff, fn_qt.qual,
                             domain.qual.without_fresh(), t.span)
        return self._app_result(ctx, phi, fun, fn_qt.qual, p_eff, t.arg, t.span)

    def _synth_tapp(self, ctx, phi, t: TApp) -> QualifiedType:
        fn_qt = self.synth(ctx, phi, t.fn)
        forall = _widen(ctx, fn_qt.ty, All)
        if forall is None:
            raise TypeCheckError(ErrorKind.NOT_A_FUNCTION,
                                 f"cannot type-apply a term of type {fn_qt.ty!r}",
                                 t.span, actual=fn_qt.ty)
        bound, body = forall.bound, forall.body
        u_free = type_free_atoms(body.ty)
        x_atom, f_atom = VarAtom(forall.qvar), VarAtom(forall.self_name)
        if f_atom in u_free:
            raise TypeCheckError(
                ErrorKind.DEPENDENT_RETURN_ESCAPE,
                "the self-reference occurs in the body type of the quantifier",
                t.span)
        allowed = set(phi) | {FRESH, x_atom, f_atom}
        if not set(body.qual.atoms) <= allowed:
            raise TypeCheckError(
                ErrorKind.OBSERVATION_ESCAPE,
                f"body qualifier {body.qual!r} mentions unobservable resources",
                t.span, missing=frozenset(set(body.qual.atoms) - allowed))
        p = t.targ.qual
        if not self._observable(phi, p):
            raise TypeCheckError(ErrorKind.OBSERVATION_ESCAPE,
                                 f"type argument qualifier {p!r} is unobservable",
                                 t.span,
                                 missing=frozenset(p.without_fresh().atoms)
                                 - frozenset(phi))
        if bound.qual.has_fresh:
            if p.has_fresh and x_atom in u_free:
                raise TypeCheckError(
                    ErrorKind.DEPENDENT_RETURN_ESCAPE,
                    "fresh type argument but its qualifier variable occurs in "
                    "the body type", t.span)
            if not sub_type(ctx, t.targ.ty, bound.ty):
                raise TypeCheckError(ErrorKind.BOUND_VIOLATION,
                                     f"type argument {t.targ.ty!r} exceeds the "
                                     f"bound {bound.ty!r}", t.span)
            self._separation(ctx, phi, p, fn_qt.qual,
                             bound.qual.without_fresh(), t.span)
        else:
            if p.has_fresh:
                raise TypeCheckError(ErrorKind.BOUND_VIOLATION,
                                     "type argument qualifier must not be fresh "
                                     "for a non-fresh bound", t.span)
            if not sub_qtype(ctx, t.targ, bound):
                raise TypeCheckError(ErrorKind.BOUND_VIOLATION,
                                     f"type argument {t.targ!r} exceeds the "
                                     f"bound {bound!r}", t.span)
        subst = TypeSubst(
            quals=((forall.qvar, p), (forall.self_name, fn_qt.qual)),
            tvars=((forall.tvar, t.targ.ty),),
        )
        return subst_in_qt(body, subst)

    # -- references --------------------------------------------------------

    def _synth_deref(self, ctx, phi, t: Deref) -> QualifiedType:
        target_qt = self.synth(ctx, phi, t.target)
        rd = _widen(ctx, target_qt.ty, RefDual)
        if rd is None:
            raise TypeCheckError(ErrorKind.NOT_A_REFERENCE,
                                 f"cannot dereference a term of type "
                                 f"{target_qt.ty!r}", t.span, actual=target_qt.ty)
        b = VarAtom(rd.binder)
        s = rd.read.qual
        if not self._observable(phi, s.minus(b)):
            missing = frozenset(s.minus(b).without_fresh().atoms) - frozenset(phi)
            raise TypeCheckError(
                ErrorKind.UNOBSERVABLE,
                f"referent qualifier {s!r} is not fully observable", t.span,
                missing=missing)
        if b in type_free_atoms(rd.read.ty):
            raise TypeCheckError(
                ErrorKind.DEPENDENT_RETURN_ESCAPE,
                "the cyclic binder occurs in the read component type", t.span)
        return QualifiedType(rd.read.ty, s.subst(b, target_qt.qual))

    def _synth_assign(self, ctx, phi, t: Assign) -> QualifiedType:
        if isinstance(t.lhs, LocTerm):
            return self._assign_loc(ctx, phi, t)
        lhs_qt = self.synth(ctx, phi, t.lhs)
        rd = _widen(ctx, lhs_qt.ty, RefDual)
        if rd is None:
            raise TypeCheckError(ErrorKind.NOT_A_REFERENCE,
                                 f"cannot assign through a term of type "
                                 f"{lhs_qt.ty!r}", t.span, actual=lhs_qt.ty)
        if rd.write.ty == BOT:
            raise TypeCheckError(ErrorKind.WRITE_FORBIDDEN,
                                 "the write component is Bot; the reference is "
                                 "immutable", t.span)
        b = VarAtom(rd.binder)
        wq = rd.write.qual
        cyclic = b in wq
        rhs_qt = self.synth(ctx, phi, t.rhs)
        targets = []
        if cyclic and isinstance(t.lhs, Var) and alpha_eq_type(rd.write.ty, rd.read.ty):
            # t-sassgn-v: the assignee is a variable; the binder becomes it
            targets.append(QualifiedType(
                rd.write.ty, wq.minus(b) | Qualifier.of_vars(t.lhs.name)))
        targets.append(QualifiedType(rd.write.ty, wq.minus(b)))
        # no observability condition on the target: the write component can
        # be narrowed contravariantly to the value's own qualifier first
        for target in targets:
            if sub_qtype_escape(ctx, phi, rhs_qt, target):
                return UNIT_QT
        if cyclic and not isinstance(t.lhs, Var):
            raise TypeCheckError(
                ErrorKind.CYCLIC_ASSIGNEE_NOT_VARIABLE,
                "cyclic assignment requires the assignee to be a variable", t.span)
        if cyclic:
            raise TypeCheckError(
                ErrorKind.CYCLIC_QUALIFIER_NOT_SINGLETON,
                f"the assigned term's qualifier {rhs_qt.qual!r} must be exactly "
                f"the assignee's singleton", t.span,
                expected=targets[0], actual=rhs_qt)
        raise TypeCheckError(
            ErrorKind.REFERENT_MISMATCH,
            f"referent qualifier mismatch: {rhs_qt.qual!r} is not within "
            f"{targets[-1].qual!r}", t.span, expected=targets[-1], actual=rhs_qt)

    def _assign_loc(self, ctx, phi, t: Assign) -> QualifiedType:
        loc: LocTerm = t.lhs
        entry = self.st.lookup(loc.index)
        if entry is None:
            raise TypeCheckError(ErrorKind.UNBOUND_VARIABLE,
                                 f"location {loc.index} is not in the store "
                                 f"typing", t.span)
        lhs_qt = self.synth(ctx, phi, t.lhs)
        rd: RefDual = lhs_qt.ty
        if rd.write.ty == BOT:
            raise TypeCheckError(ErrorKind.WRITE_FORBIDDEN,
                                 "the write component is Bot; the location is "
                                 "immutable", t.span)
        b = VarAtom(rd.binder)
        u = rd.write.qual
        if b in u:
            # recover the original referent qualifier from the store typing
            w_max = entry.qual.minus(VarAtom(entry.binder))
            target_qual = u.subst(b, Qualifier.of(LocAtom(loc.index)) | w_max)
        else:
            target_qual = u
        rhs_qt = self.synth(ctx, phi, t.rhs)
        target = QualifiedType(rd.write.ty, target_qual)
        if sub_qtype_escape(ctx, phi, rhs_qt, target):
            return UNIT_QT
        kind = (ErrorKind.CYCLIC_QUALIFIER_NOT_SINGLETON if entry.is_cyclic
                else ErrorKind.REFERENT_MISMATCH)
        raise TypeCheckError(
            kind, f"assigned value at {rhs_qt.qual!r} exceeds the referent "
                  f"qualifier {target_qual!r}", t.span,
            expected=target, actual=rhs_qt)

    # -- checking ----------------------------------------------------------

    def check(self, ctx: TypingContext, phi: Observation, t: Term,
              target: QualifiedType) -> None:
        if isinstance(t, RefNew):
            rd = _widen(ctx, target.ty, RefDual)
            if rd is not None:
                self._check_ref_at(ctx, phi, t, rd, target)
                return
        qt = self.synth(ctx, phi, t)
        if alpha_eq_qt(qt, target):
            return
        if not self._observable(phi, target.qual):
            missing = frozenset(target.qual.without_fresh().atoms) - frozenset(phi)
            raise TypeCheckError(
                ErrorKind.OBSERVATION_ESCAPE,
                f"target qualifier {target.qual!r} mentions unobservable "
                f"resources", t.span, expected=target, actual=qt,
                missing=missing)
        if not sub_qtype_escape(ctx, phi, qt, target):
            raise TypeCheckError(
                ErrorKind.SUBTYPE_FAILURE,
                f"{qt!r} is not a subtype of {target!r} "
                f"({explain_mismatch(ctx, qt, target)})", t.span,
                expected=target, actual=qt)

    def _check_ref_at(self, ctx, phi, t: RefNew, rd: RefDual,
                      target: QualifiedType) -> None:
        """Checking-mode reference introduction against a declared target.

        The initializer is checked at the target's read component (minus
        the binder, which the cyclic introduction supplies); the resulting
        collapsed reference is then fitted under the full target.
        """
        init_qt = self.synth(ctx, phi, t.init)
        if init_qt.qual.has_fresh:
            raise TypeCheckError(
                ErrorKind.FRESH_REFERENT,
                "references to fresh values are not allowed; bind the "
                "initializer first", t.span)
        binder = fresh_name(rd.binder)
        ren = Qualifier.of_vars(binder)
        comp = subst_qual_in_qt(rd.read, rd.binder, ren)
        init_target_qual = comp.qual.minus(VarAtom(binder))
        if init_target_qual.has_fresh:
            raise TypeCheckError(
                ErrorKind.FRESH_REFERENT,
                "a referent qualifier must not carry the fresh marker", t.span)
        self.check(ctx, phi, t.init, QualifiedType(comp.ty, init_target_qual))
        referent = QualifiedType(comp.ty, comp.qual)
        candidate = QualifiedType(RefDual(binder, referent, referent), FRESH_QUAL)
        if not self._observable(phi, target.qual):
            missing = frozenset(target.qual.without_fresh().atoms) - frozenset(phi)
            raise TypeCheckError(
                ErrorKind.OBSERVATION_ESCAPE,
                f"target qualifier {target.qual!r} mentions unobservable "
                f"resources", t.span, expected=target, actual=candidate,
                missing=missing)
        if not sub_qtype_escape(ctx, phi, candidate, target):
            raise TypeCheckError(
                ErrorKind.SUBTYPE_FAILURE,
                f"{candidate!r} is not a subtype of {target!r} "
                f"({explain_mismatch(ctx, candidate, target)})", t.span,
                expected=target, actual=candidate)


def typecheck_program(t: Term, store_typing: StoreTyping = EMPTY_STORE_TYPING,
                      phi: Optional[Observation] = None,
                      on_let=None) -> QualifiedType:
    """Type a closed program: empty context, observation from the store."""
    if phi is None:
        phi = phi_of(*sorted(store_typing.dom)) if len(store_typing) else frozenset()
    checker = Checker(store_typing, on_let=on_let)
    return checker.synth(EMPTY_CTX, phi, t)
