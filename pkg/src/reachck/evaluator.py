"""Call-by-value small-step reduction with a store.

Redex selection is structural recursion mirroring the evaluation contexts
(left to right, call by value); allocation picks the next dense location.
Beta substitutes annotations as well as terms, so in-flight programs stay
re-checkable: a closed value's qualifier is its set of free locations.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Union

from .environments import Store
from .syntax import (Abs, App, Ascribe, Assign, BoolLit, Deref, If, IsZero,
                     LocTerm, Mul, NatLit, Pred, RefNew, Succ, TAbs, TApp,
                     Term, UnitLit, beta_subst, beta_t_subst, is_value)


@dataclass(frozen=True)
class Stepped:
    term: Term
    store: Store
    rule: str
    redex: Term


@dataclass(frozen=True)
class AlreadyValue:
    pass


@dataclass(frozen=True)
class Stuck:
    reason: str
    redex: Optional[Term] = None


StepResult = Union[Stepped, AlreadyValue, Stuck]


def step(t: Term, store: Store, next_loc: Optional[int] = None) -> StepResult:
    if is_value(t):
        return AlreadyValue()
    out = _step(t, store, next_loc)
    if isinstance(out, Stuck):
        return out
    term, new_store, rule, redex = out
    return Stepped(term, new_store, rule, redex)


def _step(t: Term, store: Store, next_loc: Optional[int]):
    """One contraction at the unique redex position, or Stuck."""

    def descend(sub: Term, rebuild):
        out = _step(sub, store, next_loc)
        if isinstance(out, Stuck):
            return out
        term, new_store, rule, redex = out
        return rebuild(term), new_store, rule, redex

    match t:
        case App(fn, arg):
            if not is_value(fn):
                return descend(fn, lambda f2: App(f2, arg, span=t.span))
            if not is_value(arg):
                return descend(arg, lambda a2: App(fn, a2, span=t.span))
            if isinstance(fn, Abs):
                body = beta_subst(fn.body, fn.param, arg, fn.self_name, fn)
                return body, store, "beta", t
            return Stuck("application of a non-function value", t)
        case TApp(fn, targ):
            if not is_value(fn):
                return descend(fn, lambda f2: TApp(f2, targ, span=t.span))
            if isinstance(fn, TAbs):
                body = beta_t_subst(fn.body, fn.tvar, fn.qvar, targ,
                                    fn.self_name, fn)
                return body, store, "beta_T", t
            return Stuck("type application of a non-type-abstraction", t)
        case RefNew(init):
            # an ascription directly under ref is consumed by the allocation,
            # so the referent type it fixes is not erased before use
            if isinstance(init, Ascribe) and is_value(init.term):
                init = init.term
            elif not is_value(init):
                return descend(init, lambda i2: RefNew(i2, span=t.span))
            loc = store.next_loc() if next_loc is None else next_loc
            if store.lookup(loc) is not None:
                return Stuck(f"allocation target {loc} already in use", t)
            new_store = _alloc_at(store, loc, init)
            return LocTerm(loc), new_store, "ref", t
        case Deref(target):
            if not is_value(target):
                return descend(target, lambda t2: Deref(t2, span=t.span))
            if isinstance(target, LocTerm):
                value = store.lookup(target.index)
                if value is None:
                    return Stuck(f"dereference of unallocated location "
                                 f"{target.index}", t)
                return value, store, "deref", t
            return Stuck("dereference of a non-location value", t)
        case Assign(lhs, rhs):
            if not is_value(lhs):
                return descend(lhs, lambda l2: Assign(l2, rhs, span=t.span))
            if not is_value(rhs):
                return descend(rhs, lambda r2: Assign(lhs, r2, span=t.span))
            if isinstance(lhs, LocTerm):
                if store.lookup(lhs.index) is None:
                    return Stuck(f"assignment to unallocated location "
                                 f"{lhs.index}", t)
                return UnitLit(), store.update(lhs.index, rhs), "assign", t
            return Stuck("assignment to a non-location value", t)
        case Succ(arg):
            if not is_value(arg):
                return descend(arg, lambda a2: Succ(a2, span=t.span))
            if isinstance(arg, NatLit):
                return NatLit(arg.value + 1), store, "succ", t
            return Stuck("succ of a non-numeral", t)
        case Pred(arg):
            if not is_value(arg):
                return descend(arg, lambda a2: Pred(a2, span=t.span))
            if isinstance(arg, NatLit):
                return NatLit(max(0, arg.value - 1)), store, "pred", t
            return Stuck("pred of a non-numeral", t)
        case Mul(left, right):
            if not is_value(left):
                return descend(left, lambda l2: Mul(l2, right, span=t.span))
            if not is_value(right):
                return descend(right, lambda r2: Mul(left, r2, span=t.span))
            if isinstance(left, NatLit) and isinstance(right, NatLit):
                return NatLit(left.value * right.value), store, "mul", t
            return Stuck("multiplication of non-numerals", t)
        case IsZero(arg):
            if not is_value(arg):
                return descend(arg, lambda a2: IsZero(a2, span=t.span))
            if isinstance(arg, NatLit):
                return BoolLit(arg.value == 0), store, "iszero", t
            return Stuck("iszero of a non-numeral", t)
        case If(cond, then, els):
            if not is_value(cond):
                return descend(cond, lambda c2: If(c2, then, els, span=t.span))
            if isinstance(cond, BoolLit):
                branch = then if cond.value else els
                return branch, store, "if-true" if cond.value else "if-false", t
            return Stuck("if on a non-boolean value", t)
        case Ascribe(inner, target):
            if not is_value(inner):
                return descend(inner, lambda i2: Ascribe(i2, target, span=t.span))
            return inner, store, "ascribe", t
    return Stuck(f"no evaluation rule applies to {t!r}", t)


def _alloc_at(store: Store, loc: int, value: Term) -> Store:
    cells = list(store.cells)
    while len(cells) <= loc:
        cells.append(None)
    cells[loc] = value
    return Store(tuple(cells))


@dataclass(frozen=True)
class EvalResult:
    term: Term
    store: Store
    steps: int
    exhausted: bool
    stuck: Optional[str] = None


TraceHook = Callable[[int, str, Term, Store], None]


def eval_fuel(t: Term, fuel: int, store: Store = Store(),
              trace: Optional[TraceHook] = None) -> EvalResult:
    """Iterate step until value, Stuck, or fuel exhaustion; deterministic."""
    if fuel < 0:
        raise ValueError("fuel must be non-negative")
    current, cur_store = t, store
    for n in range(fuel):
        out = step(current, cur_store)
        if isinstance(out, AlreadyValue):
            return EvalResult(current, cur_store, n, False)
        if isinstance(out, Stuck):
            return EvalResult(current, cur_store, n, False, stuck=out.reason)
        if trace is not None:
            trace(n, out.rule, out.redex, out.store)
        current, cur_store = out.term, out.store
    exhausted = not is_value(current)
    return EvalResult(current, cur_store, fuel, exhausted)
