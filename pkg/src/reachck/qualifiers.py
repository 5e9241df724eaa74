"""Qualifier algebra: one-step reachability, fuel-bounded transitive lookup,
saturation predicates, overlap, and cardinality.

Reachability is environment-relative. A binding x : T^q lets x reach the
variable atoms of q; a store-typing entry l : mu x.(T^{q,x}) lets l reach
the location atoms of q (-) x. Fresh is never propagated by lookup.
"""

from __future__ import annotations

from dataclasses import dataclass

from .syntax import (FRESH_QUAL, Atom, FreshAtom, LocAtom, Qualifier, VarAtom)
from .syntax import is_singleton_or_empty, contains_fresh  # re-exported  # noqa: F401


@dataclass(frozen=True)
class ReachBinding:
    key: Atom
    declared: Qualifier


@dataclass(frozen=True)
class ReachEnv:
    """Ordered view of bindings used for reachability; rightmost wins."""

    bindings: tuple = ()

    @staticmethod
    def of(*pairs) -> "ReachEnv":
        """Build from (name-or-atom, Qualifier) pairs, oldest first."""
        out = []
        for key, q in pairs:
            atom = VarAtom(key) if isinstance(key, str) else key
            out.append(ReachBinding(atom, q))
        return ReachEnv(tuple(out))

    def extend(self, key, declared: Qualifier) -> "ReachEnv":
        atom = VarAtom(key) if isinstance(key, str) else key
        return ReachEnv(self.bindings + (ReachBinding(atom, declared),))

    def __len__(self):
        return len(self.bindings)

    def lookup(self, atom: Atom) -> Qualifier | None:
        for b in reversed(self.bindings):
            if b.key == atom:
                return b.declared
        return None


def var_reach(env: ReachEnv, atom: Atom) -> Qualifier:
    """One-step reachability x ~> y.

    Variables reach the variable atoms of their declared qualifier,
    locations the location atoms; unbound atoms and fresh reach nothing.
    """
    if isinstance(atom, FreshAtom):
        return Qualifier()
    declared = env.lookup(atom)
    if declared is None:
        return Qualifier()
    if isinstance(atom, VarAtom):
        return Qualifier(frozenset(a for a in declared.atoms if isinstance(a, VarAtom)))
    return Qualifier(frozenset(a for a in declared.atoms if isinstance(a, LocAtom)))


def _step(env: ReachEnv, q: Qualifier) -> Qualifier:
    out = set(q.atoms)
    for a in q.atoms:
        out |= var_reach(env, a).atoms
    return Qualifier(frozenset(out))


def qtrans_n(env: ReachEnv, q: Qualifier, n: int) -> Qualifier:
    """q with n rounds of one-step lookup folded in (monotone in n)."""
    if n < 0:
        raise ValueError("fuel must be non-negative")
    cur = q
    for _ in range(n):
        nxt = _step(env, cur)
        if nxt == cur:
            return cur
        cur = nxt
    return cur


def qtrans(env: ReachEnv, q: Qualifier) -> Qualifier:
    """Full transitive lookup: fuel = environment length is always enough."""
    return qtrans_n(env, q, len(env))


def _reach_star(env: ReachEnv, atom: Atom) -> Qualifier:
    """{ y | x ~>* y } by naive worklist; the propositional-side primitive."""
    seen: set = set()
    work = list(var_reach(env, atom).atoms)
    while work:
        a = work.pop()
        if a in seen:
            continue
        seen.add(a)
        work.extend(var_reach(env, a).atoms)
    return Qualifier(frozenset(seen))


def saturated_prop(env: ReachEnv, q: Qualifier) -> bool:
    """Propositional saturation: everything reachable from q lies in q."""
    for a in q.atoms:
        if not _reach_star(env, a) <= q:
            return False
    return True


def saturated_det(env: ReachEnv, q: Qualifier) -> bool:
    """Deterministic saturation: the transitive lookup is a no-op."""
    return qtrans(env, q) == q


def overlap(env: ReachEnv, p: Qualifier, q: Qualifier) -> Qualifier:
    """p (overlap) q = fresh together with the closures' intersection."""
    return FRESH_QUAL | (qtrans(env, p) & qtrans(env, q))


def cardinality(env: ReachEnv, q: Qualifier) -> int:
    """Number of bindings whose key lies in q; shadowed entries each count."""
    return sum(1 for b in env.bindings if b.key in q.atoms)
