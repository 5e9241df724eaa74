"""Typing contexts, observation filters, store typings, and runtime stores."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

from .errors import ErrorKind, TypeCheckError
from .qualifiers import ReachBinding, ReachEnv
from .syntax import (FRESH, LocAtom, Qualifier, QualifiedType, Term, Type,
                     VarAtom, qt_free_atoms, type_free_atoms, type_free_tvars)

Observation = frozenset  # of VarAtom/LocAtom; never contains fresh


EMPTY_PHI: Observation = frozenset()


def phi_of(*items) -> Observation:
    out = set()
    for it in items:
        if isinstance(it, str):
            out.add(VarAtom(it))
        elif isinstance(it, int):
            out.add(LocAtom(it))
        else:
            out.add(it)
    return frozenset(out)


@dataclass(frozen=True)
class TermBind:
    name: str
    qt: QualifiedType


@dataclass(frozen=True)
class TypeBind:
    tvar: str
    qvar: str
    bound: QualifiedType


Binding = Union[TermBind, TypeBind]


class ContextError(Exception):
    """Raised when a binding breaks telescoping well-scopedness."""


@dataclass(frozen=True)
class TypingContext:
    bindings: tuple = ()

    def __len__(self):
        return len(self.bindings)

    @property
    def dom(self) -> frozenset:
        names = set()
        for b in self.bindings:
            if isinstance(b, TermBind):
                names.add(b.name)
            else:
                names.add(b.tvar)
                names.add(b.qvar)
        return frozenset(names)

    def _check_scoped(self, qt: QualifiedType):
        # each qualifier in the binding may mention only earlier names,
        # fresh, or store locations
        dom = self.dom
        for atom in qt_free_atoms(qt):
            if isinstance(atom, VarAtom) and atom.name not in dom:
                raise ContextError(f"qualifier atom {atom.name} not bound yet")

    def bind_term(self, name: str, qt: QualifiedType) -> "TypingContext":
        self._check_scoped(qt)
        return TypingContext(self.bindings + (TermBind(name, qt),))

    def bind_type(self, tvar: str, qvar: str, bound: QualifiedType) -> "TypingContext":
        self._check_scoped(bound)
        return TypingContext(self.bindings + (TypeBind(tvar, qvar, bound),))

    def lookup_term(self, name: str) -> Optional[QualifiedType]:
        for b in reversed(self.bindings):
            if isinstance(b, TermBind) and b.name == name:
                return b.qt
        return None

    def lookup_type(self, tvar: str) -> Optional[TypeBind]:
        for b in reversed(self.bindings):
            if isinstance(b, TypeBind) and b.tvar == tvar:
                return b
        return None

    def lookup_qvar(self, qvar: str) -> Optional[TypeBind]:
        for b in reversed(self.bindings):
            if isinstance(b, TypeBind) and b.qvar == qvar:
                return b
        return None


EMPTY_CTX = TypingContext()


def lookup_var(ctx: TypingContext, phi: Observation, name: str,
               span=None) -> QualifiedType:
    """t-var lookup: the binding must exist and be observable."""
    qt = ctx.lookup_term(name)
    if qt is None:
        raise TypeCheckError(ErrorKind.UNBOUND_VARIABLE,
                             f"variable {name} is not bound", span)
    if VarAtom(name) not in phi:
        raise TypeCheckError(ErrorKind.UNOBSERVABLE,
                             f"variable {name} is outside the observation filter",
                             span, missing=frozenset({VarAtom(name)}))
    return qt


# ---------------------------------------------------------------------------
# Store typing


@dataclass(frozen=True)
class StoreEntry:
    """l : mu binder.(T^qual); plain entries keep the binder out of qual."""

    binder: str
    ty: Type
    qual: Qualifier

    @property
    def is_cyclic(self) -> bool:
        return VarAtom(self.binder) in self.qual

    def qual_at(self, loc: int) -> Qualifier:
        """The referent qualifier with the self-binder made concrete."""
        return self.qual.subst(VarAtom(self.binder), Qualifier.of(LocAtom(loc)))

    def referent_at(self, loc: int) -> QualifiedType:
        return QualifiedType(self.ty, self.qual_at(loc))


@dataclass(frozen=True)
class StoreTyping:
    """Locations are dense allocation-order indices; the parallel oracle may
    leave holes (None) where the other reduction allocated."""

    entries: tuple = ()

    def __len__(self):
        return sum(1 for e in self.entries if e is not None)

    @property
    def dom(self) -> frozenset:
        return frozenset(i for i, e in enumerate(self.entries) if e is not None)

    def lookup(self, loc: int) -> Optional[StoreEntry]:
        if 0 <= loc < len(self.entries):
            return self.entries[loc]
        return None

    def extend(self, entry: StoreEntry) -> "StoreTyping":
        return StoreTyping(self.entries + (entry,))

    def extend_at(self, loc: int, entry: StoreEntry) -> "StoreTyping":
        entries = list(self.entries)
        while len(entries) <= loc:
            entries.append(None)
        if entries[loc] is not None:
            raise ValueError(f"location {loc} already typed")
        entries[loc] = entry
        return StoreTyping(tuple(entries))

    def merge(self, other: "StoreTyping") -> "StoreTyping":
        """Union of two disjoint extensions of a common prefix."""
        size = max(len(self.entries), len(other.entries))
        out = []
        for i in range(size):
            a, b = self.lookup(i), other.lookup(i)
            if a is not None and b is not None and a != b:
                raise ValueError(f"conflicting entries at location {i}")
            out.append(a if a is not None else b)
        return StoreTyping(tuple(out))

    def reach_env(self, ctx: TypingContext = EMPTY_CTX) -> ReachEnv:
        """Context bindings then store entries, as one reachability view.

        A store entry contributes its referent qualifier minus the
        self-binder, keyed by the location.
        """
        bindings = []
        for b in ctx.bindings:
            if isinstance(b, TermBind):
                bindings.append(ReachBinding(VarAtom(b.name), b.qt.qual))
        for i, e in enumerate(self.entries):
            if e is not None:
                bindings.append(ReachBinding(LocAtom(i), e.qual.minus(VarAtom(e.binder))))
        return ReachEnv(tuple(bindings))


EMPTY_STORE_TYPING = StoreTyping()


def wf_store_typing(st: StoreTyping) -> bool:
    """st-emp/st-con/st-scon: closed types, prefix-scoped qualifiers."""
    dom = st.dom
    for i, e in enumerate(st.entries):
        if e is None:
            continue
        # closedness means no free variables; nested qualifiers of a runtime
        # type may legitimately mention locations
        if any(isinstance(a, VarAtom) for a in type_free_atoms(e.ty)):
            return False
        if type_free_tvars(e.ty):
            return False
        for atom in e.qual.minus(VarAtom(e.binder)).atoms:
            if not isinstance(atom, LocAtom) or atom.index >= i or atom.index not in dom:
                return False
        if FRESH in e.qual:
            return False
    return True


# ---------------------------------------------------------------------------
# Runtime store


@dataclass(frozen=True)
class Store:
    cells: tuple = ()

    def __len__(self):
        return len(self.cells)

    @property
    def dom(self) -> frozenset:
        return frozenset(i for i, v in enumerate(self.cells) if v is not None)

    def lookup(self, loc: int) -> Optional[Term]:
        if 0 <= loc < len(self.cells):
            return self.cells[loc]
        return None

    def next_loc(self) -> int:
        return len(self.cells)

    def allocate(self, value: Term) -> tuple:
        return len(self.cells), Store(self.cells + (value,))

    def update(self, loc: int, value: Term) -> "Store":
        if not (0 <= loc < len(self.cells)) or self.cells[loc] is None:
            raise KeyError(loc)
        cells = list(self.cells)
        cells[loc] = value
        return Store(tuple(cells))

    def restrict(self, phi: Observation) -> "Store":
        """sigma|phi: keep only the cells named by phi (holes stay absent)."""
        keep = {a.index for a in phi if isinstance(a, LocAtom)}
        cells = tuple(v if i in keep else None for i, v in enumerate(self.cells))
        return Store(cells)


EMPTY_STORE = Store()


def wf_store(ctx: TypingContext, st: StoreTyping, phi: Observation,
             store: Store) -> tuple[bool, list[str]]:
    """phi <= dom(sigma) <= dom(Sigma), with observed cells well-typed
    under the same observation filter.

    Cyclic entries are checked at the binder-substituted qualifier.
    """
    from . import typecheck  # local import; value typing lives there

    problems: list[str] = []
    if not wf_store_typing(st):
        problems.append("store typing is not well-formed")
        return False, problems
    phi_locs = {a.index for a in phi if isinstance(a, LocAtom)}
    if not phi_locs <= store.dom:
        problems.append("observation mentions unallocated locations")
    if not store.dom <= st.dom:
        problems.append("store has locations missing from the store typing")
    if problems:
        return False, problems
    checker = typecheck.Checker(st)
    for loc in sorted(phi_locs):
        entry = st.lookup(loc)
        value = store.lookup(loc)
        try:
            checker.check(ctx, frozenset(phi), value, entry.referent_at(loc))
        except TypeCheckError as e:
            problems.append(f"cell {loc} does not match its store typing: {e}")
    return not problems, problems


def wf_store_full(ctx: TypingContext, st: StoreTyping, store: Store) -> tuple[bool, list[str]]:
    """The Gamma | Sigma |- sigma form: observe the whole store-typing domain."""
    return wf_store(ctx, st, phi_of(*sorted(st.dom)), store)
