"""Executable metatheory: dynamic oracles and a well-typed term generator.

The preservation oracle re-typechecks after every step under a store typing
extended at fresh allocations. Allocation entries come from the expected
type at the redex (the enclosing ascription or applied-abstraction domain),
falling back to the allocated value's synthesized type; this reconstructs
the existential store typing of the preservation statement. The target
qualifier keeps the fresh marker while allocations are still pending and
joins all newly allocated locations, closed transitively over the store.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Optional

from .environments import (EMPTY_CTX, EMPTY_STORE_TYPING, Observation, Store,
                           StoreEntry, StoreTyping, phi_of, wf_store)
from .errors import TypeCheckError
from .evaluator import AlreadyValue, Stepped, Stuck, step
from .printer import qual_to_str, term_to_str
from .qualifiers import ReachEnv, overlap, qtrans

# Separation verdicts compare overlap under the empty typing context:
# locations reach nothing there, which is the shallow model.
_EMPTY_REACH = ReachEnv()
from .subtyping import escape_requires, sub_type
from .syntax import (FRESH_QUAL, Abs, App, Ascribe, Assign, Deref, If,
                     IsZero, LocAtom, Mul, Pred, Qualifier, QualifiedType,
                     RefDual, RefNew, Succ, TApp, Term, VarAtom, is_value,
                     type_free_atoms, type_free_tvars)  # noqa: F401
from .typecheck import typecheck_program


# ---------------------------------------------------------------------------
# Reports


@dataclass
class StepVerdict:
    index: int
    rule: str
    ok: bool
    detail: str = ""
    new_locs: tuple = ()
    qual: str = ""
    growth: str = ""


@dataclass
class FailureWitness:
    """A counterexample snapshot; replay() rebuilds the typing state."""

    reason: str
    step_index: int
    term: str
    store: tuple       # printed cell values, None for holes
    store_typing: tuple  # dicts {binder, type, qual}, None for holes
    phi: tuple         # printed atoms: names and @N locations

    def to_dict(self):
        return {
            "reason": self.reason,
            "step": self.step_index,
            "term": self.term,
            "store": list(self.store),
            "storeTyping": list(self.store_typing),
            "phi": list(self.phi),
        }

    def replay(self):
        """Parse the snapshot back into (term, store, store typing, phi)."""
        from .parser import parse_qtype, parse_term

        term = parse_term(self.term)
        store = Store(tuple(None if cell is None else parse_term(cell)
                            for cell in self.store))
        entries = []
        for e in self.store_typing:
            if e is None:
                entries.append(None)
                continue
            qt = parse_qtype(f"{e['type']}^{e['qual']}")
            entries.append(StoreEntry(e["binder"], qt.ty, qt.qual))
        phi = set()
        for a in self.phi:
            if a.startswith("@"):
                phi.add(LocAtom(int(a[1:])))
            else:
                phi.add(VarAtom(a))
        return term, store, StoreTyping(tuple(entries)), frozenset(phi)


@dataclass
class OracleReport:
    program: str
    steps_examined: int = 0
    verdicts: list = field(default_factory=list)
    failure: Optional[FailureWitness] = None

    @property
    def ok(self) -> bool:
        return self.failure is None

    def to_dict(self):
        return {
            "program": self.program,
            "steps": self.steps_examined,
            "ok": self.ok,
            "verdicts": [v.__dict__ for v in self.verdicts],
            "failure": None if self.failure is None else self.failure.to_dict(),
        }


def _snapshot(term: Term, store: Store, st: StoreTyping, phi: Observation,
              reason: str, index: int) -> FailureWitness:
    from .printer import type_to_str

    cells = tuple(None if v is None else term_to_str(v) for v in store.cells)
    entries = tuple(
        None if e is None else {"binder": e.binder, "type": type_to_str(e.ty),
                                "qual": qual_to_str(e.qual)}
        for e in st.entries)
    atoms = tuple(sorted(f"@{a.index}" if isinstance(a, LocAtom) else a.name
                         for a in phi))
    return FailureWitness(reason, index, term_to_str(term), cells, entries,
                          atoms)


# ---------------------------------------------------------------------------
# Store-typing reconstruction at allocations


def _alloc_ready(t: Term) -> bool:
    """The allocation redex, including the ascription-consuming form."""
    return isinstance(t, RefNew) and (
        is_value(t.init)
        or (isinstance(t.init, Ascribe) and is_value(t.init.term)))


def _own_expectation(t: RefNew):
    if isinstance(t.init, Ascribe):
        return ("z%asc", t.init.target)
    return None


def _ref_expect(target: Optional[QualifiedType]):
    """Extract the referent expectation from a reference-typed target.

    The read component matches the checking-mode introduction; a shrunken
    write component is only a view of the allocated cell.
    """
    if target is not None and isinstance(target.ty, RefDual):
        rd = target.ty
        return (rd.binder, rd.read)
    return None


def _find_ref_expectation(t: Term):
    """The referent type the context fixes for the next redex, when the
    redex allocates: (binder, referent qualified type) or None."""
    if is_value(t):
        return None
    if _alloc_ready(t):
        return _own_expectation(t)
    match t:
        case RefNew(init):
            return _find_ref_expectation(init)
        case App(fn, arg):
            if not is_value(fn):
                return _find_ref_expectation(fn)
            if _alloc_ready(arg):
                own = _own_expectation(arg)
                if own is not None:
                    return own
                if isinstance(fn, Abs) and fn.domain is not None:
                    return _ref_expect(fn.domain)
                return None
            return _find_ref_expectation(arg)
        case Ascribe(inner, target):
            if _alloc_ready(inner):
                return _own_expectation(inner) or _ref_expect(target)
            return _find_ref_expectation(inner)
        case TApp(fn, _):
            return _find_ref_expectation(fn)
        case Assign(lhs, rhs):
            if not is_value(lhs):
                return _find_ref_expectation(lhs)
            return _find_ref_expectation(rhs)
        case Deref(x) | Succ(x) | Pred(x) | IsZero(x):
            return _find_ref_expectation(x)
        case Mul(a, b):
            return _find_ref_expectation(a if not is_value(a) else b)
        case If(c, _, _):
            return _find_ref_expectation(c)
    return None


def _entry_for(value: Term, expectation, st: StoreTyping,
               phi: Observation) -> StoreEntry:
    if expectation is not None:
        binder, comp = expectation
        closed = (not type_free_tvars(comp.ty)
                  and all(isinstance(a, LocAtom) for a in type_free_atoms(comp.ty)))
        qual_ok = all(isinstance(a, LocAtom) or a == VarAtom(binder)
                      for a in comp.qual.atoms)
        if closed and qual_ok:
            return StoreEntry(binder, comp.ty, comp.qual)
    qt = typecheck_program(value, st, phi)
    return StoreEntry("z", qt.ty, qt.qual)


def _extend_for_step(term_before: Term, out: Stepped, store_before: Store,
                     st: StoreTyping, phi: Observation):
    new_locs = tuple(sorted(out.store.dom - store_before.dom))
    new_st = st
    expectation = _find_ref_expectation(term_before) if new_locs else None
    for loc in new_locs:
        entry = _entry_for(out.store.lookup(loc), expectation, new_st, phi)
        new_st = new_st.extend_at(loc, entry)
    new_phi = frozenset(phi) | {LocAtom(loc) for loc in new_locs}
    return new_st, new_phi, new_locs


# ---------------------------------------------------------------------------
# Progress


@dataclass
class Verdict:
    ok: bool
    detail: str = ""


def progress_check(t: Term, st: StoreTyping = EMPTY_STORE_TYPING,
                   phi: Optional[Observation] = None,
                   store: Store = Store()) -> Verdict:
    """A well-typed term is a value or steps; Stuck is a counterexample."""
    if phi is None:
        phi = phi_of(*sorted(st.dom))
    typecheck_program(t, st, phi)
    out = step(t, store)
    if isinstance(out, Stuck):
        return Verdict(False, out.reason)
    kind = "value" if isinstance(out, AlreadyValue) else "stepped"
    return Verdict(True, kind)


def progress_walk(t: Term, st: StoreTyping = EMPTY_STORE_TYPING,
                  phi: Optional[Observation] = None, store: Store = Store(),
                  fuel: int = 200, name: str = "<term>") -> OracleReport:
    """Every prefix of the trace steps or is a value; never Stuck."""
    if phi is None:
        phi = phi_of(*sorted(st.dom))
    report = OracleReport(name)
    typecheck_program(t, st, phi)
    cur, cur_store = t, store
    for i in range(fuel):
        out = step(cur, cur_store)
        if isinstance(out, AlreadyValue):
            break
        if isinstance(out, Stuck):
            report.failure = _snapshot(cur, cur_store, st, phi,
                                       f"stuck: {out.reason}", i)
            return report
        report.steps_examined += 1
        cur, cur_store = out.term, out.store
    return report


# ---------------------------------------------------------------------------
# Preservation


def preservation_check(t: Term, st: StoreTyping = EMPTY_STORE_TYPING,
                       phi: Optional[Observation] = None, fuel: int = 200,
                       store: Store = Store(),
                       name: str = "<term>") -> OracleReport:
    if phi is None:
        phi = phi_of(*sorted(st.dom))
    report = OracleReport(name)
    q0 = typecheck_program(t, st, phi)
    ok, problems = wf_store(EMPTY_CTX, st, phi, store)
    if not ok:
        raise ValueError(f"precondition: store not well-typed: {problems}")
    st0_dom = st.dom
    cur, cur_store, cur_st, cur_phi = t, store, st, phi
    for i in range(fuel):
        out = step(cur, cur_store)
        if isinstance(out, AlreadyValue):
            break
        if isinstance(out, Stuck):
            report.failure = _snapshot(cur, cur_store, cur_st, cur_phi,
                                       f"stuck: {out.reason}", i)
            return report
        try:
            new_st, new_phi, new_locs = _extend_for_step(
                cur, out, cur_store, cur_st, cur_phi)
        except TypeCheckError as e:
            report.failure = _snapshot(out.term, out.store, cur_st, cur_phi,
                                       f"allocated value untypeable: {e}", i)
            return report
        verdict = StepVerdict(i, out.rule, True, new_locs=new_locs)
        try:
            q_new = typecheck_program(out.term, new_st, new_phi)
        except TypeCheckError as e:
            report.failure = _snapshot(out.term, out.store, new_st, new_phi,
                                       f"retypecheck failed: {e}", i)
            return report
        verdict.qual = qual_to_str(q_new.qual)
        verdict.growth = qual_to_str(q_new.qual - q0.qual)
        # target qualifier: the fresh marker joined with every location
        # allocated so far, transitively closed over the grown store typing
        alloc = Qualifier.of(*(LocAtom(loc) for loc in sorted(new_st.dom - st0_dom)))
        target = (q0.qual | alloc) if q0.qual.has_fresh else q0.qual
        closure = qtrans(new_st.reach_env(), target.without_fresh())
        if q_new.qual.has_fresh and not q0.qual.has_fresh:
            report.failure = _snapshot(out.term, out.store, new_st, new_phi,
                                       "qualifier gained a fresh marker", i)
            return report
        if not q_new.qual.without_fresh() <= closure:
            grown = q_new.qual.without_fresh() - closure
            report.failure = _snapshot(
                out.term, out.store, new_st, new_phi,
                f"qualifier grew beyond new allocations: {qual_to_str(grown)}", i)
            return report
        if not _type_preserved(q_new, q0, closure):
            report.failure = _snapshot(
                out.term, out.store, new_st, new_phi,
                f"type not preserved: {q_new.ty!r} vs {q0.ty!r}", i)
            return report
        ok, problems = wf_store(EMPTY_CTX, new_st, new_phi, out.store)
        if not ok:
            report.failure = _snapshot(out.term, out.store, new_st, new_phi,
                                       f"store ill-typed: {problems}", i)
            return report
        report.verdicts.append(verdict)
        report.steps_examined += 1
        cur, cur_store, cur_st, cur_phi = out.term, out.store, new_st, new_phi
    return report


def _type_preserved(q_new: QualifiedType, q0: QualifiedType,
                    closure: Qualifier) -> bool:
    """The new type fits the old one, possibly after escaping into atoms
    the target closure already accounts for."""
    if sub_type(EMPTY_CTX, q_new.ty, q0.ty, outer=q_new.qual):
        return True
    escaped = escape_requires(EMPTY_CTX, q_new.ty, q0.ty, outer=q_new.qual)
    return escaped is not None and escaped <= closure.atoms


# ---------------------------------------------------------------------------
# Separation and parallel reduction


def separation_check(t1: Term, t2: Term, st: StoreTyping = EMPTY_STORE_TYPING,
                     store: Store = Store(), rounds: int = 1,
                     name: str = "<pair>") -> OracleReport:
    """Sequential reduction of disjoint terms stays typed and disjoint."""
    phi = phi_of(*sorted(st.dom))
    report = OracleReport(name)
    q1 = typecheck_program(t1, st, phi)
    q2 = typecheck_program(t2, st, phi)
    if not overlap(_EMPTY_REACH, q1.qual, q2.qual) <= FRESH_QUAL:
        raise ValueError("precondition: qualifiers are not disjoint")
    cur1, cur2, cur_store, cur_st, cur_phi = t1, t2, store, st, phi
    for i in range(rounds):
        moved = False
        for which in (1, 2):
            cur = cur1 if which == 1 else cur2
            out = step(cur, cur_store)
            if isinstance(out, AlreadyValue):
                continue
            if isinstance(out, Stuck):
                report.failure = _snapshot(cur, cur_store, cur_st, cur_phi,
                                           f"stuck: {out.reason}", i)
                return report
            moved = True
            cur_st, cur_phi, _ = _extend_for_step(cur, out, cur_store,
                                                  cur_st, cur_phi)
            cur_store = out.store
            if which == 1:
                cur1 = out.term
            else:
                cur2 = out.term
        try:
            p1 = typecheck_program(cur1, cur_st, cur_phi)
            p2 = typecheck_program(cur2, cur_st, cur_phi)
        except TypeCheckError as e:
            report.failure = _snapshot(cur1, cur_store, cur_st, cur_phi,
                                       f"retypecheck failed: {e}", i)
            return report
        shared = overlap(_EMPTY_REACH, p1.qual, p2.qual)
        if not shared <= FRESH_QUAL:
            report.failure = _snapshot(
                cur1, cur_store, cur_st, cur_phi,
                f"overlap grew beyond fresh: {qual_to_str(shared)}", i)
            return report
        report.steps_examined += 1
        report.verdicts.append(StepVerdict(i, "round", True,
                                           qual=qual_to_str(shared)))
        if not moved:
            break
    return report


def parallel_check(t1: Term, t2: Term, st: StoreTyping, store: Store,
                   phi1: Observation, phi2: Observation,
                   name: str = "<pair>") -> OracleReport:
    """Disjointly-observing non-values step on restricted store copies."""
    if frozenset(phi1) & frozenset(phi2):
        raise ValueError("precondition: observation filters overlap")
    if is_value(t1) or is_value(t2):
        raise ValueError("precondition: both terms must be non-values")
    report = OracleReport(name)
    typecheck_program(t1, st, phi1)
    typecheck_program(t2, st, phi2)
    for phi in (phi1, phi2):
        ok, problems = wf_store(EMPTY_CTX, st, phi, store)
        if not ok:
            raise ValueError(f"precondition: store not well-typed: {problems}")
    base = max(len(store.cells), len(st.entries))
    results = []
    for idx, (t, phi) in enumerate(((t1, phi1), (t2, phi2))):
        restricted = store.restrict(phi)
        out = step(t, restricted, next_loc=base + idx)
        if isinstance(out, Stuck):
            report.failure = _snapshot(t, restricted, st, phi,
                                       f"stuck: {out.reason}", 0)
            return report
        new_st, new_phi, _ = _extend_for_step(t, out, restricted, st, phi)
        try:
            q = typecheck_program(out.term, new_st, new_phi)
        except TypeCheckError as e:
            report.failure = _snapshot(out.term, out.store, new_st, new_phi,
                                       f"retypecheck failed: {e}", 0)
            return report
        results.append((q, new_st))
    results[0][1].merge(results[1][1])  # disjointness of the extensions
    shared = overlap(_EMPTY_REACH, results[0][0].qual, results[1][0].qual)
    if not shared <= FRESH_QUAL:
        report.failure = _snapshot(t1, store, st, phi1,
                                   f"overlap grew beyond fresh: "
                                   f"{qual_to_str(shared)}", 0)
        return report
    report.steps_examined = 1
    report.verdicts.append(StepVerdict(0, "parallel", True,
                                       qual=qual_to_str(shared)))
    return report


# ---------------------------------------------------------------------------
# Well-typed term generation


_NAT_QT = "Nat^{}"


class _Gen:
    """Typed-template generator; every emitted program typechecks."""

    def __init__(self, rng: random.Random):
        self.rng = rng
        self.counter = 0
        self.nats: list[str] = []
        self.natrefs: list[str] = []
        self.cells: list[str] = []      # Ref[Nat^{}]^{a,b}-style widened cells
        self.cellquals: dict = {}
        self.funs: list[str] = []
        self.cycs: list[str] = []

    def name(self, prefix: str) -> str:
        self.counter += 1
        return f"{prefix}{self.counter}"

    def arith(self, depth: int) -> str:
        r = self.rng
        if depth <= 0 or r.random() < 0.3:
            if self.nats and r.random() < 0.5:
                return r.choice(self.nats)
            if self.natrefs and r.random() < 0.4:
                return f"!{r.choice(self.natrefs)}"
            return str(r.randrange(0, 7))
        pick = r.randrange(4)
        if pick == 0:
            return f"succ {self.arith(depth - 1)}"
        if pick == 1:
            return f"pred {self.arith(depth - 1)}"
        if pick == 2:
            return f"({self.arith(depth - 1)}) * ({self.arith(depth - 1)})"
        return (f"if iszero {self.arith(depth - 1)} then {self.arith(depth - 1)} "
                f"else {self.arith(depth - 1)}")

    def binding(self) -> Optional[str]:
        r = self.rng
        choices = ["nat", "natref", "alias", "assign", "readnat", "fun",
                   "call", "knot", "widecell", "annotcell", "cellassign",
                   "readonly", "immutview"]
        weights = [3, 3, 1, 2, 2, 2, 2, 2, 1, 1, 1, 1, 1]
        kind = r.choices(choices, weights)[0]
        if kind == "nat":
            n = self.name("n")
            line = f"let {n} = {self.arith(2)} in"
            self.nats.append(n)
            return line
        if kind == "natref":
            n = self.name("r")
            line = f"let {n} = ref ({self.arith(1)}) in"
            self.natrefs.append(n)
            return line
        if kind == "alias" and self.natrefs:
            n = self.name("al")
            src = r.choice(self.natrefs)
            line = f"let {n} = {src} in"
            self.natrefs.append(n)
            return line
        if kind == "assign" and self.natrefs:
            u = self.name("u")
            tgt = r.choice(self.natrefs)
            return f"let {u} = {tgt} := ({self.arith(1)}) in"
        if kind == "readnat" and self.natrefs:
            n = self.name("n")
            line = f"let {n} = !{r.choice(self.natrefs)} in"
            self.nats.append(n)
            return line
        if kind == "fun":
            f = self.name("f")
            body = f"({self.arith(1)})"
            if self.natrefs and r.random() < 0.6:
                tgt = r.choice(self.natrefs)
                inner = self.name("w")
                body = f"let {inner} = {tgt} := ({self.arith(1)}) in ({self.arith(1)})"
            line = (f"let {f} = (fun s{f}(x{f}: Nat^{{}}) : Nat^{{}} => {body}) in")
            self.funs.append(f)
            return line
        if kind == "call" and self.funs:
            n = self.name("n")
            f = r.choice(self.funs)
            line = f"let {n} = {f} ({self.arith(1)}) in"
            self.nats.append(n)
            return line
        if kind == "knot":
            c = self.name("c")
            u = self.name("u")
            lines = (
                f"let {c} : mu z. Ref[(h{c}(x: Unit^{{}}) -> Unit^{{}})^{{z}}]^{{fresh}} = "
                f"ref (fun i{c}(x: Unit^{{}}) : Unit^{{}} => x) in "
                f"let {u} = {c} := (fun k{c}(x: Unit^{{}}) : Unit^{{}} => (!{c}) x) in")
            self.cycs.append(c)
            return lines
        if kind == "widecell" and len(self.natrefs) >= 2:
            a, b = r.sample(self.natrefs, 2)
            cell = self.name("cell")
            line = (f"let {cell} = ref ({a} : Ref[Nat^{{}}]^{{{a},{b}}}) in")
            self.cells.append(cell)
            self.cellquals[cell] = (a, b)
            return line
        if kind == "annotcell" and len(self.natrefs) >= 2:
            a, b = r.sample(self.natrefs, 2)
            cell = self.name("cell")
            line = (f"let {cell} : Ref[Ref[Nat^{{}}]^{{{a},{b}}}]^{{fresh}} = "
                    f"ref {a} in")
            self.cells.append(cell)
            self.cellquals[cell] = (a, b)
            return line
        if kind == "immutview" and self.natrefs:
            src = r.choice(self.natrefs)
            iv = self.name("iv")
            n = self.name("n")
            return (f"let {iv} = ({src} : mu z. Ref[Bot^{{}}, Nat^{{}}]"
                    f"^{{{src}}}) in let {n} = !{iv} in")
        if kind == "cellassign" and self.cells:
            cell = r.choice(self.cells)
            u = self.name("u")
            rhs = r.choice(self.cellquals[cell])
            return f"let {u} = {cell} := {rhs} in"
        if kind == "readonly" and self.natrefs:
            src = r.choice(self.natrefs)
            rr = self.name("rr")
            n = self.name("n")
            return (f"let {rr} = ref {src} in "
                    f"let {n} = !(!({rr} : mu z. Ref[Bot^{{}}, "
                    f"Ref[Nat^{{}}]^{{&z}}]^{{{rr},{src}}})) in")
        return None

    def body(self) -> str:
        r = self.rng
        if self.nats and r.random() < 0.5:
            return self.arith(1)
        if self.natrefs and r.random() < 0.5:
            return f"!{r.choice(self.natrefs)}"
        return self.arith(1) if r.random() < 0.7 else "unit"

    def program(self, size: int) -> str:
        lines = []
        for _ in range(max(1, size)):
            line = self.binding()
            if line is not None:
                lines.append(line)
        lines.append(self.body())
        return "\n".join(lines)


def gen_well_typed(seed: int, size: int = 5) -> Term:
    """A closed, well-typed program; a constant at size zero, smaller
    fallbacks on a bad draw."""
    from .parser import parse_term
    from .syntax import NatLit, UnitLit

    rng = random.Random(seed)
    if size <= 0:
        return UnitLit() if rng.random() < 0.5 else NatLit(rng.randrange(10))
    for attempt in range(4):
        gen = _Gen(rng)
        src = gen.program(max(1, size - attempt))
        try:
            term = parse_term(src)
            typecheck_program(term)
            return term
        except Exception:
            continue
    return NatLit(0)


def gen_disjoint_pair(seed: int):
    """Two terms over a shared store with disjoint qualifiers, plus the
    store typing, store, and the observation split used by parallelCheck."""
    from .parser import parse_term
    from .syntax import NAT, UnitLit

    rng = random.Random(seed)
    n_cells = rng.randrange(2, 6)
    st = EMPTY_STORE_TYPING
    store = Store()
    for i in range(n_cells):
        st = st.extend(StoreEntry("z", NAT, Qualifier()))
        _, store = store.allocate(_nat(rng))
    locs = list(range(n_cells))
    rng.shuffle(locs)
    half = max(1, len(locs) // 2)
    side1, side2 = sorted(locs[:half]), sorted(locs[half:])

    def make(side):
        if not side:
            return UnitLit(), frozenset()
        loc = rng.choice(side)
        kind = rng.randrange(3)
        if kind == 0:
            src = f"@{loc} := succ !@{loc}"
        elif kind == 1:
            src = f"succ !@{loc}"
        else:
            src = f"(fun f(x: Nat^{{}}) : Nat^{{}} => x * x) !@{loc}"
        return parse_term(src), phi_of(*side)

    t1, phi1 = make(side1)
    t2, phi2 = make(side2)
    return t1, t2, st, store, phi1, phi2


def _nat(rng):
    from .syntax import NatLit
    return NatLit(rng.randrange(0, 9))
