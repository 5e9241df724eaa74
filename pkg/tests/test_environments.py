import pytest

from reachck.environments import (EMPTY_CTX, Store, StoreEntry, StoreTyping,
                                  ContextError, lookup_var, phi_of, wf_store,
                                  wf_store_full, wf_store_typing)
from reachck.errors import ErrorKind, TypeCheckError
from reachck.parser import parse_qtype, parse_term
from reachck.syntax import (NAT, UNIT, LocAtom, NatLit, Qualifier, UnitLit)

Q = Qualifier.of_vars


def entry(src, binder="z"):
    qt = parse_qtype(src)
    return StoreEntry(binder, qt.ty, qt.qual)


# -- lookupVar ----------------------------------------------------------------

def test_lookup_observable():
    ctx = EMPTY_CTX.bind_term("c", parse_qtype("Ref[Nat^{}]^{fresh}"))
    qt = lookup_var(ctx, phi_of("c"), "c")
    assert qt == parse_qtype("Ref[Nat^{}]^{fresh}")


def test_lookup_unobservable():
    ctx = EMPTY_CTX.bind_term("c", parse_qtype("Unit^{}"))
    with pytest.raises(TypeCheckError) as e:
        lookup_var(ctx, frozenset(), "c")
    assert e.value.kind == ErrorKind.UNOBSERVABLE


def test_lookup_unbound():
    with pytest.raises(TypeCheckError) as e:
        lookup_var(EMPTY_CTX, phi_of("y"), "y")
    assert e.value.kind == ErrorKind.UNBOUND_VARIABLE


def test_telescoping_checked_at_bind_time():
    with pytest.raises(ContextError):
        EMPTY_CTX.bind_term("x", parse_qtype("Unit^{nosuch}"))
    ctx = EMPTY_CTX.bind_term("a", parse_qtype("Unit^{}"))
    ctx.bind_term("b", parse_qtype("Unit^{a,fresh}"))  # earlier name + fresh ok


def test_weakening_at_data_level():
    ctx = EMPTY_CTX.bind_term("a", parse_qtype("Unit^{}"))
    ctx2 = ctx.bind_term("b", parse_qtype("Nat^{}"))
    assert ctx2.lookup_term("a") == ctx.lookup_term("a")


# -- wfStoreTyping ------------------------------------------------------------

def test_wf_empty():
    assert wf_store_typing(StoreTyping())


def test_wf_landin_store():
    st = StoreTyping((
        entry("Unit^{}"),
        StoreEntry("x", parse_qtype("(f(y: Unit^{}) -> Unit^{})^{}").ty,
                   Q("x")),
    ))
    assert wf_store_typing(st)
    assert st.entries[1].is_cyclic


def test_wf_forward_reference_forbidden():
    st = StoreTyping((
        StoreEntry("z", UNIT, Qualifier.of(LocAtom(1))),
    ))
    assert not wf_store_typing(st)


def test_wf_prefix_closed():
    st = StoreTyping((
        entry("Nat^{}"),
        StoreEntry("z", NAT, Qualifier.of(LocAtom(0))),
        entry("Unit^{}"),
    ))
    assert wf_store_typing(st)
    for k in range(len(st.entries)):
        assert wf_store_typing(StoreTyping(st.entries[:k]))


def test_wf_open_type_rejected():
    st = StoreTyping((entry("Unit^{}", ), ))
    assert wf_store_typing(st)
    bad = StoreTyping((StoreEntry("z", parse_qtype("Unit^{}").ty, Q("x")),))
    assert not wf_store_typing(bad)


# -- wfStore -------------------------------------------------------------------

def test_wf_store_empty_everything():
    ok, problems = wf_store(EMPTY_CTX, StoreTyping(), frozenset(), Store())
    assert ok and not problems


def test_wf_store_constant_cell():
    st = StoreTyping((entry("Unit^{}"),))
    store = Store((UnitLit(),))
    ok, _ = wf_store(EMPTY_CTX, st, phi_of(0), store)
    assert ok


def test_wf_store_missing_observed_cell():
    st = StoreTyping((entry("Unit^{}"),))
    ok, problems = wf_store(EMPTY_CTX, st, phi_of(0), Store())
    assert not ok and problems


def test_wf_store_cyclic_cell_checked_at_substituted_qualifier():
    fn_ty = parse_qtype("(f(y: Unit^{}) -> Unit^{})^{}").ty
    st = StoreTyping((StoreEntry("x", fn_ty, Q("x")),))
    knot = parse_term("fun f(y: Unit^{}) : Unit^{} => (!@0) y")
    ok, problems = wf_store_full(EMPTY_CTX, st, Store((knot,)))
    assert ok, problems


def test_wf_store_update_preserves():
    st = StoreTyping((entry("Nat^{}"),))
    store = Store((NatLit(1),))
    ok, _ = wf_store_full(EMPTY_CTX, st, store)
    assert ok
    ok, _ = wf_store_full(EMPTY_CTX, st, store.update(0, NatLit(9)))
    assert ok


def test_wf_store_wrongly_typed_cell():
    st = StoreTyping((entry("Nat^{}"),))
    ok, problems = wf_store_full(EMPTY_CTX, st, Store((UnitLit(),)))
    assert not ok and "cell 0" in problems[0]


# -- store typing holes (parallel oracle support) ------------------------------

def test_store_typing_holes_and_merge():
    base = StoreTyping((entry("Nat^{}"),))
    left = base.extend_at(1, entry("Nat^{}"))
    right = base.extend_at(2, entry("Unit^{}"))
    merged = left.merge(right)
    assert merged.dom == {0, 1, 2}
    assert wf_store_typing(merged)
    with pytest.raises(ValueError):
        left.extend_at(1, entry("Unit^{}"))


def test_store_restrict_and_dense_allocation():
    store = Store((NatLit(0), NatLit(1)))
    restricted = store.restrict(phi_of(0))
    assert restricted.lookup(0) == NatLit(0)
    assert restricted.lookup(1) is None
    loc, grown = store.allocate(NatLit(5))
    assert loc == 2 and grown.lookup(2) == NatLit(5)


def test_store_entries_reach_location_atoms():
    # a store entry reaches the location atoms of its referent qualifier,
    # with the self-binder excluded
    from reachck.qualifiers import qtrans, var_reach
    from reachck.syntax import VarAtom

    st = StoreTyping((
        entry("Nat^{}"),
        StoreEntry("x", NAT, Qualifier(frozenset({LocAtom(0), VarAtom("x")}))),
    ))
    env = st.reach_env()
    assert var_reach(env, LocAtom(1)) == Qualifier.of(LocAtom(0))
    assert qtrans(env, Qualifier.of(LocAtom(1))) == \
        Qualifier.of(LocAtom(0), LocAtom(1))
