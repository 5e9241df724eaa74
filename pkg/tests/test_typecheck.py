import pytest

from reachck.environments import EMPTY_CTX, StoreEntry, StoreTyping, phi_of
from reachck.errors import ErrorKind, TypeCheckError
from reachck.parser import parse_qtype, parse_term
from reachck.printer import qtype_to_str
from reachck.syntax import (FRESH, NAT, LocAtom, Qualifier, RefDual,
                            alpha_eq_qt)
from reachck.typecheck import Checker, typecheck_program

Q = Qualifier.of_vars


def tc(src):
    return typecheck_program(parse_term(src))


def rejects(src, kind):
    with pytest.raises(TypeCheckError) as e:
        tc(src)
    assert e.value.kind == kind, e.value
    return e.value


# -- simple synthesis ----------------------------------------------------------

def test_unit_literal():
    assert tc("unit") == parse_qtype("Unit^{}")


def test_nat_bool_literals():
    assert tc("42") == parse_qtype("Nat^{}")
    assert tc("true") == parse_qtype("Bool^{}")


def test_ref_synthesizes_fresh_dual():
    qt = tc("ref unit")
    assert qt.qual == Qualifier.of(FRESH)
    assert isinstance(qt.ty, RefDual)
    assert alpha_eq_qt(qt.ty.write, parse_qtype("Unit^{}"))
    assert alpha_eq_qt(qt.ty.read, parse_qtype("Unit^{}"))


def test_var_synthesizes_singleton():
    checker = Checker()
    ctx = EMPTY_CTX.bind_term("counter", parse_qtype("Ref[Nat^{}]^{fresh}"))
    qt = checker.synth(ctx, phi_of("counter"), parse_term("counter"))
    assert qt.qual == Q("counter")


def test_fresh_referent_rejected():
    rejects("ref (ref 0)", ErrorKind.FRESH_REFERENT)


def test_fresh_referent_guard_quantified():
    # ref t is rejected exactly when the initializer synthesizes fresh
    fresh_inits = ["ref 0", "ref unit", "(fun f(x: Unit^{}) : "
                   "Ref[Nat^{}]^{fresh} => ref 0) unit"]
    plain_inits = ["0", "unit", "succ 3",
                   "(fun f(x: Nat^{}) : Nat^{} => x) 2"]
    for init in fresh_inits:
        with pytest.raises(TypeCheckError) as e:
            tc(f"ref ({init})")
        assert e.value.kind == ErrorKind.FRESH_REFERENT
    for init in plain_inits:
        tc(f"ref ({init})")


def test_annotation_required():
    rejects("fun f(x: Unit^{}) : Unit^{} => x x",
            ErrorKind.NOT_A_FUNCTION)
    with pytest.raises(TypeCheckError) as e:
        checker = Checker()
        from reachck.syntax import Abs, Var
        checker.synth(EMPTY_CTX, frozenset(),
                      Abs("f", "x", None, None, Var("x")))
    assert e.value.kind == ErrorKind.ANNOTATION_REQUIRED


def test_unbound_variable():
    rejects("nosuch", ErrorKind.UNBOUND_VARIABLE)


# -- the corpus-defining cases ---------------------------------------------------

LANDIN_OK = """
let c : mu z. Ref[(f(x: Unit^{}) -> Unit^{})^{z}]^{fresh} =
  ref (fun f0(x: Unit^{}) : Unit^{} => x) in
let u = c := (fun f1(x: Unit^{}) : Unit^{} => (!c) x) in
unit
"""


def test_landin_knot_accepted():
    assert tc(LANDIN_OK) == parse_qtype("Unit^{}")


def test_landin_noncyclic_rejected():
    rejects("""
let c : Ref[(f(x: Unit^{}) -> Unit^{})^{}]^{fresh} =
  ref (fun f0(x: Unit^{}) : Unit^{} => x) in
let u = c := (fun f1(x: Unit^{}) : Unit^{} => (!c) x) in
unit
""", ErrorKind.REFERENT_MISMATCH)


def test_separation_violation():
    err = rejects("""
let counter = ref 0 in
let update = (fun f(x: Ref[Nat^{}]^{fresh}) : Unit^{} => counter := succ (!x)) in
update counter
""", ErrorKind.SEPARATION_VIOLATION)
    assert "counter" in err.message


def test_cyclic_qualifier_not_singleton():
    rejects("""
let a = ref 0 in
let b = ref 0 in
let e1 : mu x. Ref[(f(y: Unit^{}) -> Nat^{})^{x}]^{fresh} =
  ref (fun f0(y: Unit^{}) : Nat^{} => 0) in
let e2 = (fun f1(y: Unit^{}) : Nat^{} => (!a) * (!b)) in
e1 := e2
""", ErrorKind.CYCLIC_QUALIFIER_NOT_SINGLETON)


def test_shallow_nesting_accepted_with_fresh_overlap():
    from reachck.qualifiers import overlap
    from reachck.environments import EMPTY_STORE_TYPING
    tc("""
let inner = ref 0 in
let c1 = ref inner in
let c2 = ref inner in
let newctx =
  (fun f(x1: Ref[Ref[Nat^{}]^{inner}]^{fresh})
     : (g(x2: Ref[Ref[Nat^{}]^{inner}]^{fresh}) -> Unit^{})^{inner} =>
    (fun g(x2: Ref[Ref[Nat^{}]^{inner}]^{fresh}) : Unit^{} => unit)) in
newctx c1 c2
""")
    # shallow qualifiers: c1 and c2 overlap only at fresh
    ctx = EMPTY_CTX
    ctx = ctx.bind_term("inner", parse_qtype("Ref[Nat^{}]^{fresh}"))
    ctx = ctx.bind_term("c1", parse_qtype("Ref[Ref[Nat^{}]^{inner}]^{fresh}"))
    ctx = ctx.bind_term("c2", parse_qtype("Ref[Ref[Nat^{}]^{inner}]^{fresh}"))
    env = EMPTY_STORE_TYPING.reach_env(ctx)
    assert overlap(env, Q("c1"), Q("c2")) == Qualifier.of(FRESH)


def test_checking_reflexive():
    checker = Checker()
    for src in ["unit", "3", "ref 0", "fun f(x: Nat^{}) : Nat^{} => x"]:
        term = parse_term(src)
        qt = checker.synth(EMPTY_CTX, frozenset(), term)
        checker.check(EMPTY_CTX, frozenset(), term, qt)


def test_check_alias_at_declared_type():
    checker = Checker()
    ctx = EMPTY_CTX.bind_term("counter", parse_qtype("Ref[Nat^{}]^{fresh}"))
    ctx = ctx.bind_term("counter2", parse_qtype("Ref[Nat^{}]^{counter}"))
    phi = phi_of("counter", "counter2")
    checker.check(ctx, phi, parse_term("counter2"),
                  parse_qtype("Ref[Nat^{}]^{counter2}"))


def test_escape_via_ascription():
    qt = tc("""
let mkref = (fun f(u: Unit^{}) : mu z. Ref[Bot^{}, Ref[Nat^{}]^{&z}]^{fresh} =>
    let x = ref 0 in
    let c = ref x in
    (c : mu z. Ref[Bot^{}, Ref[Nat^{}]^{&z}]^{c,x})) in
mkref unit
""")
    assert alpha_eq_qt(qt, parse_qtype("mu z. Ref[Bot^{}, Ref[Nat^{}]^{&z}]^{fresh}"))


def test_write_forbidden_through_bot():
    rejects("""
let useimm = (fun f(r: mu z. Ref[Bot^{}, Nat^{}]^{fresh}) : Unit^{} => r := 1) in
let cell = ref 0 in
useimm cell
""", ErrorKind.WRITE_FORBIDDEN)


def test_readonly_write_rejected_on_empty_write_qualifier():
    rejects("""
let a = ref 0 in
let ro = (fun f(r: mu z. Ref[Ref[Nat^{}]^{}, Ref[Nat^{}]^{&z}]^{fresh})
            : Unit^{} => r := a) in
let rr = ref a in
ro rr
""", ErrorKind.REFERENT_MISMATCH)


def test_cell_referent_mismatch():
    rejects("""
let a = ref 0 in
let b = ref 0 in
let cell = ref a in
cell := b
""", ErrorKind.REFERENT_MISMATCH)


def test_cell_widened_accepts_both():
    tc("""
let a = ref 0 in
let b = ref 0 in
let cell = ref (a : Ref[Nat^{}]^{a,b}) in
let u1 = cell := a in
let u2 = cell := b in
unit
""")


def test_result_qualifier_dependency_allowed():
    # the parameter in the result qualifier is the ordinary dependency;
    # substitution replaces it with the argument's qualifier
    qt = tc("""
let a = ref 0 in
let b = ref 0 in
let pair = (a : Ref[Nat^{}]^{a,b}) in
let f = (fun g(x: Ref[Nat^{}]^{a,b}) : Ref[Nat^{}]^{x} => x) in
f pair
""")
    assert qt.qual.has_fresh  # both lets substitute to fresh at the top


def test_dependent_return_escape():
    # a non-singleton, non-value argument cannot occur in the result TYPE
    rejects("""
let a = ref 0 in
let b = ref 0 in
let f = (fun g(x: Ref[Nat^{}]^{a,b}) : (h(u: Unit^{}) -> Unit^{x})^{x} =>
          (fun h(u: Unit^{}) : Unit^{x} => unit)) in
f (a : Ref[Nat^{}]^{a,b})
""", ErrorKind.DEPENDENT_RETURN_ESCAPE)


def test_singleton_argument_in_result_type_ok():
    tc("""
let a = ref 0 in
let f = (fun g(x: Ref[Nat^{}]^{a}) : Ref[Nat^{}]^{x} => x) in
f a
""")


def test_value_argument_exempt_from_guard():
    # a non-location value argument escapes the fv guard (t-app-val)
    tc("""
let a = ref 0 in
let b = ref 0 in
let f = (fun g(x: (h(u: Unit^{}) -> Unit^{})^{a,b}) : (h2(u: Unit^{}) -> Unit^{x})^{x} =>
          (fun h2(u: Unit^{}) : Unit^{x} => unit)) in
let r = f (fun t(u: Unit^{}) : Unit^{} => let w1 = a := 1 in b := 2) in
unit
""")


def test_fixpoint_program_types():
    qt = tc("""
let fix = (tfun ff(X ^ xq <: Top^{}) =>
  (fun f0(f: (g0(g: (h0(a: X^{}) -> X^{})^{fresh}) -> (h1(a: X^{}) -> X^{})^{g})^{fresh})
     : (h2(a: X^{}) -> X^{})^{fresh} =>
    let c : mu z. Ref[(h3(a: X^{}) -> X^{})^{z}]^{fresh} =
      ref (fun i(a: X^{}) : X^{} => a) in
    let u = c := (f (fun pr(a: X^{}) : X^{} => (!c) a)) in
    !c)) in
let fact = (fun gg(g2: (h4(a: Nat^{}) -> Nat^{})^{fresh}) : (h5(a: Nat^{}) -> Nat^{})^{g2} =>
    (fun fr(a: Nat^{}) : Nat^{} => if iszero a then 1 else a * g2 (pred a))) in
(fix[Nat^{}] fact) 5
""")
    assert qt == parse_qtype("Nat^{}")


def test_tapp_bound_violation():
    rejects("""
let f = (tfun ff(X ^ xq <: Nat^{}) => fun g(x: X^{}) : X^{} => x) in
f[Unit^{}]
""", ErrorKind.BOUND_VIOLATION)


def test_deref_not_a_reference():
    rejects("!unit", ErrorKind.NOT_A_REFERENCE)
    rejects("unit := 1", ErrorKind.NOT_A_REFERENCE)


# -- store-typed synthesis -------------------------------------------------------

def _nat_store():
    return StoreTyping((StoreEntry("z", NAT, Qualifier()),))


def test_loc_synthesis():
    checker = Checker(_nat_store())
    qt = checker.synth(EMPTY_CTX, phi_of(0), parse_term("@0"))
    assert qt.qual == Qualifier.of(LocAtom(0))
    assert isinstance(qt.ty, RefDual)


def test_loc_unobservable():
    checker = Checker(_nat_store())
    with pytest.raises(TypeCheckError) as e:
        checker.synth(EMPTY_CTX, frozenset(), parse_term("@0"))
    assert e.value.kind == ErrorKind.UNOBSERVABLE


def test_loc_assignment():
    checker = Checker(_nat_store())
    qt = checker.synth(EMPTY_CTX, phi_of(0), parse_term("@0 := 4"))
    assert qt == parse_qtype("Unit^{}")


def test_cyclic_loc_assignment():
    fn_ty = parse_qtype("(f(y: Unit^{}) -> Unit^{})^{}").ty
    st = StoreTyping((StoreEntry("x", fn_ty, Q("x")),))
    checker = Checker(st)
    qt = checker.synth(EMPTY_CTX, phi_of(0),
                       parse_term("@0 := (fun f(y: Unit^{}) : Unit^{} => (!@0) y)"))
    assert qt == parse_qtype("Unit^{}")


# -- invariants -------------------------------------------------------------------

def test_minimality_variable_singletons():
    checker = Checker()
    ctx = EMPTY_CTX
    names = ["v1", "v2", "v3"]
    for n in names:
        ctx = ctx.bind_term(n, parse_qtype("Ref[Nat^{}]^{fresh}"))
    phi = phi_of(*names)
    for n in names:
        qt = checker.synth(ctx, phi, parse_term(n))
        assert qt.qual == Q(n)


def test_weakening():
    checker = Checker()
    ctx = EMPTY_CTX.bind_term("a", parse_qtype("Ref[Nat^{}]^{fresh}"))
    phi = phi_of("a")
    term = parse_term("!a")
    before = checker.synth(ctx, phi, term)
    ctx2 = ctx.bind_term("zzz", parse_qtype("Unit^{}"))
    after = checker.synth(ctx2, phi, term)
    assert alpha_eq_qt(before, after)


def test_determinism():
    srcs = [LANDIN_OK, "ref 0", "let a = ref 1 in succ !a"]
    for src in srcs:
        outs = {qtype_to_str(tc(src)) for _ in range(3)}
        assert len(outs) == 1
