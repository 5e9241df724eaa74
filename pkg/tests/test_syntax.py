import random

from reachck.parser import parse_qtype, parse_term
from reachck.printer import term_to_str
from reachck.syntax import (Abs, Fun, LocTerm, NatLit, Qualifier,
                            QualifiedType, RefDual, UNIT, UnitLit, Var,
                            VarAtom, alpha_eq, alpha_eq_type, free_atoms,
                            is_value, plain_ref, subst_qual_in_type,
                            subst_term_var, type_free_atoms)


def qt(src):
    return parse_qtype(src)


def ty(src):
    return parse_qtype(src + "^{}").ty


# -- substTermVar ------------------------------------------------------------

def test_subst_direct_hit():
    assert subst_term_var(Var("x"), "x", UnitLit()) == UnitLit()


def test_subst_under_unrelated_binder():
    t = parse_term("fun f(y: Unit^{}) : Unit^{} => x")
    out = subst_term_var(t, "x", LocTerm(0))
    expected = parse_term("fun f(y: Unit^{}) : Unit^{} => @0")
    assert alpha_eq(out, expected)


def test_subst_shadowing_blocks():
    t = parse_term("fun f(x: Unit^{}) : Unit^{} => x")
    assert alpha_eq(subst_term_var(t, "x", UnitLit()), t)


def test_subst_capture_avoided():
    # substituting a term mentioning the binder forces a rename
    t = parse_term("fun f(y: Unit^{}) : Unit^{} => x y")
    out = subst_term_var(t, "x", Var("y"))
    assert isinstance(out, Abs)
    assert out.param != "y"
    body = out.body
    assert body.fn == Var("y")          # the substituted free y
    assert body.arg == Var(out.param)   # the renamed bound y


# -- substQualInType ---------------------------------------------------------

def test_subst_qual_forced():
    out = subst_qual_in_type(UNIT, "x", Qualifier.of_vars("a", "b"))
    assert out == UNIT
    out = parse_qtype("Unit^{x}")
    got = out.qual.subst(VarAtom("x"), Qualifier.of_vars("a", "b"))
    assert got == Qualifier.of_vars("a", "b")


def test_subst_qual_binder_shields():
    t = ty("mu z. Ref[Top^{z}]")
    out = subst_qual_in_type(t, "x", Qualifier.of_vars("c"))
    assert alpha_eq_type(out, t)
    t2 = ty("mu z. Ref[Top^{x}]")
    out2 = subst_qual_in_type(t2, "x", Qualifier.of_vars("c"))
    assert alpha_eq_type(out2, ty("mu z. Ref[Top^{c}]"))


def _naive_subst(t, name, rep):
    """Independent oracle: structural recursion written directly."""
    atom = VarAtom(name)
    if isinstance(t, Fun):
        dom = QualifiedType(_naive_subst(t.domain.ty, name, rep),
                            t.domain.qual.subst(atom, rep))
        cod = t.codomain
        if t.param != name and t.self_name != name:
            cod = QualifiedType(_naive_subst(cod.ty, name, rep),
                                cod.qual.subst(atom, rep))
        return Fun(t.self_name, t.param, dom, cod)
    return t


def test_subst_qual_fun_type_hand_unrolled():
    # oracle value computed by the naive recursion above
    t = ty("(f(y: T^{x}) -> U^{x,y})")
    rep = Qualifier.of_vars("p1", "p2")
    got = subst_qual_in_type(t, "x", rep)
    want = _naive_subst(t, "x", rep)
    assert alpha_eq_type(got, want)
    assert alpha_eq_type(got, ty("(f(y: T^{p1,p2}) -> U^{p1,p2,y})"))


# -- free variables ----------------------------------------------------------

def test_free_vars_fun_type():
    t = ty("(f(x: T^{a}) -> U^{x})")
    assert type_free_atoms(t) == frozenset({VarAtom("a")})


def test_free_vars_mu_binder_bound():
    t = ty("mu z. Ref[T^{z}]")
    assert type_free_atoms(t) == frozenset()


def test_free_tvars_forall_bound():
    from reachck.syntax import type_free_tvars
    t = ty("forall f(X^x <: T^{}). X^{x}")
    assert type_free_tvars(t) == frozenset({"T"})
    t2 = ty("forall f(X^x <: Top^{}). X^{x}")
    assert type_free_tvars(t2) == frozenset()


def test_free_atoms_includes_annotations():
    t = parse_term("fun f(x: Unit^{a}) : Unit^{} => unit")
    assert free_atoms(t) == frozenset({VarAtom("a")})


# -- invariants --------------------------------------------------------------

def _random_type(rng, depth=3, names=("a", "b", "c", "x", "y")):
    if depth == 0 or rng.random() < 0.3:
        return ty(rng.choice(["Unit", "Nat", "Top", "Bot"]))
    def q():
        return Qualifier(frozenset(
            VarAtom(n) for n in rng.sample(names, rng.randrange(0, 3))))
    pick = rng.randrange(2)
    if pick == 0:
        return Fun("f", rng.choice(names),
                   QualifiedType(_random_type(rng, depth - 1), q()),
                   QualifiedType(_random_type(rng, depth - 1), q()))
    binder = rng.choice(names)
    comp = QualifiedType(_random_type(rng, depth - 1), q())
    return RefDual(binder, comp, comp)


def test_subst_identity_quantified():
    rng = random.Random(7)
    for _ in range(300):
        t = _random_type(rng)
        for name in ("a", "x"):
            got = subst_qual_in_type(t, name, Qualifier.of_vars(name))
            assert alpha_eq_type(got, t)


def test_subst_commutes_on_disjoint_vars():
    rng = random.Random(11)
    p = Qualifier.of_vars("p1")
    q = Qualifier.of_vars("q1")
    for _ in range(300):
        t = _random_type(rng)
        one = subst_qual_in_type(subst_qual_in_type(t, "a", p), "b", q)
        other = subst_qual_in_type(subst_qual_in_type(t, "b", q), "a", p)
        assert alpha_eq_type(one, other)


def test_value_predicate():
    values = [UnitLit(), NatLit(3), LocTerm(0),
              parse_term("fun f(x: Unit^{}) : Unit^{} => x"),
              parse_term("tfun f(X^x <: Top^{}) => unit"),
              parse_term("true")]
    non_values = [parse_term("ref unit"), parse_term("!x"),
                  parse_term("succ 1"), parse_term("(unit : Unit^{})")]
    assert all(is_value(v) for v in values)
    assert not any(is_value(t) for t in non_values)


def test_alpha_eq_binders():
    a = parse_term("fun f(x: Unit^{}) : Unit^{x} => x")
    b = parse_term("fun g(y: Unit^{}) : Unit^{y} => y")
    c = parse_term("fun g(y: Unit^{}) : Unit^{g} => y")
    assert alpha_eq(a, b)
    assert not alpha_eq(a, c)


def test_plain_ref_avoids_capture():
    referent = qt("Nat^{z}")
    rd = plain_ref(referent, binder="z")
    assert rd.binder != "z"
    assert not rd.is_cyclic


def test_printer_round_trip_random():
    rng = random.Random(3)
    srcs = [
        "let a = ref 0 in a := succ !a",
        "if iszero 2 then 1 * 3 else pred 0",
        "(fun f(x: Nat^{}) : Nat^{} => x * x) 4",
        "tfun f(X^x <: Top^{}) => fun g(y: X^{}) : X^{} => y",
        "let c : mu z. Ref[(f(x: Unit^{}) -> Unit^{})^{z}]^{fresh} = "
        "ref (fun f0(x: Unit^{}) : Unit^{} => x) in (!c) unit",
    ]
    for src in srcs:
        t = parse_term(src)
        assert alpha_eq(parse_term(term_to_str(t)), t)
