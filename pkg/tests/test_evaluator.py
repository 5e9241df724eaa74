from reachck.environments import Store
from reachck.evaluator import AlreadyValue, Stepped, Stuck, eval_fuel, step
from reachck.harness import gen_well_typed
from reachck.parser import parse_term
from reachck.printer import term_to_str
from reachck.syntax import LocTerm, NatLit, UnitLit, alpha_eq


def run(src, fuel=1000):
    return eval_fuel(parse_term(src), fuel)


# -- single contractions -------------------------------------------------------

def test_beta_identity():
    out = step(parse_term("(fun f(x: Unit^{}) : Unit^{} => x) unit"), Store())
    assert isinstance(out, Stepped)
    assert out.rule == "beta"
    assert out.term == UnitLit()
    assert len(out.store) == 0


def test_ref_then_deref():
    out = step(parse_term("ref unit"), Store())
    assert out.rule == "ref"
    assert out.term == LocTerm(0)
    assert out.store.lookup(0) == UnitLit()
    out2 = step(parse_term("!@0"), out.store)
    assert out2.rule == "deref"
    assert out2.term == UnitLit()


def test_assign_updates_store():
    store = Store((NatLit(0),))
    out = step(parse_term("@0 := 9"), store)
    assert out.rule == "assign"
    assert out.term == UnitLit()
    assert out.store.lookup(0) == NatLit(9)
    assert store.lookup(0) == NatLit(0)  # original untouched


def test_pred_clamps_at_zero():
    out = step(parse_term("pred 0"), Store())
    assert out.term == NatLit(0)
    assert step(parse_term("pred 5"), Store()).term == NatLit(4)


def test_if_branches():
    assert step(parse_term("if true then 1 else 2"), Store()).rule == "if-true"
    assert step(parse_term("if true then 1 else 2"), Store()).term == NatLit(1)
    assert step(parse_term("if false then 1 else 2"), Store()).term == NatLit(2)


def test_arith_rules():
    assert run("succ 4").term == NatLit(5)
    assert run("2 * 3").term == NatLit(6)
    assert run("iszero 0").term == parse_term("true")
    assert run("iszero 3").term == parse_term("false")


def test_ascription_consumed():
    out = run("(unit : Unit^{})")
    assert out.term == UnitLit()


def test_beta_t():
    out = run("(tfun f(X^x <: Top^{}) => fun g(y: X^{}) : X^{} => y)[Nat^{}] 7")
    assert out.term == NatLit(7)


def test_stuck_only_on_ill_typed():
    assert isinstance(step(parse_term("!unit"), Store()), Stuck)
    assert isinstance(step(parse_term("unit unit"), Store()), Stuck)
    assert isinstance(step(parse_term("succ unit"), Store()), Stuck)


# -- iterated evaluation ---------------------------------------------------------

def test_value_zero_steps():
    out = run("unit")
    assert out.term == UnitLit() and out.steps == 0 and not out.exhausted


def test_values_are_normal_forms():
    for src in ["unit", "3", "true", "fun f(x: Unit^{}) : Unit^{} => x",
                "tfun f(X^x <: Top^{}) => unit"]:
        assert isinstance(step(parse_term(src), Store()), AlreadyValue)


def test_determinism_of_step():
    t = parse_term("let a = ref 1 in succ !a")
    s = Store()
    one = step(t, s)
    two = step(t, s)
    assert alpha_eq(one.term, two.term) and one.store == two.store


def test_store_monotone_domains():
    t = parse_term("let a = ref 1 in let b = ref 2 in (!a) * (!b)")
    cur, store = t, Store()
    prev_dom = store.dom
    for _ in range(100):
        out = step(cur, store)
        if not isinstance(out, Stepped):
            break
        assert prev_dom <= out.store.dom
        prev_dom = out.store.dom
        cur, store = out.term, out.store
    assert cur == NatLit(2)


def test_golden_trace_rules():
    rules = []
    eval_fuel(parse_term("let a = ref (succ 1) in !a"), 100,
              trace=lambda i, rule, redex, store: rules.append(rule))
    assert rules == ["succ", "ref", "beta", "deref"]


def test_landin_knot_loops_without_sticking():
    src = """
let c : mu z. Ref[(f(x: Unit^{}) -> Unit^{})^{z}]^{fresh} =
  ref (fun f0(x: Unit^{}) : Unit^{} => x) in
let u = c := (fun f1(x: Unit^{}) : Unit^{} => (!c) x) in
(!c) unit
"""
    out = run(src, fuel=5000)
    assert out.exhausted and out.stuck is None


def test_factorial_trace():
    src_tpl = """
let fix = (tfun ff(X ^ xq <: Top^{{}}) =>
  (fun f0(f: (g0(g: (h0(a: X^{{}}) -> X^{{}})^{{fresh}}) -> (h1(a: X^{{}}) -> X^{{}})^{{g}})^{{fresh}})
     : (h2(a: X^{{}}) -> X^{{}})^{{fresh}} =>
    let c : mu z. Ref[(h3(a: X^{{}}) -> X^{{}})^{{z}}]^{{fresh}} =
      ref (fun i(a: X^{{}}) : X^{{}} => a) in
    let u = c := (f (fun pr(a: X^{{}}) : X^{{}} => (!c) a)) in
    !c)) in
let fact = (fun gg(g2: (h4(a: Nat^{{}}) -> Nat^{{}})^{{fresh}}) : (h5(a: Nat^{{}}) -> Nat^{{}})^{{g2}} =>
    (fun fr(a: Nat^{{}}) : Nat^{{}} => if iszero a then 1 else a * g2 (pred a))) in
(fix[Nat^{{}}] fact) {n}
"""
    import math
    for n in (0, 1, 3, 5):
        out = eval_fuel(parse_term(src_tpl.format(n=n)), 10000)
        assert out.term == NatLit(math.factorial(n)), (n, term_to_str(out.term))


def test_allocation_with_explicit_counter():
    t = parse_term("ref 1")
    out = step(t, Store((NatLit(0),)), next_loc=5)
    assert out.term == LocTerm(5)
    assert out.store.lookup(5) == NatLit(1)
    assert out.store.lookup(0) == NatLit(0)


def test_eval_generated_programs_never_stick():
    for seed in range(80):
        t = gen_well_typed(seed, size=5)
        out = eval_fuel(t, 200)
        assert out.stuck is None, (seed, out.stuck)


def test_golden_trace_assign_and_mul_order():
    rules = []
    src = "let a = ref 1 in let u = a := 2 * 3 in !a"
    eval_fuel(parse_term(src), 100,
              trace=lambda i, rule, redex, store: rules.append(rule))
    assert rules == ["ref", "beta", "mul", "assign", "beta", "deref"]
