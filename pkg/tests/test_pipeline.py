"""The rewrite engine, phase pipeline and normalization."""

import random

import pytest
from hypothesis import given, settings, strategies as st

from dfsm import alpha_eq, driver, parse, pretty
from dfsm.interp import apply_value, compile_expr, eval_counted, evaluate
from dfsm.kernels import KERNELS
from dfsm.opt import (
    FAMILIES, FixpointExceeded, Phase, Pipeline, RULES, Rewriter, default_pipeline, load_pipeline,
    normalize, root_context,
)
from dfsm.opt.pipeline import DEFAULT_PHASES
from dfsm.syntax import DOUBLE, VECTOR, binders
from dfsm.typecheck import typecheck

from termgen import ENV_TYPES, TermGen, close, random_env

OUTER = ("fun (u: Vector) (M: Matrix) (v: Vector) -> let m = matrixMul (vectorToMatrix u) "
       "(matrixMul M (matrixTranspose (vectorToMatrix v))) in m[0][0]")

# (program, arguments for evaluation)
CORPUS = [
    ("fun (a: Double) -> snd (deriv (cos a) a)", [0.5]),
    ("fun (a: Double) (b: Double) -> snd (deriv (a * b) a)", [2.0, 3.0]),
    ("fun (v1: Vector) (v2: Vector) -> vectorMap (deriv (vectorDot v1 v2) v1) snd",
     [[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]),
    ("fun (M: Matrix) -> matrixMap (deriv (matrixTrace M) M) (fun r -> vectorMap r snd)",
     [[[1.0, 2.0], [3.0, 4.0]]]),
    (f"fun (u: Vector) (M: Matrix) (v: Vector) -> matrixMap (deriv ({OUTER.split('->', 1)[1]}) M) "
     "(fun r -> vectorMap r snd)", [[1.0, 2.0], [[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]], [1.0, 0.5, 0.25]]),
    ("fun (x: Double) (y: Double) -> snd (deriv (x * snd (deriv (x + y) y)) x)", [2.0, 5.0]),
    ("fun (v: Vector) -> vectorNorm (vectorAdd v v)", [[3.0, 4.0]]),
    ("fun (m: Matrix) -> matrixTrace (matrixMul m (matrixTranspose m))", [[[1.0, 2.0], [3.0, 4.0]]]),
    ("fun (v: Vector) (s: Double) -> vectorSum (vectorSMul (vectorEMul v v) s)", [[1.0, -2.0, 0.5], 3.0]),
]
CORPUS += [(f"fun (a: Double) -> a", [1.0])]


def _kernel_corpus():
    out = []
    for k in KERNELS.values():
        out.append((k.program, k.inputs(4, random.Random(0))))
        out.append((driver.dual_derivative(k.program, k.wrt), k.inputs(4, random.Random(0))))
    return out


def corpus():
    return [(driver.load(src), args) for src, args in CORPUS] + _kernel_corpus()


def _strip(e):
    return driver.prepare(e, optimize=False)


# -- worked examples

@pytest.mark.parametrize("src, want", [
    ("fun (a: Double) -> snd (deriv (cos a) a)", "fun (a: Double) -> -sin a"),
    ("fun (a: Double) (b: Double) -> snd (deriv (a * b) a)", "fun (a: Double) (b: Double) -> b"),
    ("fun (v1: Vector) (v2: Vector) -> vectorMap (deriv (vectorDot v1 v2) v1) snd",
     "fun (v1: Vector) (v2: Vector) -> build (length v1) (fun i -> v2[i])"),
    ("fun (M: Matrix) -> matrixMap (deriv (matrixTrace M) M) (fun r -> vectorMap r snd)",
     "fun (M: Matrix) -> build (length M) (fun i -> build (length M[0]) (fun j -> if j == i then 1.0 else 0.0))"),
])
def test_examples_normalize(src, want):
    assert alpha_eq(driver.prepare(driver.load(src)), parse(want))


def test_outer_product_derivative():
    got = driver.derivative_program(driver.load(OUTER), "M")
    want = parse("fun (u: Vector) (M: Matrix) (v: Vector) -> build (length M) "
                 "(fun i -> build (length M[0]) (fun j -> u[i] * v[j]))")
    assert alpha_eq(got, want)


def test_single_access_example():
    e = parse("fun (v: Vector) -> build (length v) (fun i -> "
              "ifold (fun s j -> if i == j then s + v[j] else s) 0.0 (length v))")
    assert alpha_eq(normalize(e), parse("fun (v: Vector) -> build (length v) (fun i -> v[i])"))


def test_normal_form_is_fixed():
    for e, _ in corpus():
        once = normalize(_strip(e))
        assert alpha_eq(normalize(once), once), pretty(once)


def test_user_binder_names_survive():
    out = normalize(parse("fun (v: Vector) -> vectorSum v"))
    assert out.param == "v"


# -- invariants over the corpus

def test_type_and_value_preservation_on_corpus():
    for e, args in corpus():
        raw = _strip(e)
        out = normalize(raw)
        assert typecheck({}, out) == typecheck({}, raw)
        assert close(apply_value(evaluate(out), *args), apply_value(evaluate(raw), *args), 1e-9)


def test_cost_monotonicity_on_corpus():
    for e, args in corpus():
        raw = _strip(e)
        out = normalize(raw)
        costs = []
        for t in (raw, out):
            f, c = eval_counted(t)
            apply_value(f, *args)
            costs.append(c)
        assert costs[1].scalar_ops <= costs[0].scalar_ops, pretty(e)
        assert costs[1].array_allocs <= costs[0].array_allocs, pretty(e)


def test_final_phase_has_no_redex():
    last = Phase(*DEFAULT_PHASES[-1])
    for e, _ in corpus():
        out = normalize(_strip(e))
        rw = Rewriter(last.rules(), 1)
        rw.visit(out, root_context({}))
        assert rw.fired == 0, pretty(out)


def test_binders_are_unique_after_normalize():
    for e, _ in corpus():
        bs = binders(normalize(_strip(e)))
        assert len(bs) == len(set(bs))


def test_normalize_is_deterministic():
    for e, _ in corpus():
        assert normalize(_strip(e)) == normalize(_strip(e))


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2 ** 32))
def test_generated_terms_keep_type_and_value(seed):
    rng = random.Random(seed)
    g = TermGen(rng)
    e = g.gen(g.ty(), 4)
    out = normalize(e, env=dict(ENV_TYPES))
    assert typecheck(dict(ENV_TYPES), out) == typecheck(dict(ENV_TYPES), e)
    env = random_env(rng)
    assert close(evaluate(out, env), evaluate(e, env))


# -- loop fission

def test_fission_splits_independent_state():
    e = parse("ifold (fun a i -> (fst a + v[i], snd a * 2.0)) (0.0, 1.0) n")
    ctx = root_context({"v": VECTOR, "n": ENV_TYPES["n"]})
    out = RULES["fission"](e, ctx)
    assert alpha_eq(out, parse("(ifold (fun a i -> a + v[i]) 0.0 n, ifold (fun a i -> a * 2.0) 1.0 n)"))


def test_fission_rejects_cross_dependence():
    e = parse("ifold (fun a i -> (snd a + 1.0, fst a)) (0.0, 0.0) n")
    assert RULES["fission"](e, root_context({"n": ENV_TYPES["n"]})) is None


def test_fission_then_projection_drops_the_dead_loop():
    e = parse("fun (v: Vector) -> snd (ifold (fun a i -> (fst a + v[i], snd a + 1.0)) (0.0, 0.0) (length v))")
    out = normalize(e)
    assert pretty(out).count("ifold") == 1
    assert apply_value(evaluate(out), [1.0, 2.0]) == 2.0


# -- loop-invariant code motion

def test_licm_hoists_norm_out_of_build():
    e = parse("fun (r: Vector) (v: Vector) -> build (length v) (fun i -> let c = vectorNorm r in c * v[i])")
    out = normalize(e)
    r, v = [3.0, 4.0], [1.0, 2.0, 3.0, 4.0]
    f_raw, c_raw = eval_counted(_strip(e))
    f_opt, c_opt = eval_counted(out)
    assert apply_value(f_opt, r, v) == apply_value(f_raw, r, v) == [5.0, 10.0, 15.0, 20.0]
    # norm costs 2 multiplies, 1 add per element plus the sqrt; done once, then one multiply per element
    assert c_opt.scalar_ops == 2 * 2 + 1 + len(v)
    assert c_raw.scalar_ops > c_opt.scalar_ops


def test_licm_leaves_index_dependent_binding():
    e = parse("build n (fun i -> let c = v[i] * 2.0 in c + 1.0)")
    assert RULES["licm-build"](e, root_context({"v": VECTOR, "n": ENV_TYPES["n"]})) is None


def test_licm_hoists_past_nested_loops():
    e = parse("fun (x: Double) (m: Matrix) -> build (length m) (fun i -> "
              "build (length m[i]) (fun j -> m[i][j] * sin x))")
    out = normalize(e)
    text = pretty(out)
    assert text.index("sin x") < text.index("build")
    f, c = eval_counted(out)
    apply_value(f, 0.3, [[1.0, 2.0], [3.0, 4.0]])
    assert c.scalar_ops == 1 + 4


# -- configuration and bounds

def test_default_pipeline_phases():
    p = default_pipeline()
    assert len(p.phases) == 7 and all(ph.max_passes == 50 for ph in p.phases)
    assert [r for r in RULES.values() if r.family not in FAMILIES] == []
    assert len(default_pipeline(soa=True).phases) == 8


def test_load_pipeline_text(tmp_path):
    text = "# manual schedule\nLambda 10\nFusion,Lambda\n\nRing,constant-fold 5  # trailing\n"
    p = load_pipeline(text)
    assert [(ph.select, ph.max_passes) for ph in p.phases] == [
        (("Lambda",), 10), (("Fusion", "Lambda"), 50), (("Ring", "constant-fold"), 5)]
    path = tmp_path / "sched.txt"
    path.write_text(text)
    assert load_pipeline(str(path)).phases == p.phases


@pytest.mark.parametrize("bad", ["", "Nonsense 5", "Ring -1", "Ring 5 6", "Ring x"])
def test_load_pipeline_rejects(bad):
    with pytest.raises(ValueError):
        load_pipeline(bad)


def test_replayed_schedule_reaches_dot_gradient_form():
    sched = load_pipeline("Lambda\nTuplePE,Ring\nFusion,Lambda\nFission\nTuplePE,ifold-identity,dead-let\n"
                          "Conditional,Iteration\nRing,LICM,let-inline,dead-let\n")
    e = driver.load("fun (v1: Vector) (v2: Vector) -> vectorMap (deriv (vectorDot v1 v2) v1) snd")
    out = driver.prepare(e, pipeline=sched)
    assert alpha_eq(out, parse("fun (v1: Vector) (v2: Vector) -> build (length v1) (fun i -> v2[i])"))


def test_fixpoint_bound_is_enforced():
    with pytest.raises(FixpointExceeded):
        Pipeline([Phase(("Ring",), 1)]).run(parse("x + 0.0"), {"x": DOUBLE})
    with pytest.raises(FixpointExceeded):
        Pipeline([Phase(("Ring",), 50)], max_rounds=1).run(parse("x + 0.0"), {"x": DOUBLE})


def test_trace_records_rule_names():
    trace = []
    normalize(parse("fun (x: Double) -> x * 1.0 + 0.0"), trace=trace)
    assert set(trace) >= {"mul-one", "add-zero"}


def test_compiled_normal_form_matches_interpreter_closure():
    e = normalize(parse("fun (v: Vector) -> vectorSum (vectorMap v (fun a -> a * a))"))
    assert apply_value(compile_expr(e)(), [1.0, 2.0]) == 5.0


# -- let inlining guard

def test_costly_array_reused_across_loop_is_not_fused():
    e = parse("fun (v: Vector) -> let w = build (length v) (fun i -> sin v[i]) in "
              "build (length v) (fun j -> ifold (fun s k -> s + w[k]) 0.0 (length v))")
    assert "let" in pretty(normalize(e))


def test_single_use_array_is_fused():
    e = parse("fun (v: Vector) -> let w = build (length v) (fun i -> sin v[i]) in "
              "ifold (fun s k -> s + w[k]) 0.0 (length v)")
    out = normalize(e)
    assert "build" not in pretty(out)


def test_pair_projections_share_one_element():
    e = parse("fun (v: Vector) -> let w = build (length v) (fun i -> (sin v[i], cos v[i])) in "
              "ifold (fun s k -> s + fst w[k] * snd w[k]) 0.0 (length v)")
    assert "build" not in pretty(normalize(e))
