//! Randomized checks of the library's soundness invariants.

mod common;

use std::collections::BTreeMap;

use common::{gen, read_model, shipped_rhs, simulate_ball, BETA};
use deltabmc::checker::{check_trace, NamedPoint, TraceStep, WitnessTrace};
use deltabmc::enclosure::{enclose_flow, prune_flow, EnclosureOptions, FlowContext, Ode};
use deltabmc::expr::{Constraint, Truth};
use deltabmc::reference::{integrate, Tolerance};
use deltabmc::solver::{certify, prune_box, solve, ConstraintSystem, SolverConfig, SolverResult};
use deltabmc::{parse_model, Formula, HybridAutomaton, Interval, IntervalBox};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn interval() -> impl Strategy<Value = Interval> {
    (-50.0..50.0f64, 0.0..20.0f64).prop_map(|(lo, w)| Interval::new(lo, lo + w))
}

/// A point of `x` chosen by a fraction in [0, 1].
fn at(x: Interval, f: f64) -> f64 {
    (x.lo() + f * x.width()).clamp(x.lo(), x.hi())
}

/// An interval inside `x`, chosen by two fractions.
fn inner(x: Interval, f: f64, g: f64) -> Interval {
    let (a, b) = (at(x, f), at(x, g));
    Interval::new(a.min(b), a.max(b))
}

fn model(name: &str) -> HybridAutomaton {
    parse_model(&read_model(&format!("{name}.drh"))).unwrap()
}

type Binary = (&'static str, fn(Interval, Interval) -> Interval, fn(f64, f64) -> f64);
type Unary = (&'static str, fn(Interval) -> Interval, fn(f64) -> f64);

const BINARY: [Binary; 6] = [
    ("add", Interval::add, |a, b| a + b),
    ("sub", Interval::sub, |a, b| a - b),
    ("mul", Interval::mul, |a, b| a * b),
    ("div", Interval::div, |a, b| a / b),
    ("min", Interval::min, f64::min),
    ("max", Interval::max, f64::max),
];

const UNARY: [Unary; 9] = [
    ("exp", Interval::exp, f64::exp),
    ("ln", Interval::ln, f64::ln),
    ("sqrt", Interval::sqrt, f64::sqrt),
    ("sin", Interval::sin, f64::sin),
    ("cos", Interval::cos, f64::cos),
    ("tan", Interval::tan, f64::tan),
    ("abs", Interval::abs, f64::abs),
    ("sqr", Interval::sqr, |x| x * x),
    ("cube", |x| x.powi(3), |x| x * x * x),
];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn binary_ops_contain_point_results(a in interval(), b in interval(), f in 0.0..=1.0f64, g in 0.0..=1.0f64) {
        let (x, y) = (at(a, f), at(b, g));
        for (name, op, pt) in BINARY {
            let r = pt(x, y);
            if r.is_finite() {
                // the real result lies within an ulp of the rounded one
                let real = Interval::new(r - r.abs() * 1e-15, r + r.abs() * 1e-15);
                prop_assert!(op(a, b).overlaps(real), "{name}({a:?}, {b:?}) misses {r} at ({x}, {y})");
            }
        }
    }

    #[test]
    fn unary_ops_contain_point_results(a in interval(), f in 0.0..=1.0f64) {
        let x = at(a, f);
        for (name, op, pt) in UNARY {
            let r = pt(x);
            if r.is_finite() {
                let real = Interval::new(r - r.abs() * 1e-14, r + r.abs() * 1e-14);
                prop_assert!(op(a).overlaps(real), "{name}({a:?}) misses {r} at {x}");
            }
        }
    }

    #[test]
    fn ops_are_inclusion_isotone(a in interval(), b in interval(), f in (0.0..=1.0f64, 0.0..=1.0f64, 0.0..=1.0f64, 0.0..=1.0f64)) {
        let (a1, b1) = (inner(a, f.0, f.1), inner(b, f.2, f.3));
        for (name, op, _) in BINARY {
            prop_assert!(op(a1, b1).subset(op(a, b)), "{name} not isotone");
        }
        for (name, op, _) in UNARY {
            prop_assert!(op(a1).subset(op(a)), "{name} not isotone");
        }
    }

    #[test]
    fn degenerate_box_evaluation_is_tight(seed in any::<u64>(), x in -3.0..3.0f64, y in -3.0..3.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = gen::term(&mut rng, &["x", "y"], 3);
        let env = |n: &str| match n { "x" => Some(x), "y" => Some(y), _ => None };
        let v = t.eval_f64(&env).unwrap();
        let b = IntervalBox::from_pairs([("x", Interval::point(x)), ("y", Interval::point(y))]);
        let r = t.eval_box(&b).unwrap().range;
        prop_assert!(r.contains(v), "{t}: {r:?} misses {v}");
        prop_assert!(r.width() <= 1e-9 * (1.0 + v.abs()), "{t}: {r:?} too wide");
    }

    #[test]
    fn negate_is_an_involution(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = gen::formula(&mut rng, &["x", "y"], 2);
        prop_assert_eq!(f.negate().negate(), f);
    }

    #[test]
    fn negation_flips_point_truth(seed in any::<u64>(), x in -3.0..3.0f64, y in -3.0..3.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = gen::formula(&mut rng, &["x", "y"], 2);
        let env = |n: &str| match n { "x" => Some(x), "y" => Some(y), _ => None };
        prop_assert_ne!(f.eval_point(&env).unwrap(), f.negate().eval_point(&env).unwrap());
    }

    #[test]
    fn weakening_is_monotone_over_boxes(seed in any::<u64>(), c in (-3.0..3.0f64, -3.0..3.0f64), w in 0.0..0.5f64, d1 in 0.0..1.0f64, dd in 0.0..1.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = gen::formula(&mut rng, &["x", "y"], 2);
        let slot = |n: &str| ["x", "y"].iter().position(|v| *v == n);
        let k = Constraint::compile(&f, &slot).unwrap().unwrap();
        let b = [Interval::new(c.0, c.0 + w), Interval::new(c.1, c.1 + w)];
        // certified truth never gets lost, refutation never appears, as δ grows
        let t1 = k.truth(&b, Interval::point(d1));
        let t2 = k.truth(&b, Interval::point(d1 + dd));
        if t1 == Truth::True { prop_assert_eq!(t2, Truth::True); }
        if t2 == Truth::False { prop_assert_eq!(t1, Truth::False); }
        let env = |n: &str| match n { "x" => Some(b[0].mid()), "y" => Some(b[1].mid()), _ => None };
        if f.eval_point(&env).unwrap() {
            prop_assert!(f.delta_weaken(d1).unwrap().eval_point(&env).unwrap());
        }
    }

    #[test]
    fn contraction_keeps_every_solution(seed in any::<u64>(), c in (-3.0..3.0f64, -3.0..3.0f64), w in 0.0..2.0f64, s in (0.0..=1.0f64, 0.0..=1.0f64)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = gen::formula(&mut rng, &["x", "y"], 2);
        let slot = |n: &str| ["x", "y"].iter().position(|v| *v == n);
        let k = Constraint::compile(&f, &slot).unwrap().unwrap();
        let mut b = [Interval::new(c.0, c.0 + w), Interval::new(c.1, c.1 + w)];
        let p = [at(b[0], s.0), at(b[1], s.1)];
        let env = |n: &str| match n { "x" => Some(p[0]), "y" => Some(p[1]), _ => None };
        // only points satisfying φ with some room are guaranteed solutions
        let robust = f.eval_point(&env).unwrap()
            && k.truth(&[Interval::point(p[0]), Interval::point(p[1])], Interval::ZERO) == Truth::True;
        k.contract(&mut b);
        if robust {
            prop_assert!(b[0].contains(p[0]) && b[1].contains(p[1]), "{f}: {p:?} pruned from {b:?}");
        }
    }
}

const LINEAR_AND_PENDULUM: [(&str, &str); 3] = [
    ("thermostat", "heating"),
    ("thermostat", "cooling"),
    ("pendulum", "swing"),
];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn enclosure_is_monotone_in_the_initial_box(which in 0..3usize, c in (-1.0..1.0f64, -1.0..1.0f64), w in 0.0..0.05f64, grow in 0.0..0.05f64, tau in 0.05..3.0f64) {
        let (name, mode) = LINEAR_AND_PENDULUM[which];
        let h = model(name);
        let ode = Ode::from_mode(&h, h.mode(mode).unwrap()).unwrap();
        let base: Vec<f64> = if h.vars.len() == 1 { vec![20.0 + 5.0 * c.0] } else { vec![c.0, 2.0 * c.1] };
        let small: Vec<Interval> = base.iter().map(|&v| Interval::new(v, v + w)).collect();
        let large: Vec<Interval> = small.iter().map(|v| Interval::new(v.lo() - grow, v.hi() + grow)).collect();
        let opts = EnclosureOptions::default();
        let a = enclose_flow(&ode, &small, Interval::point(tau), &opts).unwrap();
        let b = enclose_flow(&ode, &large, Interval::point(tau), &opts).unwrap();
        // the grid may differ, so compare with a rounding-level allowance
        for (x, y) in a.end.iter().zip(&b.end) {
            prop_assert!(x.subset(y.inflate(1e-9 * (1.0 + y.mag()))), "{name}/{mode}: {x:?} not in {y:?}");
        }
    }

    #[test]
    fn flow_pruning_keeps_reference_solutions(which in 0..3usize, c in (-1.0..1.0f64, -1.0..1.0f64), tau in 0.0..3.0f64, r in (0.0..0.5f64, 0.0..0.5f64, 0.0..0.5f64)) {
        let (name, mode) = LINEAR_AND_PENDULUM[which];
        let h = model(name);
        let m = h.mode(mode).unwrap();
        let ode = Ode::from_mode(&h, m).unwrap();
        let a: Vec<f64> = if h.vars.len() == 1 { vec![20.0 + 5.0 * c.0] } else { vec![c.0, 2.0 * c.1] };
        let b = integrate(shipped_rhs(name, mode), &a, tau, Tolerance::default()).unwrap();
        let x0: Vec<Interval> = a.iter().map(|&v| Interval::new(v - r.0, v + r.1)).collect();
        let xt: Vec<Interval> = b.iter().map(|&v| Interval::new(v - r.1, v + r.0)).collect();
        let t = Interval::new((tau - r.2).max(0.0), tau + r.0);
        let domain = h.domain();
        let ctx = FlowContext { invariant: None, domain: Some(&domain) };
        let opts = EnclosureOptions::default();
        let p = prune_flow(&ode, &ode.reversed(), &x0, &xt, t, &ctx, &opts);
        let near = |i: &Interval, v: f64| i.inflate(1e-8).contains(v);
        prop_assert!(near(&p.duration, tau), "duration {tau} pruned to {:?}", p.duration);
        prop_assert!(p.x0.iter().zip(&a).all(|(i, &v)| near(i, v)), "entry {a:?} pruned to {:?}", p.x0);
        prop_assert!(p.xt.iter().zip(&b).all(|(i, &v)| near(i, v)), "exit {b:?} pruned to {:?}", p.xt);
    }
}

/// A one-step pendulum system with an unsafe-style goal on the exit.
fn pendulum_system(goal: &str) -> ConstraintSystem {
    let h = model("pendulum");
    let ode = Ode::from_mode(&h, &h.modes[0]).unwrap();
    let mut sys = ConstraintSystem::with_variables([
        ("theta.0", h.vars[0].domain),
        ("omega.0", h.vars[1].domain),
        ("theta.0t", h.vars[0].domain),
        ("omega.0t", h.vars[1].domain),
        ("t.0", Interval::new(0.0, 3.0)),
    ])
    .unwrap();
    let rename = |n: &str| match n {
        "theta" | "omega" => Some(format!("{n}.0")),
        _ => None,
    };
    sys.assert(h.modes[0].init.rename(&rename)).unwrap();
    let goal = deltabmc::parse::parse_formula(goal).unwrap();
    sys.assert(goal.rename(&|n: &str| matches!(n, "theta" | "omega").then(|| format!("{n}.0t"))))
        .unwrap();
    sys.add_flow(
        0,
        ode,
        &["theta.0", "omega.0"],
        &["theta.0t", "omega.0t"],
        "t.0",
        Formula::True,
        h.domain(),
    )
    .unwrap();
    sys
}

#[test]
fn pruning_pass_is_a_fixpoint() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let opts = EnclosureOptions::default();
    for goal in ["theta <= 0 and omega <= -2", "omega >= 1", "theta <= -0.5"] {
        let sys = pendulum_system(goal);
        for _ in 0..10 {
            use rand::Rng;
            let mut x: Vec<Interval> = sys
                .domain()
                .iter()
                .map(|d| {
                    let a = rng.gen_range(d.lo()..=d.hi());
                    let b = rng.gen_range(d.lo()..=d.hi());
                    Interval::new(a.min(b), a.max(b))
                })
                .collect();
            if !prune_box(&sys, &mut x, &opts) {
                continue;
            }
            let once = x.clone();
            prune_box(&sys, &mut x, &opts);
            for (a, b) in once.iter().zip(&x) {
                // the 1% shrink stopping rule bounds what a second pass may remove
                assert_fixpoint(*a, *b);
            }
        }
    }
}

fn assert_fixpoint(a: Interval, b: Interval) {
    assert!(b.subset(a), "second pass grew {a:?} to {b:?}");
    if b.is_empty() {
        panic!("second pass emptied {a:?}");
    }
    assert!(
        b.width() >= 0.99 * a.width() - 1e-12,
        "second pass shrank {a:?} to {b:?}"
    );
}

#[test]
fn solver_verdicts_are_delta_monotone() {
    let opts = EnclosureOptions::default();
    let mut certified = 0;
    for goal in [
        "theta <= 0.05 and theta >= -0.05 and omega <= -3",
        "omega >= 0.5 and theta <= -0.5",
    ] {
        let sys = pendulum_system(goal);
        for d1 in [0.001, 0.01] {
            let SolverResult::DeltaTrue(w) = solve(&sys, &SolverConfig::new(d1)).unwrap().result else {
                continue;
            };
            for d2 in [d1 * 2.0, d1 * 10.0, 0.5] {
                assert!(
                    certify(&sys, &w.point, d2, &opts).is_ok(),
                    "{goal}: δ={d1} witness fails at {d2}"
                );
                let again = solve(&sys, &SolverConfig::new(d2)).unwrap().result;
                assert!(
                    matches!(again, SolverResult::DeltaTrue(_)),
                    "{goal}: δ={d2} gave {again:?}"
                );
            }
            certified += 1;
        }
    }
    assert!(certified > 0, "no δ-true instance exercised");
}

/// Ball variant in which every state is unsafe, so a trace passes
/// `check_trace` exactly when it is a trajectory.
fn ball_everything_unsafe() -> HybridAutomaton {
    let h = model("bouncing_ball");
    let regions: BTreeMap<String, Formula> = h.modes.iter().map(|m| (m.name.clone(), Formula::True)).collect();
    h.with_unsafe(&regions)
}

fn named(h: &HybridAutomaton, v: [f64; 2]) -> NamedPoint {
    NamedPoint(h.vars.iter().map(|s| s.name.clone()).zip(v).collect())
}

#[test]
fn simulated_traces_are_trajectories_of_every_weakening() {
    let h = ball_everything_unsafe();
    for x0 in [10.0, 7.5, 3.0] {
        let phases = simulate_ball(BETA, x0, 4);
        for n in 1..=phases.len() {
            let steps = phases[..n]
                .iter()
                .map(|p| TraceStep {
                    mode: if p.mode == common::BallMode::Down {
                        "q_d".into()
                    } else {
                        "q_u".into()
                    },
                    duration: p.duration,
                    entry: named(&h, p.start),
                    exit: named(&h, p.end),
                    grid: Vec::new(),
                })
                .collect();
            let trace = WitnessTrace {
                steps,
                interior_unsafe: false,
            };
            // acceptance is upward closed in δ; tiny δ may be out of reach of
            // the enclosure's precision, so only the implication is required there
            let mut accepted = false;
            for delta in [1e-6, 1e-4, 1e-3, 0.01, 0.1, 1.0] {
                let c = check_trace(&h, &trace, delta, 5.0, &EnclosureOptions::default());
                assert!(
                    !accepted || c.ok,
                    "x0={x0} n={n}: accepted below δ={delta} but not at it: {:?}",
                    c.reasons
                );
                accepted = c.ok;
                let init_ok = (x0 - 10.0).abs() <= delta;
                if !init_ok {
                    assert!(!c.ok, "x0={x0} n={n} δ={delta}: wrong initial state accepted");
                    assert!(c.reasons.iter().any(|r| r.contains("initial")), "{:?}", c.reasons);
                } else if delta >= 0.01 {
                    assert!(c.ok, "x0={x0} n={n} δ={delta}: {:?}", c.reasons);
                }
            }
        }
    }
}

#[test]
fn weakened_bounce_is_a_two_sided_band() {
    let h = model("bouncing_ball");
    let w = h.weaken(0.01).unwrap();
    let bounce = w.jumps.iter().find(|j| w.modes[j.from].name == "q_d").unwrap();
    let rel = bounce.relation();
    let holds = |x: f64, v: f64, x1: f64, v1: f64| {
        rel.eval_point(&|n: &str| match n {
            "x" => Some(x),
            "v" => Some(v),
            "x'" => Some(x1),
            "v'" => Some(v1),
            _ => None,
        })
        .unwrap()
    };
    // |x| <= δ, |v' + 0.9 v| <= δ, |x' - x| <= δ
    assert!(holds(0.0, -5.0, 0.0, 4.5));
    assert!(holds(0.0099, -5.0, 0.0, 4.5));
    assert!(holds(-0.0099, -5.0, 0.0, 4.5));
    assert!(!holds(0.0101, -5.0, 0.0, 4.5));
    assert!(holds(0.0, -5.0, 0.0, 4.5099));
    assert!(!holds(0.0, -5.0, 0.0, 4.5101));
    assert!(holds(0.0, -5.0, 0.0, 4.4901));
    assert!(!holds(0.0, -5.0, 0.0, 4.4899));
    assert!(holds(0.005, -5.0, -0.0049, 4.5));
    assert!(!holds(0.005, -5.0, 0.0151, 4.5));
}

#[test]
fn path_counts_are_bounded_and_admissible() {
    for name in ["bouncing_ball", "thermostat", "pendulum", "tank"] {
        let h = model(name);
        let out_degree = (0..h.modes.len())
            .map(|q| h.jumps.iter().filter(|j| j.from == q).count())
            .max()
            .unwrap_or(0);
        for k in 0..5 {
            let paths = h.enumerate_paths(k);
            assert!(paths.len() <= h.modes.len() * out_degree.pow(k as u32).max(if k == 0 { 1 } else { 0 }));
            assert!(paths.iter().all(|p| p.depth() == k && p.is_admissible(&h)));
        }
    }
}
