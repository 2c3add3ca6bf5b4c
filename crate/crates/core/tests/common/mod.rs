//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use deltabmc::reference::{integrate, Tolerance};

pub const G: f64 = 9.8;
pub const ALPHA: f64 = 0.9;
pub const BETA: f64 = 0.1;

pub fn models_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../models")
}

pub fn read_model(name: &str) -> String {
    std::fs::read_to_string(models_dir().join(name)).expect("shipped model")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BallMode {
    Down,
    Up,
}

/// Ball dynamics written out by hand, v positive upward.
pub fn ball_rhs(mode: BallMode, beta: f64) -> impl Fn(&[f64], &mut [f64]) {
    move |s: &[f64], d: &mut [f64]| {
        d[0] = s[1];
        d[1] = match mode {
            BallMode::Down => -G * (1.0 - beta * s[1] * s[1]),
            BallMode::Up => -G * (1.0 + beta * s[1] * s[1]),
        };
    }
}

#[derive(Clone, Debug)]
pub struct Phase {
    pub mode: BallMode,
    pub start: [f64; 2],
    pub duration: f64,
    pub end: [f64; 2],
    pub min_x: f64,
    pub max_x: f64,
}

fn tol() -> Tolerance {
    Tolerance { rel: 1e-12, abs: 1e-12 }
}

pub fn flow(mode: BallMode, beta: f64, s: [f64; 2], t: f64) -> [f64; 2] {
    let r = integrate(ball_rhs(mode, beta), &s, t, tol()).expect("reference integration");
    [r[0], r[1]]
}

/// Simulate `phases` continuous phases of the ball from rest at `x0`,
/// locating each switching event by bisection on the reference flow.
pub fn simulate_ball(beta: f64, x0: f64, phases: usize) -> Vec<Phase> {
    let mut out = Vec::new();
    let mut mode = BallMode::Down;
    let mut s = [x0, 0.0];
    let dt = 1e-3;
    for _ in 0..phases {
        let event = |p: [f64; 2]| match mode {
            BallMode::Down => p[0],
            BallMode::Up => p[1],
        };
        let (mut lo, mut t) = (0.0, 0.0);
        let mut min_x = s[0];
        let mut max_x = s[0];
        loop {
            let p = flow(mode, beta, s, t + dt);
            if event(p) <= 0.0 {
                let mut hi = t + dt;
                lo = t.max(lo);
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    if event(flow(mode, beta, s, mid)) <= 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                break;
            }
            t += dt;
            min_x = min_x.min(p[0]);
            max_x = max_x.max(p[0]);
            assert!(t < 60.0, "no event");
        }
        let end = flow(mode, beta, s, lo);
        min_x = min_x.min(end[0]);
        max_x = max_x.max(end[0]);
        out.push(Phase {
            mode,
            start: s,
            duration: lo,
            end,
            min_x,
            max_x,
        });
        s = match mode {
            BallMode::Down => [0.0, -ALPHA * end[1]],
            BallMode::Up => [end[0], 0.0],
        };
        mode = match mode {
            BallMode::Down => BallMode::Up,
            BallMode::Up => BallMode::Down,
        };
    }
    out
}

/// Hand-written right-hand sides of every mode of the shipped models,
/// kept apart from the model parser and the expression tapes.
pub type Rhs = Box<dyn Fn(&[f64], &mut [f64])>;

pub fn shipped_rhs(model: &str, mode: &str) -> Rhs {
    match (model, mode) {
        ("bouncing_ball", "q_d") => Box::new(ball_rhs(BallMode::Down, BETA)),
        ("bouncing_ball", "q_u") => Box::new(ball_rhs(BallMode::Up, BETA)),
        ("thermostat", "heating") => Box::new(|s: &[f64], d: &mut [f64]| d[0] = 0.2 * (32.0 - s[0])),
        ("thermostat", "cooling") => Box::new(|s: &[f64], d: &mut [f64]| d[0] = -0.1 * (s[0] - 5.0)),
        ("pendulum", "swing") => Box::new(|s: &[f64], d: &mut [f64]| {
            d[0] = s[1];
            d[1] = -9.8 * s[0].sin() - 0.2 * s[1];
        }),
        ("tank", "drain") => Box::new(|s: &[f64], d: &mut [f64]| d[0] = -0.6 * s[0].sqrt()),
        ("tank", "fill") => Box::new(|s: &[f64], d: &mut [f64]| d[0] = 1.5 - 0.6 * s[0].sqrt() + 0.1 * (-s[0]).exp()),
        _ => panic!("no reference dynamics for {model}/{mode}"),
    }
}

pub const SHIPPED: [&str; 4] = ["bouncing_ball", "thermostat", "pendulum", "tank"];

pub mod gen {
    use deltabmc::formula::{BinOp, Comparison, Func, Term};
    use deltabmc::Formula;
    use rand::Rng;

    /// Random term over `vars` whose functions are defined everywhere.
    pub fn term<R: Rng>(rng: &mut R, vars: &[&str], depth: u32) -> Term {
        if depth == 0 || rng.gen_bool(0.25) {
            return if rng.gen_bool(0.6) {
                Term::var(vars[rng.gen_range(0..vars.len())])
            } else {
                Term::constant((rng.gen_range(-40..=40) as f64) / 8.0)
            };
        }
        let sub = |rng: &mut R| term(rng, vars, depth - 1);
        match rng.gen_range(0..12) {
            0 => Term::binary(BinOp::Add, sub(rng), sub(rng)),
            1 => Term::binary(BinOp::Sub, sub(rng), sub(rng)),
            2 | 3 => Term::binary(BinOp::Mul, sub(rng), sub(rng)),
            4 => {
                // a / (1 + b^2)
                let den = Term::binary(BinOp::Add, Term::constant(1.0), Term::Pow(Box::new(sub(rng)), 2));
                Term::binary(BinOp::Div, sub(rng), den)
            }
            5 => Term::Pow(Box::new(sub(rng)), rng.gen_range(2..=3)),
            6 => Term::Call(Func::Sin, Box::new(sub(rng))),
            7 => Term::Call(Func::Cos, Box::new(sub(rng))),
            8 => Term::Call(Func::Exp, Box::new(Term::Call(Func::Sin, Box::new(sub(rng))))),
            9 => {
                let arg = Term::binary(BinOp::Add, Term::constant(1.0), Term::Pow(Box::new(sub(rng)), 2));
                let f = if rng.gen_bool(0.5) { Func::Log } else { Func::Sqrt };
                Term::Call(f, Box::new(arg))
            }
            10 => Term::Call(Func::Abs, Box::new(sub(rng))),
            _ => {
                let op = if rng.gen_bool(0.5) { BinOp::Min } else { BinOp::Max };
                Term::binary(op, sub(rng), sub(rng))
            }
        }
    }

    pub fn comparison<R: Rng>(rng: &mut R) -> Comparison {
        [
            Comparison::Lt,
            Comparison::Le,
            Comparison::Gt,
            Comparison::Ge,
            Comparison::Eq,
        ][rng.gen_range(0..5)]
    }

    /// Random quantifier-free formula with and/or nesting.
    pub fn formula<R: Rng>(rng: &mut R, vars: &[&str], depth: u32) -> Formula {
        if depth == 0 || rng.gen_bool(0.4) {
            let op = comparison(rng);
            return Formula::compare(term(rng, vars, 3), op, term(rng, vars, 2));
        }
        let n = rng.gen_range(2..=3);
        let parts: Vec<Formula> = (0..n).map(|_| formula(rng, vars, depth - 1)).collect();
        if rng.gen_bool(0.5) {
            Formula::and(parts)
        } else {
            Formula::or(parts)
        }
    }
}
