//! Unrolling of bounded reachability along one mode path.
//!
//! Step `i` owns an entry state `x.i`, an exit state `x.it` and a
//! duration `t.i ∈ [0, M]`. State copies always carry a dot, which user
//! identifiers cannot, so they never clash with anything; the duration
//! prefix is `t` unless a state variable already has that name.

use serde::Serialize;
use thiserror::Error;

use crate::automaton::{HybridAutomaton, ModePath};
use crate::enclosure::Ode;
use crate::formula::{Formula, FormulaError};
use crate::interval::Interval;
use crate::solver::{ConstraintSystem, SystemError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EncodeError {
    #[error("mode path is not admissible")]
    Inadmissible,
    #[error("duration bound must be positive and finite, got {0}")]
    DurationBound(f64),
    #[error("mode `{0}` has no flow for every state variable")]
    MissingFlow(String),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Formula(#[from] FormulaError),
}

/// Names of the solver variables of one unrolled step.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StepVars {
    pub mode: String,
    pub entry: Vec<String>,
    pub exit: Vec<String>,
    pub duration: String,
}

#[derive(Clone, Debug)]
pub struct UnrolledProblem {
    pub path: ModePath,
    pub modes: Vec<String>,
    pub steps: Vec<StepVars>,
    pub system: ConstraintSystem,
    /// The unsafe formula is checked on every cell of the last flow.
    pub interior_unsafe: bool,
}

impl UnrolledProblem {
    pub fn depth(&self) -> usize {
        self.path.depth()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EncodeOptions {
    pub interior_unsafe: bool,
}

pub fn duration_prefix(h: &HybridAutomaton) -> String {
    ["t", "dur", "time", "tau"]
        .iter()
        .map(|s| s.to_string())
        .chain((0..).map(|i| format!("t{i}")))
        .find(|p| h.vars.iter().all(|v| &v.name != p))
        .expect("unbounded candidate list")
}

fn renamer<'a>(h: &'a HybridAutomaton, pre: &'a str, post: Option<&'a str>) -> impl Fn(&str) -> Option<String> + 'a {
    move |n: &str| {
        if let Some(base) = n.strip_suffix('\'') {
            if let Some(post) = post {
                if h.vars.iter().any(|v| v.name == base) {
                    return Some(format!("{base}.{post}"));
                }
            }
            return None;
        }
        h.vars.iter().any(|v| v.name == n).then(|| format!("{n}.{pre}"))
    }
}

/// Encode one path of depth `k` with per-step duration bound `m`.
/// `unsafe_region` constrains the final exit state; `None` yields a
/// trivially false system.
pub fn encode(
    h: &HybridAutomaton,
    path: &ModePath,
    m: f64,
    unsafe_region: Option<&Formula>,
    opts: EncodeOptions,
) -> Result<UnrolledProblem, EncodeError> {
    if !path.is_admissible(h) {
        return Err(EncodeError::Inadmissible);
    }
    if !(m > 0.0 && m.is_finite()) {
        return Err(EncodeError::DurationBound(m));
    }
    let n = h.vars.len();
    let prefix = duration_prefix(h);
    let mut sys = ConstraintSystem::new();
    let mut steps = Vec::with_capacity(path.modes.len());
    for (i, &q) in path.modes.iter().enumerate() {
        let mode = &h.modes[q];
        let entry: Vec<String> = h.vars.iter().map(|v| format!("{}.{i}", v.name)).collect();
        let exit: Vec<String> = h.vars.iter().map(|v| format!("{}.{i}t", v.name)).collect();
        for (name, v) in entry.iter().zip(&h.vars) {
            sys.add_variable(name.clone(), v.domain)?;
        }
        for (name, v) in exit.iter().zip(&h.vars) {
            sys.add_variable(name.clone(), v.domain)?;
        }
        let duration = format!("{prefix}.{i}");
        sys.add_variable(duration.clone(), Interval::new(0.0, m))?;
        steps.push(StepVars {
            mode: mode.name.clone(),
            entry,
            exit,
            duration,
        });
    }
    let first = &h.modes[path.modes[0]];
    sys.assert(first.init.rename(&renamer(h, "0", None)))?;
    for (i, &q) in path.modes.iter().enumerate() {
        let mode = &h.modes[q];
        if mode.flow.len() != n {
            return Err(EncodeError::MissingFlow(mode.name.clone()));
        }
        let ode = Ode::from_mode(h, mode)?;
        let s = &steps[i];
        let entry: Vec<&str> = s.entry.iter().map(String::as_str).collect();
        let exit: Vec<&str> = s.exit.iter().map(String::as_str).collect();
        sys.add_flow(i, ode, &entry, &exit, &s.duration, mode.invariant.clone(), h.domain())?;
    }
    for (i, &j) in path.jumps.iter().enumerate() {
        let jump = &h.jumps[j];
        let pre = format!("{i}t");
        let post = format!("{}", i + 1);
        sys.assert(jump.relation().rename(&renamer(h, &pre, Some(&post))))?;
    }
    let k = path.depth();
    let unsafe_f = unsafe_region.cloned().unwrap_or(Formula::False);
    if opts.interior_unsafe && unsafe_f != Formula::False {
        sys.set_interior_goal(k, unsafe_f)?;
    } else {
        sys.assert(unsafe_f.rename(&renamer(h, &format!("{k}t"), None)))?;
    }
    Ok(UnrolledProblem {
        path: path.clone(),
        modes: path.names(h),
        steps,
        system: sys,
        interior_unsafe: opts.interior_unsafe,
    })
}

/// Encode every path of depth `0..=k`, by increasing depth then path
/// order. The unsafe region of each path is that of its final mode.
pub fn encode_all(
    h: &HybridAutomaton,
    k: usize,
    m: f64,
    opts: EncodeOptions,
) -> Result<Vec<UnrolledProblem>, EncodeError> {
    let mut out = Vec::new();
    for depth in 0..=k {
        out.extend(encode_depth(h, depth, m, opts)?);
    }
    Ok(out)
}

pub fn encode_depth(
    h: &HybridAutomaton,
    depth: usize,
    m: f64,
    opts: EncodeOptions,
) -> Result<Vec<UnrolledProblem>, EncodeError> {
    h.enumerate_paths(depth)
        .iter()
        .map(|p| {
            let last = &h.modes[*p.modes.last().expect("non-empty path")];
            encode(h, p, m, last.unsafe_region.as_ref(), opts)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automaton::parse_model;
    use crate::parse::parse_formula;

    /// Parse with `x_0t`-style names standing for `x.0t`.
    fn dotted(s: &str) -> Formula {
        parse_formula(s)
            .unwrap()
            .rename(&|n: &str| n.contains('_').then(|| n.replacen('_', ".", 1)))
    }

    const BALL: &str = "
        const g = 9.8; const alpha = 0.9;
        vars { x in [0, 15]; v in [-20, 20]; }
        mode q_u { flow { d/dt[x] = v; d/dt[v] = -g; } inv: x >= 0 and v >= 0; }
        mode q_d { flow { d/dt[x] = v; d/dt[v] = -g; } inv: x >= 0 and v <= 0; }
        jump q_u -> q_d { guard: v = 0; reset: v' = v and x' = x; }
        jump q_d -> q_u { guard: x = 0; reset: v' = -alpha * v and x' = x; }
        init q_d: x = 10 and v = 0;
        unsafe q_d: x <= 1;
    ";

    #[test]
    fn single_step_layout() {
        let h = parse_model(BALL).unwrap();
        let p = &h.enumerate_paths(0)[0];
        let u = encode(&h, p, 5.0, h.modes[1].unsafe_region.as_ref(), EncodeOptions::default()).unwrap();
        assert_eq!(u.system.names(), ["x.0", "v.0", "x.0t", "v.0t", "t.0"]);
        assert_eq!(u.system.flows().len(), 1);
        assert_eq!(u.system.formulas()[0], dotted("x_0 = 10 and v_0 = 0"));
        assert_eq!(u.system.formulas()[1], dotted("x_0t <= 1"));
        assert_eq!(u.system.domain()[4], Interval::new(0.0, 5.0));
    }

    #[test]
    fn jump_is_renamed_across_steps() {
        let h = parse_model(BALL).unwrap();
        let p = &h.enumerate_paths(1)[0];
        assert_eq!(p.names(&h), ["q_d", "q_u"]);
        let u = encode(&h, p, 5.0, None, EncodeOptions::default()).unwrap();
        let expected = dotted("x_0t = 0 and v_1 = -0.9 * v_0t and x_1 = x_0t");
        assert_eq!(u.system.formulas()[1].to_string(), expected.to_string());
    }

    #[test]
    fn variable_counts() {
        let h = parse_model(BALL).unwrap();
        for k in 0..4 {
            let all = encode_all(&h, k, 5.0, EncodeOptions::default()).unwrap();
            assert_eq!(all.len(), k + 1);
            for u in &all {
                let d = u.depth();
                assert_eq!(u.system.len(), (2 * d + 2) * 2 + (d + 1));
            }
        }
        let all = encode_all(&h, 2, 5.0, EncodeOptions::default()).unwrap();
        assert_eq!(all[2].system.len(), 15);
        assert_eq!(all[2].modes, ["q_d", "q_u", "q_d"]);
    }

    #[test]
    fn duration_prefix_avoids_state_names() {
        let h =
            parse_model("vars { t in [0, 1]; } mode a { flow { d/dt[t] = 1; } inv: true; } init a: t = 0;").unwrap();
        assert_eq!(duration_prefix(&h), "dur");
        let u = encode_all(&h, 0, 1.0, EncodeOptions::default()).unwrap();
        assert_eq!(u[0].system.names(), ["t.0", "t.0t", "dur.0"]);
    }

    #[test]
    fn rejects_bad_inputs() {
        let h = parse_model(BALL).unwrap();
        let bad = ModePath {
            modes: vec![1, 1],
            jumps: vec![0],
        };
        assert_eq!(
            encode(&h, &bad, 5.0, None, EncodeOptions::default()).unwrap_err(),
            EncodeError::Inadmissible
        );
        let p = &h.enumerate_paths(0)[0];
        assert!(encode(&h, p, 0.0, None, EncodeOptions::default()).is_err());
    }

    #[test]
    fn encoding_is_deterministic() {
        let h = parse_model(BALL).unwrap();
        let a = encode_all(&h, 2, 5.0, EncodeOptions::default()).unwrap();
        let b = encode_all(&h, 2, 5.0, EncodeOptions::default()).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.system.names(), y.system.names());
            assert_eq!(x.system.formulas(), y.system.formulas());
        }
    }
}
