//! δ-decisions for bounded sentences.
//!
//! Existential quantifiers anywhere under conjunctions and disjunctions
//! are renamed apart and lifted into solver variables. A leading block
//! of universal quantifiers over a quantifier-free matrix is decided by
//! paving the quantified box. Other alternations are rejected.

use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::expr::{Constraint, Truth};
use crate::formula::{Comparison, Formula, Quantified, Term};
use crate::interval::{Interval, IntervalBox};
use crate::solver::{
    branch, delta_enclosure, solve, ConfigError, ConstraintSystem, SolverConfig, SolverResult, SystemError,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SentenceError {
    #[error("sentence has free variables: {0:?}")]
    FreeVariables(Vec<String>),
    #[error("quantifier bounds of `{0}` are unbounded")]
    UnboundedQuantifier(String),
    #[error("unsupported quantifier alternation")]
    Unsupported,
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum SentenceResult {
    /// The sentence is false.
    False,
    /// The δ-weakened sentence is true; existential witnesses if any.
    DeltaTrue(Vec<(String, f64)>),
    Inconclusive,
}

fn bound_domain(q: &Quantified, scope: &[(String, Interval)]) -> Result<Interval, SentenceError> {
    let b = IntervalBox::from_pairs(scope.iter().cloned());
    let lo = q.lo.eval_box(&b).map_err(SystemError::from)?.range;
    let hi = q.hi.eval_box(&b).map_err(SystemError::from)?.range;
    let d = Interval::new(lo.lo(), hi.hi());
    if !d.is_empty() && !d.is_bounded() {
        return Err(SentenceError::UnboundedQuantifier(q.var.clone()));
    }
    Ok(d)
}

fn bounds_formula(var: &str, q: &Quantified) -> Formula {
    Formula::and([
        Formula::compare(Term::var(var), Comparison::Ge, q.lo.clone()),
        Formula::compare(Term::var(var), Comparison::Le, q.hi.clone()),
    ])
}

fn lift(f: &Formula, vars: &mut Vec<(String, Interval)>) -> Result<Formula, SentenceError> {
    Ok(match f {
        Formula::Exists(q) => {
            let fresh = format!("{}.{}", q.var, vars.len());
            let dom = bound_domain(q, vars)?;
            if dom.is_empty() {
                return Ok(Formula::False);
            }
            vars.push((fresh.clone(), dom));
            let body = q.body.rename(&|n: &str| (n == q.var).then(|| fresh.clone()));
            let inner = lift(&body, vars)?;
            Formula::and([bounds_formula(&fresh, q), inner])
        }
        Formula::Forall(_) => return Err(SentenceError::Unsupported),
        Formula::And(fs) => Formula::and(fs.iter().map(|g| lift(g, vars)).collect::<Result<Vec<_>, _>>()?),
        Formula::Or(fs) => Formula::or(fs.iter().map(|g| lift(g, vars)).collect::<Result<Vec<_>, _>>()?),
        other => other.clone(),
    })
}

/// Decide a bounded sentence: `False` means it is false, `DeltaTrue`
/// means its δ-weakening is true.
pub fn decide_sentence(f: &Formula, cfg: &SolverConfig) -> Result<SentenceResult, SentenceError> {
    cfg.validate()?;
    let free: Vec<String> = f.free_vars().into_iter().collect();
    if !free.is_empty() {
        return Err(SentenceError::FreeVariables(free));
    }
    if let Formula::Forall(_) = f {
        return decide_universal(f, cfg);
    }
    let mut vars = Vec::new();
    let matrix = lift(f, &mut vars)?;
    let mut sys = ConstraintSystem::with_variables(vars)?;
    sys.assert(matrix)?;
    Ok(match solve(&sys, cfg)?.result {
        SolverResult::False => SentenceResult::False,
        SolverResult::DeltaTrue(w) => SentenceResult::DeltaTrue(w.names.into_iter().zip(w.point).collect()),
        SolverResult::ResourceExhausted(_) => SentenceResult::Inconclusive,
    })
}

fn decide_universal(f: &Formula, cfg: &SolverConfig) -> Result<SentenceResult, SentenceError> {
    let mut vars: Vec<(String, Interval)> = Vec::new();
    let mut guards = Vec::new();
    let mut cur = f.clone();
    while let Formula::Forall(q) = cur {
        let fresh = format!("{}.{}", q.var, vars.len());
        let dom = bound_domain(&q, &vars)?;
        if dom.is_empty() {
            // empty range: vacuously true
            return Ok(SentenceResult::DeltaTrue(Vec::new()));
        }
        vars.push((fresh.clone(), dom));
        guards.push(bounds_formula(&fresh, &q));
        cur = q.body.rename(&|n: &str| (n == q.var).then(|| fresh.clone()));
    }
    if !cur.is_quantifier_free() {
        return Err(SentenceError::Unsupported);
    }
    let names: Vec<String> = vars.iter().map(|(n, _)| n.clone()).collect();
    let slot = |n: &str| names.iter().position(|v| v == n);
    let compile = |g: &Formula| -> Result<Constraint, SentenceError> {
        Constraint::compile(g, &slot)
            .map_err(SystemError::from)?
            .ok_or(SentenceError::Unsupported)
    };
    let in_range = compile(&Formula::and(guards))?;
    let body = compile(&cur)?;
    let weaken = delta_enclosure(cfg.delta);
    let domain: Vec<Interval> = vars.iter().map(|(_, d)| *d).collect();
    let deadline = cfg.time_budget.map(|d| Instant::now() + d);
    let mut stack = vec![domain.clone()];
    let mut nodes = 0u64;
    let mut eps = cfg.epsilon;
    let mut leftovers = Vec::new();
    for round in 0..2 {
        while let Some(x) = stack.pop() {
            nodes += 1;
            if nodes > cfg.node_budget || deadline.is_some_and(|d| Instant::now() >= d) {
                return Ok(SentenceResult::Inconclusive);
            }
            // points outside the bounds are vacuous; inside, the weakened body must hold
            if in_range.truth(&x, Interval::ZERO) == Truth::False || body.truth(&x, weaken) == Truth::True {
                continue;
            }
            let mid: Vec<Interval> = x.iter().map(|v| Interval::point(v.mid())).collect();
            if in_range.truth(&mid, Interval::ZERO) == Truth::True && body.truth(&mid, Interval::ZERO) == Truth::False {
                return Ok(SentenceResult::False);
            }
            match branch(&x, &domain, eps) {
                Some((a, b)) => {
                    stack.push(b);
                    stack.push(a);
                }
                None => leftovers.push(x),
            }
        }
        if leftovers.is_empty() || round == 1 {
            break;
        }
        eps /= 4.0;
        stack = std::mem::take(&mut leftovers);
        stack.reverse();
    }
    Ok(if leftovers.is_empty() {
        SentenceResult::DeltaTrue(Vec::new())
    } else {
        SentenceResult::Inconclusive
    })
}
