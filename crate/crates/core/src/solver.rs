//! Branch-and-prune δ-decision procedure for conjunctive constraint
//! systems with ODE flow constraints.
//!
//! A `False` answer is only given when every box of a complete
//! bisection tree was emptied by solution-preserving contractors. A
//! `DeltaTrue` answer always carries a witness point that passed
//! [`certify`], which re-evaluates every constraint from scratch.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::enclosure::{
    check_invariant_along, enclose_flow, prune_flow, EnclosureOptions, FlowContext, InvariantCheck, Ode,
};
use crate::expr::{Constraint, Truth};
use crate::formula::{Formula, FormulaError};
use crate::interval::{max_width, Interval};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SystemError {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("duplicate variable `{0}`")]
    DuplicateVariable(String),
    #[error("quantified formulas cannot be asserted in a constraint system")]
    Quantified,
    #[error("flow for `{0}` has inconsistent dimensions")]
    FlowShape(String),
    #[error(transparent)]
    Formula(#[from] FormulaError),
}

/// One flow constraint `x_t = φ_mode(x_0, t)` together with the mode
/// invariant that must hold along the whole flow.
#[derive(Clone, Debug)]
pub struct FlowRecord {
    pub step: usize,
    pub ode: Ode,
    reversed: Ode,
    pub entry: Vec<usize>,
    pub exit: Vec<usize>,
    pub duration: usize,
    pub invariant: Formula,
    inv: Option<Constraint>,
    /// Global state domain the trajectory never leaves.
    pub state_domain: Vec<Interval>,
}

impl FlowRecord {
    pub fn invariant_constraint(&self) -> Option<&Constraint> {
        self.inv.as_ref()
    }

    fn context(&self) -> FlowContext<'_> {
        FlowContext {
            invariant: self.inv.as_ref(),
            domain: Some(&self.state_domain),
        }
    }
}

/// Unsafe region checked on every cell of one flow instead of only at
/// its exit point.
#[derive(Clone, Debug)]
pub struct InteriorGoal {
    pub flow: usize,
    pub formula: Formula,
    constraint: Constraint,
}

/// A conjunction of quantifier-free formulas, flow constraints and
/// invariant records over bounded real variables.
#[derive(Clone, Debug, Default)]
pub struct ConstraintSystem {
    names: Vec<String>,
    domain: Vec<Interval>,
    formulas: Vec<Formula>,
    algebraic: Vec<Constraint>,
    flows: Vec<FlowRecord>,
    interior: Option<InteriorGoal>,
}

impl ConstraintSystem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_variables<S: Into<String>>(vars: impl IntoIterator<Item = (S, Interval)>) -> Result<Self, SystemError> {
        let mut s = Self::new();
        for (n, d) in vars {
            s.add_variable(n, d)?;
        }
        Ok(s)
    }

    pub fn add_variable(&mut self, name: impl Into<String>, domain: Interval) -> Result<usize, SystemError> {
        let name = name.into();
        if self.index_of(&name).is_some() {
            return Err(SystemError::DuplicateVariable(name));
        }
        self.names.push(name);
        self.domain.push(domain);
        Ok(self.names.len() - 1)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn domain(&self) -> &[Interval] {
        &self.domain
    }

    pub fn formulas(&self) -> &[Formula] {
        &self.formulas
    }

    pub fn flows(&self) -> &[FlowRecord] {
        &self.flows
    }

    pub fn interior_goal(&self) -> Option<&InteriorGoal> {
        self.interior.as_ref()
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    fn compile(&self, f: &Formula) -> Result<Constraint, SystemError> {
        let slot = |n: &str| self.index_of(n);
        for v in f.free_vars() {
            if slot(&v).is_none() {
                return Err(SystemError::UnknownVariable(v));
            }
        }
        Constraint::compile(f, &slot)?.ok_or(SystemError::Quantified)
    }

    /// Conjoin a quantifier-free formula over the system variables.
    pub fn assert(&mut self, f: Formula) -> Result<(), SystemError> {
        let c = self.compile(&f)?;
        self.formulas.push(f);
        self.algebraic.push(c);
        Ok(())
    }

    /// Add a flow constraint. `invariant` ranges over the ODE's state
    /// names; `entry`, `exit` and `duration` name system variables.
    #[allow(clippy::too_many_arguments)]
    pub fn add_flow(
        &mut self,
        step: usize,
        ode: Ode,
        entry: &[&str],
        exit: &[&str],
        duration: &str,
        invariant: Formula,
        state_domain: Vec<Interval>,
    ) -> Result<(), SystemError> {
        let n = ode.dim();
        if entry.len() != n || exit.len() != n || state_domain.len() != n {
            return Err(SystemError::FlowShape(ode.mode.clone()));
        }
        let look = |s: &str| {
            self.index_of(s)
                .ok_or_else(|| SystemError::UnknownVariable(s.to_string()))
        };
        let entry = entry.iter().map(|s| look(s)).collect::<Result<Vec<_>, _>>()?;
        let exit = exit.iter().map(|s| look(s)).collect::<Result<Vec<_>, _>>()?;
        let duration = look(duration)?;
        let inv = compile_state(&ode, &invariant)?;
        self.flows.push(FlowRecord {
            step,
            reversed: ode.reversed(),
            ode,
            entry,
            exit,
            duration,
            invariant,
            inv,
            state_domain,
        });
        Ok(())
    }

    /// Require `goal` (over state names) somewhere along flow `flow`.
    pub fn set_interior_goal(&mut self, flow: usize, goal: Formula) -> Result<(), SystemError> {
        let rec = self.flows.get(flow).ok_or(SystemError::FlowShape(format!("#{flow}")))?;
        let constraint = compile_state(&rec.ode, &goal)?.unwrap_or(Constraint::True);
        self.interior = Some(InteriorGoal {
            flow,
            formula: goal,
            constraint,
        });
        Ok(())
    }
}

fn compile_state(ode: &Ode, f: &Formula) -> Result<Option<Constraint>, SystemError> {
    if *f == Formula::True {
        return Ok(None);
    }
    let slot = |n: &str| ode.vars.iter().position(|v| v == n);
    for v in f.free_vars() {
        if slot(&v).is_none() {
            return Err(SystemError::UnknownVariable(v));
        }
    }
    Ok(Some(Constraint::compile(f, &slot)?.ok_or(SystemError::Quantified)?))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolverConfig {
    pub delta: f64,
    pub epsilon: f64,
    pub node_budget: u64,
    #[serde(skip)]
    pub time_budget: Option<Duration>,
    pub workers: usize,
    pub seed: u64,
    /// Random certificate candidates tried after the midpoint.
    pub random_candidates: usize,
    pub enclosure: EnclosureOptions,
}

impl SolverConfig {
    pub fn new(delta: f64) -> Self {
        SolverConfig {
            delta,
            epsilon: delta / 4.0,
            node_budget: 1_000_000,
            time_budget: Some(Duration::from_secs(300)),
            workers: 1,
            seed: 0,
            random_candidates: 8,
            enclosure: EnclosureOptions::default(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("delta must be positive and finite, got {0}")]
    Delta(f64),
    #[error("epsilon must satisfy 0 < epsilon <= delta, got {0}")]
    Epsilon(f64),
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(ConfigError::Delta(self.delta));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= self.delta) {
            return Err(ConfigError::Epsilon(self.epsilon));
        }
        Ok(())
    }
}

/// A certified point together with the evidence gathered for it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Witness {
    pub names: Vec<String>,
    pub point: Vec<f64>,
    /// Certified lower bound of `t + δ` for each asserted formula.
    pub margins: Vec<f64>,
    /// Largest distance between the flow enclosure endpoint and the
    /// exit point, per flow.
    pub flow_slack: Vec<f64>,
    /// Cell of the final flow in which the interior goal was certified.
    pub interior_time: Option<Interval>,
}

impl Witness {
    pub fn value(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.point[i])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum CertificateError {
    Dimension,
    OutOfDomain(String),
    Constraint(usize),
    FlowBlowUp(usize),
    FlowMismatch { flow: usize, slack: f64 },
    InvariantViolated(usize),
    InteriorGoal,
}

/// Weakening amount used for atoms: an enclosure of δ.
pub fn delta_enclosure(delta: f64) -> Interval {
    Interval::enclosing_decimal(delta)
}

/// Check that `point` certifies the δ-weakening of `sys`, using only
/// the system and fresh interval evaluations.
pub fn certify(
    sys: &ConstraintSystem,
    point: &[f64],
    delta: f64,
    opts: &EnclosureOptions,
) -> Result<Witness, CertificateError> {
    if point.len() != sys.len() {
        return Err(CertificateError::Dimension);
    }
    let weaken = delta_enclosure(delta);
    let x: Vec<Interval> = point.iter().map(|&v| Interval::point(v)).collect();
    for (i, (v, d)) in point.iter().zip(&sys.domain).enumerate() {
        if !d.contains(*v) {
            return Err(CertificateError::OutOfDomain(sys.names[i].clone()));
        }
    }
    let mut margins = Vec::with_capacity(sys.algebraic.len());
    for (i, c) in sys.algebraic.iter().enumerate() {
        match c.margin(&x, weaken) {
            Some(m) if c.truth(&x, weaken) == Truth::True => margins.push(m),
            _ => return Err(CertificateError::Constraint(i)),
        }
    }
    let mut flow_slack = Vec::with_capacity(sys.flows.len());
    let mut interior_time = None;
    for (fi, f) in sys.flows.iter().enumerate() {
        let x0: Vec<Interval> = f.entry.iter().map(|&i| x[i]).collect();
        let t = x[f.duration];
        let enc = enclose_flow(&f.ode, &x0, t, opts).map_err(|_| CertificateError::FlowBlowUp(fi))?;
        let mut slack = 0.0f64;
        for (e, &j) in enc.end.iter().zip(&f.exit) {
            let d = *e - x[j];
            if d.is_empty() || !d.is_bounded() {
                return Err(CertificateError::FlowBlowUp(fi));
            }
            slack = slack.max(d.mag());
        }
        if slack > weaken.lo() {
            return Err(CertificateError::FlowMismatch { flow: fi, slack });
        }
        flow_slack.push(slack);
        if let Some(inv) = &f.inv {
            if check_invariant_along(&enc, inv, delta) == InvariantCheck::CertainlyViolated {
                return Err(CertificateError::InvariantViolated(fi));
            }
        }
        if let Some(g) = sys.interior.as_ref().filter(|g| g.flow == fi) {
            interior_time = enc
                .cells
                .iter()
                .find(|c| g.constraint.truth(&c.state, weaken) == Truth::True)
                .map(|c| c.time);
            if interior_time.is_none() {
                return Err(CertificateError::InteriorGoal);
            }
        }
    }
    Ok(Witness {
        names: sys.names.clone(),
        point: point.to_vec(),
        margins,
        flow_slack,
        interior_time,
    })
}

/// Hull-consistency contraction of `x` by one constraint. An all-EMPTY
/// result refutes the constraint on `x`.
pub fn prune_algebraic(c: &Constraint, x: &[Interval]) -> Vec<Interval> {
    let mut y = x.to_vec();
    if !c.contract(&mut y) || y.iter().any(|v| v.is_empty()) {
        return vec![Interval::EMPTY; x.len()];
    }
    y
}

/// Bisect the variable with the largest width relative to its initial
/// domain among those wider than `epsilon`; ties go to the first.
pub fn branch(x: &[Interval], initial: &[Interval], epsilon: f64) -> Option<(Vec<Interval>, Vec<Interval>)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, (v, d)) in x.iter().zip(initial).enumerate() {
        let w = v.width();
        if w <= epsilon {
            continue;
        }
        let dw = d.width();
        let rel = if dw > 0.0 && dw.is_finite() {
            w / dw
        } else {
            f64::INFINITY
        };
        if best.is_none_or(|(_, r)| rel > r) {
            best = Some((i, rel));
        }
    }
    let (i, _) = best?;
    let (a, b) = x[i].bisect();
    let mut lo = x.to_vec();
    let mut hi = x.to_vec();
    lo[i] = a;
    hi[i] = b;
    Some((lo, hi))
}

fn shrank(before: &[Interval], after: &[Interval]) -> bool {
    before.iter().zip(after).any(|(b, a)| {
        let (wb, wa) = (b.width(), a.width());
        if a.is_empty() {
            return true;
        }
        if !wb.is_finite() {
            return wa.is_finite();
        }
        wb > 0.0 && wb - wa > 0.01 * wb
    })
}

fn gather(x: &[Interval], idx: &[usize]) -> Vec<Interval> {
    idx.iter().map(|&i| x[i]).collect()
}

fn scatter(x: &mut [Interval], idx: &[usize], v: &[Interval]) -> bool {
    for (&i, &val) in idx.iter().zip(v) {
        x[i] = x[i].intersect(val);
        if x[i].is_empty() {
            return false;
        }
    }
    true
}

fn contract_algebraic(sys: &ConstraintSystem, x: &mut [Interval]) -> bool {
    for _ in 0..64 {
        let before = x.to_vec();
        for c in &sys.algebraic {
            if !c.contract(x) {
                return false;
            }
        }
        for f in &sys.flows {
            if let Some(inv) = &f.inv {
                for idx in [&f.entry, &f.exit] {
                    let mut s = gather(x, idx);
                    if !inv.contract(&mut s) || !scatter(x, idx, &s) {
                        return false;
                    }
                }
            }
        }
        if x.iter().any(|v| v.is_empty()) {
            return false;
        }
        if !shrank(&before, x) {
            break;
        }
    }
    true
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SolverStats {
    pub nodes: u64,
    pub refuted: u64,
    pub branched: u64,
    pub blow_ups: u64,
    pub certificate_attempts: u64,
    pub epsilon_retry: bool,
}

impl SolverStats {
    fn merge(&mut self, o: &SolverStats) {
        self.nodes += o.nodes;
        self.refuted += o.refuted;
        self.branched += o.branched;
        self.blow_ups += o.blow_ups;
        self.certificate_attempts += o.certificate_attempts;
        self.epsilon_retry |= o.epsilon_retry;
    }
}

/// Apply all contractors to a fixpoint. Returns `false` on refutation.
pub fn prune_box(sys: &ConstraintSystem, x: &mut [Interval], opts: &EnclosureOptions) -> bool {
    let mut stats = SolverStats::default();
    prune_inner(sys, x, opts, &mut stats)
}

fn prune_inner(sys: &ConstraintSystem, x: &mut [Interval], opts: &EnclosureOptions, stats: &mut SolverStats) -> bool {
    if x.iter().any(|v| v.is_empty()) {
        return false;
    }
    for _ in 0..16 {
        let before = x.to_vec();
        if !contract_algebraic(sys, x) {
            return false;
        }
        for f in &sys.flows {
            let x0 = gather(x, &f.entry);
            let xt = gather(x, &f.exit);
            let t = x[f.duration];
            let p = prune_flow(&f.ode, &f.reversed, &x0, &xt, t, &f.context(), opts);
            if p.blew_up {
                stats.blow_ups += 1;
            }
            if p.is_empty() {
                return false;
            }
            if !scatter(x, &f.entry, &p.x0) || !scatter(x, &f.exit, &p.xt) {
                return false;
            }
            x[f.duration] = x[f.duration].intersect(p.duration);
            if x[f.duration].is_empty() {
                return false;
            }
        }
        if !shrank(&before, x) {
            break;
        }
    }
    true
}

/// Move each exit point onto the computed flow endpoint of its entry.
fn repair(sys: &ConstraintSystem, p: &mut [f64], opts: &EnclosureOptions) {
    for f in &sys.flows {
        let x0: Vec<Interval> = f.entry.iter().map(|&i| Interval::point(p[i])).collect();
        if let Ok(enc) = enclose_flow(&f.ode, &x0, Interval::point(p[f.duration]), opts) {
            for (e, &j) in enc.end.iter().zip(&f.exit) {
                if !e.is_empty() && e.is_bounded() {
                    p[j] = e.mid().clamp(sys.domain[j].lo(), sys.domain[j].hi());
                }
            }
        }
    }
}

fn box_seed(seed: u64, x: &[Interval]) -> u64 {
    let mut h = DefaultHasher::new();
    seed.hash(&mut h);
    for v in x {
        v.lo().to_bits().hash(&mut h);
        v.hi().to_bits().hash(&mut h);
    }
    h.finish()
}

fn candidates(x: &[Interval], cfg: &SolverConfig) -> Vec<Vec<f64>> {
    let mut out = vec![x.iter().map(|v| v.mid()).collect::<Vec<f64>>()];
    if x.iter().all(|v| v.is_point()) {
        return out;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(box_seed(cfg.seed, x));
    for _ in 0..cfg.random_candidates {
        out.push(
            x.iter()
                .map(|v| {
                    if v.is_point() {
                        v.lo()
                    } else {
                        rng.gen_range(v.lo()..=v.hi())
                    }
                })
                .collect(),
        );
    }
    out
}

enum Node {
    Empty,
    Certified(Witness),
    Split(Vec<Interval>, Vec<Interval>),
    Unresolved(Vec<Interval>),
}

fn process(
    sys: &ConstraintSystem,
    mut x: Vec<Interval>,
    eps: f64,
    cfg: &SolverConfig,
    stats: &mut SolverStats,
) -> Node {
    stats.nodes += 1;
    if !prune_inner(sys, &mut x, &cfg.enclosure, stats) {
        stats.refuted += 1;
        return Node::Empty;
    }
    for mut p in candidates(&x, cfg) {
        stats.certificate_attempts += 1;
        repair(sys, &mut p, &cfg.enclosure);
        if let Ok(w) = certify(sys, &p, cfg.delta, &cfg.enclosure) {
            return Node::Certified(w);
        }
    }
    match branch(&x, &sys.domain, eps) {
        Some((a, b)) => {
            stats.branched += 1;
            Node::Split(a, b)
        }
        None => Node::Unresolved(x),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ExhaustReason {
    NodeBudget,
    TimeBudget,
    /// Boxes narrower than ε remained that neither pruned to empty nor
    /// yielded a certificate.
    Unresolved,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Exhausted {
    pub reason: ExhaustReason,
    pub smallest_box: Vec<Interval>,
    pub open_boxes: usize,
    pub blow_ups: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum SolverResult {
    False,
    DeltaTrue(Witness),
    ResourceExhausted(Exhausted),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveReport {
    pub result: SolverResult,
    pub stats: SolverStats,
}

struct Pool {
    stack: Vec<Vec<Interval>>,
    active: usize,
    witness: Option<Witness>,
    unresolved: Vec<Vec<Interval>>,
    stopped: Option<ExhaustReason>,
    nodes: u64,
    stats: SolverStats,
}

struct PoolOutcome {
    witness: Option<Witness>,
    unresolved: Vec<Vec<Interval>>,
    open: Vec<Vec<Interval>>,
    stopped: Option<ExhaustReason>,
    stats: SolverStats,
}

fn run_pool(
    sys: &ConstraintSystem,
    roots: Vec<Vec<Interval>>,
    eps: f64,
    cfg: &SolverConfig,
    deadline: Option<Instant>,
    nodes_used: u64,
) -> PoolOutcome {
    let mut roots = roots;
    roots.reverse();
    let state = Arc::new((
        Mutex::new(Pool {
            stack: roots,
            active: 0,
            witness: None,
            unresolved: Vec::new(),
            stopped: None,
            nodes: nodes_used,
            stats: SolverStats::default(),
        }),
        Condvar::new(),
    ));
    let worker = || {
        let (lock, cv) = &*state;
        let mut local = SolverStats::default();
        loop {
            let x = {
                let mut g = lock.lock().unwrap();
                loop {
                    if g.witness.is_some() || g.stopped.is_some() {
                        break None;
                    }
                    if let Some(x) = g.stack.pop() {
                        if g.nodes >= cfg.node_budget {
                            g.stack.push(x);
                            g.stopped = Some(ExhaustReason::NodeBudget);
                            cv.notify_all();
                            break None;
                        }
                        if deadline.is_some_and(|d| Instant::now() >= d) {
                            g.stack.push(x);
                            g.stopped = Some(ExhaustReason::TimeBudget);
                            cv.notify_all();
                            break None;
                        }
                        g.nodes += 1;
                        g.active += 1;
                        break Some(x);
                    }
                    if g.active == 0 {
                        break None;
                    }
                    g = cv.wait(g).unwrap();
                }
            };
            let Some(x) = x else { break };
            let out = process(sys, x, eps, cfg, &mut local);
            let mut g = lock.lock().unwrap();
            g.active -= 1;
            match out {
                Node::Empty => {}
                Node::Certified(w) => {
                    if g.witness.is_none() {
                        g.witness = Some(w);
                    }
                }
                Node::Split(a, b) => {
                    g.stack.push(b);
                    g.stack.push(a);
                }
                Node::Unresolved(x) => g.unresolved.push(x),
            }
            cv.notify_all();
        }
        let mut g = lock.lock().unwrap();
        g.stats.merge(&local);
        cv.notify_all();
    };
    let workers = cfg.workers.max(1);
    if workers == 1 {
        worker();
    } else {
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(worker);
            }
        });
    }
    let pool = Arc::try_unwrap(state)
        .ok()
        .expect("workers finished")
        .0
        .into_inner()
        .unwrap();
    PoolOutcome {
        witness: pool.witness,
        unresolved: pool.unresolved,
        open: pool.stack,
        stopped: pool.stopped,
        stats: pool.stats,
    }
}

/// Decide the δ-weakening of `sys` by branch and prune.
pub fn solve(sys: &ConstraintSystem, cfg: &SolverConfig) -> Result<SolveReport, ConfigError> {
    cfg.validate()?;
    let start = Instant::now();
    let deadline = cfg.time_budget.map(|d| start + d);
    let root = sys.domain.clone();
    if root.iter().any(|v| v.is_empty()) {
        return Ok(SolveReport {
            result: SolverResult::False,
            stats: SolverStats::default(),
        });
    }
    let first = run_pool(sys, vec![root], cfg.epsilon, cfg, deadline, 0);
    let mut stats = first.stats;
    if let Some(w) = first.witness {
        return Ok(SolveReport {
            result: SolverResult::DeltaTrue(w),
            stats,
        });
    }
    let mut outcome = first;
    if outcome.stopped.is_none() && !outcome.unresolved.is_empty() {
        // one retry of the leftovers at a finer resolution
        stats.epsilon_retry = true;
        let roots = std::mem::take(&mut outcome.unresolved);
        let retry = run_pool(sys, roots, cfg.epsilon / 4.0, cfg, deadline, stats.nodes);
        stats.merge(&retry.stats);
        if let Some(w) = retry.witness {
            return Ok(SolveReport {
                result: SolverResult::DeltaTrue(w),
                stats,
            });
        }
        outcome = retry;
    }
    let mut open = outcome.unresolved;
    open.extend(outcome.open);
    if open.is_empty() && outcome.stopped.is_none() {
        return Ok(SolveReport {
            result: SolverResult::False,
            stats,
        });
    }
    let smallest = open
        .iter()
        .min_by(|a, b| max_width(a).total_cmp(&max_width(b)))
        .cloned()
        .unwrap_or_default();
    Ok(SolveReport {
        result: SolverResult::ResourceExhausted(Exhausted {
            reason: outcome.stopped.unwrap_or(ExhaustReason::Unresolved),
            smallest_box: smallest,
            open_boxes: open.len(),
            blow_ups: stats.blow_ups,
        }),
        stats,
    })
}
