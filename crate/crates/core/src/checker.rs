//! Bounded reachability analysis, witness traces and their validation.

use std::time::{Duration, Instant};

use serde::ser::{SerializeMap, SerializeStruct};
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::automaton::HybridAutomaton;
use crate::enclosure::{check_invariant_along, enclose_flow, EnclosureOptions, InvariantCheck, Ode};
use crate::encoder::{encode_depth, EncodeError, EncodeOptions, UnrolledProblem};
use crate::expr::Constraint;
use crate::formula::{Formula, Rel};
use crate::interval::{Interval, IntervalBox};
use crate::reference::{self, Tolerance};
use crate::solver::{solve, ConfigError, ExhaustReason, SolverConfig, SolverResult, SolverStats, Witness};

#[derive(Debug, Error)]
pub enum CheckError {
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("depth bound k and duration bound M must satisfy k >= 0, M > 0 (got M = {0})")]
    Bounds(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckConfig {
    pub k: usize,
    pub m: f64,
    pub solver: SolverConfig,
    pub interior_unsafe: bool,
    /// User assertion that the model's invariants are strictly imposed;
    /// recorded in outputs, never checked.
    pub strict_invariants: bool,
}

impl CheckConfig {
    pub fn new(k: usize, m: f64, delta: f64) -> Self {
        CheckConfig {
            k,
            m,
            solver: SolverConfig::new(delta),
            interior_unsafe: false,
            strict_invariants: false,
        }
    }

    pub fn delta(&self) -> f64 {
        self.solver.delta
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Safe,
    DeltaUnsafe,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Safe => "safe",
            Verdict::DeltaUnsafe => "delta-unsafe",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

/// Point values in variable order, serialized as a JSON object.
#[derive(Clone, Debug, PartialEq)]
pub struct NamedPoint(pub Vec<(String, f64)>);

impl NamedPoint {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn values(&self) -> Vec<f64> {
        self.0.iter().map(|(_, v)| *v).collect()
    }
}

impl Serialize for NamedPoint {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            m.serialize_entry(k, v)?;
        }
        m.end()
    }
}

/// Boxes in variable order, serialized as `{name: [lo, hi]}`.
#[derive(Clone, Debug, PartialEq)]
pub struct NamedBox(pub Vec<(String, Interval)>);

impl Serialize for NamedBox {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            m.serialize_entry(k, &[v.lo(), v.hi()])?;
        }
        m.end()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridCell {
    pub t_lo: f64,
    pub t_hi: f64,
    #[serde(rename = "box")]
    pub state: NamedBox,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceStep {
    pub mode: String,
    pub duration: f64,
    pub entry: NamedPoint,
    pub exit: NamedPoint,
    pub grid: Vec<GridCell>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WitnessTrace {
    pub steps: Vec<TraceStep>,
    /// The unsafe region was reached inside the last flow rather than at
    /// its exit point.
    #[serde(skip)]
    pub interior_unsafe: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum PathOutcome {
    False,
    DeltaTrue,
    /// A certificate was found but the trace failed validation.
    Rejected {
        reasons: Vec<String>,
    },
    ResourceExhausted {
        reason: ExhaustReason,
        smallest_box: NamedBox,
        blow_ups: u64,
    },
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathReport {
    pub depth: usize,
    pub modes: Vec<String>,
    pub outcome: PathOutcome,
    pub stats: SolverStats,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReachResult {
    pub verdict: Verdict,
    pub k: usize,
    pub m: f64,
    pub delta: f64,
    pub strict_invariants: bool,
    pub witness: Option<WitnessTrace>,
    /// Depth of the witness path.
    pub witness_depth: Option<usize>,
    pub paths: Vec<PathReport>,
    #[doc(hidden)]
    pub elapsed: Duration,
}

impl ReachResult {
    pub fn unknowns(&self) -> impl Iterator<Item = &PathReport> {
        self.paths.iter().filter(|p| {
            matches!(
                p.outcome,
                PathOutcome::ResourceExhausted { .. } | PathOutcome::Rejected { .. } | PathOutcome::Skipped
            )
        })
    }

    /// One-line human summary.
    pub fn summary(&self) -> String {
        match self.verdict {
            Verdict::Safe => format!("SAFE (k={}, M={})", self.k, self.m),
            Verdict::DeltaUnsafe => {
                let path = self
                    .witness
                    .as_ref()
                    .map(|w| w.steps.iter().map(|s| s.mode.as_str()).collect::<Vec<_>>().join(" -> "))
                    .unwrap_or_default();
                format!(
                    "DELTA-UNSAFE (delta={}, depth={}, path={})",
                    self.delta,
                    self.witness_depth.unwrap_or(0),
                    path
                )
            }
            Verdict::Inconclusive => format!(
                "INCONCLUSIVE (k={}, M={}, {} unresolved path(s))",
                self.k,
                self.m,
                self.unknowns().count()
            ),
        }
    }

    /// The trace export document.
    pub fn trace_document<'a>(&'a self, model: &'a str) -> TraceDocument<'a> {
        TraceDocument { model, result: self }
    }

    /// Flat CSV of the witness grid: `step,mode,t_lo,t_hi,var,lo,hi`.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("step,mode,t_lo,t_hi,var,lo,hi\n");
        if let Some(w) = &self.witness {
            for (i, s) in w.steps.iter().enumerate() {
                for c in &s.grid {
                    for (v, iv) in &c.state.0 {
                        out.push_str(&format!(
                            "{i},{},{},{},{v},{},{}\n",
                            s.mode,
                            c.t_lo,
                            c.t_hi,
                            iv.lo(),
                            iv.hi()
                        ));
                    }
                }
            }
        }
        out
    }
}

/// `{model, delta, k, M, verdict, steps}`.
pub struct TraceDocument<'a> {
    model: &'a str,
    result: &'a ReachResult,
}

impl Serialize for TraceDocument<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let r = self.result;
        let mut st = s.serialize_struct("Trace", 6)?;
        st.serialize_field("model", self.model)?;
        st.serialize_field("delta", &r.delta)?;
        st.serialize_field("k", &r.k)?;
        st.serialize_field("M", &r.m)?;
        st.serialize_field("verdict", r.verdict.as_str())?;
        let empty = Vec::new();
        st.serialize_field("steps", r.witness.as_ref().map(|w| &w.steps).unwrap_or(&empty))?;
        st.end()
    }
}

/// Machine-readable run report (deterministic: no timings).
impl Serialize for ReachResult {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("ReachResult", 8)?;
        st.serialize_field("verdict", self.verdict.as_str())?;
        st.serialize_field("k", &self.k)?;
        st.serialize_field("M", &self.m)?;
        st.serialize_field("delta", &self.delta)?;
        st.serialize_field("strict_invariants", &self.strict_invariants)?;
        st.serialize_field("witness_depth", &self.witness_depth)?;
        st.serialize_field("witness", &self.witness)?;
        st.serialize_field("paths", &self.paths)?;
        st.end()
    }
}

fn named_box(names: &[String], x: &[Interval]) -> NamedBox {
    NamedBox(names.iter().cloned().zip(x.iter().copied()).collect())
}

/// Rebuild a witness trace from a certified point of an unrolled problem.
pub fn build_trace(
    h: &HybridAutomaton,
    problem: &UnrolledProblem,
    w: &Witness,
    opts: &EnclosureOptions,
) -> WitnessTrace {
    let names = h.var_names();
    let steps = problem
        .steps
        .iter()
        .map(|s| {
            let get = |n: &String| w.value(n).expect("witness covers every variable");
            let entry: Vec<f64> = s.entry.iter().map(get).collect();
            let exit: Vec<f64> = s.exit.iter().map(get).collect();
            let duration = get(&s.duration);
            let mode = h.mode(&s.mode).expect("mode of encoded path");
            let grid = Ode::from_mode(h, mode)
                .ok()
                .and_then(|ode| {
                    let x0: Vec<Interval> = entry.iter().map(|&v| Interval::point(v)).collect();
                    enclose_flow(&ode, &x0, Interval::point(duration), opts).ok()
                })
                .map(|enc| {
                    enc.cells
                        .iter()
                        .map(|c| GridCell {
                            t_lo: c.time.lo(),
                            t_hi: c.time.hi(),
                            state: named_box(&names, &c.state),
                        })
                        .collect()
                })
                .unwrap_or_default();
            TraceStep {
                mode: s.mode.clone(),
                duration,
                entry: NamedPoint(names.iter().cloned().zip(entry).collect()),
                exit: NamedPoint(names.iter().cloned().zip(exit).collect()),
                grid,
            }
        })
        .collect();
    WitnessTrace {
        steps,
        interior_unsafe: problem.interior_unsafe,
    }
}

/// Run the (k, M)-bounded analysis: depths ascend and the first
/// validated δ-true path wins.
pub fn check_reach(h: &HybridAutomaton, cfg: &CheckConfig) -> Result<ReachResult, CheckError> {
    cfg.solver.validate()?;
    if !(cfg.m > 0.0 && cfg.m.is_finite()) {
        return Err(CheckError::Bounds(cfg.m));
    }
    let start = Instant::now();
    let deadline = cfg.solver.time_budget.map(|d| start + d);
    let opts = EncodeOptions {
        interior_unsafe: cfg.interior_unsafe,
    };
    let mut paths = Vec::new();
    let mut witness = None;
    let mut witness_depth = None;
    'depths: for depth in 0..=cfg.k {
        for problem in encode_depth(h, depth, cfg.m, opts)? {
            let mut scfg = cfg.solver.clone();
            if let Some(d) = deadline {
                let left = d.saturating_duration_since(Instant::now());
                if left.is_zero() {
                    paths.push(PathReport {
                        depth,
                        modes: problem.modes.clone(),
                        outcome: PathOutcome::Skipped,
                        stats: SolverStats::default(),
                    });
                    continue;
                }
                scfg.time_budget = Some(left);
            }
            let report = solve(&problem.system, &scfg)?;
            let outcome = match report.result {
                SolverResult::False => PathOutcome::False,
                SolverResult::DeltaTrue(w) => {
                    let trace = build_trace(h, &problem, &w, &scfg.enclosure);
                    let check = check_trace(h, &trace, cfg.delta(), cfg.m, &scfg.enclosure);
                    if check.ok {
                        witness = Some(trace);
                        witness_depth = Some(depth);
                        PathOutcome::DeltaTrue
                    } else {
                        log::warn!("certified witness failed trace validation: {:?}", check.reasons);
                        PathOutcome::Rejected { reasons: check.reasons }
                    }
                }
                SolverResult::ResourceExhausted(e) => PathOutcome::ResourceExhausted {
                    reason: e.reason,
                    smallest_box: named_box(problem.system.names(), &e.smallest_box),
                    blow_ups: e.blow_ups,
                },
            };
            log::info!("depth {depth} path {:?}: {:?}", problem.modes, outcome);
            let found = outcome == PathOutcome::DeltaTrue;
            paths.push(PathReport {
                depth,
                modes: problem.modes.clone(),
                outcome,
                stats: report.stats,
            });
            if found {
                break 'depths;
            }
        }
    }
    let verdict = if witness.is_some() {
        Verdict::DeltaUnsafe
    } else if paths.iter().all(|p| p.outcome == PathOutcome::False) {
        Verdict::Safe
    } else {
        Verdict::Inconclusive
    };
    Ok(ReachResult {
        verdict,
        k: cfg.k,
        m: cfg.m,
        delta: cfg.delta(),
        strict_invariants: cfg.strict_invariants,
        witness,
        witness_depth,
        paths,
        elapsed: start.elapsed(),
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceCheck {
    pub ok: bool,
    pub reasons: Vec<String>,
}

/// Interval truth of a formula at an environment box, evaluated on the
/// formula tree directly.
fn certainly_holds(f: &Formula, env: &IntervalBox) -> bool {
    match f {
        Formula::True => true,
        Formula::False => false,
        Formula::Atom(a) => match a.term.eval_box(env) {
            Ok(r) if !r.domain_violation && !r.range.is_empty() => match a.rel {
                Rel::Gt => r.range.lo() > 0.0,
                Rel::Ge => r.range.lo() >= 0.0,
            },
            _ => false,
        },
        Formula::And(fs) => fs.iter().all(|g| certainly_holds(g, env)),
        Formula::Or(fs) => fs.iter().any(|g| certainly_holds(g, env)),
        Formula::Exists(_) | Formula::Forall(_) => false,
    }
}

fn point_env(names: &[String], pre: &[f64], post: Option<&[f64]>) -> IntervalBox {
    let mut pairs: Vec<(String, Interval)> = names
        .iter()
        .cloned()
        .zip(pre.iter().map(|&v| Interval::point(v)))
        .collect();
    if let Some(post) = post {
        pairs.extend(
            names
                .iter()
                .map(|n| format!("{n}'"))
                .zip(post.iter().map(|&v| Interval::point(v))),
        );
    }
    IntervalBox::from_pairs(pairs)
}

/// Validate a trace against the δ-weakening of `h`, independently of any
/// solver state: weakened formulas are evaluated on their syntax trees,
/// flows are re-enclosed and compared with a reference integration.
pub fn check_trace(
    h: &HybridAutomaton,
    trace: &WitnessTrace,
    delta: f64,
    m: f64,
    opts: &EnclosureOptions,
) -> TraceCheck {
    let mut reasons = Vec::new();
    let weak = match h.weaken(delta) {
        Ok(w) => w,
        Err(e) => {
            return TraceCheck {
                ok: false,
                reasons: vec![e.to_string()],
            }
        }
    };
    let names = h.var_names();
    if trace.steps.is_empty() {
        reasons.push("trace has no steps".into());
    }
    let tol = Interval::enclosing_decimal(delta).lo();
    for (i, s) in trace.steps.iter().enumerate() {
        let Some(mode) = weak.mode(&s.mode) else {
            reasons.push(format!("step {i}: unknown mode `{}`", s.mode));
            continue;
        };
        let entry = s.entry.values();
        let exit = s.exit.values();
        let keys_ok = |p: &NamedPoint| p.0.len() == names.len() && p.0.iter().zip(&names).all(|((a, _), b)| a == b);
        if !keys_ok(&s.entry) || !keys_ok(&s.exit) {
            reasons.push(format!("step {i}: state variables do not match the model"));
            continue;
        }
        if !(s.duration >= 0.0 && s.duration <= m) {
            reasons.push(format!("step {i}: duration {} outside [0, {m}]", s.duration));
        }
        for (j, v) in h.vars.iter().enumerate() {
            if !v.domain.contains(entry[j]) || !v.domain.contains(exit[j]) {
                reasons.push(format!("step {i}: `{}` leaves its domain", v.name));
            }
        }
        if i == 0 && !certainly_holds(&mode.init, &point_env(&names, &entry, None)) {
            reasons.push("weakened initial condition not certified at the first entry".into());
        }
        // flow: validated enclosure and an independent reference integration
        let orig = h.mode(&s.mode).expect("same modes");
        let ode = match Ode::from_mode(h, orig) {
            Ok(o) => o,
            Err(e) => {
                reasons.push(format!("step {i}: {e}"));
                continue;
            }
        };
        let x0: Vec<Interval> = entry.iter().map(|&v| Interval::point(v)).collect();
        let dur = s.duration.clamp(0.0, f64::MAX);
        match enclose_flow(&ode, &x0, Interval::point(dur), opts) {
            Err(e) => reasons.push(format!("step {i}: {e}")),
            Ok(enc) => {
                let slack: f64 = enc
                    .end
                    .iter()
                    .zip(&exit)
                    .map(|(e, &x)| (*e - Interval::point(x)).mag())
                    .fold(0.0, f64::max);
                if !(slack <= tol) {
                    reasons.push(format!("step {i}: exit point is {slack:e} from the flow enclosure"));
                }
                let width = enc.end.iter().map(|e| e.width()).fold(0.0, f64::max);
                let rhs = |x: &[f64], d: &mut [f64]| ode.eval_f64(x, d);
                match reference::integrate(rhs, &entry, dur, Tolerance::default()) {
                    Ok(r) => {
                        let err = r.iter().zip(&exit).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                        if !(err <= delta + width + 1e-9) {
                            reasons.push(format!(
                                "step {i}: reference integration ends {err:e} from the exit point"
                            ));
                        }
                    }
                    Err(e) => reasons.push(format!("step {i}: reference integration failed: {e}")),
                }
                let slot = |n: &str| names.iter().position(|v| v == n);
                if let Ok(Some(inv)) = Constraint::compile(&orig.invariant, &slot) {
                    if check_invariant_along(&enc, &inv, delta) == InvariantCheck::CertainlyViolated {
                        reasons.push(format!("step {i}: invariant of `{}` certainly violated", s.mode));
                    }
                }
                let last = i + 1 == trace.steps.len();
                if last && trace.interior_unsafe {
                    let hit = mode.unsafe_region.as_ref().is_some_and(|u| {
                        enc.cells.iter().any(|c| {
                            certainly_holds(u, &IntervalBox::from_pairs(names.iter().cloned().zip(c.state.clone())))
                        })
                    });
                    if !hit {
                        reasons.push("weakened unsafe region not certified along the last flow".into());
                    }
                }
            }
        }
        if i + 1 == trace.steps.len() && !trace.interior_unsafe {
            let hit = mode
                .unsafe_region
                .as_ref()
                .is_some_and(|u| certainly_holds(u, &point_env(&names, &exit, None)));
            if !hit {
                reasons.push("weakened unsafe region not certified at the final exit".into());
            }
        }
        if let Some(next) = trace.steps.get(i + 1) {
            let (Some(from), Some(to)) = (weak.mode_index(&s.mode), weak.mode_index(&next.mode)) else {
                continue;
            };
            let env = point_env(&names, &exit, Some(&next.entry.values()));
            let linked = weak
                .jumps
                .iter()
                .any(|j| j.from == from && j.to == to && certainly_holds(&j.relation(), &env));
            if !linked {
                reasons.push(format!(
                    "step {i}: no weakened jump {} -> {} certified",
                    s.mode, next.mode
                ));
            }
        }
    }
    TraceCheck {
        ok: reasons.is_empty(),
        reasons,
    }
}
