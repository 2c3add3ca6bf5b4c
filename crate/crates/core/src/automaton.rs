//! Hybrid automata: modes with ODE flows and invariants, jumps with
//! guards and resets, initial and unsafe conditions.
//!
//! See `docs/model-format.md` for the model-file grammar.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::formula::{Constant, Formula, FormulaError, Term};
use crate::interval::Interval;
use crate::parse::{fold_constant, ParseError, Parser, Pos, Scope};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("{0}")]
    Syntax(#[from] ParseError),
    #[error("{pos}: {message}")]
    Invalid { pos: Pos, message: String },
    #[error("{0}")]
    Formula(#[from] FormulaError),
}

impl ModelError {
    fn invalid(pos: Pos, message: impl Into<String>) -> ModelError {
        ModelError::Invalid {
            pos,
            message: message.into(),
        }
    }

    pub fn pos(&self) -> Option<Pos> {
        match self {
            ModelError::Syntax(e) => Some(e.pos),
            ModelError::Invalid { pos, .. } => Some(*pos),
            ModelError::Formula(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateVar {
    pub name: String,
    pub domain: Interval,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mode {
    pub name: String,
    /// Right-hand sides `dx_i/dt = flow[i]`, in state-variable order.
    pub flow: Vec<Term>,
    pub invariant: Formula,
    /// Initial condition; `False` when the mode is not initial.
    pub init: Formula,
    /// Unsafe region; `None` means no state of this mode is unsafe.
    pub unsafe_region: Option<Formula>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Jump {
    pub from: usize,
    pub to: usize,
    /// Condition on the pre-state.
    pub guard: Formula,
    /// Relation between pre-state `x` and post-state `x'`.
    pub reset: Formula,
}

impl Jump {
    /// `guard ∧ reset` as one relation over `(x, x')`.
    pub fn relation(&self) -> Formula {
        Formula::and([self.guard.clone(), self.reset.clone()])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HybridAutomaton {
    pub vars: Vec<StateVar>,
    pub modes: Vec<Mode>,
    pub jumps: Vec<Jump>,
}

/// A sequence of modes together with the jump taken between each
/// consecutive pair.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct ModePath {
    pub modes: Vec<usize>,
    pub jumps: Vec<usize>,
}

impl ModePath {
    /// Number of jumps along the path.
    pub fn depth(&self) -> usize {
        self.jumps.len()
    }

    pub fn names(&self, h: &HybridAutomaton) -> Vec<String> {
        self.modes.iter().map(|&m| h.modes[m].name.clone()).collect()
    }

    /// Consecutive modes are linked by the recorded jumps.
    pub fn is_admissible(&self, h: &HybridAutomaton) -> bool {
        !self.modes.is_empty()
            && self.jumps.len() + 1 == self.modes.len()
            && self.modes.iter().all(|&m| m < h.modes.len())
            && self.jumps.iter().enumerate().all(|(i, &j)| {
                j < h.jumps.len() && h.jumps[j].from == self.modes[i] && h.jumps[j].to == self.modes[i + 1]
            })
    }
}

impl HybridAutomaton {
    pub fn var_names(&self) -> Vec<String> {
        self.vars.iter().map(|v| v.name.clone()).collect()
    }

    pub fn domain(&self) -> Vec<Interval> {
        self.vars.iter().map(|v| v.domain).collect()
    }

    pub fn mode_index(&self, name: &str) -> Option<usize> {
        self.modes.iter().position(|m| m.name == name)
    }

    pub fn mode(&self, name: &str) -> Option<&Mode> {
        self.modes.iter().find(|m| m.name == name)
    }

    /// Every guard, reset, invariant, init and unsafe formula replaced by
    /// its δ-weakening. Flows are left untouched; flow weakening happens
    /// at the constraint level inside the solver.
    pub fn weaken(&self, delta: f64) -> Result<HybridAutomaton, FormulaError> {
        let mut h = self.clone();
        for m in &mut h.modes {
            m.invariant = m.invariant.delta_weaken(delta)?;
            m.init = m.init.delta_weaken(delta)?;
            if let Some(u) = &m.unsafe_region {
                m.unsafe_region = Some(u.delta_weaken(delta)?);
            }
        }
        for j in &mut h.jumps {
            j.guard = j.guard.delta_weaken(delta)?;
            j.reset = j.reset.delta_weaken(delta)?;
        }
        Ok(h)
    }

    /// All admissible paths with exactly `k` jumps that start in a mode
    /// whose initial condition is not `false`, in lexicographic order of
    /// (mode declaration, jump declaration).
    pub fn enumerate_paths(&self, k: usize) -> Vec<ModePath> {
        let mut out = Vec::new();
        let mut succ: Vec<Vec<usize>> = vec![Vec::new(); self.modes.len()];
        for (j, jump) in self.jumps.iter().enumerate() {
            succ[jump.from].push(j);
        }
        for s in &mut succ {
            s.sort_by_key(|&j| (self.jumps[j].to, j));
        }
        for (q0, mode) in self.modes.iter().enumerate() {
            if mode.init == Formula::False {
                continue;
            }
            let mut path = ModePath {
                modes: vec![q0],
                jumps: Vec::new(),
            };
            self.extend_paths(&succ, k, &mut path, &mut out);
        }
        out
    }

    fn extend_paths(&self, succ: &[Vec<usize>], k: usize, path: &mut ModePath, out: &mut Vec<ModePath>) {
        if path.jumps.len() == k {
            out.push(path.clone());
            return;
        }
        let last = *path.modes.last().unwrap();
        for &j in &succ[last] {
            path.jumps.push(j);
            path.modes.push(self.jumps[j].to);
            self.extend_paths(succ, k, path, out);
            path.jumps.pop();
            path.modes.pop();
        }
    }

    /// Replace the unsafe regions: modes absent from `regions` become safe.
    pub fn with_unsafe(&self, regions: &BTreeMap<String, Formula>) -> HybridAutomaton {
        let mut h = self.clone();
        for m in &mut h.modes {
            m.unsafe_region = regions.get(&m.name).cloned();
        }
        h
    }
}

impl fmt::Display for HybridAutomaton {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "vars {{")?;
        for v in &self.vars {
            writeln!(f, "  {} in [{}, {}];", v.name, v.domain.lo(), v.domain.hi())?;
        }
        writeln!(f, "}}")?;
        for m in &self.modes {
            writeln!(f, "mode {} {{", m.name)?;
            writeln!(f, "  flow {{")?;
            for (v, rhs) in self.vars.iter().zip(&m.flow) {
                writeln!(f, "    d/dt[{}] = {};", v.name, rhs)?;
            }
            writeln!(f, "  }}")?;
            writeln!(f, "  inv: {};", m.invariant)?;
            writeln!(f, "}}")?;
        }
        for j in &self.jumps {
            writeln!(
                f,
                "jump {} -> {} {{ guard: {}; reset: {}; }}",
                self.modes[j.from].name, self.modes[j.to].name, j.guard, j.reset
            )?;
        }
        for m in &self.modes {
            if m.init != Formula::False {
                writeln!(f, "init {}: {};", m.name, m.init)?;
            }
            if let Some(u) = &m.unsafe_region {
                writeln!(f, "unsafe {}: {};", m.name, u)?;
            }
        }
        Ok(())
    }
}

struct RawJump {
    from: (String, Pos),
    to: (String, Pos),
    guard: Vec<Formula>,
    reset: Vec<Formula>,
}

/// Parse and validate a model file.
pub fn parse_model(src: &str) -> Result<HybridAutomaton, ModelError> {
    let mut p = Parser::new(src)?;
    let mut constants: BTreeMap<String, Constant> = BTreeMap::new();
    let mut vars: Vec<StateVar> = Vec::new();
    let mut modes: Vec<(Mode, Pos)> = Vec::new();
    let mut raw_jumps: Vec<RawJump> = Vec::new();
    let mut inits: Vec<((String, Pos), Formula)> = Vec::new();
    let mut unsafes: Vec<((String, Pos), Formula)> = Vec::new();

    while !p.at_eof() {
        let (section, pos) = p.expect_ident()?;
        match section.as_str() {
            "const" => {
                let (name, npos) = p.expect_ident()?;
                if constants.contains_key(&name) || vars.iter().any(|v| v.name == name) {
                    return Err(ModelError::invalid(npos, format!("`{name}` is already defined")));
                }
                p.expect_sym("=")?;
                let epos = p.pos();
                let mut scope = Scope {
                    constants: &constants,
                    is_var: Some(&|_: &str| false),
                    bound: Vec::new(),
                };
                let t = p.term(&mut scope)?;
                let c = fold_constant(&t, epos)?;
                p.expect_sym(";")?;
                constants.insert(name, c);
            }
            "vars" => {
                if !vars.is_empty() {
                    return Err(ModelError::invalid(pos, "duplicate `vars` section"));
                }
                p.expect_sym("{")?;
                while !p.eat_sym("}") {
                    let (name, npos) = p.expect_ident()?;
                    if name.ends_with('\'') {
                        return Err(ModelError::invalid(npos, "state variable names cannot be primed"));
                    }
                    if vars.iter().any(|v| v.name == name) || constants.contains_key(&name) {
                        return Err(ModelError::invalid(npos, format!("`{name}` is already defined")));
                    }
                    p.expect_kw("in")?;
                    p.expect_sym("[")?;
                    let lo = bound_value(&mut p, &constants)?;
                    p.expect_sym(",")?;
                    let hi = bound_value(&mut p, &constants)?;
                    p.expect_sym("]")?;
                    p.expect_sym(";")?;
                    if !lo.is_finite() || !hi.is_finite() {
                        return Err(ModelError::invalid(
                            npos,
                            format!("state variable `{name}` must have finite bounds"),
                        ));
                    }
                    if lo > hi {
                        return Err(ModelError::invalid(npos, format!("empty domain for `{name}`")));
                    }
                    vars.push(StateVar {
                        name,
                        domain: Interval::new(lo, hi),
                    });
                }
                if vars.is_empty() {
                    return Err(ModelError::invalid(pos, "`vars` section declares no variables"));
                }
            }
            "mode" => {
                require_vars(&vars, pos)?;
                let (name, npos) = p.expect_ident()?;
                if modes.iter().any(|(m, _)| m.name == name) {
                    return Err(ModelError::invalid(npos, format!("duplicate mode `{name}`")));
                }
                let mode = parse_mode(&mut p, name, npos, &vars, &constants)?;
                modes.push((mode, npos));
            }
            "jump" => {
                require_vars(&vars, pos)?;
                let from = p.expect_ident()?;
                p.expect_sym("->")?;
                let to = p.expect_ident()?;
                p.expect_sym("{")?;
                let mut guard = Vec::new();
                let mut reset = Vec::new();
                while !p.eat_sym("}") {
                    let (key, kpos) = p.expect_ident()?;
                    p.expect_sym(":")?;
                    match key.as_str() {
                        "guard" => guard.push(state_formula(&mut p, &vars, &constants, false)?),
                        "reset" => reset.push(state_formula(&mut p, &vars, &constants, true)?),
                        other => return Err(ModelError::invalid(kpos, format!("unknown jump field `{other}`"))),
                    }
                    p.expect_sym(";")?;
                }
                raw_jumps.push(RawJump { from, to, guard, reset });
            }
            "init" | "unsafe" => {
                require_vars(&vars, pos)?;
                let target = p.expect_ident()?;
                p.expect_sym(":")?;
                let f = state_formula(&mut p, &vars, &constants, false)?;
                p.expect_sym(";")?;
                if section == "init" {
                    inits.push((target, f));
                } else {
                    unsafes.push((target, f));
                }
            }
            other => {
                return Err(ModelError::invalid(pos, format!("unknown section `{other}`")));
            }
        }
    }

    if modes.is_empty() {
        return Err(ModelError::invalid(p.pos(), "model declares no modes"));
    }
    let index = |(name, pos): &(String, Pos)| -> Result<usize, ModelError> {
        modes
            .iter()
            .position(|(m, _)| m.name == *name)
            .ok_or_else(|| ModelError::invalid(*pos, format!("undeclared mode `{name}`")))
    };
    let mut jumps = Vec::new();
    for rj in &raw_jumps {
        jumps.push(Jump {
            from: index(&rj.from)?,
            to: index(&rj.to)?,
            guard: Formula::and(rj.guard.clone()),
            reset: Formula::and(rj.reset.clone()),
        });
    }
    let mut init_parts: Vec<Vec<Formula>> = vec![Vec::new(); modes.len()];
    for (target, f) in inits {
        init_parts[index(&target)?].push(f);
    }
    let mut unsafe_parts: Vec<Vec<Formula>> = vec![Vec::new(); modes.len()];
    for (target, f) in unsafes {
        unsafe_parts[index(&target)?].push(f);
    }
    let mut out_modes = Vec::new();
    for (i, (mut m, _)) in modes.into_iter().enumerate() {
        let inits = std::mem::take(&mut init_parts[i]);
        m.init = if inits.is_empty() {
            Formula::False
        } else {
            Formula::and(inits)
        };
        let us = std::mem::take(&mut unsafe_parts[i]);
        m.unsafe_region = if us.is_empty() { None } else { Some(Formula::and(us)) };
        out_modes.push(m);
    }
    if out_modes.iter().all(|m| m.init == Formula::False) {
        return Err(ModelError::invalid(p.pos(), "no mode has an initial condition"));
    }
    Ok(HybridAutomaton {
        vars,
        modes: out_modes,
        jumps,
    })
}

fn require_vars(vars: &[StateVar], pos: Pos) -> Result<(), ModelError> {
    if vars.is_empty() {
        Err(ModelError::invalid(
            pos,
            "`vars` must be declared before modes, jumps and conditions",
        ))
    } else {
        Ok(())
    }
}

fn bound_value(p: &mut Parser, constants: &BTreeMap<String, Constant>) -> Result<f64, ModelError> {
    let pos = p.pos();
    let mut scope = Scope {
        constants,
        is_var: Some(&|_: &str| false),
        bound: Vec::new(),
    };
    let t = p.term(&mut scope)?;
    Ok(fold_constant(&t, pos)?.value)
}

fn state_formula(
    p: &mut Parser,
    vars: &[StateVar],
    constants: &BTreeMap<String, Constant>,
    primes: bool,
) -> Result<Formula, ModelError> {
    let pos = p.pos();
    let known: BTreeSet<String> = vars
        .iter()
        .flat_map(|v| {
            let mut names = vec![v.name.clone()];
            if primes {
                names.push(format!("{}'", v.name));
            }
            names
        })
        .collect();
    let is_var = |n: &str| known.contains(n);
    let mut scope = Scope {
        constants,
        is_var: Some(&is_var),
        bound: Vec::new(),
    };
    let f = p.formula(&mut scope)?;
    if !f.is_quantifier_free() {
        return Err(ModelError::invalid(pos, "model formulas must be quantifier-free"));
    }
    Ok(f)
}

fn parse_mode(
    p: &mut Parser,
    name: String,
    npos: Pos,
    vars: &[StateVar],
    constants: &BTreeMap<String, Constant>,
) -> Result<Mode, ModelError> {
    p.expect_sym("{")?;
    let mut flow: Vec<Option<Term>> = vec![None; vars.len()];
    let mut invariants = Vec::new();
    let mut saw_flow = false;
    while !p.eat_sym("}") {
        let (key, kpos) = p.expect_ident()?;
        match key.as_str() {
            "flow" => {
                if saw_flow {
                    return Err(ModelError::invalid(kpos, "duplicate `flow` block"));
                }
                saw_flow = true;
                p.expect_sym("{")?;
                while !p.eat_sym("}") {
                    let dpos = p.pos();
                    let (d, _) = p.expect_ident()?;
                    p.expect_sym("/")?;
                    let (dt, _) = p.expect_ident()?;
                    if d != "d" || dt != "dt" {
                        return Err(ModelError::invalid(dpos, "expected `d/dt[var]`"));
                    }
                    p.expect_sym("[")?;
                    let (v, vpos) = p.expect_ident()?;
                    p.expect_sym("]")?;
                    p.expect_sym("=")?;
                    let idx = vars
                        .iter()
                        .position(|s| s.name == v)
                        .ok_or_else(|| ModelError::invalid(vpos, format!("unknown variable `{v}`")))?;
                    if flow[idx].is_some() {
                        return Err(ModelError::invalid(vpos, format!("duplicate flow for `{v}`")));
                    }
                    let is_var = |n: &str| vars.iter().any(|s| s.name == n);
                    let mut scope = Scope {
                        constants,
                        is_var: Some(&is_var),
                        bound: Vec::new(),
                    };
                    flow[idx] = Some(p.term(&mut scope)?);
                    p.expect_sym(";")?;
                }
            }
            "inv" => {
                p.expect_sym(":")?;
                invariants.push(state_formula(p, vars, constants, false)?);
                p.expect_sym(";")?;
            }
            other => return Err(ModelError::invalid(kpos, format!("unknown mode field `{other}`"))),
        }
    }
    let mut rhs = Vec::with_capacity(vars.len());
    for (v, f) in vars.iter().zip(flow) {
        match f {
            Some(t) => rhs.push(t),
            None => {
                return Err(ModelError::invalid(
                    npos,
                    format!("mode `{name}` has no flow for `{}`", v.name),
                ))
            }
        }
    }
    Ok(Mode {
        name,
        flow: rhs,
        invariant: Formula::and(invariants),
        init: Formula::False,
        unsafe_region: None,
    })
}
