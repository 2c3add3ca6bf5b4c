//! Validated enclosures of ODE solutions and the flow contractor.
//!
//! Each integration step first proves an a-priori bound `B` on the
//! solution over `[t, t+h]` by interval Picard iteration
//! (`X + [0,h]·f(B) ⊆ B`), then tightens it with an interval Taylor
//! expansion of order `p` whose Lagrange remainder is evaluated over
//! `B`. Boxes are propagated directly, so there is no wrapping control;
//! rotating or stiff dynamics eventually blow up.

use serde::Serialize;
use thiserror::Error;

use crate::automaton::{HybridAutomaton, Mode};
use crate::expr::{Constraint, Op, Tape, Truth};
use crate::formula::{BinOp, FormulaError, Func, Term};
use crate::interval::{hull_vec, Interval};

/// An autonomous ODE `x' = f(x)` over named state variables.
#[derive(Clone, Debug)]
pub struct Ode {
    pub mode: String,
    pub vars: Vec<String>,
    rhs: Vec<Tape>,
    smooth: bool,
}

impl Ode {
    pub fn new(mode: impl Into<String>, vars: Vec<String>, rhs: &[Term]) -> Result<Ode, FormulaError> {
        let slot = |n: &str| vars.iter().position(|v| v == n);
        let tapes = rhs
            .iter()
            .map(|t| Tape::compile(t, &slot))
            .collect::<Result<Vec<_>, _>>()?;
        let smooth = !tapes.iter().any(Tape::has_nonsmooth);
        Ok(Ode {
            mode: mode.into(),
            vars,
            rhs: tapes,
            smooth,
        })
    }

    pub fn from_mode(h: &HybridAutomaton, mode: &Mode) -> Result<Ode, FormulaError> {
        Ode::new(mode.name.clone(), h.var_names(), &mode.flow)
    }

    /// The time-reversed system `x' = -f(x)`.
    pub fn reversed(&self) -> Ode {
        let rhs = self
            .rhs
            .iter()
            .map(|t| {
                let mut ops = t.ops.clone();
                let root = ops.len() - 1;
                ops.push(Op::Neg(root));
                Tape { ops }
            })
            .collect();
        Ode {
            mode: self.mode.clone(),
            vars: self.vars.clone(),
            rhs,
            smooth: self.smooth,
        }
    }

    pub fn dim(&self) -> usize {
        self.rhs.len()
    }

    pub fn eval(&self, x: &[Interval]) -> Vec<Interval> {
        self.rhs.iter().map(|t| t.eval(x)).collect()
    }

    pub fn eval_f64(&self, x: &[f64], out: &mut [f64]) {
        for (o, t) in out.iter_mut().zip(&self.rhs) {
            *o = t.eval_f64(x);
        }
    }

    /// Normalized Taylor coefficients `x_[0..=order]` of the solution
    /// through every point of `x`. `None` when a non-smooth function
    /// cannot be expanded on this box.
    pub fn taylor_coefficients(&self, x: &[Interval], order: usize) -> Option<Vec<Vec<Interval>>> {
        let n = self.dim();
        let mut coeffs: Vec<Vec<Interval>> = vec![x.to_vec()];
        let mut work: Vec<SeriesTape> = self.rhs.iter().map(|t| SeriesTape::new(t, order)).collect();
        for k in 0..order {
            let mut next = Vec::with_capacity(n);
            for w in work.iter_mut() {
                let fk = w.coefficient(k, &coeffs)?;
                next.push(fk.div(Interval::point((k + 1) as f64)));
            }
            coeffs.push(next);
        }
        Some(coeffs)
    }
}

/// Per-node Taylor series of one right-hand side, filled one order at a time.
struct SeriesTape<'a> {
    tape: &'a Tape,
    vals: Vec<Vec<Interval>>,
    aux: Vec<Vec<Interval>>,
    powers: Vec<Vec<Vec<Interval>>>,
}

fn sum(terms: impl Iterator<Item = Interval>) -> Interval {
    terms.fold(Interval::ZERO, |a, b| a + b)
}

impl<'a> SeriesTape<'a> {
    fn new(tape: &'a Tape, order: usize) -> Self {
        let n = tape.ops.len();
        SeriesTape {
            tape,
            vals: vec![Vec::with_capacity(order + 1); n],
            aux: vec![Vec::new(); n],
            powers: vec![Vec::new(); n],
        }
    }

    /// Coefficient `k` of the root, given the state coefficients `0..=k`.
    fn coefficient(&mut self, k: usize, state: &[Vec<Interval>]) -> Option<Interval> {
        for i in 0..self.tape.ops.len() {
            let c = self.node(i, k, state)?;
            self.vals[i].push(c);
        }
        self.vals.last().map(|v| v[k])
    }

    fn node(&mut self, i: usize, k: usize, state: &[Vec<Interval>]) -> Option<Interval> {
        let kk = Interval::point(k as f64);
        let v = &self.vals;
        Some(match self.tape.ops[i] {
            Op::Var(j) => state[k][j],
            Op::Const(c, _) => {
                if k == 0 {
                    c
                } else {
                    Interval::ZERO
                }
            }
            Op::Neg(a) => -v[a][k],
            Op::Bin(BinOp::Add, a, b) => v[a][k] + v[b][k],
            Op::Bin(BinOp::Sub, a, b) => v[a][k] - v[b][k],
            Op::Bin(BinOp::Mul, a, b) => {
                if k == 0 {
                    v[a][0] * v[b][0]
                } else {
                    sum((0..=k).map(|j| v[a][j] * v[b][k - j]))
                }
            }
            Op::Bin(BinOp::Div, a, b) => {
                if k == 0 {
                    v[a][0] / v[b][0]
                } else {
                    let s = sum((0..k).map(|j| v[i][j] * v[b][k - j]));
                    (v[a][k] - s) / v[b][0]
                }
            }
            Op::Bin(op @ (BinOp::Min | BinOp::Max), a, b) => {
                let (a0, b0) = (v[a][0], v[b][0]);
                if k == 0 {
                    op.apply(a0, b0)
                } else {
                    let a_below = a0.hi() < b0.lo();
                    let b_below = b0.hi() < a0.lo();
                    match (op, a_below, b_below) {
                        (BinOp::Min, true, _) | (BinOp::Max, _, true) => v[a][k],
                        (BinOp::Min, _, true) | (BinOp::Max, true, _) => v[b][k],
                        _ => return None,
                    }
                }
            }
            Op::Pow(a, n) => return self.pow_node(i, a, n, k),
            Op::Call(g, a) => {
                let av = &v[a];
                match g {
                    Func::Exp => {
                        if k == 0 {
                            av[0].exp()
                        } else {
                            sum((1..=k).map(|j| av[j].scale(j as f64) * v[i][k - j])).div(kk)
                        }
                    }
                    Func::Log => {
                        if k == 0 {
                            av[0].ln()
                        } else {
                            let s = sum((1..k).map(|j| v[i][j].scale(j as f64) * av[k - j])).div(kk);
                            (av[k] - s) / av[0]
                        }
                    }
                    Func::Sqrt => {
                        if k == 0 {
                            av[0].sqrt()
                        } else {
                            let s = sum((1..k).map(|j| v[i][j] * v[i][k - j]));
                            (av[k] - s) / v[i][0].scale(2.0)
                        }
                    }
                    Func::Abs => {
                        let a0 = av[0];
                        if k == 0 {
                            a0.abs()
                        } else if a0.lo() > 0.0 {
                            av[k]
                        } else if a0.hi() < 0.0 {
                            -av[k]
                        } else {
                            return None;
                        }
                    }
                    Func::Sin | Func::Cos => {
                        // vals holds the function itself, aux its companion
                        // (cos for sin, sin for cos)
                        let sign = if g == Func::Sin { 1.0 } else { -1.0 };
                        let (val, comp) = if k == 0 {
                            let (s, c) = (av[0].sin(), av[0].cos());
                            if g == Func::Sin {
                                (s, c)
                            } else {
                                (c, s)
                            }
                        } else {
                            let aux = &self.aux[i];
                            let val = sum((1..=k).map(|j| av[j].scale(j as f64) * aux[k - j]))
                                .div(kk)
                                .scale(sign);
                            let comp = sum((1..=k).map(|j| av[j].scale(j as f64) * v[i][k - j]))
                                .div(kk)
                                .scale(-sign);
                            (val, comp)
                        };
                        self.aux[i].push(comp);
                        val
                    }
                    Func::Tan => {
                        let val = if k == 0 {
                            av[0].tan()
                        } else {
                            let aux = &self.aux[i];
                            sum((1..=k).map(|j| av[j].scale(j as f64) * aux[k - j])).div(kk)
                        };
                        // aux = 1 + tan², needs coefficient k of tan first
                        let mut w: Vec<Interval> = v[i].clone();
                        w.push(val);
                        let q =
                            sum((0..=k).map(|j| w[j] * w[k - j])) + if k == 0 { Interval::ONE } else { Interval::ZERO };
                        self.aux[i].push(q);
                        val
                    }
                }
            }
        })
    }

    fn pow_node(&mut self, i: usize, a: usize, n: i32, k: usize) -> Option<Interval> {
        let m = n.unsigned_abs() as usize;
        let av = self.vals[a].clone();
        if n == 0 {
            return Some(if k == 0 { Interval::ONE } else { Interval::ZERO });
        }
        if m == 1 && n > 0 {
            return Some(av[k]);
        }
        // powers[i][p] holds the series of a^(p+2)
        if self.powers[i].is_empty() {
            self.powers[i] = vec![Vec::new(); m.saturating_sub(1)];
        }
        for p in 2..=m {
            let c = if k == 0 {
                av[0].powi(p as i32)
            } else {
                let prev: &[Interval] = if p == 2 { &av } else { &self.powers[i][p - 3] };
                sum((0..=k).map(|j| prev[j] * av[k - j]))
            };
            self.powers[i][p - 2].push(c);
        }
        let b: &[Interval] = if m == 1 { &av } else { &self.powers[i][m - 2] };
        if n > 0 {
            return Some(b[k]);
        }
        // reciprocal of b
        Some(if k == 0 {
            av[0].powi(n)
        } else {
            let w = &self.vals[i];
            let s = sum((0..k).map(|j| w[j] * b[k - j]));
            (-s) / b[0]
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnclosureOptions {
    /// Taylor order of each step.
    pub order: usize,
    /// Maximum step length as a fraction of the horizon.
    pub cells_per_horizon: usize,
    /// Number of cells the duration window `[T.lo, T.hi]` is split into.
    pub cells_per_window: usize,
    pub max_steps: usize,
    /// Remainder width accepted per step without shrinking the step.
    pub step_tolerance: f64,
    /// Width at which an enclosure without a state domain counts as blown up.
    pub blowup_width: f64,
}

impl Default for EnclosureOptions {
    fn default() -> Self {
        EnclosureOptions {
            order: 10,
            cells_per_horizon: 32,
            cells_per_window: 16,
            max_steps: 4000,
            step_tolerance: 1e-10,
            blowup_width: 1e6,
        }
    }
}

#[derive(Debug, Error, Clone, Copy, PartialEq)]
#[error("enclosure blew up at t = {reached}")]
pub struct BlowUp {
    /// Time up to which a valid enclosure was obtained.
    pub reached: f64,
}

/// Constraints every trajectory of interest satisfies at all times:
/// the mode invariant and the global state domain.
#[derive(Clone, Copy, Default)]
pub struct FlowContext<'a> {
    pub invariant: Option<&'a Constraint>,
    pub domain: Option<&'a [Interval]>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Cell {
    pub time: Interval,
    pub state: Vec<Interval>,
}

/// A tube of boxes over a time grid `0 = s_0 < … < s_m`.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowEnclosure {
    pub mode: String,
    /// Box valid for every time in its cell.
    pub cells: Vec<Cell>,
    /// Box valid at each grid time.
    pub points: Vec<(f64, Vec<Interval>)>,
    /// The duration window the enclosure was computed for.
    pub window: Interval,
    /// Durations beyond this are infeasible: some grid cell certainly
    /// leaves the invariant or the state domain.
    pub cutoff: Option<f64>,
    /// States reachable at durations in `window` (below the cutoff).
    pub end: Vec<Interval>,
}

impl FlowEnclosure {
    pub fn is_empty(&self) -> bool {
        self.end.iter().any(|v| v.is_empty())
    }

    /// Upper end of the feasible part of the window.
    pub fn feasible_hi(&self) -> f64 {
        match self.cutoff {
            Some(c) => c.min(self.window.hi()),
            None => self.window.hi(),
        }
    }

    fn window_cells(&self) -> impl Iterator<Item = &Cell> {
        let (lo, hi) = (self.window.lo(), self.feasible_hi());
        self.cells.iter().filter(move |c| c.time.hi() > lo && c.time.lo() < hi)
    }

    fn point_at(&self, t: f64) -> Option<&Vec<Interval>> {
        self.points.iter().find(|(s, _)| *s == t).map(|(_, b)| b)
    }

    /// Durations in the window at which the tube may meet `target`, and
    /// the part of `target` the tube may meet.
    pub fn meet(&self, target: &[Interval]) -> (Interval, Vec<Interval>) {
        let n = target.len();
        let mut times = Interval::EMPTY;
        let mut states = vec![Interval::EMPTY; n];
        let mut add = |t: Interval, b: &[Interval]| {
            let m: Vec<Interval> = b.iter().zip(target).map(|(x, y)| x.intersect(*y)).collect();
            if m.iter().all(|v| !v.is_empty()) {
                times = times.hull(t);
                for (s, v) in states.iter_mut().zip(m) {
                    *s = s.hull(v);
                }
            }
        };
        let hi = self.feasible_hi();
        if self.window.lo() <= hi {
            for t in [self.window.lo(), hi] {
                if let Some(b) = self.point_at(t) {
                    add(Interval::point(t), b);
                }
            }
            for c in self.window_cells() {
                add(c.time.intersect(Interval::new(self.window.lo(), hi)), &c.state);
            }
        }
        (times, states)
    }
}

enum StepError {
    Picard,
}

struct Step {
    cell: Vec<Interval>,
    end: Vec<Interval>,
}

fn a_priori(ode: &Ode, x: &[Interval], h: f64) -> Result<Vec<Interval>, StepError> {
    let hiv = Interval::new(0.0, h);
    let fx = ode.eval(x);
    let mut b: Vec<Interval> = x
        .iter()
        .zip(&fx)
        .map(|(xi, fi)| {
            let v = *xi + hiv * *fi;
            v.inflate(0.1 * v.width() + 1e-12 * (1.0 + v.mag()))
        })
        .collect();
    for _ in 0..8 {
        let fb = ode.eval(&b);
        let nb: Vec<Interval> = x.iter().zip(&fb).map(|(xi, fi)| *xi + hiv * *fi).collect();
        if nb.iter().any(|v| !v.is_bounded()) {
            return Err(StepError::Picard);
        }
        if nb.iter().zip(&b).all(|(p, q)| p.subset(*q)) {
            return Ok(nb);
        }
        b = b
            .iter()
            .zip(&nb)
            .map(|(p, q)| {
                let u = p.hull(*q);
                u.inflate(0.5 * u.width() + 1e-12 * (1.0 + u.mag()))
            })
            .collect();
    }
    Err(StepError::Picard)
}

/// `Σ_{i<p} c_i τ^i + r τ^p` for `τ ∈ tau`.
fn taylor_eval(coeffs: &[Vec<Interval>], rem: &[Interval], tau: Interval) -> Vec<Interval> {
    let p = coeffs.len();
    let mut powers = Vec::with_capacity(p + 1);
    let mut acc = Interval::ONE;
    for _ in 0..=p {
        powers.push(acc);
        acc = acc * tau;
    }
    (0..rem.len())
        .map(|j| {
            let mut s = Interval::ZERO;
            for (i, c) in coeffs.iter().enumerate() {
                s = s + c[j] * powers[i];
            }
            s + rem[j] * powers[p]
        })
        .collect()
}

fn take_step(ode: &Ode, x: &[Interval], h: f64, opts: &EnclosureOptions) -> Result<(Step, f64), StepError> {
    let b = a_priori(ode, x, h)?;
    let order = if ode.smooth { opts.order.max(1) } else { 1 };
    let series = if order > 1 {
        match (
            ode.taylor_coefficients(x, order - 1),
            ode.taylor_coefficients(&b, order),
        ) {
            (Some(cx), Some(cb)) => Some((cx, cb[order].clone())),
            _ => None,
        }
    } else {
        None
    };
    let (coeffs, rem) = match series {
        Some(s) => s,
        None => (vec![x.to_vec()], ode.eval(&b)),
    };
    let hp = Interval::point(h);
    let end = taylor_eval(&coeffs, &rem, hp);
    let cell = taylor_eval(&coeffs, &rem, Interval::new(0.0, h));
    let cell: Vec<Interval> = cell.iter().zip(&b).map(|(c, bb)| c.intersect(*bb)).collect();
    let end: Vec<Interval> = end.iter().zip(&cell).map(|(e, c)| e.intersect(*c)).collect();
    let rem_width = rem
        .iter()
        .map(|r| (*r * hp.powi(coeffs.len() as i32)).width())
        .fold(0.0, f64::max);
    Ok((Step { cell, end }, rem_width))
}

fn certainly_outside(ctx: &FlowContext, b: &[Interval]) -> bool {
    if let Some(dom) = ctx.domain {
        if b.iter().zip(dom).any(|(x, d)| !x.overlaps(*d)) {
            return true;
        }
    }
    if let Some(inv) = ctx.invariant {
        if inv.truth(b, Interval::ZERO) == Truth::False {
            return true;
        }
    }
    false
}

/// Narrow a box to the domain and invariant. Valid for trajectories
/// still alive at that time.
fn restrict(ctx: &FlowContext, b: &mut [Interval]) -> bool {
    if let Some(dom) = ctx.domain {
        for (x, d) in b.iter_mut().zip(dom) {
            *x = x.intersect(*d);
            if x.is_empty() {
                return false;
            }
        }
    }
    if let Some(inv) = ctx.invariant {
        if !inv.contract(b) {
            return false;
        }
    }
    true
}

fn saturates(ctx: &FlowContext, b: &[Interval], opts: &EnclosureOptions) -> bool {
    match ctx.domain {
        Some(dom) => b
            .iter()
            .zip(dom)
            .any(|(x, d)| d.width() > 0.0 && x.width() >= d.width()),
        None => b.iter().any(|x| !x.is_bounded() || x.width() > opts.blowup_width),
    }
}

/// Enclose all solutions of `ode` from `x0` for every duration in
/// `window`, without any side constraints.
pub fn enclose_flow(
    ode: &Ode,
    x0: &[Interval],
    window: Interval,
    opts: &EnclosureOptions,
) -> Result<FlowEnclosure, BlowUp> {
    enclose_constrained(ode, x0, window, &FlowContext::default(), opts)
}

/// Enclose the solutions of `ode` from `x0` whose whole trajectory over
/// `[0, duration]` stays inside the context constraints.
pub fn enclose_constrained(
    ode: &Ode,
    x0: &[Interval],
    window: Interval,
    ctx: &FlowContext,
    opts: &EnclosureOptions,
) -> Result<FlowEnclosure, BlowUp> {
    let n = ode.dim();
    assert_eq!(x0.len(), n, "initial box dimension");
    let window = window.intersect(Interval::new(0.0, f64::INFINITY));
    let mut enc = FlowEnclosure {
        mode: ode.mode.clone(),
        cells: Vec::new(),
        points: Vec::new(),
        window,
        cutoff: None,
        end: vec![Interval::EMPTY; n],
    };
    if window.is_empty() || x0.iter().any(|v| v.is_empty()) {
        return Ok(enc);
    }
    let mut x = x0.to_vec();
    if certainly_outside(ctx, &x) || !restrict(ctx, &mut x) {
        enc.cutoff = Some(0.0);
        enc.finish();
        return Ok(enc);
    }
    let horizon = window.hi();
    if !horizon.is_finite() {
        return Err(BlowUp { reached: 0.0 });
    }
    enc.points.push((0.0, x.clone()));
    enc.cells.push(Cell {
        time: Interval::point(0.0),
        state: x.clone(),
    });
    let h_global = horizon / opts.cells_per_horizon.max(1) as f64;
    let h_window = if window.width() > 0.0 {
        window.width() / opts.cells_per_window.max(1) as f64
    } else {
        h_global
    };
    let h_min = 1e-12 * horizon.max(1.0);
    let mut t = 0.0f64;
    let mut h = h_global.min(h_window);
    let mut steps = 0usize;
    while t < horizon {
        steps += 1;
        if steps > opts.max_steps {
            return Err(BlowUp { reached: t });
        }
        let in_window = t >= window.lo();
        let h_cap = if in_window { h_window.min(h_global) } else { h_global };
        let stop = if in_window { horizon } else { window.lo() };
        let mut step_len = h.min(h_cap).min(stop - t);
        // land exactly on the breakpoint when close
        if stop - (t + step_len) < 1e-3 * step_len {
            step_len = stop - t;
        }
        let (step, next_t) = loop {
            let t1 = if step_len == stop - t { stop } else { t + step_len };
            let len = t1 - t;
            match take_step(ode, &x, len, opts) {
                Ok((s, rem_w)) => {
                    let poly_w = s.end.iter().map(|v| v.width()).fold(0.0, f64::max);
                    if rem_w > opts.step_tolerance.max(0.05 * poly_w) && len > 64.0 * h_min {
                        step_len = len * 0.5;
                        continue;
                    }
                    break (s, t1);
                }
                Err(StepError::Picard) => {
                    step_len *= 0.5;
                    if step_len < h_min {
                        return Err(BlowUp { reached: t });
                    }
                }
            }
        };
        let mut cell = step.cell;
        let mut end = step.end;
        if certainly_outside(ctx, &cell) || !restrict(ctx, &mut cell) {
            enc.cutoff = Some(t);
            break;
        }
        if certainly_outside(ctx, &end) || !restrict(ctx, &mut end) {
            // alive trajectories end before t1; the cell stays valid up to it
            enc.cells.push(Cell {
                time: Interval::new(t, next_t),
                state: cell,
            });
            enc.cutoff = Some(next_t);
            break;
        }
        for (e, c) in end.iter_mut().zip(&cell) {
            *e = e.intersect(*c);
        }
        if saturates(ctx, &end, opts) {
            return Err(BlowUp { reached: t });
        }
        let grew = next_t - t >= h.min(h_cap) * 0.999;
        enc.cells.push(Cell {
            time: Interval::new(t, next_t),
            state: cell,
        });
        enc.points.push((next_t, end.clone()));
        x = end;
        t = next_t;
        if grew {
            h = (h * 2.0).min(h_global);
        } else {
            h = step_len.max(h_min);
        }
    }
    enc.finish();
    Ok(enc)
}

impl FlowEnclosure {
    fn finish(&mut self) {
        let n = self.end.len();
        let lo = self.window.lo();
        let hi = self.feasible_hi();
        if lo > hi {
            self.end = vec![Interval::EMPTY; n];
            return;
        }
        let mut end = vec![Interval::EMPTY; n];
        if lo == hi {
            if let Some(b) = self.point_at(lo) {
                end = b.clone();
            } else if let Some(c) = self.cells.iter().find(|c| c.time.contains(lo)) {
                end = c.state.clone();
            }
        } else {
            for c in self.window_cells() {
                end = hull_vec(&end, &c.state);
            }
            for t in [lo, hi] {
                if let Some(b) = self.point_at(t) {
                    end = hull_vec(&end, b);
                }
            }
        }
        self.end = end;
    }
}

/// Outcome of checking an invariant along a tube.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum InvariantCheck {
    CertainlyHolds,
    CertainlyViolated,
    Unknown,
}

/// Check `inv` on every cell of the tube: holds when every cell certifies
/// it, violated when some cell refutes even its δ-weakening.
pub fn check_invariant_along(enc: &FlowEnclosure, inv: &Constraint, delta: f64) -> InvariantCheck {
    let weaken = Interval::enclosing_decimal(delta);
    let mut all_hold = true;
    for c in &enc.cells {
        if c.time.lo() > enc.feasible_hi() {
            break;
        }
        if inv.truth(&c.state, weaken) == Truth::False {
            return InvariantCheck::CertainlyViolated;
        }
        if all_hold && inv.truth(&c.state, Interval::ZERO) != Truth::True {
            all_hold = false;
        }
    }
    if all_hold {
        InvariantCheck::CertainlyHolds
    } else {
        InvariantCheck::Unknown
    }
}

/// Result of one application of the flow contractor.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowPrune {
    pub x0: Vec<Interval>,
    pub xt: Vec<Interval>,
    pub duration: Interval,
    /// The forward or backward enclosure blew up; the corresponding
    /// direction left its inputs unchanged.
    pub blew_up: bool,
}

impl FlowPrune {
    pub fn is_empty(&self) -> bool {
        self.duration.is_empty() || self.x0.iter().any(|v| v.is_empty()) || self.xt.iter().any(|v| v.is_empty())
    }
}

/// Contract `(x0, xt, duration)` for the relation "some solution from
/// `x0` reaches `xt` after `duration`, staying within the context".
pub fn prune_flow(
    ode: &Ode,
    reversed: &Ode,
    x0: &[Interval],
    xt: &[Interval],
    duration: Interval,
    ctx: &FlowContext,
    opts: &EnclosureOptions,
) -> FlowPrune {
    let n = x0.len();
    let empty = || FlowPrune {
        x0: vec![Interval::EMPTY; n],
        xt: vec![Interval::EMPTY; n],
        duration: Interval::EMPTY,
        blew_up: false,
    };
    let mut out = FlowPrune {
        x0: x0.to_vec(),
        xt: xt.to_vec(),
        duration,
        blew_up: false,
    };
    if out.is_empty() {
        return empty();
    }
    match enclose_constrained(ode, x0, duration, ctx, opts) {
        Ok(enc) => {
            let (times, states) = enc.meet(xt);
            if times.is_empty() {
                return empty();
            }
            out.duration = out.duration.intersect(times);
            out.xt = states;
        }
        Err(_) => out.blew_up = true,
    }
    if out.is_empty() {
        return empty();
    }
    match enclose_constrained(reversed, &out.xt, out.duration, ctx, opts) {
        Ok(enc) => {
            let (times, states) = enc.meet(&out.x0);
            if times.is_empty() {
                return empty();
            }
            out.duration = out.duration.intersect(times);
            out.x0 = states;
        }
        Err(_) => out.blew_up = true,
    }
    if out.is_empty() {
        return empty();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_term;

    fn ode(vars: &[&str], rhs: &[&str]) -> Ode {
        let terms: Vec<Term> = rhs.iter().map(|s| parse_term(s).unwrap()).collect();
        Ode::new("m", vars.iter().map(|s| s.to_string()).collect(), &terms).unwrap()
    }

    fn pt(v: f64) -> Interval {
        Interval::point(v)
    }

    #[test]
    fn constant_solution() {
        let o = ode(&["x"], &["0"]);
        let e = enclose_flow(&o, &[pt(1.0)], pt(1.0), &EnclosureOptions::default()).unwrap();
        assert!(e.end[0].contains(1.0));
        assert!(e.end[0].width() <= 1e-12);
    }

    #[test]
    fn linear_solution() {
        let o = ode(&["x"], &["1"]);
        let e = enclose_flow(&o, &[pt(0.0)], pt(2.0), &EnclosureOptions::default()).unwrap();
        assert!(e.end[0].contains(2.0));
        assert!(e.end[0].width() <= 1e-9, "{}", e.end[0]);
    }

    #[test]
    fn free_fall_closed_form() {
        let o = ode(&["x", "v"], &["v", "-9.8"]);
        let e = enclose_flow(&o, &[pt(10.0), pt(0.0)], pt(1.0), &EnclosureOptions::default()).unwrap();
        assert!(e.end[0].contains(5.1), "{:?}", e.end);
        assert!(e.end[1].contains(-9.8));
        assert!(e.end[0].width() < 1e-9);
    }

    #[test]
    fn taylor_coefficients_of_exponential() {
        // x' = x from x=1: coefficients 1/k!
        let o = ode(&["x"], &["x"]);
        let c = o.taylor_coefficients(&[pt(1.0)], 6).unwrap();
        let mut fact = 1.0;
        for (k, ck) in c.iter().enumerate() {
            if k > 0 {
                fact *= k as f64;
            }
            assert!(ck[0].contains(1.0 / fact), "k={k} {}", ck[0]);
        }
    }

    #[test]
    fn taylor_coefficients_of_transcendentals() {
        // x' = cos(x) - sin(x)/2 + exp(-x) + sqrt(x) + x^3 / (1 + x^2) + tan(x/4);
        // compare against finite differences of a reference integration
        let rhs = "cos(x) - sin(x)/2 + exp(-x) + sqrt(x) + x^3 / (1 + x^2) + tan(x/4) + log(x)";
        let o = ode(&["x"], &[rhs]);
        let c = o.taylor_coefficients(&[pt(1.0)], 3).unwrap();
        let f = |x: f64| {
            x.cos() - x.sin() / 2.0 + (-x).exp() + x.sqrt() + x.powi(3) / (1.0 + x * x) + (x / 4.0).tan() + x.ln()
        };
        let h = 1e-5;
        let d1 = f(1.0);
        // x'' = f'(x) x'
        let fp = (f(1.0 + h) - f(1.0 - h)) / (2.0 * h);
        assert!((c[1][0].mid() - d1).abs() < 1e-12);
        assert!(
            (c[2][0].mid() - fp * d1 / 2.0).abs() < 1e-6,
            "{} vs {}",
            c[2][0],
            fp * d1 / 2.0
        );
    }

    #[test]
    fn invariant_checks_on_falling_ball() {
        let o = ode(&["x", "v"], &["v", "-9.8"]);
        let e = enclose_flow(&o, &[pt(10.0), pt(0.0)], pt(1.0), &EnclosureOptions::default()).unwrap();
        let slot = |n: &str| ["x", "v"].iter().position(|v| *v == n);
        let c = |s: &str| {
            Constraint::compile(&crate::parse::parse_formula(s).unwrap(), &slot)
                .unwrap()
                .unwrap()
        };
        assert_eq!(
            check_invariant_along(&e, &c("true"), 0.01),
            InvariantCheck::CertainlyHolds
        );
        assert_eq!(
            check_invariant_along(&e, &c("x >= 0"), 0.01),
            InvariantCheck::CertainlyHolds
        );
        assert_eq!(
            check_invariant_along(&e, &c("x >= 20"), 0.01),
            InvariantCheck::CertainlyViolated
        );
        assert_eq!(check_invariant_along(&e, &c("x >= 5.1"), 0.01), InvariantCheck::Unknown);
    }

    #[test]
    fn prune_time_for_unit_speed() {
        let o = ode(&["x"], &["1"]);
        let r = o.reversed();
        let p = prune_flow(
            &o,
            &r,
            &[pt(0.0)],
            &[Interval::new(5.0, 6.0)],
            Interval::new(0.0, 10.0),
            &FlowContext::default(),
            &EnclosureOptions::default(),
        );
        assert!(p.duration.subset(Interval::new(4.9, 6.1)), "{}", p.duration);
        assert!(Interval::new(5.0, 6.0).subset(p.duration));
        // idempotent up to rounding
        let q = prune_flow(
            &o,
            &r,
            &p.x0,
            &p.xt,
            p.duration,
            &FlowContext::default(),
            &EnclosureOptions::default(),
        );
        assert!((q.duration.width() - p.duration.width()).abs() < 1e-9 + 0.02 * p.duration.width());
    }

    #[test]
    fn prune_refutes_unreachable_target() {
        let o = ode(&["x"], &["1"]);
        let p = prune_flow(
            &o,
            &o.reversed(),
            &[pt(0.0)],
            &[Interval::new(20.0, 30.0)],
            Interval::new(0.0, 10.0),
            &FlowContext::default(),
            &EnclosureOptions::default(),
        );
        assert!(p.is_empty());
    }

    #[test]
    fn invariant_cutoff_limits_duration() {
        // falling from 10 with invariant x >= 0: durations past ~1.43 are infeasible
        let o = ode(&["x", "v"], &["v", "-9.8"]);
        let slot = |n: &str| ["x", "v"].iter().position(|v| *v == n);
        let inv = Constraint::compile(&crate::parse::parse_formula("x >= 0").unwrap(), &slot)
            .unwrap()
            .unwrap();
        let ctx = FlowContext {
            invariant: Some(&inv),
            domain: None,
        };
        let e = enclose_constrained(
            &o,
            &[pt(10.0), pt(0.0)],
            Interval::new(0.0, 5.0),
            &ctx,
            &EnclosureOptions::default(),
        )
        .unwrap();
        let crossing = (2.0 * 10.0 / 9.8f64).sqrt();
        let cut = e.cutoff.expect("cutoff");
        assert!(cut >= crossing && cut < crossing + 0.5, "cutoff {cut}");
    }
}
