//! Flat, index-addressed forms of terms and quantifier-free formulas.
//!
//! A [`Tape`] is a term in post-order with variables resolved to slots
//! of an interval vector. It supports interval evaluation, floating
//! point evaluation and forward-backward (HC4) contraction.

use crate::formula::{BinOp, Formula, FormulaError, Func, Rel, Term};
use crate::interval::Interval;

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum Op {
    Var(usize),
    Const(Interval, f64),
    Neg(usize),
    Bin(BinOp, usize, usize),
    Pow(usize, i32),
    Call(Func, usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tape {
    pub(crate) ops: Vec<Op>,
}

impl Tape {
    /// Compile `term`, resolving each variable through `slot`.
    pub fn compile(term: &Term, slot: &dyn Fn(&str) -> Option<usize>) -> Result<Tape, FormulaError> {
        let mut ops = Vec::new();
        push_term(term, slot, &mut ops)?;
        Ok(Tape { ops })
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// Whether the term uses a function without continuous derivatives
    /// of every order (`abs`, `min`, `max`).
    pub fn has_nonsmooth(&self) -> bool {
        self.ops
            .iter()
            .any(|op| matches!(op, Op::Call(Func::Abs, _) | Op::Bin(BinOp::Min | BinOp::Max, _, _)))
    }

    pub fn eval(&self, x: &[Interval]) -> Interval {
        let mut scratch = Vec::with_capacity(self.ops.len());
        self.forward(x, &mut scratch);
        *scratch.last().unwrap()
    }

    pub fn eval_f64(&self, x: &[f64]) -> f64 {
        let mut v: Vec<f64> = Vec::with_capacity(self.ops.len());
        for op in &self.ops {
            let r = match *op {
                Op::Var(i) => x[i],
                Op::Const(_, c) => c,
                Op::Neg(a) => -v[a],
                Op::Bin(o, a, b) => o.apply_f64(v[a], v[b]),
                Op::Pow(a, n) => v[a].powi(n),
                Op::Call(g, a) => g.apply_f64(v[a]),
            };
            v.push(r);
        }
        *v.last().unwrap()
    }

    fn forward(&self, x: &[Interval], vals: &mut Vec<Interval>) {
        vals.clear();
        for op in &self.ops {
            let r = match *op {
                Op::Var(i) => x[i],
                Op::Const(c, _) => c,
                Op::Neg(a) => -vals[a],
                Op::Bin(o, a, b) => o.apply(vals[a], vals[b]),
                Op::Pow(a, n) => vals[a].powi(n),
                Op::Call(g, a) => g.apply(vals[a]),
            };
            vals.push(r);
        }
    }

    /// HC4-revise: narrow `x` to points where the term's value can lie in
    /// `target`. Returns `false` when the box is proven empty.
    pub fn contract(&self, x: &mut [Interval], target: Interval) -> bool {
        let mut vals = Vec::with_capacity(self.ops.len());
        self.forward(x, &mut vals);
        let root = vals.len() - 1;
        vals[root] = vals[root].intersect(target);
        if vals[root].is_empty() {
            return false;
        }
        for i in (0..self.ops.len()).rev() {
            let z = vals[i];
            if z.is_empty() {
                return false;
            }
            match self.ops[i] {
                Op::Var(k) => {
                    x[k] = x[k].intersect(z);
                    if x[k].is_empty() {
                        return false;
                    }
                }
                Op::Const(c, _) => {
                    if !c.overlaps(z) {
                        return false;
                    }
                }
                Op::Neg(a) => {
                    if !narrow(&mut vals, a, -z) {
                        return false;
                    }
                }
                Op::Bin(o, a, b) => {
                    let (va, vb) = (vals[a], vals[b]);
                    let (na, nb) = match o {
                        BinOp::Add => (z - vb, z - va),
                        BinOp::Sub => (z + vb, va - z),
                        BinOp::Mul => (
                            if vb.contains_zero() { Interval::ENTIRE } else { z / vb },
                            if va.contains_zero() { Interval::ENTIRE } else { z / va },
                        ),
                        BinOp::Div => (z * vb, if z.contains_zero() { Interval::ENTIRE } else { va / z }),
                        BinOp::Min => (
                            Interval::new(z.lo(), f64::INFINITY),
                            Interval::new(z.lo(), f64::INFINITY),
                        ),
                        BinOp::Max => (
                            Interval::new(f64::NEG_INFINITY, z.hi()),
                            Interval::new(f64::NEG_INFINITY, z.hi()),
                        ),
                    };
                    if !narrow(&mut vals, a, na) || !narrow(&mut vals, b, nb) {
                        return false;
                    }
                }
                Op::Pow(a, n) => {
                    let va = vals[a];
                    let na = pow_inverse(z, n, va);
                    if !narrow(&mut vals, a, na) {
                        return false;
                    }
                }
                Op::Call(g, a) => {
                    let va = vals[a];
                    let na = match g {
                        Func::Exp => z.intersect(Interval::new(0.0, f64::INFINITY)).ln(),
                        Func::Log => z.exp().intersect(Interval::new(0.0, f64::INFINITY)),
                        Func::Sqrt => {
                            let zz = z.intersect(Interval::new(0.0, f64::INFINITY));
                            zz.sqr()
                        }
                        Func::Abs => {
                            let zz = z.intersect(Interval::new(0.0, f64::INFINITY));
                            let pos = va.intersect(zz);
                            let neg = va.intersect(-zz);
                            pos.hull(neg)
                        }
                        Func::Sin | Func::Cos | Func::Tan => va,
                    };
                    if !narrow(&mut vals, a, na) {
                        return false;
                    }
                }
            }
        }
        true
    }
}

fn narrow(vals: &mut [Interval], i: usize, v: Interval) -> bool {
    vals[i] = vals[i].intersect(v);
    !vals[i].is_empty()
}

/// Preimage of `z` under `x ↦ x^n`, intersected with `x`.
fn pow_inverse(z: Interval, n: i32, x: Interval) -> Interval {
    if n == 0 {
        return if z.contains(1.0) { x } else { Interval::EMPTY };
    }
    if n < 0 {
        // x^n = 1 / x^{-n}; invert only when z is sign-definite
        if z.contains_zero() {
            return x;
        }
        return pow_inverse(z.recip(), -n, x);
    }
    if n == 1 {
        return x.intersect(z);
    }
    let root = |v: f64, upward: bool| -> f64 {
        let r = v.abs().powf(1.0 / n as f64);
        // powf is not correctly rounded; widen by a few ulps
        let r = if upward {
            r.next_up().next_up().next_up()
        } else {
            r.next_down().next_down().next_down().max(0.0)
        };
        if v.is_infinite() {
            f64::INFINITY
        } else {
            r
        }
    };
    if n % 2 == 1 {
        let lo = if z.lo() >= 0.0 {
            root(z.lo(), false)
        } else {
            -root(z.lo(), true)
        };
        let hi = if z.hi() >= 0.0 {
            root(z.hi(), true)
        } else {
            -root(z.hi(), false)
        };
        return x.intersect(Interval::new(lo, hi));
    }
    let zz = z.intersect(Interval::new(0.0, f64::INFINITY));
    if zz.is_empty() {
        return Interval::EMPTY;
    }
    let inner = if zz.lo() > 0.0 { root(zz.lo(), false) } else { 0.0 };
    let outer = root(zz.hi(), true);
    let pos = x.intersect(Interval::new(inner, outer));
    let neg = x.intersect(Interval::new(-outer, -inner));
    pos.hull(neg)
}

fn push_term(term: &Term, slot: &dyn Fn(&str) -> Option<usize>, ops: &mut Vec<Op>) -> Result<usize, FormulaError> {
    let op = match term {
        Term::Var(v) => Op::Var(slot(v).ok_or_else(|| FormulaError::UnboundVariable(v.clone()))?),
        Term::Const(c) => Op::Const(c.enclosure, c.value),
        Term::Neg(a) => Op::Neg(push_term(a, slot, ops)?),
        Term::Pow(a, n) => Op::Pow(push_term(a, slot, ops)?, *n),
        Term::Call(g, a) => Op::Call(*g, push_term(a, slot, ops)?),
        Term::Binary(o, a, b) => {
            let ia = push_term(a, slot, ops)?;
            let ib = push_term(b, slot, ops)?;
            Op::Bin(*o, ia, ib)
        }
    };
    ops.push(op);
    Ok(ops.len() - 1)
}

/// Three-valued truth of a formula over a box.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Truth {
    /// Holds at every point of the box.
    True,
    /// Fails at every point of the box.
    False,
    Unknown,
}

impl Truth {
    fn and(self, other: Truth) -> Truth {
        match (self, other) {
            (Truth::False, _) | (_, Truth::False) => Truth::False,
            (Truth::True, Truth::True) => Truth::True,
            _ => Truth::Unknown,
        }
    }

    fn or(self, other: Truth) -> Truth {
        match (self, other) {
            (Truth::True, _) | (_, Truth::True) => Truth::True,
            (Truth::False, Truth::False) => Truth::False,
            _ => Truth::Unknown,
        }
    }
}

/// A compiled quantifier-free formula.
#[derive(Clone, Debug, PartialEq)]
pub enum Constraint {
    True,
    False,
    Atom(Tape, Rel),
    And(Vec<Constraint>),
    Or(Vec<Constraint>),
}

impl Constraint {
    /// Compile a quantifier-free formula. Quantified sub-formulas are
    /// rejected by returning `None`.
    pub fn compile(f: &Formula, slot: &dyn Fn(&str) -> Option<usize>) -> Result<Option<Constraint>, FormulaError> {
        Ok(Some(match f {
            Formula::True => Constraint::True,
            Formula::False => Constraint::False,
            Formula::Atom(a) => Constraint::Atom(Tape::compile(&a.term, slot)?, a.rel),
            Formula::And(fs) => {
                let mut parts = Vec::with_capacity(fs.len());
                for g in fs {
                    match Constraint::compile(g, slot)? {
                        Some(c) => parts.push(c),
                        None => return Ok(None),
                    }
                }
                Constraint::And(parts)
            }
            Formula::Or(fs) => {
                let mut parts = Vec::with_capacity(fs.len());
                for g in fs {
                    match Constraint::compile(g, slot)? {
                        Some(c) => parts.push(c),
                        None => return Ok(None),
                    }
                }
                Constraint::Or(parts)
            }
            Formula::Exists(_) | Formula::Forall(_) => return Ok(None),
        }))
    }

    /// Truth of the δ-weakened formula over the box `x` (every atom's
    /// term shifted by `weaken`, an enclosure of δ; pass ZERO for the
    /// formula itself).
    pub fn truth(&self, x: &[Interval], weaken: Interval) -> Truth {
        match self {
            Constraint::True => Truth::True,
            Constraint::False => Truth::False,
            Constraint::Atom(t, rel) => {
                let v = t.eval(x) + weaken;
                if v.is_empty() {
                    // undefined everywhere on the box
                    return Truth::False;
                }
                match rel {
                    Rel::Gt if v.lo() > 0.0 => Truth::True,
                    Rel::Gt if v.hi() <= 0.0 => Truth::False,
                    Rel::Ge if v.lo() >= 0.0 => Truth::True,
                    Rel::Ge if v.hi() < 0.0 => Truth::False,
                    _ => Truth::Unknown,
                }
            }
            Constraint::And(cs) => cs.iter().fold(Truth::True, |acc, c| {
                if acc == Truth::False {
                    acc
                } else {
                    acc.and(c.truth(x, weaken))
                }
            }),
            Constraint::Or(cs) => cs.iter().fold(Truth::False, |acc, c| {
                if acc == Truth::True {
                    acc
                } else {
                    acc.or(c.truth(x, weaken))
                }
            }),
        }
    }

    /// Smallest certified margin `lo(t) + δ` over the atoms that make the
    /// weakened formula true at `x`; `None` when not certified.
    pub fn margin(&self, x: &[Interval], weaken: Interval) -> Option<f64> {
        match self {
            Constraint::True => Some(f64::INFINITY),
            Constraint::False => None,
            Constraint::Atom(..) => {
                if self.truth(x, weaken) == Truth::True {
                    if let Constraint::Atom(t, _) = self {
                        return Some((t.eval(x) + weaken).lo());
                    }
                }
                None
            }
            Constraint::And(cs) => cs
                .iter()
                .try_fold(f64::INFINITY, |m, c| c.margin(x, weaken).map(|v| m.min(v))),
            Constraint::Or(cs) => cs.iter().filter_map(|c| c.margin(x, weaken)).reduce(f64::max),
        }
    }

    /// Contract `x` to the points that may satisfy the formula. A
    /// disjunction contracts to the hull of its contracted branches.
    /// Returns `false` when the box is proven empty.
    pub fn contract(&self, x: &mut [Interval]) -> bool {
        match self {
            Constraint::True => true,
            Constraint::False => false,
            Constraint::Atom(t, rel) => {
                let target = match rel {
                    Rel::Ge => Interval::new(0.0, f64::INFINITY),
                    Rel::Gt => {
                        if t.eval(x).hi() <= 0.0 {
                            return false;
                        }
                        Interval::new(0.0, f64::INFINITY)
                    }
                };
                t.contract(x, target)
            }
            Constraint::And(cs) => cs.iter().all(|c| c.contract(x)),
            Constraint::Or(cs) => {
                let mut acc: Option<Vec<Interval>> = None;
                for c in cs {
                    let mut y = x.to_vec();
                    if c.contract(&mut y) {
                        acc = Some(match acc {
                            None => y,
                            Some(a) => a.iter().zip(&y).map(|(p, q)| p.hull(*q)).collect(),
                        });
                    }
                }
                match acc {
                    None => false,
                    Some(a) => {
                        x.copy_from_slice(&a);
                        true
                    }
                }
            }
        }
    }

    pub fn eval_point(&self, x: &[f64]) -> bool {
        match self {
            Constraint::True => true,
            Constraint::False => false,
            Constraint::Atom(t, rel) => {
                let v = t.eval_f64(x);
                match rel {
                    Rel::Gt => v > 0.0,
                    Rel::Ge => v >= 0.0,
                }
            }
            Constraint::And(cs) => cs.iter().all(|c| c.eval_point(x)),
            Constraint::Or(cs) => cs.iter().any(|c| c.eval_point(x)),
        }
    }
}
