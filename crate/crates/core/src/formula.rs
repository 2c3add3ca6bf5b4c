//! Terms and formulas over the reals: the expression language used for
//! flows, guards, resets, invariants and standalone bounded sentences.
//!
//! Atoms are sign conditions `t > 0` or `t >= 0`. There is no negation
//! node; [`Formula::negate`] pushes negation down to the atoms.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::interval::{Interval, IntervalBox};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormulaError {
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("weakening constant must be a finite non-negative number, got {0}")]
    NegativeDelta(f64),
}

/// A numeric literal together with an interval guaranteed to contain the
/// real number it denotes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Constant {
    pub value: f64,
    pub enclosure: Interval,
}

impl Constant {
    /// A decimal literal; the enclosure accounts for the rounding of the
    /// decimal to binary.
    pub fn decimal(value: f64) -> Constant {
        Constant {
            value,
            enclosure: Interval::enclosing_decimal(value),
        }
    }

    pub fn exact(value: f64) -> Constant {
        Constant {
            value,
            enclosure: Interval::point(value),
        }
    }

    pub fn neg(self) -> Constant {
        Constant {
            value: -self.value,
            enclosure: -self.enclosure,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Min,
    Max,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Exp,
    Log,
    Sin,
    Cos,
    Tan,
    Sqrt,
    Abs,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "exp" => Func::Exp,
            "log" | "ln" => Func::Log,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }

    pub fn apply(self, x: Interval) -> Interval {
        match self {
            Func::Exp => x.exp(),
            Func::Log => x.ln(),
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Tan => x.tan(),
            Func::Sqrt => x.sqrt(),
            Func::Abs => x.abs(),
        }
    }

    pub fn apply_f64(self, x: f64) -> f64 {
        match self {
            Func::Exp => x.exp(),
            Func::Log => x.ln(),
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Tan => x.tan(),
            Func::Sqrt => x.sqrt(),
            Func::Abs => x.abs(),
        }
    }

    /// The set on which the function is defined, when it is not all of ℝ.
    fn domain(self) -> Option<Interval> {
        match self {
            Func::Log => Some(Interval::new(f64::MIN_POSITIVE, f64::INFINITY)),
            Func::Sqrt => Some(Interval::new(0.0, f64::INFINITY)),
            _ => None,
        }
    }
}

impl BinOp {
    pub fn apply(self, a: Interval, b: Interval) -> Interval {
        match self {
            BinOp::Add => a + b,
            BinOp::Sub => a - b,
            BinOp::Mul => a * b,
            BinOp::Div => a / b,
            BinOp::Min => a.min(b),
            BinOp::Max => a.max(b),
        }
    }

    pub fn apply_f64(self, a: f64, b: f64) -> f64 {
        match self {
            BinOp::Add => a + b,
            BinOp::Sub => a - b,
            BinOp::Mul => a * b,
            BinOp::Div => a / b,
            BinOp::Min => a.min(b),
            BinOp::Max => a.max(b),
        }
    }
}

/// Expression tree over the supported function set.
#[derive(Clone, Debug, PartialEq)]
pub enum Term {
    Var(String),
    Const(Constant),
    Neg(Box<Term>),
    Binary(BinOp, Box<Term>, Box<Term>),
    /// Integer power.
    Pow(Box<Term>, i32),
    Call(Func, Box<Term>),
}

/// Result of evaluating a term over a box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TermRange {
    pub range: Interval,
    /// Some sub-term was applied outside the domain of its function
    /// (e.g. `log` of an interval reaching below zero); only the
    /// defined part contributes to `range`.
    pub domain_violation: bool,
}

impl Term {
    pub fn var(name: impl Into<String>) -> Term {
        Term::Var(name.into())
    }

    pub fn constant(value: f64) -> Term {
        Term::Const(Constant::decimal(value))
    }

    pub fn binary(op: BinOp, a: Term, b: Term) -> Term {
        Term::Binary(op, Box::new(a), Box::new(b))
    }

    /// `a - b`, folding the common cases `a - 0` and `0 - b`.
    pub fn minus(a: Term, b: Term) -> Term {
        if b.is_zero() {
            a
        } else if a.is_zero() {
            b.negated()
        } else {
            Term::binary(BinOp::Sub, a, b)
        }
    }

    pub fn plus(a: Term, b: Term) -> Term {
        Term::binary(BinOp::Add, a, b)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Term::Const(c) if c.value == 0.0 && c.enclosure == Interval::ZERO)
    }

    /// `-t`, with `-(-t) = t` and constants folded.
    pub fn negated(self) -> Term {
        match self {
            Term::Neg(inner) => *inner,
            Term::Const(c) => Term::Const(c.neg()),
            t => Term::Neg(Box::new(t)),
        }
    }

    pub fn free_vars_into(&self, out: &mut BTreeSet<String>) {
        match self {
            Term::Var(v) => {
                out.insert(v.clone());
            }
            Term::Const(_) => {}
            Term::Neg(a) | Term::Pow(a, _) | Term::Call(_, a) => a.free_vars_into(out),
            Term::Binary(_, a, b) => {
                a.free_vars_into(out);
                b.free_vars_into(out);
            }
        }
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.free_vars_into(&mut out);
        out
    }

    /// Rename variables; names for which `f` returns `None` are kept.
    pub fn rename(&self, f: &dyn Fn(&str) -> Option<String>) -> Term {
        match self {
            Term::Var(v) => Term::Var(f(v).unwrap_or_else(|| v.clone())),
            Term::Const(c) => Term::Const(*c),
            Term::Neg(a) => Term::Neg(Box::new(a.rename(f))),
            Term::Pow(a, n) => Term::Pow(Box::new(a.rename(f)), *n),
            Term::Call(g, a) => Term::Call(*g, Box::new(a.rename(f))),
            Term::Binary(op, a, b) => Term::binary(*op, a.rename(f), b.rename(f)),
        }
    }

    /// Floating-point evaluation (no rounding control).
    pub fn eval_f64(&self, env: &dyn Fn(&str) -> Option<f64>) -> Result<f64, FormulaError> {
        Ok(match self {
            Term::Var(v) => env(v).ok_or_else(|| FormulaError::UnboundVariable(v.clone()))?,
            Term::Const(c) => c.value,
            Term::Neg(a) => -a.eval_f64(env)?,
            Term::Pow(a, n) => a.eval_f64(env)?.powi(*n),
            Term::Call(g, a) => g.apply_f64(a.eval_f64(env)?),
            Term::Binary(op, a, b) => op.apply_f64(a.eval_f64(env)?, b.eval_f64(env)?),
        })
    }

    /// Interval evaluation over a box: the result contains the exact range
    /// of the term over the box.
    pub fn eval_box(&self, b: &IntervalBox) -> Result<TermRange, FormulaError> {
        let mut violation = false;
        let range = self.eval_iv(&|name| b.get(name), &mut violation)?;
        Ok(TermRange {
            range,
            domain_violation: violation,
        })
    }

    pub fn eval_iv(
        &self,
        env: &dyn Fn(&str) -> Option<Interval>,
        violation: &mut bool,
    ) -> Result<Interval, FormulaError> {
        Ok(match self {
            Term::Var(v) => env(v).ok_or_else(|| FormulaError::UnboundVariable(v.clone()))?,
            Term::Const(c) => c.enclosure,
            Term::Neg(a) => -a.eval_iv(env, violation)?,
            Term::Pow(a, n) => {
                let x = a.eval_iv(env, violation)?;
                if *n < 0 && x.contains_zero() {
                    *violation = true;
                }
                x.powi(*n)
            }
            Term::Call(g, a) => {
                let x = a.eval_iv(env, violation)?;
                if let Some(dom) = g.domain() {
                    if !x.subset(dom) {
                        *violation = true;
                    }
                }
                g.apply(x)
            }
            Term::Binary(op, a, b) => {
                let x = a.eval_iv(env, violation)?;
                let y = b.eval_iv(env, violation)?;
                if *op == BinOp::Div && y.contains_zero() {
                    *violation = true;
                }
                op.apply(x, y)
            }
        })
    }

    fn precedence(&self) -> u8 {
        match self {
            Term::Var(_) | Term::Call(..) => 9,
            Term::Const(c) if c.value >= 0.0 => 9,
            Term::Const(_) => 5,
            Term::Pow(..) => 7,
            Term::Neg(_) => 5,
            Term::Binary(BinOp::Min | BinOp::Max, ..) => 9,
            Term::Binary(BinOp::Mul | BinOp::Div, ..) => 4,
            Term::Binary(BinOp::Add | BinOp::Sub, ..) => 3,
        }
    }
}

struct Paren<'a>(&'a Term, bool);

impl fmt::Display for Paren<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.1 {
            write!(f, "({})", self.0)
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = self.precedence();
        match self {
            Term::Var(v) => write!(f, "{v}"),
            Term::Const(c) => write!(f, "{}", c.value),
            Term::Neg(a) => write!(f, "-{}", Paren(a, a.precedence() <= p)),
            Term::Pow(a, n) => {
                if *n < 0 {
                    write!(f, "{}^({n})", Paren(a, a.precedence() <= p))
                } else {
                    write!(f, "{}^{n}", Paren(a, a.precedence() <= p))
                }
            }
            Term::Call(g, a) => write!(f, "{}({a})", g.name()),
            Term::Binary(BinOp::Min, a, b) => write!(f, "min({a}, {b})"),
            Term::Binary(BinOp::Max, a, b) => write!(f, "max({a}, {b})"),
            Term::Binary(op, a, b) => {
                let sym = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    _ => "/",
                };
                // left-associative: the right operand needs parentheses at equal precedence
                write!(
                    f,
                    "{} {sym} {}",
                    Paren(a, a.precedence() < p),
                    Paren(b, b.precedence() <= p)
                )
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Rel {
    /// `t > 0`
    Gt,
    /// `t >= 0`
    Ge,
}

/// A sign condition on a term.
#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    pub term: Term,
    pub rel: Rel,
}

impl Atom {
    pub fn gt(term: Term) -> Atom {
        Atom { term, rel: Rel::Gt }
    }

    pub fn ge(term: Term) -> Atom {
        Atom { term, rel: Rel::Ge }
    }

    pub fn holds_at(&self, value: f64) -> bool {
        match self.rel {
            Rel::Gt => value > 0.0,
            Rel::Ge => value >= 0.0,
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.rel {
            Rel::Gt => ">",
            Rel::Ge => ">=",
        };
        write!(f, "{} {op} 0", self.term)
    }
}

/// A bounded quantifier `Q x ∈ [lo, hi]. body`.
#[derive(Clone, Debug, PartialEq)]
pub struct Quantified {
    pub var: String,
    pub lo: Term,
    pub hi: Term,
    pub body: Box<Formula>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Formula {
    True,
    False,
    Atom(Atom),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Exists(Quantified),
    Forall(Quantified),
}

/// Comparison operators accepted in user input before normalization.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Comparison {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
}

impl Formula {
    /// Normalize `lhs ⋈ rhs` into sign atoms. Equality becomes the pair
    /// `lhs - rhs >= 0 ∧ rhs - lhs >= 0`.
    pub fn compare(lhs: Term, op: Comparison, rhs: Term) -> Formula {
        match op {
            Comparison::Gt => Formula::Atom(Atom::gt(Term::minus(lhs, rhs))),
            Comparison::Ge => Formula::Atom(Atom::ge(Term::minus(lhs, rhs))),
            Comparison::Lt => Formula::Atom(Atom::gt(Term::minus(rhs, lhs))),
            Comparison::Le => Formula::Atom(Atom::ge(Term::minus(rhs, lhs))),
            Comparison::Eq => Formula::And(vec![
                Formula::Atom(Atom::ge(Term::minus(lhs.clone(), rhs.clone()))),
                Formula::Atom(Atom::ge(Term::minus(rhs, lhs))),
            ]),
        }
    }

    /// Conjunction, flattening nested conjunctions and dropping `True`.
    pub fn and(parts: impl IntoIterator<Item = Formula>) -> Formula {
        let mut out = Vec::new();
        for p in parts {
            match p {
                Formula::True => {}
                Formula::And(inner) => out.extend(inner),
                f => out.push(f),
            }
        }
        match out.len() {
            0 => Formula::True,
            1 => out.pop().unwrap(),
            _ => Formula::And(out),
        }
    }

    pub fn or(parts: impl IntoIterator<Item = Formula>) -> Formula {
        let mut out = Vec::new();
        for p in parts {
            match p {
                Formula::False => {}
                Formula::Or(inner) => out.extend(inner),
                f => out.push(f),
            }
        }
        match out.len() {
            0 => Formula::False,
            1 => out.pop().unwrap(),
            _ => Formula::Or(out),
        }
    }

    /// The inductive negation: atoms flip (`t>0 ↦ -t>=0`, `t>=0 ↦ -t>0`),
    /// connectives and quantifiers dualize, bounds are preserved.
    pub fn negate(&self) -> Formula {
        match self {
            Formula::True => Formula::False,
            Formula::False => Formula::True,
            Formula::Atom(a) => {
                let term = a.term.clone().negated();
                Formula::Atom(match a.rel {
                    Rel::Gt => Atom::ge(term),
                    Rel::Ge => Atom::gt(term),
                })
            }
            Formula::And(fs) => Formula::Or(fs.iter().map(Formula::negate).collect()),
            Formula::Or(fs) => Formula::And(fs.iter().map(Formula::negate).collect()),
            Formula::Exists(q) => Formula::Forall(q.map_body(|b| b.negate())),
            Formula::Forall(q) => Formula::Exists(q.map_body(|b| b.negate())),
        }
    }

    /// The δ-weakening: every atom `t ⋈ 0` becomes `t + δ ⋈ 0`.
    /// `δ = 0` returns the formula unchanged.
    pub fn delta_weaken(&self, delta: f64) -> Result<Formula, FormulaError> {
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(FormulaError::NegativeDelta(delta));
        }
        if delta == 0.0 {
            return Ok(self.clone());
        }
        Ok(self.map_atoms(&|a| Atom {
            term: Term::plus(a.term.clone(), Term::constant(delta)),
            rel: a.rel,
        }))
    }

    pub fn map_atoms(&self, f: &dyn Fn(&Atom) -> Atom) -> Formula {
        match self {
            Formula::True => Formula::True,
            Formula::False => Formula::False,
            Formula::Atom(a) => Formula::Atom(f(a)),
            Formula::And(fs) => Formula::And(fs.iter().map(|g| g.map_atoms(f)).collect()),
            Formula::Or(fs) => Formula::Or(fs.iter().map(|g| g.map_atoms(f)).collect()),
            Formula::Exists(q) => Formula::Exists(q.map_body(|b| b.map_atoms(f))),
            Formula::Forall(q) => Formula::Forall(q.map_body(|b| b.map_atoms(f))),
        }
    }

    /// Free variables; quantified occurrences are excluded, variables of
    /// the bound terms are included.
    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.free_vars_into(&mut out);
        out
    }

    fn free_vars_into(&self, out: &mut BTreeSet<String>) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Atom(a) => a.term.free_vars_into(out),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().for_each(|f| f.free_vars_into(out)),
            Formula::Exists(q) | Formula::Forall(q) => {
                let mut inner = q.body.free_vars();
                inner.remove(&q.var);
                out.extend(inner);
                q.lo.free_vars_into(out);
                q.hi.free_vars_into(out);
            }
        }
    }

    pub fn is_quantifier_free(&self) -> bool {
        match self {
            Formula::True | Formula::False | Formula::Atom(_) => true,
            Formula::And(fs) | Formula::Or(fs) => fs.iter().all(Formula::is_quantifier_free),
            Formula::Exists(_) | Formula::Forall(_) => false,
        }
    }

    /// Rename free variables. Bound variables shadow the renaming.
    pub fn rename(&self, f: &dyn Fn(&str) -> Option<String>) -> Formula {
        match self {
            Formula::True => Formula::True,
            Formula::False => Formula::False,
            Formula::Atom(a) => Formula::Atom(Atom {
                term: a.term.rename(f),
                rel: a.rel,
            }),
            Formula::And(fs) => Formula::And(fs.iter().map(|g| g.rename(f)).collect()),
            Formula::Or(fs) => Formula::Or(fs.iter().map(|g| g.rename(f)).collect()),
            Formula::Exists(q) => Formula::Exists(q.rename(f)),
            Formula::Forall(q) => Formula::Forall(q.rename(f)),
        }
    }

    /// Conjunctive list of atoms, when the formula is a conjunction of
    /// atoms (or a single atom / `True`).
    pub fn atoms(&self) -> Option<Vec<&Atom>> {
        match self {
            Formula::True => Some(Vec::new()),
            Formula::Atom(a) => Some(vec![a]),
            Formula::And(fs) => {
                let mut out = Vec::new();
                for f in fs {
                    out.extend(f.atoms()?);
                }
                Some(out)
            }
            _ => None,
        }
    }

    /// Floating-point truth at a point. Quantifiers are not supported here.
    pub fn eval_point(&self, env: &dyn Fn(&str) -> Option<f64>) -> Result<bool, FormulaError> {
        Ok(match self {
            Formula::True => true,
            Formula::False => false,
            Formula::Atom(a) => a.holds_at(a.term.eval_f64(env)?),
            Formula::And(fs) => {
                for f in fs {
                    if !f.eval_point(env)? {
                        return Ok(false);
                    }
                }
                true
            }
            Formula::Or(fs) => {
                for f in fs {
                    if f.eval_point(env)? {
                        return Ok(true);
                    }
                }
                false
            }
            Formula::Exists(_) | Formula::Forall(_) => {
                unimplemented!("point evaluation of quantified formulas")
            }
        })
    }
}

impl Quantified {
    fn map_body(&self, f: impl FnOnce(&Formula) -> Formula) -> Quantified {
        Quantified {
            var: self.var.clone(),
            lo: self.lo.clone(),
            hi: self.hi.clone(),
            body: Box::new(f(&self.body)),
        }
    }

    fn rename(&self, f: &dyn Fn(&str) -> Option<String>) -> Quantified {
        let bound = self.var.clone();
        let inner = move |name: &str| if name == bound { None } else { f(name) };
        Quantified {
            var: self.var.clone(),
            lo: self.lo.rename(f),
            hi: self.hi.rename(f),
            body: Box::new(self.body.rename(&inner)),
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn join(f: &mut fmt::Formatter<'_>, fs: &[Formula], sep: &str) -> fmt::Result {
            write!(f, "(")?;
            for (i, g) in fs.iter().enumerate() {
                if i > 0 {
                    write!(f, " {sep} ")?;
                }
                write!(f, "{g}")?;
            }
            write!(f, ")")
        }
        match self {
            Formula::True => write!(f, "true"),
            Formula::False => write!(f, "false"),
            Formula::Atom(a) => write!(f, "{a}"),
            Formula::And(fs) => join(f, fs, "and"),
            Formula::Or(fs) => join(f, fs, "or"),
            Formula::Exists(q) => write!(f, "(exists {} in [{}, {}] . {})", q.var, q.lo, q.hi, q.body),
            Formula::Forall(q) => write!(f, "(forall {} in [{}, {}] . {})", q.var, q.lo, q.hi, q.body),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x() -> Term {
        Term::var("x")
    }

    #[test]
    fn negate_atoms() {
        let f = Formula::Atom(Atom::gt(x()));
        assert_eq!(f.negate(), Formula::Atom(Atom::ge(Term::Neg(Box::new(x())))));
        let g = Formula::Atom(Atom::ge(x())).negate();
        assert_eq!(g, Formula::Atom(Atom::gt(x().negated())));
    }

    #[test]
    fn negate_connectives_and_quantifiers() {
        let f = Formula::And(vec![
            Formula::Atom(Atom::ge(x())),
            Formula::Atom(Atom::gt(Term::var("y"))),
        ]);
        assert_eq!(
            f.negate(),
            Formula::Or(vec![
                Formula::Atom(Atom::gt(x().negated())),
                Formula::Atom(Atom::ge(Term::var("y").negated())),
            ])
        );
        let q = Formula::Exists(Quantified {
            var: "x".into(),
            lo: Term::constant(0.0),
            hi: Term::constant(1.0),
            body: Box::new(Formula::Atom(Atom::gt(x()))),
        });
        match q.negate() {
            Formula::Forall(inner) => {
                assert_eq!(inner.lo, Term::constant(0.0));
                assert_eq!(inner.hi, Term::constant(1.0));
                assert_eq!(*inner.body, Formula::Atom(Atom::ge(x().negated())));
            }
            other => panic!("expected forall, got {other}"),
        }
        assert_eq!(q.negate().negate(), q);
    }

    #[test]
    fn weaken_identity_and_shift() {
        let f = Formula::Atom(Atom::gt(x()));
        assert_eq!(f.delta_weaken(0.0).unwrap(), f);
        let w = f.delta_weaken(0.1).unwrap();
        assert_eq!(w, Formula::Atom(Atom::gt(Term::plus(x(), Term::constant(0.1)))));
        assert!(f.delta_weaken(-1.0).is_err());
        assert!(f.delta_weaken(f64::NAN).is_err());
    }

    #[test]
    fn free_vars_cases() {
        let f = Formula::Atom(Atom::gt(x()));
        assert_eq!(f.free_vars(), BTreeSet::from(["x".to_string()]));
        let q = Formula::Exists(Quantified {
            var: "x".into(),
            lo: Term::constant(0.0),
            hi: Term::constant(1.0),
            body: Box::new(Formula::compare(x(), Comparison::Gt, Term::var("y"))),
        });
        assert_eq!(q.free_vars(), BTreeSet::from(["y".to_string()]));
        let r = Formula::Forall(Quantified {
            var: "s".into(),
            lo: Term::constant(0.0),
            hi: Term::var("t"),
            body: Box::new(Formula::Atom(Atom::gt(Term::Call(Func::Sin, Box::new(Term::var("s")))))),
        });
        assert_eq!(r.free_vars(), BTreeSet::from(["t".to_string()]));
    }

    #[test]
    fn eval_term_square_contains_range() {
        let t = Term::binary(BinOp::Mul, x(), x());
        let b = IntervalBox::from_pairs([("x", Interval::new(-1.0, 1.0))]);
        let r = t.eval_box(&b).unwrap();
        assert!(Interval::new(0.0, 1.0).subset(r.range));
        assert!(!r.domain_violation);
    }

    #[test]
    fn eval_term_unbound_and_domain() {
        let b = IntervalBox::from_pairs([("x", Interval::new(-2.0, -1.0))]);
        assert_eq!(
            Term::var("y").eval_box(&b),
            Err(FormulaError::UnboundVariable("y".into()))
        );
        let r = Term::Call(Func::Log, Box::new(x())).eval_box(&b).unwrap();
        assert!(r.range.is_empty());
        assert!(r.domain_violation);
    }

    #[test]
    fn display_round_trip_shape() {
        let t = Term::minus(
            Term::binary(BinOp::Mul, Term::constant(2.0), Term::plus(x(), Term::var("y"))),
            Term::Pow(Box::new(x()), 2),
        );
        assert_eq!(t.to_string(), "2 * (x + y) - x^2");
    }
}
