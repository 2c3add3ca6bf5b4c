//! Outward-rounded interval arithmetic over `f64` endpoints.
//!
//! Rounding is done by nudging every computed endpoint one ulp outward
//! (two ulps for library transcendentals, which are not correctly
//! rounded). Operations that are exact in floating point, such as
//! negation, `abs`, `min` and `max`, are not nudged.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

const TAU: f64 = 2.0 * PI;

/// Round a value computed by a correctly rounded operation downward.
#[inline]
fn down(x: f64) -> f64 {
    if x.is_finite() {
        x.next_down()
    } else {
        x
    }
}

#[inline]
fn up(x: f64) -> f64 {
    if x.is_finite() {
        x.next_up()
    } else {
        x
    }
}

/// Downward rounding for libm transcendental results (faithful, not exact).
#[inline]
fn down2(x: f64) -> f64 {
    down(down(x))
}

#[inline]
fn up2(x: f64) -> f64 {
    up(up(x))
}

/// Error of `a + b` rounded to nearest (TwoSum): `a + b = s + err`.
#[inline]
fn sum_err(a: f64, b: f64, s: f64) -> f64 {
    let bb = s - a;
    (a - (s - bb)) + (b - bb)
}

#[inline]
fn add_down(a: f64, b: f64) -> f64 {
    let s = a + b;
    if !s.is_finite() || !a.is_finite() || !b.is_finite() {
        return s;
    }
    if sum_err(a, b, s) < 0.0 {
        down(s)
    } else {
        s
    }
}

#[inline]
fn add_up(a: f64, b: f64) -> f64 {
    let s = a + b;
    if !s.is_finite() || !a.is_finite() || !b.is_finite() {
        return s;
    }
    if sum_err(a, b, s) > 0.0 {
        up(s)
    } else {
        s
    }
}

/// Sign of the rounding error of a finite product `p = fl(a*b)`; `None`
/// when the exact residual cannot be trusted (subnormal range).
#[inline]
fn mul_err(a: f64, b: f64, p: f64) -> Option<f64> {
    if p == 0.0 || p.abs() < 1e-290 || !p.is_finite() {
        if p == 0.0 && (a == 0.0 || b == 0.0) {
            return Some(0.0);
        }
        return None;
    }
    Some(a.mul_add(b, -p))
}

#[inline]
fn mul_down(a: f64, b: f64) -> f64 {
    let p = emul(a, b);
    if !p.is_finite() {
        return p;
    }
    match mul_err(a, b, p) {
        Some(e) if e >= 0.0 => p,
        _ => down(p),
    }
}

#[inline]
fn mul_up(a: f64, b: f64) -> f64 {
    let p = emul(a, b);
    if !p.is_finite() {
        return p;
    }
    match mul_err(a, b, p) {
        Some(e) if e <= 0.0 => p,
        _ => up(p),
    }
}

/// Directed quotient `a / b` for `b != 0`.
fn div_bound(a: f64, b: f64, upper: bool) -> f64 {
    let q = a / b;
    if q.is_nan() {
        return 0.0;
    }
    if !q.is_finite() || !a.is_finite() || !b.is_finite() {
        return q;
    }
    if q == 0.0 && a == 0.0 {
        return 0.0;
    }
    if q.abs() < 1e-290 || a.abs() < 1e-290 {
        return if upper { up(q) } else { down(q) };
    }
    // a = q*b + rem exactly; the true quotient is q + rem/b
    let rem = (-q).mul_add(b, a);
    let dir = rem * b.signum();
    match (upper, dir) {
        (_, 0.0) => q,
        (true, d) if d > 0.0 => up(q),
        (false, d) if d < 0.0 => down(q),
        _ => q,
    }
}

/// Multiply endpoints treating `0 * inf` as `0`.
#[inline]
fn emul(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        0.0
    } else {
        a * b
    }
}

/// A closed real interval `[lo, hi]` with possibly infinite endpoints.
///
/// The empty set is a distinguished value; every operation maps an
/// empty operand to the empty result.
#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub const EMPTY: Interval = Interval {
        lo: f64::INFINITY,
        hi: f64::NEG_INFINITY,
    };
    pub const ENTIRE: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };
    pub const ZERO: Interval = Interval { lo: 0.0, hi: 0.0 };
    pub const ONE: Interval = Interval { lo: 1.0, hi: 1.0 };

    /// Builds `[lo, hi]`; returns EMPTY when `lo > hi` or either bound is NaN.
    pub fn new(lo: f64, hi: f64) -> Interval {
        if lo.is_nan() || hi.is_nan() || lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
            Interval::EMPTY
        } else {
            Interval { lo, hi }
        }
    }

    pub fn point(x: f64) -> Interval {
        Interval::new(x, x)
    }

    /// The tightest interval guaranteed to contain the real number that
    /// `x` was rounded from: `[x, x]` when `x` is an integer of moderate
    /// magnitude, otherwise `x` widened by one ulp on each side.
    pub fn enclosing_decimal(x: f64) -> Interval {
        if x.fract() == 0.0 && x.abs() < 9.0e15 {
            Interval::point(x)
        } else {
            Interval::new(down(x), up(x))
        }
    }

    pub fn lo(self) -> f64 {
        self.lo
    }

    pub fn hi(self) -> f64 {
        self.hi
    }

    pub fn is_empty(self) -> bool {
        self.lo > self.hi
    }

    pub fn is_point(self) -> bool {
        self.lo == self.hi
    }

    pub fn is_bounded(self) -> bool {
        !self.is_empty() && self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn width(self) -> f64 {
        if self.is_empty() || self.lo == self.hi {
            0.0
        } else {
            add_up(self.hi, -self.lo)
        }
    }

    /// Midpoint, clamped into the interval; finite whenever the
    /// interval is non-empty.
    pub fn mid(self) -> f64 {
        if self.is_empty() {
            return f64::NAN;
        }
        match (self.lo.is_finite(), self.hi.is_finite()) {
            (true, true) => {
                let m = 0.5 * self.lo + 0.5 * self.hi;
                m.clamp(self.lo, self.hi)
            }
            (false, true) => {
                if self.hi > 0.0 {
                    0.0
                } else {
                    (2.0 * self.hi - 1.0).max(f64::MIN)
                }
            }
            (true, false) => {
                if self.lo < 0.0 {
                    0.0
                } else {
                    (2.0 * self.lo + 1.0).min(f64::MAX)
                }
            }
            (false, false) => 0.0,
        }
    }

    /// Largest absolute value of any member.
    pub fn mag(self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.lo.abs().max(self.hi.abs())
        }
    }

    /// Smallest absolute value of any member.
    pub fn mig(self) -> f64 {
        if self.is_empty() || self.contains(0.0) {
            0.0
        } else {
            self.lo.abs().min(self.hi.abs())
        }
    }

    pub fn contains(self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_zero(self) -> bool {
        self.contains(0.0)
    }

    /// `self ⊆ other`.
    pub fn subset(self, other: Interval) -> bool {
        self.is_empty() || (other.lo <= self.lo && self.hi <= other.hi)
    }

    pub fn intersect(self, other: Interval) -> Interval {
        Interval::new(self.lo.max(other.lo), self.hi.min(other.hi))
    }

    pub fn hull(self, other: Interval) -> Interval {
        if self.is_empty() {
            other
        } else if other.is_empty() {
            self
        } else {
            Interval {
                lo: self.lo.min(other.lo),
                hi: self.hi.max(other.hi),
            }
        }
    }

    pub fn overlaps(self, other: Interval) -> bool {
        !self.intersect(other).is_empty()
    }

    /// Widen by `r ≥ 0` on both sides, rounding outward.
    pub fn inflate(self, r: f64) -> Interval {
        if self.is_empty() {
            return self;
        }
        Interval::new(down(self.lo - r), up(self.hi + r))
    }

    /// Split at the midpoint. Both halves are non-empty and their union is `self`.
    pub fn bisect(self) -> (Interval, Interval) {
        let m = self.mid();
        (Interval::new(self.lo, m), Interval::new(m, self.hi))
    }

    pub fn neg(self) -> Interval {
        if self.is_empty() {
            return self;
        }
        Interval {
            lo: -self.hi,
            hi: -self.lo,
        }
    }

    pub fn add(self, b: Interval) -> Interval {
        if self.is_empty() || b.is_empty() {
            return Interval::EMPTY;
        }
        Interval::new(add_down(self.lo, b.lo), add_up(self.hi, b.hi))
    }

    pub fn sub(self, b: Interval) -> Interval {
        self.add(b.neg())
    }

    pub fn mul(self, b: Interval) -> Interval {
        if self.is_empty() || b.is_empty() {
            return Interval::EMPTY;
        }
        let pairs = [(self.lo, b.lo), (self.lo, b.hi), (self.hi, b.lo), (self.hi, b.hi)];
        let lo = pairs.iter().map(|&(x, y)| mul_down(x, y)).fold(f64::INFINITY, f64::min);
        let hi = pairs
            .iter()
            .map(|&(x, y)| mul_up(x, y))
            .fold(f64::NEG_INFINITY, f64::max);
        Interval::new(lo, hi)
    }

    pub fn scale(self, c: f64) -> Interval {
        self.mul(Interval::point(c))
    }

    /// Division; a divisor containing zero yields ENTIRE.
    pub fn div(self, b: Interval) -> Interval {
        if self.is_empty() || b.is_empty() {
            return Interval::EMPTY;
        }
        if b.contains_zero() {
            return Interval::ENTIRE;
        }
        let pairs = [(self.lo, b.lo), (self.lo, b.hi), (self.hi, b.lo), (self.hi, b.hi)];
        let lo = pairs
            .iter()
            .map(|&(x, y)| div_bound(x, y, false))
            .fold(f64::INFINITY, f64::min);
        let hi = pairs
            .iter()
            .map(|&(x, y)| div_bound(x, y, true))
            .fold(f64::NEG_INFINITY, f64::max);
        Interval::new(lo, hi)
    }

    pub fn recip(self) -> Interval {
        Interval::ONE.div(self)
    }

    pub fn sqr(self) -> Interval {
        self.powi(2)
    }

    /// Integer power. Even powers are non-negative; negative exponents
    /// go through `recip`.
    pub fn powi(self, n: i32) -> Interval {
        if self.is_empty() {
            return self;
        }
        if n == 0 {
            return Interval::ONE;
        }
        if n < 0 {
            return self.powi(-n).recip();
        }
        if n == 1 {
            return self;
        }
        if n % 2 == 0 {
            let lo = pow_down(self.mig(), n);
            let hi = pow_up(self.mag(), n);
            Interval::new(lo.max(0.0), hi)
        } else {
            Interval::new(signed_pow_down(self.lo, n), signed_pow_up(self.hi, n))
        }
    }

    pub fn exp(self) -> Interval {
        if self.is_empty() {
            return self;
        }
        Interval::new(down2(self.lo.exp()).max(0.0), up2(self.hi.exp()))
    }

    /// Natural logarithm restricted to the positive part of the
    /// argument; EMPTY when the argument has no positive member.
    pub fn ln(self) -> Interval {
        let d = self.intersect(Interval::new(0.0, f64::INFINITY));
        if d.is_empty() || d.hi <= 0.0 {
            return Interval::EMPTY;
        }
        let lo = if d.lo <= 0.0 {
            f64::NEG_INFINITY
        } else {
            down2(d.lo.ln())
        };
        Interval::new(lo, up2(d.hi.ln()))
    }

    pub fn sqrt(self) -> Interval {
        let d = self.intersect(Interval::new(0.0, f64::INFINITY));
        if d.is_empty() {
            return d;
        }
        Interval::new(down(d.lo.sqrt()).max(0.0), up(d.hi.sqrt()))
    }

    pub fn abs(self) -> Interval {
        if self.is_empty() {
            return self;
        }
        Interval::new(self.mig(), self.mag())
    }

    pub fn min(self, b: Interval) -> Interval {
        if self.is_empty() || b.is_empty() {
            return Interval::EMPTY;
        }
        Interval::new(self.lo.min(b.lo), self.hi.min(b.hi))
    }

    pub fn max(self, b: Interval) -> Interval {
        if self.is_empty() || b.is_empty() {
            return Interval::EMPTY;
        }
        Interval::new(self.lo.max(b.lo), self.hi.max(b.hi))
    }

    pub fn sin(self) -> Interval {
        // maxima at π/2 + 2kπ, minima at -π/2 + 2kπ
        trig_range(self, f64::sin, FRAC_PI_2, -FRAC_PI_2)
    }

    pub fn cos(self) -> Interval {
        // maxima at 2kπ, minima at π + 2kπ
        trig_range(self, f64::cos, 0.0, PI)
    }

    /// Tangent; ENTIRE when the interval may contain a pole.
    pub fn tan(self) -> Interval {
        if self.is_empty() {
            return self;
        }
        if !self.is_bounded() || self.width() >= PI {
            return Interval::ENTIRE;
        }
        if contains_phase(self, FRAC_PI_2, PI) {
            return Interval::ENTIRE;
        }
        Interval::new(down2(self.lo.tan()), up2(self.hi.tan()))
    }
}

impl Default for Interval {
    fn default() -> Self {
        Interval::ZERO
    }
}

impl fmt::Debug for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            write!(f, "[empty]")
        } else {
            write!(f, "[{}, {}]", self.lo, self.hi)
        }
    }
}

impl From<f64> for Interval {
    fn from(x: f64) -> Self {
        Interval::point(x)
    }
}

macro_rules! forward_binop {
    ($tr:ident, $m:ident, $f:ident) => {
        impl std::ops::$tr for Interval {
            type Output = Interval;
            fn $m(self, rhs: Interval) -> Interval {
                Interval::$f(self, rhs)
            }
        }
    };
}
forward_binop!(Add, add, add);
forward_binop!(Sub, sub, sub);
forward_binop!(Mul, mul, mul);
forward_binop!(Div, div, div);

impl std::ops::Neg for Interval {
    type Output = Interval;
    fn neg(self) -> Interval {
        Interval::neg(self)
    }
}

/// `x^n` for `x ≥ 0`, rounded down, by repeated multiplication.
fn pow_down(x: f64, n: i32) -> f64 {
    let mut acc = 1.0f64;
    for _ in 0..n {
        acc = mul_down(acc, x).max(0.0);
    }
    acc
}

fn pow_up(x: f64, n: i32) -> f64 {
    let mut acc = 1.0f64;
    for _ in 0..n {
        acc = mul_up(acc, x);
    }
    acc
}

fn signed_pow_down(x: f64, n: i32) -> f64 {
    if x >= 0.0 {
        pow_down(x, n)
    } else {
        -pow_up(-x, n)
    }
}

fn signed_pow_up(x: f64, n: i32) -> f64 {
    if x >= 0.0 {
        pow_up(x, n)
    } else {
        -pow_down(-x, n)
    }
}

/// Whether some `phase + k·period` lies in `x`, erring towards `true`
/// near the endpoints.
fn contains_phase(x: Interval, phase: f64, period: f64) -> bool {
    let slack = 1e-9 * (1.0 + x.mag());
    let lo = (x.lo - phase - slack) / period;
    let hi = (x.hi - phase + slack) / period;
    lo.ceil() <= hi.floor()
}

fn trig_range(x: Interval, f: fn(f64) -> f64, max_phase: f64, min_phase: f64) -> Interval {
    if x.is_empty() {
        return x;
    }
    if !x.is_bounded() || x.width() >= TAU {
        return Interval::new(-1.0, 1.0);
    }
    let (a, b) = (f(x.lo), f(x.hi));
    let hi = if contains_phase(x, max_phase, TAU) {
        1.0
    } else {
        up2(a.max(b)).min(1.0)
    };
    let lo = if contains_phase(x, min_phase, TAU) {
        -1.0
    } else {
        down2(a.min(b)).max(-1.0)
    };
    Interval::new(lo, hi)
}

/// A box: an ordered assignment of intervals to named variables.
///
/// Variable names are shared between boxes of the same search so that
/// bisection only copies the interval vector.
#[derive(Clone, PartialEq)]
pub struct IntervalBox {
    names: Arc<[String]>,
    values: Vec<Interval>,
}

impl IntervalBox {
    pub fn new(names: Arc<[String]>, values: Vec<Interval>) -> IntervalBox {
        assert_eq!(names.len(), values.len(), "box arity mismatch");
        let mut b = IntervalBox { names, values };
        b.normalize();
        b
    }

    pub fn from_pairs<S: Into<String>>(pairs: impl IntoIterator<Item = (S, Interval)>) -> Self {
        let (names, values): (Vec<String>, Vec<Interval>) = pairs.into_iter().map(|(n, v)| (n.into(), v)).unzip();
        IntervalBox::new(names.into(), values)
    }

    /// Collapse to all-EMPTY when any component is empty.
    fn normalize(&mut self) {
        if self.values.iter().any(|v| v.is_empty()) {
            self.values.iter_mut().for_each(|v| *v = Interval::EMPTY);
        }
    }

    pub fn names(&self) -> &Arc<[String]> {
        &self.names
    }

    pub fn values(&self) -> &[Interval] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.first().is_some_and(|v| v.is_empty())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn get(&self, name: &str) -> Option<Interval> {
        self.index_of(name).map(|i| self.values[i])
    }

    pub fn at(&self, i: usize) -> Interval {
        self.values[i]
    }

    /// Narrow component `i` to its intersection with `v`. Returns
    /// `false` when the box became empty.
    pub fn narrow(&mut self, i: usize, v: Interval) -> bool {
        let n = self.values[i].intersect(v);
        self.values[i] = n;
        if n.is_empty() {
            self.normalize();
            false
        } else {
            true
        }
    }

    pub fn set(&mut self, i: usize, v: Interval) {
        self.values[i] = v;
        self.normalize();
    }

    pub fn set_empty(&mut self) {
        self.values.iter_mut().for_each(|v| *v = Interval::EMPTY);
    }

    /// Largest component width; zero for an empty or zero-dimensional box.
    pub fn width(&self) -> f64 {
        self.values.iter().map(|v| v.width()).fold(0.0, f64::max)
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.mid()).collect()
    }

    pub fn subset(&self, other: &IntervalBox) -> bool {
        self.values.iter().zip(other.values.iter()).all(|(a, b)| a.subset(*b))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Interval)> {
        self.names.iter().map(String::as_str).zip(self.values.iter().copied())
    }
}

impl fmt::Debug for IntervalBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(self.iter()).finish()
    }
}

/// Componentwise hull of two equally sized interval vectors.
pub fn hull_vec(a: &[Interval], b: &[Interval]) -> Vec<Interval> {
    a.iter().zip(b).map(|(x, y)| x.hull(*y)).collect()
}

pub fn max_width(v: &[Interval]) -> f64 {
    v.iter().map(|x| x.width()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(a: f64, b: f64) -> Interval {
        Interval::new(a, b)
    }

    #[test]
    fn add_exact_endpoints() {
        let r = iv(1.0, 2.0) + iv(3.0, 4.0);
        assert!(iv(4.0, 6.0).subset(r));
        assert!(r.width() <= 2.0 + 1e-14);
        let z = Interval::ZERO + iv(-3.5, 7.25);
        assert!(iv(-3.5, 7.25).subset(z));
    }

    #[test]
    fn add_tenth_and_fifth_contains_three_tenths() {
        // 0.1 and 0.2 as decimals: enclose each, then the sum must
        // contain the real 0.3 (whose nearest double is 0.3).
        let a = Interval::enclosing_decimal(0.1);
        let b = Interval::enclosing_decimal(0.2);
        let s = a + b;
        assert!(s.contains(0.3));
        assert!(s.contains(0.1 + 0.2));
        // point-operand sum: at most 2 ulp wide around the float result
        let p = Interval::point(0.1) + Interval::point(0.2);
        let ulp = (0.3f64).next_up() - 0.3;
        assert!(p.width() <= 2.0 * ulp);
        assert!(p.contains(0.1 + 0.2));
    }

    #[test]
    fn empty_propagates() {
        let e = Interval::EMPTY;
        assert!((e + iv(0.0, 1.0)).is_empty());
        assert!((iv(0.0, 1.0) * e).is_empty());
        assert!(e.exp().is_empty());
        assert!(e.sin().is_empty());
    }

    #[test]
    fn division_by_zero_straddling_is_entire() {
        assert_eq!(iv(1.0, 2.0) / iv(-1.0, 1.0), Interval::ENTIRE);
        let q = iv(1.0, 2.0) / iv(2.0, 4.0);
        assert!(iv(0.25, 1.0).subset(q));
    }

    #[test]
    fn even_powers_nonnegative() {
        let s = iv(-1.0, 1.0).powi(2);
        assert!(s.lo() >= 0.0 && s.contains(1.0) && s.contains(0.0));
        let c = iv(-2.0, 1.0).powi(3);
        assert!(c.contains(-8.0) && c.contains(1.0));
        let r = iv(2.0, 4.0).powi(-2);
        assert!(r.contains(0.25) && r.contains(1.0 / 16.0));
    }

    #[test]
    fn log_domain() {
        assert!(iv(-2.0, -1.0).ln().is_empty());
        assert!(iv(-2.0, 0.0).ln().is_empty());
        let l = iv(0.0, 1.0).ln();
        assert_eq!(l.lo(), f64::NEG_INFINITY);
        assert!(l.contains(0.0));
    }

    #[test]
    fn sin_on_quarter_period() {
        let s = iv(0.0, FRAC_PI_2).sin();
        assert!(iv(0.0, 1.0).subset(s));
        let c = iv(-0.1, 0.1).cos();
        assert_eq!(c.hi(), 1.0);
        let big = iv(0.0, 10.0).sin();
        assert_eq!(big, iv(-1.0, 1.0));
    }

    #[test]
    fn tan_pole_gives_entire() {
        assert_eq!(iv(1.0, 2.0).tan(), Interval::ENTIRE);
        let t = iv(0.0, 1.0).tan();
        assert!(t.contains(0.0) && t.contains(1.0f64.tan()));
    }

    #[test]
    fn box_empty_collapses() {
        let mut b = IntervalBox::from_pairs([("x", iv(0.0, 1.0)), ("y", iv(0.0, 2.0))]);
        assert_eq!(b.width(), 2.0);
        assert!(!b.narrow(0, iv(3.0, 4.0)));
        assert!(b.is_empty());
        assert!(b.values().iter().all(|v| v.is_empty()));
    }
}
