//! Non-validated floating-point reference integrator (Dormand–Prince 5(4)
//! with adaptive steps). Used to cross-check witnesses and enclosures,
//! never for proofs.

use thiserror::Error;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum ReferenceError {
    #[error("step size underflow at t = {0}")]
    StepUnderflow(f64),
    #[error("non-finite state at t = {0}")]
    NonFinite(f64),
    #[error("step limit reached at t = {0}")]
    TooManySteps(f64),
}

#[derive(Clone, Copy, Debug)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { rel: 1e-12, abs: 1e-12 }
    }
}

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrate `x' = f(x)` from `x0` for duration `t_end`.
pub fn integrate<F>(f: F, x0: &[f64], t_end: f64, tol: Tolerance) -> Result<Vec<f64>, ReferenceError>
where
    F: Fn(&[f64], &mut [f64]),
{
    let mut out = trajectory(f, x0, &[t_end], tol)?;
    Ok(out.pop().map(|(_, x)| x).unwrap_or_else(|| x0.to_vec()))
}

/// States at each of the increasing `times`, integrating from time 0.
pub fn trajectory<F>(f: F, x0: &[f64], times: &[f64], tol: Tolerance) -> Result<Vec<(f64, Vec<f64>)>, ReferenceError>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut t = 0.0f64;
    let mut k = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];
    let mut x5 = vec![0.0; n];
    let t_max = times.last().copied().unwrap_or(0.0);
    let mut h = (t_max / 100.0).max(1e-6);
    let mut steps = 0usize;
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        while t < target {
            steps += 1;
            if steps > 5_000_000 {
                return Err(ReferenceError::TooManySteps(t));
            }
            let last = t + h >= target;
            let hs = if last { target - t } else { h };
            f(&x, &mut k[0]);
            for s in 1..7 {
                for j in 0..n {
                    let mut acc = x[j];
                    for (r, kr) in k.iter().enumerate().take(s) {
                        acc += hs * A[s][r] * kr[j];
                    }
                    tmp[j] = acc;
                }
                f(&tmp, &mut k[s]);
            }
            let mut err = 0.0f64;
            for j in 0..n {
                let mut y5 = x[j];
                let mut y4 = x[j];
                for s in 0..7 {
                    y5 += hs * B5[s] * k[s][j];
                    y4 += hs * B4[s] * k[s][j];
                }
                x5[j] = y5;
                let sc = tol.abs + tol.rel * x[j].abs().max(y5.abs());
                err = err.max(((y5 - y4) / sc).abs());
            }
            if !err.is_finite() {
                if hs < 1e-14 * (1.0 + t.abs()) {
                    return Err(ReferenceError::NonFinite(t));
                }
                h = hs * 0.1;
                continue;
            }
            if err <= 1.0 {
                t = if last { target } else { t + hs };
                x.copy_from_slice(&x5);
                if x.iter().any(|v| !v.is_finite()) {
                    return Err(ReferenceError::NonFinite(t));
                }
            }
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            let next = hs * factor;
            if !last || err > 1.0 {
                h = next;
            } else {
                h = h.max(next);
            }
            if h < 1e-14 * (1.0 + t.abs()) {
                return Err(ReferenceError::StepUnderflow(t));
            }
        }
        out.push((target, x.clone()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let x = integrate(|x, d| d[0] = -x[0], &[1.0], 3.0, Tolerance::default()).unwrap();
        assert!((x[0] - (-3.0f64).exp()).abs() < 1e-11);
    }

    #[test]
    fn harmonic_oscillator() {
        let tr = trajectory(
            |x, d| {
                d[0] = x[1];
                d[1] = -x[0];
            },
            &[1.0, 0.0],
            &[1.0, 2.0, std::f64::consts::PI],
            Tolerance::default(),
        )
        .unwrap();
        for (t, x) in tr {
            assert!((x[0] - t.cos()).abs() < 1e-10, "t={t}");
            assert!((x[1] + t.sin()).abs() < 1e-10);
        }
    }

    #[test]
    fn finite_escape_is_reported() {
        // x' = x^2 from 1 escapes at t = 1
        let r = integrate(|x, d| d[0] = x[0] * x[0], &[1.0], 2.0, Tolerance::default());
        assert!(r.is_err());
    }
}
