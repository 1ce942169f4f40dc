//! Oscillation growth rates of odd-period interval maps.
//!
//! The current rate for period `p` is the root above one of
//! `λ^p − 2λ^{p−2} − 1`; the legacy rate is the root above one of
//! `z^{p−1} − z^{p−2} − 1`. Both are found by a safeguarded Newton iteration
//! inside a sign-changing bracket.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Backward-error target for a polished root.
pub const ROOT_RESIDUAL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum RatesError {
    #[error("period must be odd (got {0})")]
    EvenPeriod(usize),
    #[error("period must be at least 3 (got {0})")]
    PeriodTooSmall(usize),
    #[error("no sign change on [{lo}, {hi}]")]
    NoBracket { lo: f64, hi: f64 },
    #[error("sum and rational forms of π_{p}({lambda}) disagree: {sum} vs {rational}")]
    FormMismatch {
        p: usize,
        lambda: f64,
        sum: f64,
        rational: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolynomialId {
    /// `λ^p − 2λ^{p−2} − 1`
    New,
    /// `z^{p−1} − z^{p−2} − 1`
    Legacy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthRate {
    pub p: usize,
    pub rho: f64,
    pub polynomial: PolynomialId,
    /// Normwise backward error `|q(ρ)| / Σ|c_i| ρ^i`.
    pub residual: f64,
}

pub fn check_odd_period(p: usize) -> Result<(), RatesError> {
    if p.is_multiple_of(2) {
        return Err(RatesError::EvenPeriod(p));
    }
    if p < 3 {
        return Err(RatesError::PeriodTooSmall(p));
    }
    Ok(())
}

/// Coefficients, highest degree first.
fn new_poly(p: usize) -> Vec<f64> {
    let mut c = vec![0.0; p + 1];
    c[0] = 1.0;
    c[2] = -2.0;
    c[p] = -1.0;
    c
}

fn legacy_poly(p: usize) -> Vec<f64> {
    let mut c = vec![0.0; p];
    c[0] = 1.0;
    c[1] = -1.0;
    c[p - 1] = -1.0;
    c
}

/// Horner evaluation returning `(q(x), q'(x))`.
fn horner(c: &[f64], x: f64) -> (f64, f64) {
    let mut v = 0.0;
    let mut d = 0.0;
    for &a in c {
        d = d * x + v;
        v = v * x + a;
    }
    (v, d)
}

fn backward_error(c: &[f64], x: f64) -> f64 {
    let (v, _) = horner(c, x);
    let scale = c.iter().fold(0.0, |acc, &a| acc * x.abs() + a.abs());
    v.abs() / scale
}

/// Root of `c` in `[lo, hi]`, where the polynomial changes sign. Newton steps
/// that leave the current bracket are replaced by bisection.
fn bracketed_root(c: &[f64], mut lo: f64, mut hi: f64) -> Result<f64, RatesError> {
    let (flo, _) = horner(c, lo);
    let (fhi, _) = horner(c, hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if (flo < 0.0) == (fhi < 0.0) {
        return Err(RatesError::NoBracket { lo, hi });
    }
    let rising = fhi > 0.0;
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (v, d) = horner(c, x);
        if v == 0.0 {
            return Ok(x);
        }
        if (v > 0.0) == rising {
            hi = x;
        } else {
            lo = x;
        }
        let newton = x - v / d;
        let next = if d != 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if next == x || hi - lo <= f64::EPSILON * hi.abs() {
            x = next;
            break;
        }
        x = next;
    }
    Ok(x)
}

/// Growth rate `ρ_p`: the root in `(√2, 2)` of `λ^p − 2λ^{p−2} − 1`.
pub fn rho(p: usize) -> Result<GrowthRate, RatesError> {
    check_odd_period(p)?;
    let c = new_poly(p);
    // q(√2) = −1 and q(2) = 2^{p−1} − 1 > 0.
    let r = bracketed_root(&c, std::f64::consts::SQRT_2, 2.0)?;
    Ok(GrowthRate {
        p,
        rho: r,
        polynomial: PolynomialId::New,
        residual: backward_error(&c, r),
    })
}

/// Legacy rate: the root above one of `z^{p−1} − z^{p−2} − 1`.
pub fn rho_legacy(p: usize) -> Result<GrowthRate, RatesError> {
    check_odd_period(p)?;
    let c = legacy_poly(p);
    let r = bracketed_root(&c, 1.0, 2.0)?;
    Ok(GrowthRate {
        p,
        rho: r,
        polynomial: PolynomialId::Legacy,
        residual: backward_error(&c, r),
    })
}

/// `π_p(λ) = λ^{p−1} − λ^{p−2} − Σ_{j=0}^{p−3} (−λ)^j`, cross-checked against
/// `(λ^p − 2λ^{p−2} − 1)/(λ + 1)` when `λ ≠ −1`.
pub fn pi_eval(p: usize, lambda: f64) -> Result<f64, RatesError> {
    check_odd_period(p)?;
    let alt: f64 = (0..=p - 3).map(|j| (-lambda).powi(j as i32)).sum();
    let sum = lambda.powi(p as i32 - 1) - lambda.powi(p as i32 - 2) - alt;
    if lambda == -1.0 {
        return Ok(sum);
    }
    let (q, _) = horner(&new_poly(p), lambda);
    let rational = q / (lambda + 1.0);
    if (sum - rational).abs() > 1e-9 * sum.abs().max(1.0) {
        return Err(RatesError::FormMismatch {
            p,
            lambda,
            sum,
            rational,
        });
    }
    Ok(sum)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub p: usize,
    pub rho_new: f64,
    pub rho_legacy: f64,
    pub gap: f64,
}

/// One row per odd `p` in `3..=p_max`.
pub fn rate_table(p_max: usize) -> Result<Vec<RateRow>, RatesError> {
    (3..=p_max)
        .step_by(2)
        .map(|p| {
            let a = rho(p)?.rho;
            let b = rho_legacy(p)?.rho;
            Ok(RateRow {
                p,
                rho_new: a,
                rho_legacy: b,
                gap: a - b,
            })
        })
        .collect()
}

/// CSV with header `p,rho_new,rho_legacy,gap`.
pub fn write_rate_table<W: Write>(rows: &[RateRow], w: W) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["p", "rho_new", "rho_legacy", "gap"])?;
    for r in rows {
        wtr.write_record([
            r.p.to_string(),
            r.rho_new.to_string(),
            r.rho_legacy.to_string(),
            r.gap.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
