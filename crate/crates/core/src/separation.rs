//! Hard functions, the L¹ separation floor for under-sized ReLU networks and
//! the per-interval integral bound behind it.

use std::io::Write;

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{self, DynamicsError, Orbit, CLOSURE_TOL};
use crate::exec::Exec;
use crate::pl::{PLFunction, PlError, LEVEL_TOL, SELF_MAP_EPS};
use crate::rates::{self, RatesError};

/// Relative slack allowed on the per-interval bound; boundary intervals meet
/// it with equality.
pub const RATIO_SLACK: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SeparationError {
    #[error("orbit of 0 under the period-{p} family fails to close: residual {residual:e}")]
    OrbitNotClosed { p: usize, residual: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("growth rate must exceed 1 (got {0})")]
    RhoTooSmall(f64),
    #[error(transparent)]
    Rates(#[from] RatesError),
    #[error(transparent)]
    Pl(#[from] PlError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

/// `ρ_p|x| − 1` on `[−1, 1]`, checked to carry the cycle of 0 with period `p`.
pub fn hard_family(p: usize) -> Result<PLFunction, SeparationError> {
    let r = rates::rho(p)?.rho;
    let f = slope_map(r)?;
    let orbit = Orbit::from_trajectory(&f, 0.0, p)?;
    if !(orbit.closure_residual <= CLOSURE_TOL) {
        return Err(SeparationError::OrbitNotClosed {
            p,
            residual: orbit.closure_residual,
        });
    }
    Ok(f)
}

/// The cycle of 0 under [`hard_family`].
pub fn hard_family_orbit(p: usize) -> Result<Orbit, SeparationError> {
    let f = hard_family(p)?;
    Ok(Orbit::from_trajectory(&f, 0.0, p)?)
}

/// `s|x| − 1` on `[−1, 1]` for `0 ≤ s ≤ 2`.
pub fn slope_map(s: f64) -> Result<PLFunction, SeparationError> {
    if !(0.0..=2.0).contains(&s) {
        return Err(SeparationError::InvalidConfig(format!(
            "slope {s} does not give a self-map of [-1, 1]"
        )));
    }
    let f = PLFunction::new(&[(-1.0, s - 1.0), (0.0, -1.0), (1.0, s - 1.0)])?;
    f.check_self_map(SELF_MAP_EPS)?;
    Ok(f)
}

/// `2|x| − 1` on `[−1, 1]`.
pub fn tent_map() -> PLFunction {
    PLFunction::new(&[(-1.0, 1.0), (0.0, -1.0), (1.0, 1.0)]).expect("static knots")
}

/// `(2u)^l`.
pub fn capacity(u: u64, l: u32) -> BigUint {
    BigUint::from(2 * u).pow(l)
}

/// Smallest integer `t` with `t ≥ ((l+3) ln 2 + l ln u) / ln ρ`.
pub fn min_compositions(l: u32, u: u64, rho: f64) -> Result<u64, SeparationError> {
    if !(rho > 1.0) {
        return Err(SeparationError::RhoTooSmall(rho));
    }
    let ln2 = std::f64::consts::LN_2;
    let need = ((l as f64 + 3.0) * ln2 + l as f64 * (u as f64).ln()) / rho.ln();
    Ok(need.ceil() as u64)
}

/// Endpoints of `I_0` for the period-`p` family's cycle of 0.
pub fn default_levels(p: usize) -> Result<(f64, f64), SeparationError> {
    let orbit = hard_family_orbit(p)?;
    let c = dynamics::stefan_label(&orbit)?;
    let (a, b) = (c.x(1), c.x(2));
    Ok((a.min(b), a.max(b)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationConfig {
    pub rho: f64,
    #[serde(rename = "L")]
    pub lipschitz: f64,
    pub t: u32,
    pub u: u64,
    pub l: u32,
    pub x: f64,
    pub y: f64,
    pub domain: (f64, f64),
}

impl SeparationConfig {
    /// Family defaults: `L = ρ = ρ_p`, levels from [`default_levels`].
    pub fn for_family(p: usize, t: u32, u: u64, l: u32) -> Result<Self, SeparationError> {
        let rho = rates::rho(p)?.rho;
        let (x, y) = default_levels(p)?;
        Ok(SeparationConfig {
            rho,
            lipschitz: rho,
            t,
            u,
            l,
            x,
            y,
            domain: (-1.0, 1.0),
        })
    }

    pub fn validate(&self) -> Result<(), SeparationError> {
        let bad = |m: String| Err(SeparationError::InvalidConfig(m));
        if !(self.x < self.y) {
            return bad(format!("levels need x < y (got {} and {})", self.x, self.y));
        }
        if self.t == 0 || self.u == 0 || self.l == 0 {
            return bad("t, u and l must be at least 1".into());
        }
        if !(self.rho > 1.0) {
            return Err(SeparationError::RhoTooSmall(self.rho));
        }
        if !(self.lipschitz >= self.rho - 1e-9) {
            return bad(format!(
                "Lipschitz constant {} is below the growth rate {}",
                self.lipschitz, self.rho
            ));
        }
        if !(self.domain.0 < self.domain.1) {
            return bad(format!("empty domain {:?}", self.domain));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport {
    pub config: SeparationConfig,
    #[serde(with = "big_decimal")]
    pub capacity: BigUint,
    /// `ρ^t / 8`.
    pub threshold: f64,
    pub condition_met: bool,
    pub floor_headline: f64,
    pub floor_refined: f64,
    pub crossings_used: u128,
    pub crossings_measured: bool,
    pub warnings: Vec<String>,
}

mod big_decimal {
    use num_bigint::BigUint;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl SeparationReport {
    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    pub const CSV_HEADER: [&'static str; 11] = [
        "rho",
        "L",
        "t",
        "u",
        "l",
        "x",
        "y",
        "capacity",
        "condition",
        "floor_headline",
        "floor_refined",
    ];

    pub fn csv_row(&self) -> [String; 11] {
        let c = &self.config;
        [
            c.rho.to_string(),
            c.lipschitz.to_string(),
            c.t.to_string(),
            c.u.to_string(),
            c.l.to_string(),
            c.x.to_string(),
            c.y.to_string(),
            self.capacity.to_string(),
            self.condition_met.to_string(),
            self.floor_headline.to_string(),
            self.floor_refined.to_string(),
        ]
    }

    pub fn write_csv<W: Write>(reports: &[SeparationReport], w: W) -> csv::Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(Self::CSV_HEADER)?;
        for r in reports {
            wtr.write_record(r.csv_row())?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Separation floor for `cfg`.
///
/// `crossings`, when known, replaces the idealized count `⌈ρ^t⌉` in the
/// refined floor `N (y−x)² / (16 L^t) · (1 − 2 (2u)^l / N)`.
pub fn theory_bound(
    cfg: &SeparationConfig,
    crossings: Option<u64>,
) -> Result<SeparationReport, SeparationError> {
    cfg.validate()?;
    let cap = capacity(cfg.u, cfg.l);
    let cap_f = cap.to_f64().unwrap_or(f64::INFINITY);
    let rho_t = cfg.rho.powi(cfg.t as i32);
    let threshold = rho_t / 8.0;
    let condition_met = cap_f <= threshold;
    let gap = cfg.y - cfg.x;
    let mut warnings = Vec::new();

    let matches = (cfg.lipschitz - cfg.rho).abs() <= 1e-9;
    let floor_headline = if condition_met && matches {
        gap * gap / 32.0
    } else {
        0.0
    };
    if !matches && cfg.lipschitz > cfg.rho {
        warnings.push(format!(
            "L = {} exceeds rho = {}: the bound shrinks by (rho/L)^t = {:e} and gives no meaningful L1 guarantee",
            cfg.lipschitz,
            cfg.rho,
            (cfg.rho / cfg.lipschitz).powi(cfg.t as i32)
        ));
    }
    if !condition_met {
        warnings.push(format!(
            "capacity {cap} exceeds rho^t/8 = {threshold:.6e}; the headline floor does not apply"
        ));
    }

    let (n, measured) = match crossings {
        Some(c) => (c as f64, true),
        None => (rho_t.ceil(), false),
    };
    let l_t = cfg.lipschitz.powi(cfg.t as i32);
    let floor_refined = (gap * gap / (16.0 * l_t) * (n - 2.0 * cap_f)).max(0.0);

    Ok(SeparationReport {
        config: cfg.clone(),
        capacity: cap,
        threshold,
        condition_met,
        floor_headline,
        floor_refined,
        crossings_used: n as u128,
        crossings_measured: measured,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// `h` below the midpoint, touching `x`.
    Low,
    /// `h` at or above the midpoint, touching `y`.
    High,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalBound {
    pub lo: f64,
    pub hi: f64,
    pub side: Side,
    pub integral: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegralReport {
    /// `(y−x)² / (8 L_t)`.
    pub bound: f64,
    pub intervals: Vec<IntervalBound>,
    pub min_ratio: Option<f64>,
}

impl IntegralReport {
    /// Every interval meets the bound up to [`RATIO_SLACK`]; false when empty.
    pub fn holds(&self) -> bool {
        self.min_ratio.is_some_and(|r| r >= 1.0 - RATIO_SLACK)
    }

    pub fn failures(&self) -> impl Iterator<Item = &IntervalBound> {
        self.intervals.iter().filter(|b| b.ratio < 1.0 - RATIO_SLACK)
    }
}

/// Maximal intervals on which `h ≥ mid` (or `h < mid`) holds, with the range
/// of `h` over each.
fn threshold_partition(h: &PLFunction, mid: f64) -> Vec<(f64, f64, Side, (f64, f64))> {
    let xs = h.xs();
    let ys = h.ys();
    let side = |y: f64| if y >= mid { Side::High } else { Side::Low };
    let mut out = Vec::new();
    let mut start = xs[0];
    let mut cur = side(ys[0]);
    let mut range = (ys[0], ys[0]);
    for k in 0..xs.len() - 1 {
        let (x0, y0, x1, y1) = (xs[k], ys[k], xs[k + 1], ys[k + 1]);
        let s1 = side(y1);
        if s1 != cur {
            let z = if y1 == mid {
                x1
            } else {
                x0 + (mid - y0) / (y1 - y0) * (x1 - x0)
            };
            out.push((start, z, cur, (range.0.min(mid), range.1.max(mid))));
            start = z;
            cur = s1;
            range = (mid, mid);
        }
        range = (range.0.min(y1), range.1.max(y1));
    }
    out.push((start, xs[xs.len() - 1], cur, range));
    out
}

/// Exact `∫_U |h − (x+y)/2|` over the alternating intervals touching `x` or
/// `y`, against the bound `(y−x)² / (8 L_t)`.
pub fn interval_integral_check(
    h: &PLFunction,
    x: f64,
    y: f64,
    l_t: f64,
) -> Result<IntegralReport, SeparationError> {
    interval_integral_check_with(h, x, y, l_t, Exec::default())
}

pub fn interval_integral_check_with(
    h: &PLFunction,
    x: f64,
    y: f64,
    l_t: f64,
    exec: Exec,
) -> Result<IntegralReport, SeparationError> {
    if !(x < y) {
        return Err(PlError::InvalidLevels(x, y).into());
    }
    let mid = 0.5 * (x + y);
    let bound = (y - x) * (y - x) / (8.0 * l_t);

    let mut kept: Vec<(f64, f64, Side)> = Vec::new();
    for (lo, hi, side, (mn, mx)) in threshold_partition(h, mid) {
        let level = match side {
            Side::High => y,
            Side::Low => x,
        };
        let touches = mn <= level + LEVEL_TOL && mx >= level - LEVEL_TOL;
        if touches && kept.last().is_none_or(|k| k.2 != side) && hi > lo {
            kept.push((lo, hi, side));
        }
    }

    let integrals = exec.map(&kept, |&(lo, hi, _)| h.integral_abs_offset(lo, hi, mid));
    let mut intervals = Vec::with_capacity(kept.len());
    for (&(lo, hi, side), integral) in kept.iter().zip(integrals) {
        let integral = integral?;
        intervals.push(IntervalBound {
            lo,
            hi,
            side,
            integral,
            ratio: integral / bound,
        });
    }
    let min_ratio = intervals.iter().map(|b| b.ratio).reduce(f64::min);
    Ok(IntegralReport {
        bound,
        intervals,
        min_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pl::{self_compose, DEFAULT_PIECE_BUDGET};
    use approx::assert_abs_diff_eq;

    const PHI: f64 = 1.618_033_988_749_895;

    #[test]
    fn family_knots_and_orbits() {
        let f = hard_family(3).unwrap();
        assert_abs_diff_eq!(f.ys()[0], PHI - 1.0, epsilon = 1e-12);
        assert_eq!(f.ys()[1], -1.0);
        let o3 = hard_family_orbit(3).unwrap();
        assert_abs_diff_eq!(o3.points[2], PHI - 1.0, epsilon = 1e-12);
        let o5 = hard_family_orbit(5).unwrap();
        for (a, b) in o5.points.iter().zip([0.0, -1.0, 0.51288, -0.22407, -0.66101]) {
            assert_abs_diff_eq!(*a, b, epsilon = 5e-5);
        }
        for p in [3, 5, 7, 9] {
            let o = hard_family_orbit(p).unwrap();
            assert!(o.closure_residual <= CLOSURE_TOL);
            assert!(o.min_separation() >= 1e-3);
        }
        assert!(hard_family(4).is_err());
    }

    #[test]
    fn tent_basics() {
        let t = tent_map();
        assert_eq!(t.lipschitz(), 2.0);
        for n in 1..=10 {
            let h = self_compose(&t, n, DEFAULT_PIECE_BUDGET).unwrap();
            assert_eq!(h.count_crossings(-1.0, 1.0).unwrap(), 1 << n);
        }
    }

    #[test]
    fn capacity_examples() {
        assert_eq!(capacity(20, 5), BigUint::from(102_400_000u64));
        assert_eq!(capacity(1, 1), BigUint::from(2u32));
        assert_eq!(capacity(20, 4), BigUint::from(2_560_000u64));
        assert_eq!(capacity(1000, 10).to_string(), format!("1024{}", "0".repeat(30)));
    }

    #[test]
    fn min_compositions_examples() {
        assert_eq!(min_compositions(4, 20, PHI).unwrap(), 35);
        assert_eq!(min_compositions(5, 20, PHI).unwrap(), 43);
        assert_eq!(min_compositions(1, 1, 2.0).unwrap(), 4);
        assert!(min_compositions(1, 1, 1.0).is_err());
    }

    #[test]
    fn default_levels_p3() {
        let (x, y) = default_levels(3).unwrap();
        assert_abs_diff_eq!(x, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(y, PHI - 1.0, epsilon = 1e-12);
    }

    fn cfg(t: u32, u: u64, l: u32) -> SeparationConfig {
        SeparationConfig {
            rho: PHI,
            lipschitz: PHI,
            t,
            u,
            l,
            x: 0.0,
            y: PHI - 1.0,
            domain: (-1.0, 1.0),
        }
    }

    #[test]
    fn theory_bound_examples() {
        let r = theory_bound(&cfg(40, 20, 4), None).unwrap();
        assert!(r.condition_met);
        assert_abs_diff_eq!(r.floor_headline, 0.011936, epsilon = 1e-6);
        assert!(r.floor_refined > 0.0);

        let r = theory_bound(&cfg(40, 20, 5), None).unwrap();
        assert!(!r.condition_met);
        assert_eq!(r.floor_headline, 0.0);
        assert!(!r.warnings.is_empty());

        let mut c = cfg(10, 1, 1);
        c.lipschitz = 2.0;
        let r = theory_bound(&c, None).unwrap();
        assert_eq!(r.floor_headline, 0.0);
        assert!(r.warnings.iter().any(|w| w.contains("no meaningful")));

        let mut c = cfg(10, 1, 1);
        c.x = 1.0;
        assert!(theory_bound(&c, None).is_err());
    }

    #[test]
    fn refined_floor_formula() {
        let r = theory_bound(&cfg(14, 4, 2), Some(1000)).unwrap();
        let gap: f64 = PHI - 1.0;
        let expect = 1000.0 * gap * gap / (16.0 * PHI.powi(14)) * (1.0 - 2.0 * 64.0 / 1000.0);
        assert_abs_diff_eq!(r.floor_refined, expect, epsilon = 1e-15);
        assert!(r.crossings_measured);
        let r = theory_bound(&cfg(14, 40, 2), Some(10)).unwrap();
        assert_eq!(r.floor_refined, 0.0);
    }

    #[test]
    fn report_serializes() {
        let r = theory_bound(&cfg(40, 20, 4), None).unwrap();
        let v: serde_json::Value = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        assert_eq!(v["capacity"], "2560000");
        let mut buf = Vec::new();
        SeparationReport::write_csv(&[r], &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("rho,L,t,u,l,x,y,capacity,condition,floor_headline,floor_refined\n"));
    }

    #[test]
    fn integral_bound_tent() {
        let t = tent_map();
        for n in 1..=10 {
            let h = self_compose(&t, n, DEFAULT_PIECE_BUDGET).unwrap();
            let rep = interval_integral_check(&h, -1.0, 1.0, 2f64.powi(n as i32)).unwrap();
            assert_eq!(rep.intervals.len() as u64, h.count_crossings(-1.0, 1.0).unwrap() + 1);
            assert!(rep.holds(), "n={n}: {:?}", rep.min_ratio);
        }
    }

    #[test]
    fn integral_bound_family_and_understated_lipschitz() {
        let f = hard_family(3).unwrap();
        for n in 1..=12 {
            let h = self_compose(&f, n, DEFAULT_PIECE_BUDGET).unwrap();
            let lt = PHI.powi(n as i32);
            let rep = interval_integral_check(&h, 0.0, PHI - 1.0, lt).unwrap();
            assert!(rep.holds(), "n={n}: {:?}", rep.min_ratio);
            let half = interval_integral_check(&h, 0.0, PHI - 1.0, lt / 2.0).unwrap();
            assert_abs_diff_eq!(
                half.min_ratio.unwrap(),
                0.5 * rep.min_ratio.unwrap(),
                epsilon = 1e-12
            );
        }
        let h = self_compose(&tent_map(), 5, DEFAULT_PIECE_BUDGET).unwrap();
        let bad = interval_integral_check(&h, -1.0, 1.0, 16.0).unwrap();
        assert!(!bad.holds());
        assert!(bad.failures().count() > 0);
    }

    #[test]
    fn integral_matches_midpoint_oracle() {
        let h = self_compose(&hard_family(3).unwrap(), 6, DEFAULT_PIECE_BUDGET).unwrap();
        let mid = 0.5 * (PHI - 1.0);
        let rep = interval_integral_check(&h, 0.0, PHI - 1.0, PHI.powi(6)).unwrap();
        for b in &rep.intervals {
            let n = 20_000;
            let w = (b.hi - b.lo) / n as f64;
            let q: f64 = (0..n)
                .map(|i| (h.eval(b.lo + (i as f64 + 0.5) * w).unwrap() - mid).abs() * w)
                .sum();
            assert_abs_diff_eq!(b.integral, q, epsilon = 1e-6 * (b.hi - b.lo));
        }
    }

    #[test]
    fn no_qualifying_intervals() {
        let c = PLFunction::constant(-1.0, 1.0, 0.0).unwrap();
        let rep = interval_integral_check(&c, 0.5, 0.9, 1.0).unwrap();
        assert!(rep.intervals.is_empty());
        assert!(!rep.holds());
    }
}
