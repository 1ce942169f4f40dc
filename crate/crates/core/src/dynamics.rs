//! Periodic orbits of piecewise-linear interval maps and Sharkovsky's ordering.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Exec;
use crate::pl::{self, PLFunction, PlError};

/// `|f^k(x) − x|` at or below this for a proper divisor `k` disqualifies `x`
/// as a point of period `n`; also the distinctness and grouping tolerance.
pub const PERIOD_TOL: f64 = 1e-6;

/// Largest closure residual of a validated orbit.
pub const CLOSURE_TOL: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("periods are positive integers (got {0})")]
    ZeroPeriod(usize),
    #[error("Štefan labeling needs an odd period above one (got {0})")]
    NotOddCycle(usize),
    #[error("no periodic point found up to period {0}")]
    NoPeriods(usize),
    #[error(transparent)]
    Pl(#[from] PlError),
}

/// `n = 2^two_power · odd_part`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SharkovskyKey {
    pub odd_part: u64,
    pub two_power: u32,
}

impl SharkovskyKey {
    pub fn new(n: u64) -> Result<Self, DynamicsError> {
        if n == 0 {
            return Err(DynamicsError::ZeroPeriod(0));
        }
        let two_power = n.trailing_zeros();
        Ok(Self {
            odd_part: n >> two_power,
            two_power,
        })
    }

    pub fn value(self) -> u64 {
        self.odd_part << self.two_power
    }
}

/// `Greater` means earlier in Sharkovsky's ordering (3 is the greatest, 1 the least).
impl Ord for SharkovskyKey {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self.odd_part > 1, other.odd_part > 1) {
            (true, true) => other
                .two_power
                .cmp(&self.two_power)
                .then(other.odd_part.cmp(&self.odd_part)),
            (true, false) => Ordering::Greater,
            (false, true) => Ordering::Less,
            (false, false) => self.two_power.cmp(&other.two_power),
        }
    }
}

impl PartialOrd for SharkovskyKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// `Greater` iff `a ▷ b`.
pub fn sharkovsky_compare(a: u64, b: u64) -> Result<Ordering, DynamicsError> {
    Ok(SharkovskyKey::new(a)?.cmp(&SharkovskyKey::new(b)?))
}

/// Every `n' ≤ limit` forced by period `n` (including `n` itself), ascending.
pub fn sharkovsky_implied(n: u64, limit: u64) -> Result<Vec<u64>, DynamicsError> {
    let key = SharkovskyKey::new(n)?;
    (1..=limit)
        .filter_map(|m| match SharkovskyKey::new(m) {
            Ok(k) if k <= key => Some(Ok(m)),
            Ok(_) => None,
            Err(e) => Some(Err(e)),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Orbit {
    pub period: usize,
    /// Trajectory order: `points[i+1] = f(points[i])`.
    pub points: Vec<f64>,
    #[serde(rename = "residual")]
    pub closure_residual: f64,
}

impl Orbit {
    /// Follow `x0` for `period` steps.
    pub fn from_trajectory(f: &PLFunction, x0: f64, period: usize) -> Result<Self, DynamicsError> {
        if period == 0 {
            return Err(DynamicsError::ZeroPeriod(0));
        }
        let mut points = Vec::with_capacity(period);
        let mut x = x0;
        for _ in 0..period {
            points.push(x);
            x = f.iterate_eval(1, x)?;
        }
        Ok(Orbit {
            period,
            closure_residual: (x - x0).abs(),
            points,
        })
    }

    pub fn min_separation(&self) -> f64 {
        let mut s = self.points.clone();
        s.sort_by(f64::total_cmp);
        s.windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_valid(&self) -> bool {
        self.closure_residual <= CLOSURE_TOL
            && (self.period == 1 || self.min_separation() > PERIOD_TOL)
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string(self)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PeriodEntry {
    pub orbits: Vec<Orbit>,
    /// Intervals on which `f^n` is the identity.
    pub continua: Vec<(f64, f64)>,
    /// Some point of a continuum has minimal period exactly `n`.
    pub continuum_has_period: bool,
    /// Candidate fixed points of `f^n` whose trajectory failed validation.
    pub rejected: usize,
}

impl PeriodEntry {
    pub fn present(&self) -> bool {
        !self.orbits.is_empty() || self.continuum_has_period
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodScan {
    pub max_period: usize,
    pub entries: BTreeMap<usize, PeriodEntry>,
}

impl PeriodScan {
    /// Periods detected, ascending.
    pub fn periods(&self) -> Vec<usize> {
        self.entries
            .iter()
            .filter(|(_, e)| e.present())
            .map(|(&n, _)| n)
            .collect()
    }

    pub fn orbits(&self, n: usize) -> &[Orbit] {
        self.entries.get(&n).map(|e| e.orbits.as_slice()).unwrap_or(&[])
    }

    /// Whether every period forced (within the scan) by a detected period was
    /// also detected.
    pub fn sharkovsky_consistent(&self) -> bool {
        let found = self.periods();
        found.iter().all(|&n| {
            sharkovsky_implied(n as u64, self.max_period as u64)
                .map(|imp| imp.iter().all(|m| found.contains(&(*m as usize))))
                .unwrap_or(false)
        })
    }

    /// CSV `period,orbit_index,point_index,value`.
    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["period", "orbit_index", "point_index", "value"])?;
        for (n, e) in &self.entries {
            for (oi, o) in e.orbits.iter().enumerate() {
                for (pi, v) in o.points.iter().enumerate() {
                    wtr.write_record([
                        n.to_string(),
                        oi.to_string(),
                        pi.to_string(),
                        v.to_string(),
                    ])?;
                }
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

fn proper_divisors(n: usize) -> impl Iterator<Item = usize> {
    (1..n).filter(move |k| n.is_multiple_of(*k))
}

fn has_smaller_period(f: &PLFunction, x: f64, n: usize) -> Result<bool, PlError> {
    for k in proper_divisors(n) {
        if (f.iterate_eval(k, x)? - x).abs() <= PERIOD_TOL {
            return Ok(true);
        }
    }
    Ok(false)
}

fn scan_one(f: &PLFunction, fn_power: &PLFunction, n: usize) -> Result<PeriodEntry, DynamicsError> {
    let fp = fn_power.fixed_points();
    let mut entry = PeriodEntry {
        continua: fp.continua.clone(),
        ..Default::default()
    };
    for &(a, b) in &fp.continua {
        for s in [0.0, 1.0 / 3.0, 0.5, 2.0 / 3.0, 1.0] {
            let x = a + s * (b - a);
            if !has_smaller_period(f, x, n)? {
                entry.continuum_has_period = true;
            }
        }
    }
    let mut covered: Vec<f64> = Vec::new();
    for &x0 in &fp.points {
        if fp.is_on_continuum(x0) {
            continue;
        }
        if covered.iter().any(|&c| (c - x0).abs() <= PERIOD_TOL) {
            continue;
        }
        if has_smaller_period(f, x0, n)? {
            continue;
        }
        let orbit = Orbit::from_trajectory(f, x0, n)?;
        covered.extend_from_slice(&orbit.points);
        if orbit.is_valid() {
            entry.orbits.push(orbit);
        } else {
            entry.rejected += 1;
        }
    }
    Ok(entry)
}

/// Periodic orbits of every period `1..=max_period`.
///
/// Candidates are the fixed points of the exact `f^n`; points with a smaller
/// period are dropped and the rest are grouped by trajectory.
pub fn detect_periods(
    f: &PLFunction,
    max_period: usize,
    budget: usize,
    exec: Exec,
) -> Result<PeriodScan, DynamicsError> {
    if max_period == 0 {
        return Err(DynamicsError::ZeroPeriod(0));
    }
    let powers = pl::self_compose_powers(f, max_period, budget)?;
    let entries = exec.map_range(max_period, |i| scan_one(f, &powers[i], i + 1));
    let mut map = BTreeMap::new();
    for (i, e) in entries.into_iter().enumerate() {
        map.insert(i + 1, e?);
    }
    Ok(PeriodScan {
        max_period,
        entries: map,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrimePeriod {
    pub key: SharkovskyKey,
    /// Periods above this were not searched, so the true prime period may be
    /// Sharkovsky-greater than `key`.
    pub search_budget: usize,
}

impl PrimePeriod {
    pub fn period(&self) -> u64 {
        self.key.value()
    }
}

/// Sharkovsky-greatest detected period, up to `max_period`.
pub fn prime_period_up_to(
    f: &PLFunction,
    max_period: usize,
    budget: usize,
    exec: Exec,
) -> Result<PrimePeriod, DynamicsError> {
    let scan = detect_periods(f, max_period, budget, exec)?;
    prime_period_of_scan(&scan)
}

pub fn prime_period_of_scan(scan: &PeriodScan) -> Result<PrimePeriod, DynamicsError> {
    scan.periods()
        .into_iter()
        .map(|n| SharkovskyKey::new(n as u64))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .max()
        .map(|key| PrimePeriod {
            key,
            search_budget: scan.max_period,
        })
        .ok_or(DynamicsError::NoPeriods(scan.max_period))
}

/// Odd cycle with points named by spatial rank so that
/// `x_p < x_{p−2} < … < x_3 < x_1 < x_2 < x_4 < … < x_{p−1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledCycle {
    /// `points[k − 1]` is `x_k`.
    pub points: Vec<f64>,
}

impl LabeledCycle {
    pub fn period(&self) -> usize {
        self.points.len()
    }

    /// `x_k`, 1-based.
    pub fn x(&self, k: usize) -> f64 {
        self.points[k - 1]
    }

    /// The labeling of the spatially reflected cycle: `x'_1 = x_1` and the
    /// members of each pair `(x_{2k}, x_{2k+1})` swap.
    pub fn mirrored(&self) -> LabeledCycle {
        let p = self.period();
        let mut points = self.points.clone();
        for k in (2..p).step_by(2) {
            points.swap(k - 1, k);
        }
        LabeledCycle { points }
    }
}

pub fn stefan_label(orbit: &Orbit) -> Result<LabeledCycle, DynamicsError> {
    stefan_label_points(&orbit.points)
}

pub fn stefan_label_points(points: &[f64]) -> Result<LabeledCycle, DynamicsError> {
    let p = points.len();
    if p < 3 || p.is_multiple_of(2) {
        return Err(DynamicsError::NotOddCycle(p));
    }
    let mut s = points.to_vec();
    s.sort_by(f64::total_cmp);
    let mut labeled = vec![0.0; p];
    let half = (p - 1) / 2;
    // Left half, outermost first: x_p, x_{p−2}, …, x_1.
    for k in 0..=half {
        labeled[p - 2 * k - 1] = s[k];
    }
    // Right half: x_2, x_4, …, x_{p−1}.
    for k in 1..=half {
        labeled[2 * k - 1] = s[half + k];
    }
    Ok(LabeledCycle { points: labeled })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignPatternCheck {
    pub holds: bool,
    pub first_violation: Option<String>,
}

impl SignPatternCheck {
    fn fail(msg: String) -> Self {
        SignPatternCheck {
            holds: false,
            first_violation: Some(msg),
        }
    }
}

/// Sign and ordering pattern of the orbit of 0 under `ρ|x| − 1`.
///
/// `points` are `z_0 = 0, …, z_{p−1}`; `z_p = ρ|z_{p−1}| − 1` must return to 0.
pub fn orbit_sign_pattern_check(points: &[f64], rho: f64) -> SignPatternCheck {
    const TOL: f64 = 1e-9;
    let p = points.len();
    if p < 3 || p.is_multiple_of(2) {
        return SignPatternCheck::fail(format!("period {p} is not odd and above one"));
    }
    let mut z = points.to_vec();
    z.push(rho * z[p - 1].abs() - 1.0);
    if z[0].abs() > TOL {
        return SignPatternCheck::fail(format!("z_0 = {} is not 0", z[0]));
    }
    if (z[1] + 1.0).abs() > TOL {
        return SignPatternCheck::fail(format!("z_1 = {} is not -1", z[1]));
    }
    if (z[2] - (rho - 1.0)).abs() > TOL || z[2] <= 0.0 {
        return SignPatternCheck::fail(format!("z_2 = {} is not rho - 1 > 0", z[2]));
    }
    for (t, &zt) in z.iter().enumerate().take(p).skip(3) {
        if zt > TOL {
            return SignPatternCheck::fail(format!("z_{t} = {zt} is positive"));
        }
    }
    if z[p].abs() > CLOSURE_TOL {
        return SignPatternCheck::fail(format!("orbit does not close: z_{p} = {}", z[p]));
    }
    for t in (3..p).step_by(2) {
        if !(z[t] < z[t + 2]) {
            return SignPatternCheck::fail(format!(
                "z_{t} = {} is not below z_{} = {}",
                z[t],
                t + 2,
                z[t + 2]
            ));
        }
    }
    for t in (2..p - 1).step_by(2) {
        if !(z[t] > z[t + 2]) {
            return SignPatternCheck::fail(format!(
                "z_{t} = {} is not above z_{} = {}",
                z[t],
                t + 2,
                z[t + 2]
            ));
        }
    }
    if !(z[p - 1] > -1.0) {
        return SignPatternCheck::fail(format!("z_{} = {} is not above -1", p - 1, z[p - 1]));
    }
    SignPatternCheck {
        holds: true,
        first_violation: None,
    }
}
