//! Covering graphs over the intervals spanned by an odd cycle, their spectral
//! radii, and the integer recursion that lower-bounds crossing counts.
//!
//! Nodes are ordered `I_0, I_1, …, I_{(p−3)/2}, J_1, …, J_{(p−1)/2}`, so the
//! node of `J_k` has index `(p−1)/2 + k − 1`. `adjacency[j][i] == 1` means
//! node `i` covers node `j`, which makes `δ^{t+1} = A δ^t` the crossing
//! recursion.

use std::fmt;
use std::io::Write;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{self, DynamicsError, LabeledCycle, PeriodScan};
use crate::pl::{PLFunction, PlError};

/// Inclusion slack when testing `V ⊆ f(U)`.
pub const COVER_TOL: f64 = 1e-9;

pub const MAX_POWER_ITERATIONS: usize = 100_000;

#[derive(Debug, Error)]
pub enum CoveringError {
    #[error("covering graphs need an odd period of at least 3 (got {0})")]
    BadPeriod(usize),
    #[error("interval {label} = [{lo}, {hi}] is degenerate")]
    DegenerateInterval { label: IntervalLabel, lo: f64, hi: f64 },
    #[error("matrix is not square or has negative entries")]
    BadMatrix,
    #[error("power iteration did not converge within {0} iterations, even after shifting")]
    NoConvergence(usize),
    #[error(transparent)]
    Pl(#[from] PlError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IntervalLabel {
    I(usize),
    J(usize),
}

impl fmt::Display for IntervalLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IntervalLabel::I(k) => write!(f, "I{k}"),
            IntervalLabel::J(k) => write!(f, "J{k}"),
        }
    }
}

/// Node labels of a period-`p` graph in index order.
pub fn node_labels(p: usize) -> Vec<IntervalLabel> {
    let half = (p - 1) / 2;
    (0..half)
        .map(IntervalLabel::I)
        .chain((1..=half).map(IntervalLabel::J))
        .collect()
}

fn check_period(p: usize) -> Result<(), CoveringError> {
    if p < 3 || p.is_multiple_of(2) {
        return Err(CoveringError::BadPeriod(p));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoveringGraph {
    pub p: usize,
    pub labels: Vec<IntervalLabel>,
    /// Interval bounds per node; `None` for the symbolic theoretical graph.
    pub bounds: Option<Vec<(f64, f64)>>,
    pub adjacency: Vec<Vec<u8>>,
}

impl CoveringGraph {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, label: IntervalLabel) -> Option<usize> {
        self.labels.iter().position(|&l| l == label)
    }

    /// Does `from` cover `to`?
    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.adjacency[to][from] == 1
    }

    pub fn edges(&self) -> Vec<(IntervalLabel, IntervalLabel)> {
        let n = self.len();
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if self.has_edge(i, j) {
                    out.push((self.labels[i], self.labels[j]));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().flatten().filter(|&&a| a == 1).count()
    }

    pub fn matrix(&self) -> Vec<Vec<f64>> {
        self.adjacency
            .iter()
            .map(|row| row.iter().map(|&a| a as f64).collect())
            .collect()
    }

    pub fn spectral_radius(&self, tol: f64) -> Result<f64, CoveringError> {
        spectral_radius(&self.matrix(), tol)
    }

    /// JSON `{p, intervals: [{label, lo, hi}], adjacency}`.
    pub fn to_json(&self) -> serde_json::Value {
        let intervals: Vec<serde_json::Value> = self
            .labels
            .iter()
            .enumerate()
            .map(|(k, l)| {
                let (lo, hi) = match &self.bounds {
                    Some(b) => (Some(b[k].0), Some(b[k].1)),
                    None => (None, None),
                };
                serde_json::json!({ "label": l.to_string(), "lo": lo, "hi": hi })
            })
            .collect();
        serde_json::json!({
            "p": self.p,
            "intervals": intervals,
            "adjacency": self.adjacency,
        })
    }
}

/// The covering pattern forced by a Štefan cycle of odd period `p`:
/// `I_0 → I_0 ∪ J_1`, `I_j → J_{j+1}`, `J_j → I_j` for `j ≤ (p−3)/2`, and
/// `J_{(p−1)/2} → I_0 ∪ … ∪ I_{(p−3)/2}`.
pub fn build_theoretical_graph(p: usize) -> Result<CoveringGraph, CoveringError> {
    check_period(p)?;
    let n = p - 1;
    let half = (p - 1) / 2;
    let mut a = vec![vec![0u8; n]; n];
    a[0][0] = 1;
    for i in 0..half {
        a[i + half][i] = 1;
    }
    // J_k → I_k; the last J node fans out instead.
    for i in half..n - 1 {
        a[i + 1 - half][i] = 1;
    }
    for row in a.iter_mut().take(half) {
        row[n - 1] = 1;
    }
    Ok(CoveringGraph {
        p,
        labels: node_labels(p),
        bounds: None,
        adjacency: a,
    })
}

/// `(lo, hi)` of each node interval of a labeled cycle, in node order.
pub fn cycle_intervals(cycle: &LabeledCycle) -> Result<Vec<(f64, f64)>, CoveringError> {
    let p = cycle.period();
    check_period(p)?;
    let span = |a: f64, b: f64| (a.min(b), a.max(b));
    let labels = node_labels(p);
    let out: Vec<(f64, f64)> = labels
        .iter()
        .map(|l| match *l {
            IntervalLabel::I(0) => span(cycle.x(1), cycle.x(2)),
            IntervalLabel::I(j) => span(cycle.x(2 * j), cycle.x(2 * j + 2)),
            IntervalLabel::J(j) => span(cycle.x(2 * j + 1), cycle.x(2 * j - 1)),
        })
        .collect();
    for (l, &(lo, hi)) in labels.iter().zip(&out) {
        if !(hi - lo > 1e-12) {
            return Err(CoveringError::DegenerateInterval { label: *l, lo, hi });
        }
    }
    Ok(out)
}

/// Edge `U → V` iff `V ⊆ f(U)` up to [`COVER_TOL`], with `f(U)` computed
/// exactly from the knots of `f`.
pub fn build_empirical_graph(
    f: &PLFunction,
    cycle: &LabeledCycle,
) -> Result<CoveringGraph, CoveringError> {
    let p = cycle.period();
    let bounds = cycle_intervals(cycle)?;
    let images = bounds
        .iter()
        .map(|&(lo, hi)| f.image_of(lo, hi))
        .collect::<Result<Vec<_>, _>>()?;
    let n = bounds.len();
    let mut a = vec![vec![0u8; n]; n];
    for (i, img) in images.iter().enumerate() {
        for (j, v) in bounds.iter().enumerate() {
            if v.0 >= img.0 - COVER_TOL && v.1 <= img.1 + COVER_TOL {
                a[j][i] = 1;
            }
        }
    }
    Ok(CoveringGraph {
        p,
        labels: node_labels(p),
        bounds: Some(bounds),
        adjacency: a,
    })
}

/// Perron root of a nonnegative square matrix by power iteration with
/// 1-norm normalization.
///
/// Stops when successive estimates differ by at most `tol` and the iterate
/// itself has settled. If that never
/// happens (periodic matrices), the iteration is rerun on `A + I` and one is
/// subtracted.
pub fn spectral_radius(a: &[Vec<f64>], tol: f64) -> Result<f64, CoveringError> {
    let n = a.len();
    if a.iter().any(|r| r.len() != n || r.iter().any(|&v| v < 0.0 || !v.is_finite())) {
        return Err(CoveringError::BadMatrix);
    }
    if n == 0 {
        return Ok(0.0);
    }
    if let Some(r) = power_iteration(a, 0.0, tol) {
        return Ok(r);
    }
    power_iteration(a, 1.0, tol)
        .map(|r| (r - 1.0).max(0.0))
        .ok_or(CoveringError::NoConvergence(MAX_POWER_ITERATIONS))
}

fn power_iteration(a: &[Vec<f64>], shift: f64, tol: f64) -> Option<f64> {
    let n = a.len();
    let mut v = vec![1.0 / n as f64; n];
    let mut w = vec![0.0; n];
    let mut prev = f64::NAN;
    for _ in 0..MAX_POWER_ITERATIONS {
        for (j, row) in a.iter().enumerate() {
            w[j] = shift * v[j] + row.iter().zip(&v).map(|(x, y)| x * y).sum::<f64>();
        }
        let norm: f64 = w.iter().sum();
        if norm == 0.0 {
            return Some(0.0);
        }
        let mut moved = 0.0;
        for (vi, wi) in v.iter_mut().zip(&w) {
            let next = wi / norm;
            moved += (next - *vi).abs();
            *vi = next;
        }
        if (norm - prev).abs() <= tol && moved <= tol.max(1e-13) {
            return Some(norm);
        }
        prev = norm;
    }
    None
}

#[derive(Debug, Clone, PartialEq)]
pub struct OscillationTrace {
    pub labels: Vec<IntervalLabel>,
    /// `delta[t]` is `δ^t`.
    pub delta: Vec<Vec<BigUint>>,
}

impl OscillationTrace {
    pub fn at(&self, t: usize, label: IntervalLabel) -> Option<&BigUint> {
        let k = self.labels.iter().position(|&l| l == label)?;
        self.delta.get(t).map(|d| &d[k])
    }

    /// CSV `t,label,delta`.
    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["t", "label", "delta"])?;
        for (t, d) in self.delta.iter().enumerate() {
            for (l, v) in self.labels.iter().zip(d) {
                wtr.write_record([t.to_string(), l.to_string(), v.to_string()])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

/// `δ^0 = 1`, `δ^{s+1} = A δ^s` for `s < t`, in exact integers.
pub fn oscillation_lower_bound(g: &CoveringGraph, t: usize) -> OscillationTrace {
    let n = g.len();
    let mut delta = Vec::with_capacity(t + 1);
    delta.push(vec![BigUint::one(); n]);
    for s in 0..t {
        let cur: &Vec<BigUint> = &delta[s];
        let next: Vec<BigUint> = (0..n)
            .map(|j| {
                (0..n)
                    .filter(|&i| g.adjacency[j][i] == 1)
                    .fold(BigUint::zero(), |acc, i| acc + &cur[i])
            })
            .collect();
        delta.push(next);
    }
    OscillationTrace {
        labels: g.labels.clone(),
        delta,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrientationCheck {
    pub satisfied: bool,
    /// Required edges absent from the empirical graph, as `(from, to)`.
    pub missing: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveringReport {
    pub p: usize,
    pub direct: OrientationCheck,
    pub mirrored: OrientationCheck,
    pub empirical_spectral_radius: f64,
}

impl CoveringReport {
    pub fn any_satisfied(&self) -> bool {
        self.direct.satisfied || self.mirrored.satisfied
    }

    fn missing_count(&self) -> usize {
        self.direct.missing.len().min(self.mirrored.missing.len())
    }
}

fn orientation_check(theory: &CoveringGraph, emp: &CoveringGraph) -> OrientationCheck {
    let n = theory.len();
    let mut missing = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if theory.has_edge(i, j) && !emp.has_edge(i, j) {
                missing.push((theory.labels[i].to_string(), theory.labels[j].to_string()));
            }
        }
    }
    OrientationCheck {
        satisfied: missing.is_empty(),
        missing,
    }
}

/// Check the forced covering edges on the empirical graph of `cycle`, both as
/// labeled and with the labeling of the reflected cycle.
pub fn verify_covering(
    f: &PLFunction,
    cycle: &LabeledCycle,
    tol: f64,
) -> Result<CoveringReport, CoveringError> {
    let p = cycle.period();
    let theory = build_theoretical_graph(p)?;
    let direct = build_empirical_graph(f, cycle)?;
    let mirrored = build_empirical_graph(f, &cycle.mirrored())?;
    Ok(CoveringReport {
        p,
        direct: orientation_check(&theory, &direct),
        mirrored: orientation_check(&theory, &mirrored),
        empirical_spectral_radius: direct.spectral_radius(tol)?,
    })
}

/// Scan the period-`p` cycles of a period scan and return the one whose
/// covering check misses the fewest forced edges.
pub fn select_stefan_cycle(
    f: &PLFunction,
    scan: &PeriodScan,
    p: usize,
    tol: f64,
) -> Result<Option<(LabeledCycle, CoveringReport)>, CoveringError> {
    let mut best: Option<(LabeledCycle, CoveringReport)> = None;
    for orbit in scan.orbits(p) {
        let cycle = dynamics::stefan_label(orbit)?;
        let report = match verify_covering(f, &cycle, tol) {
            Ok(r) => r,
            Err(CoveringError::DegenerateInterval { .. }) => continue,
            Err(e) => return Err(e),
        };
        let better = best
            .as_ref()
            .map(|(_, b)| report.missing_count() < b.missing_count())
            .unwrap_or(true);
        if better {
            best = Some((cycle, report));
        }
    }
    Ok(best)
}
