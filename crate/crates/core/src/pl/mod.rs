//! Exact calculus of continuous piecewise-linear maps on a closed interval.
//!
//! A [`PLFunction`] is stored as its knots: strictly increasing abscissae with
//! the function value at each, linearly interpolated in between. Composition,
//! crossing counts, fixed points and L¹ distances are all computed from the
//! knots directly, so results are exact up to double rounding.

mod io;

use std::cmp::Ordering;

use thiserror::Error;

use crate::exec::Exec;

pub use io::{read_csv, read_json, write_csv, write_json, PlJson};

/// Overshoot of a self-map beyond its domain that is clamped instead of
/// rejected.
pub const SELF_MAP_EPS: f64 = 1e-9;

/// Values within this distance of a crossing level count as hitting it.
pub const LEVEL_TOL: f64 = 1e-9;

/// `f(x) - x` within this distance of zero at a knot counts as a fixed point.
pub const FIXED_POINT_TOL: f64 = 1e-9;

/// Fixed points closer than this are merged.
pub const FIXED_POINT_DEDUP: f64 = 1e-7;

pub const DEFAULT_PIECE_BUDGET: usize = 5_000_000;

/// Environment variable overriding [`DEFAULT_PIECE_BUDGET`].
pub const PIECE_BUDGET_ENV: &str = "CHAOS_SEP_PIECE_BUDGET";

/// Knot budget from `CHAOS_SEP_PIECE_BUDGET`, falling back to the default
/// when unset or unparsable.
pub fn piece_budget_from_env() -> usize {
    std::env::var(PIECE_BUDGET_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&b| b >= 2)
        .unwrap_or(DEFAULT_PIECE_BUDGET)
}

#[derive(Debug, Error)]
pub enum PlError {
    #[error("a piecewise-linear function needs at least 2 knots, got {0}")]
    TooFewKnots(usize),
    #[error("knot abscissae must be strictly increasing (knot {index}: {prev} then {next})")]
    NotIncreasing { index: usize, prev: f64, next: f64 },
    #[error("knot {0} is not finite")]
    NonFinite(usize),
    #[error("x = {x} lies outside the domain [{lo}, {hi}]")]
    OutOfDomain { x: f64, lo: f64, hi: f64 },
    #[error("value {value} escapes the domain [{lo}, {hi}] of the outer function")]
    RangeEscape { value: f64, lo: f64, hi: f64 },
    #[error("not a self-map: range [{min}, {max}] is not inside [{lo}, {hi}]")]
    NotSelfMap { min: f64, max: f64, lo: f64, hi: f64 },
    #[error("piece budget exceeded at composition step t = {step}: {knots} knots > {budget}")]
    BudgetExceeded { step: usize, knots: usize, budget: usize },
    #[error("domains differ: [{0}, {1}] vs [{2}, {3}]")]
    DomainMismatch(f64, f64, f64, f64),
    #[error("crossing levels must satisfy x < y (got x = {0}, y = {1})")]
    InvalidLevels(f64, f64),
    #[error("iteration count must be at least 1")]
    ZeroIterations,
    #[error("no sample points given")]
    EmptySample,
    #[error("malformed function file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, PlError>;

/// Continuous piecewise-linear function on `[xs[0], xs[n-1]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PLFunction {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl PLFunction {
    pub fn new(knots: &[(f64, f64)]) -> Result<Self> {
        let (xs, ys) = knots.iter().copied().unzip();
        Self::from_parts(xs, ys)
    }

    pub fn from_parts(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(PlError::Format(format!(
                "{} abscissae but {} values",
                xs.len(),
                ys.len()
            )));
        }
        if xs.len() < 2 {
            return Err(PlError::TooFewKnots(xs.len()));
        }
        for (i, (x, y)) in xs.iter().zip(&ys).enumerate() {
            if !x.is_finite() || !y.is_finite() {
                return Err(PlError::NonFinite(i));
            }
        }
        for (i, w) in xs.windows(2).enumerate() {
            if w[0] >= w[1] {
                return Err(PlError::NotIncreasing {
                    index: i + 1,
                    prev: w[0],
                    next: w[1],
                });
            }
        }
        Ok(Self { xs, ys })
    }

    pub fn identity(lo: f64, hi: f64) -> Result<Self> {
        Self::new(&[(lo, lo), (hi, hi)])
    }

    pub fn constant(lo: f64, hi: f64, c: f64) -> Result<Self> {
        Self::new(&[(lo, c), (hi, c)])
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.xs[0], self.xs[self.xs.len() - 1])
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn knots(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs.iter().copied().zip(self.ys.iter().copied())
    }

    pub fn num_knots(&self) -> usize {
        self.xs.len()
    }

    /// Number of linear pieces (knots minus one; collinear knots are not merged).
    pub fn pieces(&self) -> usize {
        self.xs.len() - 1
    }

    /// Minimum and maximum value.
    pub fn range(&self) -> (f64, f64) {
        self.ys
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &y| {
                (lo.min(y), hi.max(y))
            })
    }

    /// Index `i` of the segment `[xs[i], xs[i+1]]` containing `x`.
    fn segment_of(&self, x: f64) -> usize {
        let n = self.xs.len();
        let i = self.xs.partition_point(|&k| k <= x);
        i.saturating_sub(1).min(n - 2)
    }

    /// Evaluation without the domain check; `x` is assumed inside.
    fn eval_in(&self, x: f64) -> f64 {
        let i = self.segment_of(x);
        interpolate(self.xs[i], self.ys[i], self.xs[i + 1], self.ys[i + 1], x)
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        let (lo, hi) = self.domain();
        if !(lo..=hi).contains(&x) {
            return Err(PlError::OutOfDomain { x, lo, hi });
        }
        Ok(self.eval_in(x))
    }

    /// Check that the range lies in the domain up to `eps`.
    pub fn check_self_map(&self, eps: f64) -> Result<()> {
        let (lo, hi) = self.domain();
        let (min, max) = self.range();
        if min < lo - eps || max > hi + eps {
            return Err(PlError::NotSelfMap { min, max, lo, hi });
        }
        Ok(())
    }

    /// Maximum absolute slope.
    pub fn lipschitz(&self) -> f64 {
        self.xs
            .windows(2)
            .zip(self.ys.windows(2))
            .map(|(x, y)| ((y[1] - y[0]) / (x[1] - x[0])).abs())
            .fold(0.0, f64::max)
    }

    /// `self ∘ inner` with the default knot budget.
    pub fn compose(&self, inner: &PLFunction) -> Result<PLFunction> {
        self.compose_with_budget(inner, DEFAULT_PIECE_BUDGET)
    }

    /// Exact knots of `self ∘ inner`: every knot of `inner` plus the preimages
    /// under `inner` of every breakpoint of `self`.
    pub fn compose_with_budget(&self, inner: &PLFunction, budget: usize) -> Result<PLFunction> {
        compose_step(self, inner, budget, 1)
    }

    /// Pointwise `f^t(x)`, clamping overshoot up to [`SELF_MAP_EPS`].
    pub fn iterate_eval(&self, t: usize, x: f64) -> Result<f64> {
        let (lo, hi) = self.domain();
        let mut v = x;
        if !(lo..=hi).contains(&v) {
            return Err(PlError::OutOfDomain { x, lo, hi });
        }
        for _ in 0..t {
            v = clamp_into(self.eval_in(v), lo, hi)?;
        }
        Ok(v)
    }

    /// Number of alternating sweeps between the levels `x` and `y`.
    ///
    /// Every point where the function meets a level is a hit (touching counts,
    /// a flat run on a level is one hit). With the hits sorted by abscissa and
    /// runs of equal level collapsed, the count is the number of level changes:
    /// a single monotone branch from `x` to `y` counts once.
    pub fn count_crossings(&self, x: f64, y: f64) -> Result<u64> {
        if !(x < y) {
            return Err(PlError::InvalidLevels(x, y));
        }
        let mut last: Option<Level> = None;
        let mut changes = 0u64;
        let mut visit = |lv: Level| {
            if last != Some(lv) {
                if last.is_some() {
                    changes += 1;
                }
                last = Some(lv);
            }
        };
        let snap = |v: f64| {
            if (v - x).abs() <= LEVEL_TOL {
                x
            } else if (v - y).abs() <= LEVEL_TOL {
                y
            } else {
                v
            }
        };
        for w in self.ys.windows(2) {
            let (y0, y1) = (snap(w[0]), snap(w[1]));
            let hit = |lv: f64| y0.min(y1) <= lv && lv <= y0.max(y1);
            let (hx, hy) = (hit(x), hit(y));
            // Within one segment the lower level is met first when rising.
            if y1 >= y0 {
                if hx {
                    visit(Level::Low);
                }
                if hy {
                    visit(Level::High);
                }
            } else {
                if hy {
                    visit(Level::High);
                }
                if hx {
                    visit(Level::Low);
                }
            }
        }
        Ok(changes)
    }

    /// Exact `∫ |self - other|` over the common domain.
    pub fn l1_distance(&self, other: &PLFunction) -> Result<f64> {
        self.same_domain(other)?;
        let mut total = 0.0;
        let mut prev: Option<(f64, f64)> = None;
        for (x, a, b) in merge_walk(self, other) {
            let d = a - b;
            if let Some((px, pd)) = prev {
                total += abs_linear_integral(x - px, pd, d);
            }
            prev = Some((x, d));
        }
        Ok(total)
    }

    /// Fraction of `points` where thresholding the two functions at
    /// `threshold` disagrees.
    pub fn classification_distance(
        &self,
        other: &PLFunction,
        threshold: f64,
        points: &[f64],
    ) -> Result<f64> {
        if points.is_empty() {
            return Err(PlError::EmptySample);
        }
        let mut wrong = 0usize;
        for &p in points {
            if (self.eval(p)? >= threshold) != (other.eval(p)? >= threshold) {
                wrong += 1;
            }
        }
        Ok(wrong as f64 / points.len() as f64)
    }

    /// All solutions of `f(x) = x`.
    pub fn fixed_points(&self) -> FixedPoints {
        let mut roots: Vec<f64> = Vec::new();
        let mut continua: Vec<(f64, f64)> = Vec::new();
        for i in 0..self.pieces() {
            let (x0, x1) = (self.xs[i], self.xs[i + 1]);
            let d0 = self.ys[i] - x0;
            let d1 = self.ys[i + 1] - x1;
            let z0 = d0.abs() <= FIXED_POINT_TOL;
            let z1 = d1.abs() <= FIXED_POINT_TOL;
            if z0 && z1 {
                match continua.last_mut() {
                    Some(last) if last.1 == x0 => last.1 = x1,
                    _ => continua.push((x0, x1)),
                }
                roots.push(x0);
                roots.push(x1);
            } else if z0 || z1 {
                if z0 {
                    roots.push(x0);
                }
                if z1 {
                    roots.push(x1);
                }
            } else if (d0 < 0.0) != (d1 < 0.0) {
                roots.push(x0 + d0 / (d0 - d1) * (x1 - x0));
            }
        }
        roots.sort_by(f64::total_cmp);
        let mut points: Vec<f64> = Vec::with_capacity(roots.len());
        for r in roots {
            match points.last() {
                Some(&p) if r - p <= FIXED_POINT_DEDUP => {}
                _ => points.push(r),
            }
        }
        FixedPoints { points, continua }
    }

    /// Minimum and maximum of the function over `[lo, hi]`.
    pub fn image_of(&self, lo: f64, hi: f64) -> Result<(f64, f64)> {
        let a = self.eval(lo)?;
        let b = self.eval(hi)?;
        let start = self.xs.partition_point(|&k| k <= lo);
        let end = self.xs.partition_point(|&k| k < hi);
        let (mut mn, mut mx) = (a.min(b), a.max(b));
        for &y in &self.ys[start..end.max(start)] {
            mn = mn.min(y);
            mx = mx.max(y);
        }
        Ok((mn, mx))
    }

    /// Exact `∫_lo^hi |f(z) - c| dz`.
    pub fn integral_abs_offset(&self, lo: f64, hi: f64, c: f64) -> Result<f64> {
        if hi < lo {
            return Ok(0.0);
        }
        let mut px = lo;
        let mut pd = self.eval(lo)? - c;
        let start = self.xs.partition_point(|&k| k <= lo);
        let mut total = 0.0;
        for i in start..self.xs.len() {
            let x = self.xs[i];
            if x >= hi {
                break;
            }
            let d = self.ys[i] - c;
            total += abs_linear_integral(x - px, pd, d);
            px = x;
            pd = d;
        }
        let d = self.eval(hi)? - c;
        total += abs_linear_integral(hi - px, pd, d);
        Ok(total)
    }

    fn same_domain(&self, other: &PLFunction) -> Result<()> {
        let (a, b) = self.domain();
        let (c, d) = other.domain();
        let tol = 1e-12 * (1.0 + a.abs().max(b.abs()));
        if (a - c).abs() > tol || (b - d).abs() > tol {
            return Err(PlError::DomainMismatch(a, b, c, d));
        }
        Ok(())
    }
}

/// `f^t` by repeated exact composition. Fails naming the first `t` whose knot
/// count exceeds `budget`; callers then fall back to [`PLFunction::iterate_eval`].
pub fn self_compose(f: &PLFunction, t: usize, budget: usize) -> Result<PLFunction> {
    if t == 0 {
        return Err(PlError::ZeroIterations);
    }
    f.check_self_map(SELF_MAP_EPS)?;
    if f.num_knots() > budget {
        return Err(PlError::BudgetExceeded {
            step: 1,
            knots: f.num_knots(),
            budget,
        });
    }
    let mut h = f.clone();
    for step in 2..=t {
        h = compose_step(f, &h, budget, step)?;
    }
    Ok(h)
}

/// All powers `f^1, …, f^t`, each from the previous by one composition.
pub fn self_compose_powers(f: &PLFunction, t: usize, budget: usize) -> Result<Vec<PLFunction>> {
    if t == 0 {
        return Err(PlError::ZeroIterations);
    }
    f.check_self_map(SELF_MAP_EPS)?;
    let mut out = Vec::with_capacity(t);
    out.push(f.clone());
    for step in 2..=t {
        let next = compose_step(f, &out[out.len() - 1], budget, step)?;
        out.push(next);
    }
    Ok(out)
}

/// Midpoint-rule estimate of `∫ |a(z) - b(z)| dz` over `[lo, hi]` with `n`
/// cells; the fallback when one side has no affordable exact form.
pub fn grid_l1<A, B>(a: A, b: B, lo: f64, hi: f64, n: usize, exec: Exec) -> f64
where
    A: Fn(f64) -> f64 + Sync + Send,
    B: Fn(f64) -> f64 + Sync + Send,
{
    let h = (hi - lo) / n as f64;
    let s = exec.sum_range(n, |i| {
        let z = lo + (i as f64 + 0.5) * h;
        (a(z) - b(z)).abs()
    });
    s * h
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FixedPoints {
    /// Sorted, deduplicated solutions; includes the endpoints of continua.
    pub points: Vec<f64>,
    /// Maximal intervals on which `f(x) = x` identically.
    pub continua: Vec<(f64, f64)>,
}

impl FixedPoints {
    pub fn is_on_continuum(&self, x: f64) -> bool {
        self.continua
            .iter()
            .any(|&(a, b)| a - FIXED_POINT_DEDUP <= x && x <= b + FIXED_POINT_DEDUP)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Level {
    Low,
    High,
}

fn interpolate(x0: f64, y0: f64, x1: f64, y1: f64, x: f64) -> f64 {
    if x == x0 {
        y0
    } else if x == x1 {
        y1
    } else {
        y0 + (y1 - y0) * ((x - x0) / (x1 - x0))
    }
}

fn clamp_into(v: f64, lo: f64, hi: f64) -> Result<f64> {
    if v < lo {
        if v < lo - SELF_MAP_EPS {
            return Err(PlError::RangeEscape { value: v, lo, hi });
        }
        Ok(lo)
    } else if v > hi {
        if v > hi + SELF_MAP_EPS {
            return Err(PlError::RangeEscape { value: v, lo, hi });
        }
        Ok(hi)
    } else {
        Ok(v)
    }
}

fn compose_step(
    outer: &PLFunction,
    inner: &PLFunction,
    budget: usize,
    step: usize,
) -> Result<PLFunction> {
    let (lo, hi) = outer.domain();
    let n = inner.num_knots();
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    let push = |x: f64, y: f64, xs: &mut Vec<f64>, ys: &mut Vec<f64>| -> Result<()> {
        xs.push(x);
        ys.push(y);
        if xs.len() > budget {
            return Err(PlError::BudgetExceeded {
                step,
                knots: xs.len(),
                budget,
            });
        }
        Ok(())
    };
    let inner_y: Vec<f64> = inner
        .ys
        .iter()
        .map(|&v| clamp_into(v, lo, hi))
        .collect::<Result<_>>()?;
    for i in 0..n - 1 {
        let (x0, x1) = (inner.xs[i], inner.xs[i + 1]);
        let (y0, y1) = (inner_y[i], inner_y[i + 1]);
        push(x0, outer.eval_in(y0), &mut xs, &mut ys)?;
        if y0 == y1 {
            continue;
        }
        // Breakpoints of `outer` strictly between y0 and y1.
        let (a, b) = (y0.min(y1), y0.max(y1));
        let first = outer.xs.partition_point(|&k| k <= a);
        let last = outer.xs.partition_point(|&k| k < b);
        if first >= last {
            continue;
        }
        let emit = |k: usize, xs: &mut Vec<f64>, ys: &mut Vec<f64>| -> Result<()> {
            let s = (outer.xs[k] - y0) / (y1 - y0);
            let x = x0 + s * (x1 - x0);
            if x > *xs.last().unwrap() && x < x1 {
                push(x, outer.ys[k], xs, ys)?;
            }
            Ok(())
        };
        if y1 > y0 {
            for k in first..last {
                emit(k, &mut xs, &mut ys)?;
            }
        } else {
            for k in (first..last).rev() {
                emit(k, &mut xs, &mut ys)?;
            }
        }
    }
    push(inner.xs[n - 1], outer.eval_in(inner_y[n - 1]), &mut xs, &mut ys)?;
    Ok(PLFunction { xs, ys })
}

/// Walk the union of both knot sets, yielding `(x, f(x), g(x))`.
fn merge_walk<'a>(
    f: &'a PLFunction,
    g: &'a PLFunction,
) -> impl Iterator<Item = (f64, f64, f64)> + 'a {
    let (mut i, mut j) = (0usize, 0usize);
    let (lo, hi) = f.domain();
    std::iter::from_fn(move || {
        if i >= f.xs.len() && j >= g.xs.len() {
            return None;
        }
        let fx = f.xs.get(i).copied().unwrap_or(f64::INFINITY);
        let gx = g.xs.get(j).copied().unwrap_or(f64::INFINITY);
        let x = fx.min(gx).clamp(lo, hi);
        let out = match fx.partial_cmp(&gx).unwrap_or(Ordering::Equal) {
            Ordering::Less => {
                let v = (x, f.ys[i], g.eval_in(x));
                i += 1;
                v
            }
            Ordering::Greater => {
                let v = (x, f.eval_in(x), g.ys[j]);
                j += 1;
                v
            }
            Ordering::Equal => {
                let v = (x, f.ys[i], g.ys[j]);
                i += 1;
                j += 1;
                v
            }
        };
        Some(out)
    })
}

/// `∫_0^w |d(s)| ds` for `d` linear from `d0` to `d1`.
fn abs_linear_integral(w: f64, d0: f64, d1: f64) -> f64 {
    if w <= 0.0 {
        return 0.0;
    }
    if (d0 >= 0.0) == (d1 >= 0.0) || d0 == 0.0 || d1 == 0.0 {
        0.5 * w * (d0.abs() + d1.abs())
    } else {
        0.5 * w * (d0 * d0 + d1 * d1) / (d0.abs() + d1.abs())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const PHI: f64 = 1.618_033_988_749_895;

    fn tent() -> PLFunction {
        PLFunction::new(&[(-1.0, 1.0), (0.0, -1.0), (1.0, 1.0)]).unwrap()
    }

    fn slope(rho: f64) -> PLFunction {
        PLFunction::new(&[(-1.0, rho - 1.0), (0.0, -1.0), (1.0, rho - 1.0)]).unwrap()
    }

    #[test]
    fn construction_rejects_bad_knots() {
        assert!(matches!(
            PLFunction::new(&[(0.0, 0.0)]),
            Err(PlError::TooFewKnots(1))
        ));
        assert!(matches!(
            PLFunction::new(&[(0.0, 0.0), (0.0, 1.0)]),
            Err(PlError::NotIncreasing { .. })
        ));
        assert!(matches!(
            PLFunction::new(&[(0.0, f64::NAN), (1.0, 1.0)]),
            Err(PlError::NonFinite(0))
        ));
    }

    #[test]
    fn eval_examples() {
        let id = PLFunction::identity(-1.0, 1.0).unwrap();
        assert_abs_diff_eq!(id.eval(0.3).unwrap(), 0.3, epsilon = 1e-15);
        assert_eq!(tent().eval(0.5).unwrap(), 0.0);
        let f = slope(1.618_033_988_7);
        assert_abs_diff_eq!(f.eval(-1.0).unwrap(), 0.618_033_988_7, epsilon = 1e-15);
        assert!(matches!(tent().eval(1.5), Err(PlError::OutOfDomain { .. })));
    }

    #[test]
    fn tent_composed_with_itself() {
        let t2 = tent().compose(&tent()).unwrap();
        assert_eq!(t2.xs(), &[-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert_eq!(t2.ys(), &[1.0, -1.0, 1.0, -1.0, 1.0]);
    }

    #[test]
    fn identity_outer_keeps_knots() {
        let f = slope(PHI);
        let id = PLFunction::identity(-1.0, 1.0).unwrap();
        let g = id.compose(&f).unwrap();
        assert_eq!(g.xs(), f.xs());
        for (a, b) in g.ys().iter().zip(f.ys()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn compose_rejects_range_escape() {
        let wide = PLFunction::new(&[(-1.0, -2.0), (1.0, 2.0)]).unwrap();
        assert!(matches!(
            tent().compose(&wide),
            Err(PlError::RangeEscape { .. })
        ));
        // Overshoot within eps is clamped.
        let nudge = PLFunction::new(&[(-1.0, -1.0 - 5e-10), (1.0, 1.0)]).unwrap();
        assert!(tent().compose(&nudge).is_ok());
    }

    #[test]
    fn self_compose_piece_counts() {
        assert_eq!(self_compose(&tent(), 3, DEFAULT_PIECE_BUDGET).unwrap().pieces(), 8);
        assert_eq!(self_compose(&tent(), 1, DEFAULT_PIECE_BUDGET).unwrap(), tent());
        let f10 = self_compose(&slope(PHI), 10, DEFAULT_PIECE_BUDGET).unwrap();
        assert!(f10.pieces() <= 1 << 10);
    }

    #[test]
    fn self_compose_budget_names_step() {
        match self_compose(&tent(), 12, 100) {
            Err(PlError::BudgetExceeded { step, .. }) => assert_eq!(step, 7),
            other => panic!("expected budget error, got {other:?}"),
        }
    }

    #[test]
    fn iterate_eval_examples() {
        assert_eq!(tent().iterate_eval(2, 0.25).unwrap(), 0.0);
        assert_eq!(tent().iterate_eval(0, 0.7).unwrap(), 0.7);
        assert_abs_diff_eq!(slope(PHI).iterate_eval(3, 0.0).unwrap(), 0.0, epsilon = 1e-12);
        let wide = PLFunction::new(&[(-1.0, -1.0), (1.0, 3.0)]).unwrap();
        assert!(matches!(
            wide.iterate_eval(3, 0.5),
            Err(PlError::RangeEscape { .. })
        ));
    }

    #[test]
    fn lipschitz_examples() {
        assert_eq!(tent().lipschitz(), 2.0);
        assert_abs_diff_eq!(slope(PHI).lipschitz(), PHI, epsilon = 1e-15);
        assert_eq!(PLFunction::constant(0.0, 1.0, 3.0).unwrap().lipschitz(), 0.0);
    }

    #[test]
    fn crossing_examples() {
        assert_eq!(tent().count_crossings(-1.0, 1.0).unwrap(), 2);
        assert_eq!(slope(PHI).count_crossings(0.0, PHI - 1.0).unwrap(), 2);
        assert!(matches!(
            tent().count_crossings(0.5, 0.5),
            Err(PlError::InvalidLevels(..))
        ));
    }

    #[test]
    fn tangent_and_flat_hits() {
        // Touches y = 1 at x = 1 without crossing, then flat on x = 0.
        let f = PLFunction::new(&[(0.0, 0.0), (1.0, 1.0), (2.0, 0.5), (3.0, 0.0), (4.0, 0.0)])
            .unwrap();
        assert_eq!(f.count_crossings(0.0, 1.0).unwrap(), 2);
        // Never reaches y.
        assert_eq!(f.count_crossings(0.0, 1.5).unwrap(), 0);
    }

    #[test]
    fn l1_examples() {
        let x = PLFunction::identity(-1.0, 1.0).unwrap();
        let neg = PLFunction::new(&[(-1.0, 1.0), (1.0, -1.0)]).unwrap();
        assert_abs_diff_eq!(x.l1_distance(&neg).unwrap(), 2.0, epsilon = 1e-15);
        assert_eq!(tent().l1_distance(&tent()).unwrap(), 0.0);
        let zero = PLFunction::constant(-1.0, 1.0, 0.0).unwrap();
        assert_abs_diff_eq!(tent().l1_distance(&zero).unwrap(), 1.0, epsilon = 1e-15);
        let other = PLFunction::identity(0.0, 1.0).unwrap();
        assert!(matches!(
            x.l1_distance(&other),
            Err(PlError::DomainMismatch(..))
        ));
    }

    #[test]
    fn classification_examples() {
        let x = PLFunction::identity(-1.0, 1.0).unwrap();
        let neg = PLFunction::new(&[(-1.0, 1.0), (1.0, -1.0)]).unwrap();
        assert_eq!(x.classification_distance(&x, 0.0, &[0.1, -0.3]).unwrap(), 0.0);
        assert_eq!(
            x.classification_distance(&neg, 0.0, &[-0.5, 0.5]).unwrap(),
            1.0
        );
        assert!(matches!(
            x.classification_distance(&neg, 0.0, &[]),
            Err(PlError::EmptySample)
        ));
    }

    #[test]
    fn fixed_point_examples() {
        let fp = tent().fixed_points();
        assert_eq!(fp.points.len(), 2);
        assert_abs_diff_eq!(fp.points[0], -1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(fp.points[1], 1.0, epsilon = 1e-15);

        let fp = slope(PHI).fixed_points();
        assert_eq!(fp.points.len(), 1);
        assert_abs_diff_eq!(fp.points[0], -1.0 / (PHI * PHI), epsilon = 1e-12);

        let flip = PLFunction::new(&[(0.0, 1.0), (1.0, 0.0)]).unwrap();
        assert_eq!(flip.fixed_points().points, vec![0.5]);

        let id = PLFunction::new(&[(-1.0, -1.0), (0.0, 0.0), (1.0, 1.0)]).unwrap();
        let fp = id.fixed_points();
        assert_eq!(fp.continua, vec![(-1.0, 1.0)]);
        assert!(fp.is_on_continuum(0.2));
    }

    #[test]
    fn image_and_partial_integral() {
        let t = tent();
        assert_eq!(t.image_of(-0.5, 0.5).unwrap(), (-1.0, 0.0));
        assert_eq!(t.image_of(0.25, 0.75).unwrap(), (-0.5, 0.5));
        // ∫_0^1 |2x - 1| = 1/2
        assert_abs_diff_eq!(t.integral_abs_offset(0.0, 1.0, 0.0).unwrap(), 0.5, epsilon = 1e-15);
        // ∫_{-1}^{1} |tent - 1| = 2
        assert_abs_diff_eq!(t.integral_abs_offset(-1.0, 1.0, 1.0).unwrap(), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn budget_env_parsing_defaults() {
        // Unset or garbage values fall back to the default.
        if std::env::var(PIECE_BUDGET_ENV).is_err() {
            assert_eq!(piece_budget_from_env(), DEFAULT_PIECE_BUDGET);
        }
    }
}
