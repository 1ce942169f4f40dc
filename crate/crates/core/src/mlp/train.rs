use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::exec::Exec;
use crate::pl::{grid_l1, self_compose, PLFunction, PlError};

use super::model::Workspace;
use super::{model_to_pl, MlpError, MlpModel};

/// Cells of the midpoint rule used when the target has no affordable exact form.
pub const GRID_L1_CELLS: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Uniform grid size on `[−1, 1]`; training is full batch over it.
    pub samples: usize,
    pub seed: u64,
    /// Samples per gradient-accumulation chunk.
    pub chunk: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 1500,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            samples: 4096,
            seed: 0,
            chunk: 256,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), MlpError> {
        let bad = |m: &str| Err(MlpError::BadConfig(m.to_string()));
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if !(self.lr > 0.0) {
            return bad("learning rate must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("Adam moment coefficients must lie in [0, 1)");
        }
        if self.samples < 2 {
            return bad("need at least 2 samples");
        }
        Ok(())
    }
}

/// Regression target on `[−1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    Exact(PLFunction),
    /// `map^steps`, evaluated pointwise.
    Iterated { map: PLFunction, steps: usize },
}

impl Target {
    /// `map^steps` in exact form when it fits `budget` knots, else pointwise.
    pub fn iterated(map: &PLFunction, steps: usize, budget: usize) -> Result<Self, MlpError> {
        match self_compose(map, steps, budget) {
            Ok(h) => Ok(Target::Exact(h)),
            Err(PlError::BudgetExceeded { .. }) => Ok(Target::Iterated {
                map: map.clone(),
                steps,
            }),
            Err(e) => Err(e.into()),
        }
    }

    pub fn eval(&self, x: f64) -> Result<f64, MlpError> {
        Ok(match self {
            Target::Exact(h) => h.eval(x)?,
            Target::Iterated { map, steps } => map.iterate_eval(*steps, x)?,
        })
    }

    pub fn domain(&self) -> (f64, f64) {
        match self {
            Target::Exact(h) => h.domain(),
            Target::Iterated { map, .. } => map.domain(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum L1Estimate {
    Exact { value: f64 },
    /// Midpoint rule at `cells` and `cells / 2`; `gap` is their difference.
    Grid { value: f64, cells: usize, gap: f64 },
}

impl L1Estimate {
    pub fn value(&self) -> f64 {
        match *self {
            L1Estimate::Exact { value } | L1Estimate::Grid { value, .. } => value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainResult {
    pub final_mse: f64,
    pub l1: L1Estimate,
    pub loss_curve: Vec<f64>,
    pub wall_time: f64,
    /// Relative loss change below `1e-5` over the last 100 epochs.
    pub saturated: bool,
    pub pieces: usize,
}

pub fn training_grid(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64)
        .collect()
}

/// Mean squared error over `(xs, ys)` and its gradient.
///
/// Partial sums are formed over fixed chunks and added in chunk order, so the
/// result does not depend on `exec`.
pub fn loss_and_grad(
    m: &MlpModel,
    xs: &[f64],
    ys: &[f64],
    chunk: usize,
    exec: Exec,
) -> (f64, Vec<f64>) {
    let n = xs.len() as f64;
    let dims = m.dims();
    let params = m.params();
    let parts = exec.map_chunks(xs, chunk, |off, cx| {
        let mut ws = Workspace::new(dims);
        let mut grad = vec![0.0; params.len()];
        let mut sse = 0.0;
        for (i, &x) in cx.iter().enumerate() {
            let r = ws.forward(dims, params, x) - ys[off + i];
            sse += r * r;
            ws.backward(dims, params, 2.0 * r / n, &mut grad);
        }
        (sse, grad)
    });
    let mut total = 0.0;
    let mut grad = vec![0.0; params.len()];
    for (s, g) in parts {
        total += s;
        for (a, b) in grad.iter_mut().zip(&g) {
            *a += b;
        }
    }
    (total / n, grad)
}

pub fn mse(m: &MlpModel, xs: &[f64], ys: &[f64]) -> f64 {
    let out = m.forward_batch(xs);
    out.iter().zip(ys).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / xs.len() as f64
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], cfg: &TrainConfig) {
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * g;
            self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * g * g;
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= cfg.lr * mh / (vh.sqrt() + cfg.eps);
        }
    }
}

/// L¹ distance between the model and the target on `[−1, 1]`.
pub fn l1_error(m: &MlpModel, target: &Target, exec: Exec) -> Result<(L1Estimate, usize), MlpError> {
    let g = model_to_pl(m)?;
    let pieces = g.pieces();
    let est = match target {
        Target::Exact(h) => L1Estimate::Exact {
            value: h.l1_distance(&g)?,
        },
        Target::Iterated { map, steps } => {
            let (lo, hi) = map.domain();
            let t = |x: f64| map.iterate_eval(*steps, x).unwrap_or(f64::NAN);
            let gv = |x: f64| g.eval(x).unwrap_or(f64::NAN);
            let fine = grid_l1(t, gv, lo, hi, GRID_L1_CELLS, exec);
            let coarse = grid_l1(t, gv, lo, hi, GRID_L1_CELLS / 2, exec);
            if !fine.is_finite() {
                return Err(MlpError::NonFinite);
            }
            L1Estimate::Grid {
                value: fine,
                cells: GRID_L1_CELLS,
                gap: (fine - coarse).abs(),
            }
        }
    };
    Ok((est, pieces))
}

/// Full-batch Adam on the mean squared error over the training grid.
pub fn train(
    m: &mut MlpModel,
    target: &Target,
    cfg: &TrainConfig,
    exec: Exec,
) -> Result<TrainResult, MlpError> {
    cfg.validate()?;
    let start = Instant::now();
    let xs = training_grid(cfg.samples);
    let ys = xs
        .iter()
        .map(|&x| target.eval(x))
        .collect::<Result<Vec<_>, _>>()?;
    let mut adam = Adam::new(m.num_params());
    let mut curve = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let (loss, grad) = loss_and_grad(m, &xs, &ys, cfg.chunk, exec);
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(MlpError::Diverged { epoch });
        }
        curve.push(loss);
        adam.step(m.params_mut(), &grad, cfg);
    }
    if m.params().iter().any(|p| !p.is_finite()) {
        return Err(MlpError::Diverged { epoch: cfg.epochs });
    }
    let final_mse = mse(m, &xs, &ys);
    let saturated = curve.len() > 100 && {
        let a = curve[curve.len() - 101];
        let b = curve[curve.len() - 1];
        (a - b).abs() <= 1e-5 * a.abs().max(f64::MIN_POSITIVE)
    };
    let (l1, pieces) = l1_error(m, target, exec)?;
    Ok(TrainResult {
        final_mse,
        l1,
        loss_curve: curve,
        wall_time: start.elapsed().as_secs_f64(),
        saturated,
        pieces,
    })
}
