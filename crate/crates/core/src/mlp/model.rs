use std::path::Path;

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::MlpError;

/// Scalar-in, scalar-out ReLU network: `l` hidden layers of `u` units and a
/// linear output.
///
/// Parameters are stored flat, layer after layer, each as its row-major
/// weight matrix (`out × in`) followed by its bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    dims: Vec<usize>,
    params: Vec<f64>,
    #[serde(default)]
    seed: u64,
}

pub(crate) fn param_count(dims: &[usize]) -> usize {
    dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl MlpModel {
    /// Glorot-uniform weights, zero biases.
    pub fn init(l: usize, u: usize, seed: u64) -> Result<Self, MlpError> {
        if l == 0 || u == 0 {
            return Err(MlpError::BadShape(format!("depth {l} and width {u} must be positive")));
        }
        let dims = Self::dims_for(l, u);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::with_capacity(param_count(&dims));
        for w in dims.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let dist = Uniform::new_inclusive(-a, a);
            params.extend((0..fan_in * fan_out).map(|_| dist.sample(&mut rng)));
            params.extend(std::iter::repeat_n(0.0, fan_out));
        }
        Ok(MlpModel { dims, params, seed })
    }

    pub fn dims_for(l: usize, u: usize) -> Vec<usize> {
        let mut dims = vec![1];
        dims.extend(std::iter::repeat_n(u, l));
        dims.push(1);
        dims
    }

    pub fn from_parts(dims: Vec<usize>, params: Vec<f64>, seed: u64) -> Result<Self, MlpError> {
        if dims.len() < 3 || dims[0] != 1 || dims[dims.len() - 1] != 1 {
            return Err(MlpError::BadShape(format!("dims {dims:?} must be [1, u, …, u, 1]")));
        }
        let u = dims[1];
        if u == 0 || dims[1..dims.len() - 1].iter().any(|&d| d != u) {
            return Err(MlpError::BadShape(format!("hidden widths in {dims:?} must be equal and positive")));
        }
        let need = param_count(&dims);
        if params.len() != need {
            return Err(MlpError::BadShape(format!(
                "expected {need} parameters, got {}",
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(MlpError::NonFinite);
        }
        Ok(MlpModel { dims, params, seed })
    }

    pub fn depth(&self) -> usize {
        self.dims.len() - 2
    }

    pub fn width(&self) -> usize {
        self.dims[1]
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub(crate) fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Weights and bias of layer `k`.
    pub fn layer(&self, k: usize) -> (&[f64], &[f64]) {
        let off: usize = self.dims[..k + 1]
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum();
        let (i, o) = (self.dims[k], self.dims[k + 1]);
        let w = &self.params[off..off + i * o];
        let b = &self.params[off + i * o..off + i * o + o];
        (w, b)
    }

    pub fn num_layers(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn forward(&self, x: f64) -> f64 {
        let mut buf = Workspace::new(&self.dims);
        buf.forward(&self.dims, &self.params, x)
    }

    pub fn forward_batch(&self, xs: &[f64]) -> Vec<f64> {
        let mut buf = Workspace::new(&self.dims);
        xs.iter().map(|&x| buf.forward(&self.dims, &self.params, x)).collect()
    }

    /// JSON `{dims, params, seed}`.
    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string(self)
    }

    pub fn from_json(s: &str) -> Result<Self, MlpError> {
        let m: MlpModel = serde_json::from_str(s)?;
        Self::from_parts(m.dims, m.params, m.seed)
    }

    pub fn save(&self, path: &Path) -> Result<(), MlpError> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, MlpError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Per-layer activations of one sample; reused across samples.
pub(crate) struct Workspace {
    pub acts: Vec<Vec<f64>>,
    pub delta: Vec<f64>,
    pub delta_prev: Vec<f64>,
}

impl Workspace {
    pub fn new(dims: &[usize]) -> Self {
        let widest = dims.iter().copied().max().unwrap_or(1);
        Workspace {
            acts: dims.iter().map(|&d| vec![0.0; d]).collect(),
            delta: vec![0.0; widest],
            delta_prev: vec![0.0; widest],
        }
    }

    pub fn forward(&mut self, dims: &[usize], params: &[f64], x: f64) -> f64 {
        self.acts[0][0] = x;
        let last = dims.len() - 2;
        let mut off = 0;
        for k in 0..dims.len() - 1 {
            let (n_in, n_out) = (dims[k], dims[k + 1]);
            let w = &params[off..off + n_in * n_out];
            let b = &params[off + n_in * n_out..off + n_in * n_out + n_out];
            let (head, tail) = self.acts.split_at_mut(k + 1);
            let a_in = &head[k];
            let a_out = &mut tail[0];
            for o in 0..n_out {
                let row = &w[o * n_in..(o + 1) * n_in];
                let z = b[o] + row.iter().zip(a_in).map(|(p, q)| p * q).sum::<f64>();
                a_out[o] = if k == last { z } else { z.max(0.0) };
            }
            off += n_in * n_out + n_out;
        }
        self.acts[dims.len() - 1][0]
    }

    /// Accumulate `g · ∂out/∂θ` into `grad` for the sample last passed to
    /// [`Workspace::forward`].
    pub fn backward(&mut self, dims: &[usize], params: &[f64], g: f64, grad: &mut [f64]) {
        let n_layers = dims.len() - 1;
        let mut offs = Vec::with_capacity(n_layers);
        let mut off = 0;
        for k in 0..n_layers {
            offs.push(off);
            off += dims[k] * dims[k + 1] + dims[k + 1];
        }
        self.delta[0] = g;
        for k in (0..n_layers).rev() {
            let (n_in, n_out) = (dims[k], dims[k + 1]);
            let off = offs[k];
            let a_in = &self.acts[k];
            for o in 0..n_out {
                let d = self.delta[o];
                if d == 0.0 {
                    continue;
                }
                let gw = &mut grad[off + o * n_in..off + (o + 1) * n_in];
                for (gi, ai) in gw.iter_mut().zip(a_in) {
                    *gi += d * ai;
                }
                grad[off + n_in * n_out + o] += d;
            }
            if k > 0 {
                let w = &params[off..off + n_in * n_out];
                for i in 0..n_in {
                    self.delta_prev[i] = if a_in[i] > 0.0 {
                        (0..n_out).map(|o| w[o * n_in + i] * self.delta[o]).sum()
                    } else {
                        0.0
                    };
                }
                std::mem::swap(&mut self.delta, &mut self.delta_prev);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_deterministic() {
        let a = MlpModel::init(3, 7, 42).unwrap();
        let b = MlpModel::init(3, 7, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, MlpModel::init(3, 7, 43).unwrap());
        assert!(MlpModel::init(0, 3, 1).is_err());
    }

    #[test]
    fn parameter_count() {
        assert_eq!(MlpModel::init(1, 1, 0).unwrap().num_params(), 4);
        // 1·20+20, 20·20+20 (×2), 20·1+1
        assert_eq!(MlpModel::init(3, 20, 0).unwrap().num_params(), 40 + 2 * 420 + 21);
    }

    #[test]
    fn glorot_limits_and_zero_bias() {
        let m = MlpModel::init(2, 10, 5).unwrap();
        for k in 0..m.num_layers() {
            let (w, b) = m.layer(k);
            let (i, o) = (m.dims()[k], m.dims()[k + 1]);
            let a = (6.0 / (i + o) as f64).sqrt();
            assert!(w.iter().all(|v| v.abs() <= a));
            assert!(b.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn forward_examples() {
        let zero = MlpModel::from_parts(vec![1, 2, 1], vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.7], 0).unwrap();
        assert_eq!(zero.forward(0.3), 0.7);
        assert_eq!(zero.forward(-5.0), 0.7);

        let relu = MlpModel::from_parts(vec![1, 1, 1], vec![1.0, 0.0, 1.0, 0.0], 0).unwrap();
        assert_eq!(relu.forward(-1.0), 0.0);
        assert_eq!(relu.forward(2.0), 2.0);

        // x = relu(x) − relu(−x), passed through two identity-like layers.
        let p = vec![
            1.0, -1.0, 0.0, 0.0, // layer 0
            1.0, 0.0, 0.0, 1.0, 0.0, 0.0, // layer 1
            1.0, -1.0, 0.0, // output
        ];
        let id = MlpModel::from_parts(vec![1, 2, 2, 1], p, 0).unwrap();
        for x in [-1.0, -0.25, 0.0, 0.6, 1.0] {
            assert_eq!(id.forward(x), x);
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let m = MlpModel::init(2, 4, 9).unwrap();
        let back = MlpModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(m, back);
        let v: serde_json::Value = serde_json::from_str(&m.to_json().unwrap()).unwrap();
        assert_eq!(v["dims"], serde_json::json!([1, 4, 4, 1]));
        assert!(MlpModel::from_json(r#"{"dims":[1,2,1],"params":[1.0]}"#).is_err());
    }
}
