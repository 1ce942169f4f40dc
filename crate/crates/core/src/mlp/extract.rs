use crate::pl::PLFunction;

use super::{MlpError, MlpModel};

/// Exact piecewise-linear form of `m` on `[lo, hi]`.
///
/// Knots are refined one hidden layer at a time: the previous layer is linear
/// between consecutive knots, so each unit's pre-activation is too, and its
/// zero crossing (if any) becomes a new knot. Each layer multiplies the piece
/// count by at most `u + 1`.
pub fn model_to_pl_on(m: &MlpModel, lo: f64, hi: f64) -> Result<PLFunction, MlpError> {
    let dims = m.dims();
    let mut xs = vec![lo, hi];
    // acts[i] holds the current layer's outputs at xs[i].
    let mut acts: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();

    for k in 0..m.num_layers() {
        let (w, b) = m.layer(k);
        let (n_in, n_out) = (dims[k], dims[k + 1]);
        let pre = |a: &[f64]| -> Vec<f64> {
            (0..n_out)
                .map(|o| b[o] + w[o * n_in..(o + 1) * n_in].iter().zip(a).map(|(p, q)| p * q).sum::<f64>())
                .collect()
        };
        let z: Vec<Vec<f64>> = acts.iter().map(|a| pre(a)).collect();
        let hidden = k + 1 < m.num_layers();
        if !hidden {
            let ys = z.iter().map(|v| v[0]).collect();
            return Ok(PLFunction::from_parts(xs, ys)?);
        }

        let mut nxs = Vec::with_capacity(xs.len() * 2);
        let mut nacts = Vec::with_capacity(xs.len() * 2);
        let mut cuts: Vec<f64> = Vec::new();
        for i in 0..xs.len() - 1 {
            nxs.push(xs[i]);
            nacts.push(acts[i].clone());
            let (x0, x1) = (xs[i], xs[i + 1]);
            cuts.clear();
            for o in 0..n_out {
                let (z0, z1) = (z[i][o], z[i + 1][o]);
                if (z0 < 0.0 && z1 > 0.0) || (z0 > 0.0 && z1 < 0.0) {
                    let s = z0 / (z0 - z1);
                    let c = x0 + s * (x1 - x0);
                    if c > x0 && c < x1 {
                        cuts.push(s);
                    }
                }
            }
            cuts.sort_by(f64::total_cmp);
            cuts.dedup();
            for &s in &cuts {
                let c = x0 + s * (x1 - x0);
                if c <= *nxs.last().unwrap() {
                    continue;
                }
                nxs.push(c);
                nacts.push(
                    acts[i]
                        .iter()
                        .zip(&acts[i + 1])
                        .map(|(a0, a1)| a0 + s * (a1 - a0))
                        .collect(),
                );
            }
        }
        nxs.push(xs[xs.len() - 1]);
        nacts.push(acts[acts.len() - 1].clone());

        // Post-activations at the refined knots.
        acts = nacts.iter().map(|a| pre(a).into_iter().map(|v| v.max(0.0)).collect()).collect();
        xs = nxs;
    }
    unreachable!("the output layer returns inside the loop")
}

/// [`model_to_pl_on`] over `[−1, 1]`.
pub fn model_to_pl(m: &MlpModel) -> Result<PLFunction, MlpError> {
    model_to_pl_on(m, -1.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::separation::capacity;
    use num_bigint::BigUint;

    #[test]
    fn single_relu_knots() {
        let m = MlpModel::from_parts(vec![1, 1, 1], vec![1.0, 0.0, 1.0, 0.0], 0).unwrap();
        let f = model_to_pl(&m).unwrap();
        assert_eq!(f.knots().collect::<Vec<_>>(), vec![(-1.0, 0.0), (0.0, 0.0), (1.0, 1.0)]);
    }

    #[test]
    fn random_models_agree_and_respect_capacity() {
        for (l, u, seed) in [(2, 3, 1), (1, 20, 2), (3, 8, 3), (4, 20, 4), (2, 3, 77)] {
            let m = MlpModel::init(l, u, seed).unwrap();
            let f = model_to_pl(&m).unwrap();
            assert!(BigUint::from(f.pieces()) <= capacity(u as u64, l as u32));
            assert!(f.pieces() <= (u + 1).pow(l as u32));
            for i in 0..=1000 {
                let x = -1.0 + 2.0 * i as f64 / 1000.0;
                assert!((m.forward(x) - f.eval(x).unwrap()).abs() <= 1e-6);
            }
        }
    }
}
