//! Central-finite-difference gradient verification.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use super::layers::ParamSet;
use super::tensor::Tensor;

/// Compare autodiff gradients against central finite differences at f64.
///
/// `loss_fn` evaluates the scalar loss for a parameter set; `grads` are
/// the autodiff gradients at `params` (same indexing). Up to
/// `coords_per_param` coordinates are sampled per tensor. Returns the
/// maximum relative error over sampled coordinates.
pub fn grad_check(
    loss_fn: impl Fn(&ParamSet<f64>) -> f64,
    params: &ParamSet<f64>,
    grads: &[Option<Tensor<f64>>],
    eps: f64,
    coords_per_param: usize,
    seed: u64,
) -> f64 {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut max_rel = 0.0f64;
    for (i, g) in grads.iter().enumerate() {
        let Some(g) = g else { continue };
        let mut coords: Vec<usize> = (0..g.data.len()).collect();
        coords.shuffle(&mut rng);
        coords.truncate(coords_per_param);
        for &c in &coords {
            let mut p_hi = params.clone();
            p_hi.tensors[i].data[c] += eps;
            let mut p_lo = params.clone();
            p_lo.tensors[i].data[c] -= eps;
            let numeric = (loss_fn(&p_hi) - loss_fn(&p_lo)) / (2.0 * eps);
            let analytic = g.data[c];
            let denom = numeric.abs().max(analytic.abs()).max(1e-6);
            let rel = (numeric - analytic).abs() / denom;
            if rel > max_rel {
                max_rel = rel;
            }
        }
    }
    max_rel
}
