//! AdamW with decoupled weight decay and bias-corrected moments.

use super::layers::ParamSet;
use super::tensor::{Scalar, Tensor};
use super::NnError;

pub struct AdamW<T> {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    step: u64,
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
}

impl<T: Scalar> AdamW<T> {
    pub fn new(params: &ParamSet<T>, beta1: f64, beta2: f64, weight_decay: f64) -> Self {
        Self {
            beta1,
            beta2,
            eps: 1e-8,
            weight_decay,
            step: 0,
            m: params.tensors.iter().map(|t| Tensor::zeros(&t.shape)).collect(),
            v: params.tensors.iter().map(|t| Tensor::zeros(&t.shape)).collect(),
        }
    }

    /// The configuration used by every model here: β₁ = 0.9, β₂ = 0.99,
    /// decoupled L2 weight decay 0.01.
    pub fn standard(params: &ParamSet<T>) -> Self {
        Self::new(params, 0.9, 0.99, 0.01)
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One update. `grads[i]` pairs with `params.tensors[i]`; `None`
    /// entries see only weight decay. A non-finite gradient rejects the
    /// whole step and leaves parameters and state untouched.
    pub fn step(
        &mut self,
        params: &mut ParamSet<T>,
        grads: &[Option<Tensor<T>>],
        lr: f64,
    ) -> Result<(), NnError> {
        assert_eq!(grads.len(), params.tensors.len());
        for (i, g) in grads.iter().enumerate() {
            if let Some(g) = g {
                if !g.all_finite() {
                    return Err(NnError::NonFiniteGradient(params.names[i].clone()));
                }
            }
        }
        self.step += 1;
        let t = self.step as f64;
        let bc1 = 1.0 - self.beta1.powf(t);
        let bc2 = 1.0 - self.beta2.powf(t);
        let b1 = T::from_f64(self.beta1);
        let b1c = T::from_f64(1.0 - self.beta1);
        let b2 = T::from_f64(self.beta2);
        let b2c = T::from_f64(1.0 - self.beta2);
        let decay = T::from_f64(1.0 - lr * self.weight_decay);
        let lr_t = T::from_f64(lr / bc1);
        let inv_bc2 = T::from_f64(1.0 / bc2);
        let eps = T::from_f64(self.eps);
        for (i, p) in params.tensors.iter_mut().enumerate() {
            // Decoupled decay applies with or without a gradient.
            for w in p.data.iter_mut() {
                *w *= decay;
            }
            let Some(g) = &grads[i] else { continue };
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            for j in 0..p.data.len() {
                let gj = g.data[j];
                m.data[j] = b1 * m.data[j] + b1c * gj;
                v.data[j] = b2 * v.data[j] + b2c * gj * gj;
                let vhat = v.data[j] * inv_bc2;
                p.data[j] -= lr_t * m.data[j] / (vhat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn zero_gradient_no_decay_leaves_params() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(1);
        let mut params: ParamSet<f64> = ParamSet::new();
        params.alloc("w", Tensor::randn(&[3, 3], 1.0, &mut rng));
        let before = params.tensors[0].clone();
        let mut opt = AdamW::new(&params, 0.9, 0.99, 0.0);
        let grads = vec![Some(Tensor::zeros(&[3, 3]))];
        opt.step(&mut params, &grads, 0.1).unwrap();
        assert_eq!(params.tensors[0], before);
    }

    #[test]
    fn quadratic_converges_near_zero() {
        // f(w) = w², ∇f = 2w; 200 steps at lr 0.1 drive |w| below 1e-3.
        // Scalar reference trajectory computed alongside to pin the math.
        let mut params: ParamSet<f64> = ParamSet::new();
        params.alloc("w", Tensor::scalar(1.0));
        let mut opt = AdamW::new(&params, 0.9, 0.99, 0.0);
        let (mut m_ref, mut v_ref, mut w_ref) = (0.0f64, 0.0f64, 1.0f64);
        for t in 1..=200u64 {
            let w = params.tensors[0].data[0];
            let g = 2.0 * w;
            opt.step(&mut params, &[Some(Tensor::scalar(g))], 0.1).unwrap();
            // Reference implementation.
            let g_ref = 2.0 * w_ref;
            m_ref = 0.9 * m_ref + 0.1 * g_ref;
            v_ref = 0.99 * v_ref + 0.01 * g_ref * g_ref;
            let mhat = m_ref / (1.0 - 0.9f64.powi(t as i32));
            let vhat = v_ref / (1.0 - 0.99f64.powi(t as i32));
            w_ref -= 0.1 * mhat / (vhat.sqrt() + 1e-8);
            assert!(
                (params.tensors[0].data[0] - w_ref).abs() < 1e-12,
                "diverged from reference at step {t}"
            );
        }
        assert!(params.tensors[0].data[0].abs() < 1e-3);
    }

    #[test]
    fn decoupled_decay_shrinks_by_factor() {
        let mut params: ParamSet<f64> = ParamSet::new();
        params.alloc("w", Tensor::scalar(2.0));
        let mut opt = AdamW::new(&params, 0.9, 0.99, 0.01);
        opt.step(&mut params, &[Some(Tensor::scalar(0.0))], 0.5).unwrap();
        assert!((params.tensors[0].data[0] - 2.0 * (1.0 - 0.5 * 0.01)).abs() < 1e-15);
    }

    #[test]
    fn non_finite_gradient_rejected_without_mutation() {
        let mut params: ParamSet<f64> = ParamSet::new();
        params.alloc("w", Tensor::scalar(1.5));
        let before = params.tensors[0].clone();
        let mut opt = AdamW::standard(&params);
        let res = opt.step(&mut params, &[Some(Tensor::scalar(f64::NAN))], 0.1);
        assert!(matches!(res, Err(NnError::NonFiniteGradient(_))));
        assert_eq!(params.tensors[0], before);
        assert_eq!(opt.step_count(), 0);
    }
}
