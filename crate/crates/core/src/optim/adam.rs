//! Adam with bias correction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState<T> {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
}

impl<T: Scalar> Default for AdamState<T> {
    fn default() -> Self {
        AdamState { beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, m: Vec::new(), v: Vec::new() }
    }
}

impl<T: Scalar> AdamState<T> {
    /// One update over matching lists of parameter and gradient tensors.
    /// Moment buffers are allocated on the first call.
    pub fn step(&mut self, params: &mut [&mut [T]], grads: &[&[T]], lr: f64) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::Shape(format!("{} parameter tensors, {} gradients", params.len(), grads.len())));
        }
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![T::zero(); p.len()]).collect();
            self.v = self.m.clone();
        }
        if self.m.len() != params.len() {
            return Err(Error::Shape(format!("optimizer tracks {} tensors, got {}", self.m.len(), params.len())));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != g.len() || p.len() != self.m[i].len() {
                return Err(Error::Shape(format!(
                    "tensor {i}: parameter {} / gradient {} / state {}",
                    p.len(),
                    g.len(),
                    self.m[i].len()
                )));
            }
        }
        self.t += 1;
        let (b1, b2) = (T::lit(self.beta1), T::lit(self.beta2));
        let one = T::one();
        let c1 = one - T::lit(self.beta1.powi(self.t as i32));
        let c2 = one - T::lit(self.beta2.powi(self.t as i32));
        let (lr, eps) = (T::lit(lr), T::lit(self.eps));
        for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            for k in 0..p.len() {
                let gk = g[k];
                m[k] = b1 * m[k] + (one - b1) * gk;
                v[k] = b2 * v[k] + (one - b2) * gk * gk;
                let m_hat = m[k] / c1;
                let v_hat = v[k] / c2;
                p[k] = p[k] - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_hand_evaluated() {
        let mut s = AdamState::<f64>::default();
        let mut theta = [0.0];
        s.step(&mut [&mut theta[..]], &[&[1.0][..]], 0.1).unwrap();
        // m_hat = 1, v_hat = 1, step = -0.1 / (1 + 1e-8)
        assert!((theta[0] - (-0.1 / (1.0 + 1e-8))).abs() < 1e-15);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn zero_gradient_keeps_parameters() {
        let mut s = AdamState::<f64>::default();
        let mut theta = [0.3, -2.0];
        s.step(&mut [&mut theta[..]], &[&[0.0, 0.0][..]], 0.1).unwrap();
        assert_eq!(theta, [0.3, -2.0]);
    }

    #[test]
    fn first_step_opposes_gradient() {
        let mut s = AdamState::<f32>::default();
        let mut theta = [1.0f32, 1.0, 1.0];
        s.step(&mut [&mut theta[..]], &[&[2.5f32, -0.01, 0.0][..]], 0.01).unwrap();
        assert!(theta[0] < 1.0 && theta[1] > 1.0 && theta[2] == 1.0);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut s = AdamState::<f64>::default();
        let mut theta = [0.0, 0.0];
        assert!(s.step(&mut [&mut theta[..]], &[&[1.0][..]], 0.1).is_err());
    }
}
