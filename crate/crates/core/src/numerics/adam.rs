use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Adaptive-moment optimizer state with bias correction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
}

impl AdamState {
    pub fn new(n_params: usize) -> Self {
        Self::with_betas(n_params, 0.9, 0.999, 1e-8)
    }

    pub fn with_betas(n_params: usize, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            beta1,
            beta2,
            eps,
            step: 0,
            first_moment: vec![0.0; n_params],
            second_moment: vec![0.0; n_params],
        }
    }

    pub fn len(&self) -> usize {
        self.first_moment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.first_moment.is_empty()
    }

    /// One update of `params` in place.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) -> Result<()> {
        if params.len() != self.len() || grads.len() != self.len() {
            return Err(Error::ShapeMismatch(format!(
                "adam state for {} params got {} params and {} grads",
                self.len(),
                params.len(),
                grads.len()
            )));
        }
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("gradient".into()));
        }
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powf(self.step as f64);
        let bc2 = 1.0 - self.beta2.powf(self.step as f64);
        for (((p, &g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.first_moment)
            .zip(&mut self.second_moment)
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("parameters after adam step".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_grads_leave_params_unchanged() {
        let mut s = AdamState::new(3);
        let mut p = vec![1.0, -2.0, 0.5];
        s.step(&mut p, &[0.0; 3], 0.1).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 0.5]);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn constant_gradient_moves_by_lr_times_sign() {
        let mut s = AdamState::new(2);
        let mut p = vec![0.0, 0.0];
        let lr = 0.01;
        let mut last = p.clone();
        for _ in 0..200 {
            s.step(&mut p, &[3.0, -0.2], lr).unwrap();
            let d0 = p[0] - last[0];
            let d1 = p[1] - last[1];
            assert!((d0 + lr).abs() < 1e-6 * lr.max(1.0));
            assert!((d1 - lr).abs() < 1e-6);
            last = p.clone();
        }
    }

    #[test]
    fn minimizes_scalar_quadratic() {
        let mut s = AdamState::new(1);
        let mut p = vec![3.0];
        let mut reached = None;
        for i in 0..500 {
            let g = 2.0 * p[0];
            s.step(&mut p, &[g], 0.05).unwrap();
            if p[0].abs() < 1e-3 && reached.is_none() {
                reached = Some(i);
            }
        }
        assert!(reached.is_some(), "final p = {}", p[0]);
        assert!(p[0].abs() < 1e-3, "final p = {}", p[0]);
    }

    #[test]
    fn rejects_non_finite_and_shape_errors() {
        let mut s = AdamState::new(1);
        let mut p = vec![0.0];
        assert!(matches!(s.step(&mut p, &[f64::NAN], 0.1), Err(Error::NonFinite(_))));
        assert!(matches!(s.step(&mut p, &[1.0, 2.0], 0.1), Err(Error::ShapeMismatch(_))));
    }
}
