use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::Params;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias correction. Moments are kept per tensor in the order of
/// [`Params::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    pub step: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new<P: Params>(params: &P, config: AdamConfig) -> Self {
        let zeros: Vec<Vec<f64>> = params.params().iter().map(|(_, t)| vec![0.0; t.len()]).collect();
        Adam {
            config,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    /// Applies one update. A non-finite gradient aborts the step before any
    /// weight or moment changes.
    pub fn update<P: Params>(&mut self, params: &mut P, grads: &P, lr: f64) -> Result<()> {
        if let Some(name) = grads.first_non_finite() {
            return Err(Error::NonFiniteGradient(name));
        }
        let AdamConfig { beta1, beta2, eps } = self.config;
        self.step += 1;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        let grads = grads.params();
        for (k, (_, p)) in params.params_mut().into_iter().enumerate() {
            let g = grads[k].1.data();
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for (i, w) in p.data_mut().iter_mut().enumerate() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                *w -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Tensor;

    #[derive(Clone)]
    struct W(Tensor);

    impl Params for W {
        fn params(&self) -> Vec<(String, &Tensor)> {
            vec![("w".into(), &self.0)]
        }
        fn params_mut(&mut self) -> Vec<(String, &mut Tensor)> {
            vec![("w".into(), &mut self.0)]
        }
    }

    fn w(v: &[f64]) -> W {
        W(Tensor::from_vec(&[v.len()], v.to_vec()).unwrap())
    }

    #[test]
    fn zero_gradient_keeps_weights() {
        let mut p = w(&[1.0, -2.0]);
        let mut opt = Adam::new(&p, AdamConfig::default());
        for _ in 0..5 {
            opt.update(&mut p, &w(&[0.0, 0.0]), 0.1).unwrap();
        }
        assert_eq!(p.0.data(), &[1.0, -2.0]);
    }

    #[test]
    fn first_step_is_hand_computed() {
        let mut p = w(&[0.0, 0.0, 0.0]);
        let g = [0.5, -3.0, 1e-9];
        let mut opt = Adam::new(&p, AdamConfig::default());
        opt.update(&mut p, &w(&g), 0.01).unwrap();
        // after bias correction m = g and sqrt(v) = |g|
        for (x, gi) in p.0.data().iter().zip(g) {
            let expect = -0.01 * gi / (gi.abs() + 1e-8);
            assert!((x - expect).abs() < 1e-15, "{x} vs {expect}");
        }
    }

    #[test]
    fn constant_gradient_moves_at_learning_rate() {
        let mut p = w(&[0.0, 0.0]);
        let mut opt = Adam::new(&p, AdamConfig::default());
        let mut prev = p.0.data().to_vec();
        for _ in 0..2000 {
            opt.update(&mut p, &w(&[0.3, -7.0]), 1e-3).unwrap();
            let cur = p.0.data().to_vec();
            let steps: Vec<f64> = cur.iter().zip(&prev).map(|(a, b)| a - b).collect();
            prev = cur;
            assert!(steps[0] < 0.0 && steps[1] > 0.0);
        }
        let last: Vec<f64> = {
            let before = prev.clone();
            opt.update(&mut p, &w(&[0.3, -7.0]), 1e-3).unwrap();
            p.0.data().iter().zip(&before).map(|(a, b)| a - b).collect()
        };
        assert!((last[0] + 1e-3).abs() < 1e-9);
        assert!((last[1] - 1e-3).abs() < 1e-9);
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let mut p = w(&[1.0]);
        let mut opt = Adam::new(&p, AdamConfig::default());
        let err = opt.update(&mut p, &w(&[f64::NAN]), 0.1).unwrap_err();
        assert!(matches!(err, Error::NonFiniteGradient(ref n) if n == "w"));
        assert_eq!(p.0.data(), &[1.0]);
        assert_eq!(opt.step, 0);
    }
}
