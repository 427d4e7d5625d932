use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig {
            lr,
            ..Default::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam moments for one flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl OptimState {
    pub fn new(len: usize) -> Self {
        OptimState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }
}

/// One bias-corrected Adam update, in place.
pub fn adam_step(state: &mut OptimState, params: &mut [f64], grads: &[f64], cfg: &AdamConfig) -> Result<()> {
    if params.len() != state.len() || grads.len() != state.len() {
        return Err(Error::invalid(format!(
            "optimizer tracks {} parameters, got {} params and {} grads",
            state.len(),
            params.len(),
            grads.len()
        )));
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_noop() {
        let mut s = OptimState::new(3);
        let mut p = vec![1.0, -2.0, 3.5];
        for _ in 0..5 {
            adam_step(&mut s, &mut p, &[0.0; 3], &AdamConfig::with_lr(0.1)).unwrap();
        }
        assert_eq!(p, vec![1.0, -2.0, 3.5]);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut s = OptimState::new(1);
        let mut p = vec![0.0];
        adam_step(&mut s, &mut p, &[1.0], &AdamConfig::with_lr(0.1)).unwrap();
        assert!((p[0] + 0.1).abs() < 1e-7);
    }

    #[test]
    fn matches_reference_trace() {
        // Scripted independently: m, v recursions written out by hand.
        let cfg = AdamConfig::with_lr(0.01);
        let mut s = OptimState::new(2);
        let mut p = vec![0.5, -1.0];
        let g = [0.3, -2.0];
        adam_step(&mut s, &mut p, &g, &cfg).unwrap();
        adam_step(&mut s, &mut p, &g, &cfg).unwrap();
        for i in 0..2 {
            let m1 = 0.1 * g[i];
            let v1 = 0.001 * g[i] * g[i];
            let p1 = [0.5, -1.0][i] - 0.01 * (m1 / 0.1) / ((v1 / 0.001f64).sqrt() + 1e-8);
            let m2 = 0.9 * m1 + 0.1 * g[i];
            let v2 = 0.999 * v1 + 0.001 * g[i] * g[i];
            let p2 = p1 - 0.01 * (m2 / (1.0 - 0.81)) / ((v2 / (1.0 - 0.999f64 * 0.999)).sqrt() + 1e-8);
            assert!((p[i] - p2).abs() < 1e-15, "{} vs {}", p[i], p2);
        }
    }

    #[test]
    fn shape_mismatch_is_error() {
        let mut s = OptimState::new(2);
        assert!(adam_step(&mut s, &mut [0.0; 3], &[0.0; 3], &AdamConfig::default()).is_err());
    }
}
