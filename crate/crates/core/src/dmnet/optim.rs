use serde::{Deserialize, Serialize};

use super::params::{DMNetParams, Gradients};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Global gradient-norm threshold; `None` disables clipping.
    pub clip_norm: Option<f64>,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            clip_norm: Some(1.0),
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0
            && self.clip_norm.is_none_or(|c| c > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "invalid optimiser settings {self:?}"
            )))
        }
    }
}

/// First and second moment estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }
}

/// Rescales `grads` so its global norm is at most `max_norm`; returns the factor applied.
pub fn clip_global_norm(grads: &mut Gradients, max_norm: f64) -> f64 {
    let norm = grads.norm();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        grads.values.iter_mut().for_each(|g| *g *= s);
        s
    } else {
        1.0
    }
}

/// One bias-corrected adaptive-moment update, after optional clipping.
pub fn adam_step(
    params: &mut DMNetParams,
    grads: &mut Gradients,
    state: &mut AdamState,
    config: &AdamConfig,
    learning_rate: f64,
) -> Result<()> {
    let n = params.count_params();
    if grads.values.len() != n || state.m.len() != n {
        return Err(Error::shape(n, grads.values.len().min(state.m.len())));
    }
    if let Some(c) = config.clip_norm {
        clip_global_norm(grads, c);
    }
    state.step += 1;
    let bc1 = 1.0 - config.beta1.powf(state.step as f64);
    let bc2 = 1.0 - config.beta2.powf(state.step as f64);
    for (((p, &g), m), v) in params
        .values_mut()
        .iter_mut()
        .zip(&grads.values)
        .zip(&mut state.m)
        .zip(&mut state.v)
    {
        *m = config.beta1 * *m + (1.0 - config.beta1) * g;
        *v = config.beta2 * *v + (1.0 - config.beta2) * g * g;
        let mh = *m / bc1;
        let vh = *v / bc2;
        *p -= learning_rate * mh / (vh.sqrt() + config.epsilon);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dmnet::NetConfig;
    use crate::numerics::stream_rng;

    fn tiny() -> DMNetParams {
        let cfg = NetConfig {
            n_rx: 2,
            n_tx: 1,
            c_init: 2,
            c_max: 1,
            encoder_hidden: vec![],
            decoder_hidden: vec![],
        };
        DMNetParams::init(cfg, &mut stream_rng(0, 0, 0)).unwrap()
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = tiny();
        let before = p.clone();
        let mut g = Gradients::zeros_like(&p);
        let mut s = AdamState::new(p.count_params());
        for _ in 0..5 {
            adam_step(&mut p, &mut g, &mut s, &AdamConfig::default(), 1e-3).unwrap();
        }
        assert_eq!(p, before);
    }

    #[test]
    fn constant_gradient_step_tends_to_learning_rate() {
        // with constant g, m̂ = g exactly and v̂ = g², so every step is lr·g/(|g|+ε)
        let mut p = tiny();
        let cfg = AdamConfig {
            clip_norm: None,
            epsilon: 1e-12,
            ..AdamConfig::default()
        };
        let mut g = Gradients::zeros_like(&p);
        g.values[0] = 0.3;
        let mut s = AdamState::new(p.count_params());
        let lr = 0.01;
        for k in 0..200 {
            let before = p.values()[0];
            adam_step(&mut p, &mut g, &mut s, &cfg, lr).unwrap();
            let step = before - p.values()[0];
            assert!((step - lr).abs() < 1e-9, "step {k}: {step}");
        }
    }

    #[test]
    fn decaying_gradient_matches_scalar_recursion() {
        let mut p = tiny();
        let cfg = AdamConfig {
            clip_norm: None,
            ..AdamConfig::default()
        };
        let mut s = AdamState::new(p.count_params());
        let (mut m, mut v) = (0.0f64, 0.0f64);
        let mut x = p.values()[1];
        for k in 1..=50 {
            let gk = 1.0 / k as f64;
            let mut g = Gradients::zeros_like(&p);
            g.values[1] = gk;
            adam_step(&mut p, &mut g, &mut s, &cfg, 0.1).unwrap();
            m = 0.9 * m + 0.1 * gk;
            v = 0.999 * v + 0.001 * gk * gk;
            let mh = m / (1.0 - 0.9f64.powi(k));
            let vh = v / (1.0 - 0.999f64.powi(k));
            x -= 0.1 * mh / (vh.sqrt() + 1e-8);
            assert!((p.values()[1] - x).abs() < 1e-12);
        }
    }

    #[test]
    fn clipping_scales_to_threshold() {
        let p = tiny();
        let mut g = Gradients::zeros_like(&p);
        g.values[0] = 6.0;
        g.values[1] = 8.0;
        let s = clip_global_norm(&mut g, 1.0);
        assert!((s - 0.1).abs() < 1e-15);
        assert!((g.norm() - 1.0).abs() < 1e-12);
        assert_eq!(clip_global_norm(&mut g, 5.0), 1.0);
    }

    #[test]
    fn rejects_bad_settings() {
        assert!(AdamConfig {
            beta1: 1.0,
            ..AdamConfig::default()
        }
        .validate()
        .is_err());
        assert!(AdamConfig {
            clip_norm: Some(0.0),
            ..AdamConfig::default()
        }
        .validate()
        .is_err());
        assert!(AdamConfig::default().validate().is_ok());
    }
}
