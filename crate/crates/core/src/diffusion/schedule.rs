use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::ComplexMatrix;

/// Endpoints of the linear `α_t` schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleConfig {
    pub timesteps: usize,
    pub alpha_first: f64,
    pub alpha_last: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            timesteps: 50,
            alpha_first: 0.9999,
            alpha_last: 0.9,
        }
    }
}

impl ScheduleConfig {
    pub fn build(&self) -> Result<NoiseSchedule> {
        NoiseSchedule::linear(self.timesteps, self.alpha_first, self.alpha_last)
    }
}

/// Variance-preserving noise schedule and its derived per-step quantities.
///
/// Steps are 1-based (`t = 1..=T`); `ᾱ_0 = 1` so the first reverse step is exact.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    alpha: Vec<f64>,
    alpha_bar: Vec<f64>,
    posterior_var: Vec<f64>,
    snr: Vec<f64>,
}

impl NoiseSchedule {
    /// `α_t` linearly interpolated from `alpha_first` (t = 1) to `alpha_last` (t = T).
    pub fn linear(timesteps: usize, alpha_first: f64, alpha_last: f64) -> Result<Self> {
        if timesteps == 0 {
            return Err(Error::InvalidArgument(
                "schedule needs at least one step".into(),
            ));
        }
        for a in [alpha_first, alpha_last] {
            if !(a > 0.0 && a < 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "alpha endpoint {a} outside (0, 1)"
                )));
            }
        }
        if alpha_last > alpha_first {
            return Err(Error::InvalidArgument(format!(
                "alpha_last {alpha_last} must not exceed alpha_first {alpha_first}"
            )));
        }
        let alpha = if timesteps == 1 {
            vec![alpha_first]
        } else {
            let step = (alpha_last - alpha_first) / (timesteps - 1) as f64;
            (0..timesteps)
                .map(|i| alpha_first + step * i as f64)
                .collect()
        };
        Self::from_alphas(alpha)
    }

    pub fn from_alphas(alpha: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() || alpha.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
            return Err(Error::InvalidArgument(
                "every alpha_t must lie in (0, 1)".into(),
            ));
        }
        let mut alpha_bar = Vec::with_capacity(alpha.len());
        let mut prod = 1.0;
        for &a in &alpha {
            prod *= a;
            alpha_bar.push(prod);
        }
        let posterior_var = alpha
            .iter()
            .zip(&alpha_bar)
            .enumerate()
            .map(|(i, (&a, &ab))| {
                let prev = if i == 0 { 1.0 } else { alpha_bar[i - 1] };
                (1.0 - a) * (1.0 - prev) / (1.0 - ab)
            })
            .collect();
        let snr = alpha_bar.iter().map(|&ab| ab / (1.0 - ab)).collect();
        Ok(Self {
            alpha,
            alpha_bar,
            posterior_var,
            snr,
        })
    }

    pub fn timesteps(&self) -> usize {
        self.alpha.len()
    }

    pub(crate) fn check(&self, t: usize) -> Result<usize> {
        if t == 0 || t > self.timesteps() {
            return Err(Error::TimestepOutOfRange {
                t,
                max: self.timesteps(),
            });
        }
        Ok(t - 1)
    }

    pub fn alpha(&self, t: usize) -> Result<f64> {
        Ok(self.alpha[self.check(t)?])
    }

    /// `ᾱ_t`, with `ᾱ_0 = 1`.
    pub fn alpha_bar(&self, t: usize) -> Result<f64> {
        if t == 0 {
            return Ok(1.0);
        }
        Ok(self.alpha_bar[self.check(t)?])
    }

    /// Forward-posterior variance `σ_t²`.
    pub fn posterior_var(&self, t: usize) -> Result<f64> {
        Ok(self.posterior_var[self.check(t)?])
    }

    /// Diffusion SNR `ᾱ_t / (1 - ᾱ_t)` of step `t`.
    pub fn snr(&self, t: usize) -> Result<f64> {
        Ok(self.snr[self.check(t)?])
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alpha
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bar
    }

    pub fn snrs(&self) -> &[f64] {
        &self.snr
    }

    /// Coefficients `(c_0, c_t)` of `μ̃ = c_0 h_0 + c_t h_t`.
    pub fn posterior_coefficients(&self, t: usize) -> Result<(f64, f64)> {
        let i = self.check(t)?;
        let a = self.alpha[i];
        let ab = self.alpha_bar[i];
        let prev = if i == 0 { 1.0 } else { self.alpha_bar[i - 1] };
        Ok((
            prev.sqrt() * (1.0 - a) / (1.0 - ab),
            a.sqrt() * (1.0 - prev) / (1.0 - ab),
        ))
    }

    /// Closed-form forward diffusion `h_t = √ᾱ_t h_0 + √(1-ᾱ_t) ε`.
    pub fn forward_diffuse(
        &self,
        h0: &ComplexMatrix,
        t: usize,
        noise: &ComplexMatrix,
    ) -> Result<ComplexMatrix> {
        let ab = self.alpha_bar(t)?;
        self.check(t)?;
        let mut out = h0.scale(ab.sqrt());
        out.axpy_mut((1.0 - ab).sqrt(), noise)?;
        Ok(out)
    }

    /// Forward-posterior mean `μ̃(h_t, h_0)`.
    pub fn posterior_mean(
        &self,
        h_t: &ComplexMatrix,
        h0: &ComplexMatrix,
        t: usize,
    ) -> Result<ComplexMatrix> {
        let (c0, ct) = self.posterior_coefficients(t)?;
        let mut out = h0.scale(c0);
        out.axpy_mut(ct, h_t)?;
        Ok(out)
    }

    /// The step whose diffusion SNR is closest (linear scale) to `snr_obs`; ties go to the
    /// smaller step. Clamps to `1` and `T` outside the schedule's range.
    pub fn match_timestep(&self, snr_obs: f64) -> usize {
        let snr = &self.snr;
        // snr is strictly decreasing; first index with snr[i] <= snr_obs
        let idx = snr.partition_point(|&s| s > snr_obs);
        if idx == 0 {
            return 1;
        }
        if idx == snr.len() {
            return snr.len();
        }
        let above = snr[idx - 1] - snr_obs;
        let below = snr_obs - snr[idx];
        if below < above {
            idx + 1
        } else {
            idx
        }
    }
}
