use super::params::DMNetParams;
use crate::diffusion::NoiseSchedule;
use crate::error::Result;
use crate::numerics::ComplexMatrix;

/// Gradients below this magnitude are compared absolutely rather than relatively.
pub const RELATIVE_FLOOR: f64 = 1e-5;

/// Worst central-difference disagreement within one parameter group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupCheck {
    pub name: String,
    pub checked: usize,
    pub max_relative_error: f64,
}

/// Compares analytic gradients with central differences `(L(θ+h) − L(θ−h)) / 2h`.
///
/// `per_group` limits how many evenly spaced entries of each group are probed; `None`
/// probes every parameter. The relative error of an entry is
/// `|g − ĝ| / max(|g|, |ĝ|, RELATIVE_FLOOR)`.
pub fn gradient_check(
    params: &DMNetParams,
    h0: &[ComplexMatrix],
    steps: &[usize],
    noise: &[ComplexMatrix],
    schedule: &NoiseSchedule,
    step: f64,
    per_group: Option<usize>,
) -> Result<Vec<GroupCheck>> {
    let (_, grads) = params.loss_and_grad_at(h0, steps, noise, schedule)?;
    let mut probe = params.clone();
    let mut out = Vec::new();
    for (name, range) in params.groups() {
        let len = range.len();
        let picks: Vec<usize> = match per_group {
            Some(k) if k < len => (0..k).map(|i| range.start + i * len / k).collect(),
            _ => range.collect(),
        };
        let mut worst: f64 = 0.0;
        for &i in &picks {
            let orig = probe.values()[i];
            probe.values_mut()[i] = orig + step;
            let up = probe.loss_at(h0, steps, noise, schedule)?;
            probe.values_mut()[i] = orig - step;
            let down = probe.loss_at(h0, steps, noise, schedule)?;
            probe.values_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * step);
            let analytic = grads.values[i];
            let denom = analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR);
            worst = worst.max((analytic - numeric).abs() / denom);
        }
        out.push(GroupCheck {
            name,
            checked: picks.len(),
            max_relative_error: worst,
        });
    }
    Ok(out)
}
