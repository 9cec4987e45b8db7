use serde::{Deserialize, Serialize};

use crate::diffcore::{ops, sc, DiffError, Result, Scalar, Tensor};

/// Per-timestep noising tables: beta_t, alpha_t = 1 - beta_t, and the
/// running product alpha_bar_t.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    pub betas: Vec<f64>,
    pub alphas: Vec<f64>,
    pub alpha_bars: Vec<f64>,
}

/// Default step count. 200 keeps desk-scale training cheap while the
/// terminal alpha_bar still lands near zero.
pub const DEFAULT_T: usize = 200;
pub const DEFAULT_BETA_START: f64 = 1e-4;
/// With T = 200, a 0.02 endpoint would leave alpha_bar at ~0.13; 0.04
/// brings it under 0.02 so the terminal state is essentially pure noise.
pub const DEFAULT_BETA_END: f64 = 0.04;

/// Linearly spaced betas from `beta_start` to `beta_end` over `t_steps`.
pub fn schedule_linear(t_steps: usize, beta_start: f64, beta_end: f64) -> Result<NoiseSchedule> {
    if t_steps == 0 {
        return Err(DiffError::ShapeMismatch { op: "schedule_linear", detail: "T must be >= 1".into() });
    }
    if !(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0) {
        return Err(DiffError::ShapeMismatch {
            op: "schedule_linear",
            detail: format!("need 0 < beta_start <= beta_end < 1, got ({beta_start}, {beta_end})"),
        });
    }
    let mut betas = Vec::with_capacity(t_steps);
    for t in 0..t_steps {
        let frac = if t_steps == 1 { 0.0 } else { t as f64 / (t_steps - 1) as f64 };
        betas.push(beta_start + (beta_end - beta_start) * frac);
    }
    let alphas: Vec<f64> = betas.iter().map(|b| 1.0 - b).collect();
    let mut alpha_bars = Vec::with_capacity(t_steps);
    let mut running = 1.0;
    for a in &alphas {
        running *= a;
        alpha_bars.push(running);
    }
    Ok(NoiseSchedule { betas, alphas, alpha_bars })
}

impl NoiseSchedule {
    pub fn default_schedule() -> NoiseSchedule {
        schedule_linear(DEFAULT_T, DEFAULT_BETA_START, DEFAULT_BETA_END).expect("valid defaults")
    }

    pub fn len(&self) -> usize {
        self.betas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.betas.is_empty()
    }
}

/// Closed-form forward noising:
/// sqrt(alpha_bar_t) * x0 + sqrt(1 - alpha_bar_t) * eps.
pub fn q_sample<T: Scalar>(
    x0: &Tensor<T>,
    t: usize,
    eps: &Tensor<T>,
    schedule: &NoiseSchedule,
) -> Result<Tensor<T>> {
    if t >= schedule.len() {
        return Err(DiffError::ShapeMismatch {
            op: "q_sample",
            detail: format!("timestep {} out of range 0..{}", t, schedule.len()),
        });
    }
    let ab = schedule.alpha_bars[t];
    let signal = ops::scale(x0, sc::<T>(ab.sqrt()))?;
    let noise = ops::scale(eps, sc::<T>((1.0 - ab).sqrt()))?;
    ops::add(&signal, &noise)
}
