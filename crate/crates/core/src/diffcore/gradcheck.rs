//! Finite-difference gradient verification.
//!
//! The numeric side only ever calls the forward pass (on detached
//! parameters), so it stays independent of the backward implementation
//! it is checking. Central differences with step h have O(h^2)
//! truncation error; at 64-bit with h = 1e-4 the noise floor sits
//! around 1e-8, well under the tolerances used in tests.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::error::Result;
use super::params::{BoundParams, ParamStore};
use super::tape::{backward, Tape};
use super::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct GradCheckConfig {
    /// Central-difference step.
    pub step: f64,
    /// Coordinates sampled per parameter (0 checks every coordinate).
    pub coords_per_param: usize,
    /// Denominator floor for the relative error; differences where both
    /// sides sit below this magnitude are measured against the floor.
    pub rel_floor: f64,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig { step: 1e-4, coords_per_param: 0, rel_floor: 1e-6, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub coords_checked: usize,
    /// (parameter, coordinate, analytic, numeric) of the worst pair.
    pub worst: Option<(String, usize, f64, f64)>,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.coords_checked > 0 && self.max_rel_err < tol
    }
}

/// Compare analytic gradients of `forward`'s scalar output against
/// central finite differences over the parameters in `store`.
pub fn check_gradients<F>(
    store: &mut ParamStore<f64>,
    forward: F,
    cfg: &GradCheckConfig,
) -> Result<GradCheckReport>
where
    F: Fn(&BoundParams<f64>) -> Result<Tensor<f64>>,
{
    let tape = Tape::new();
    let bound = store.bind(&tape);
    let loss = forward(&bound)?;
    let grads = backward(&loss)?;

    let names: Vec<String> = store.names().map(|s| s.to_string()).collect();
    let mut analytic: Vec<(String, Vec<f64>)> = Vec::with_capacity(names.len());
    for name in &names {
        let t = bound.get(name)?;
        analytic.push((name.clone(), grads.grad_or_zeros(t)));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let h = cfg.step;
    let mut report = GradCheckReport { max_rel_err: 0.0, coords_checked: 0, worst: None };

    for (name, grad) in &analytic {
        let n = grad.len();
        let coords: Vec<usize> = if cfg.coords_per_param == 0 || cfg.coords_per_param >= n {
            (0..n).collect()
        } else {
            rand::seq::index::sample(&mut rng, n, cfg.coords_per_param).into_vec()
        };
        for &i in &coords {
            store.nudge(name, i, h)?;
            let f_plus = forward(&store.bind_untracked())?.item();
            store.nudge(name, i, -2.0 * h)?;
            let f_minus = forward(&store.bind_untracked())?.item();
            store.nudge(name, i, h)?;
            let numeric = (f_plus - f_minus) / (2.0 * h);
            let a = grad[i];
            let denom = a.abs().max(numeric.abs()).max(cfg.rel_floor);
            let rel = (a - numeric).abs() / denom;
            report.coords_checked += 1;
            if rel > report.max_rel_err {
                report.max_rel_err = rel;
                report.worst = Some((name.clone(), i, a, numeric));
            }
        }
    }
    Ok(report)
}
