use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::VaeModel;
use super::network::sample_loss;
use crate::error::{Error, Result};
use crate::scalar::{CompensatedSum, Real};

pub const FD_STEP: f64 = 1e-5;
/// Denominator floor of the relative error, so parameters whose gradient is
/// zero on both sides compare as equal.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub parameters: usize,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    /// Parameter with the largest relative error, as `tensor[index]`.
    pub worst_parameter: String,
    pub tolerance: f64,
    pub passed: bool,
}

/// One mini-batch for gradient checking: windows plus the fixed
/// reparameterization noise of each (`None` decodes `μ`).
#[derive(Debug, Clone)]
pub struct GradCheckBatch<T> {
    pub windows: Vec<Vec<T>>,
    pub eps: Vec<Option<Vec<T>>>,
    pub kl_weight: T,
}

impl<T: Real> GradCheckBatch<T> {
    fn validate(&self, model: &VaeModel<T>) -> Result<()> {
        if self.windows.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if self.eps.len() != self.windows.len() {
            return Err(Error::shape("gradient-check noise", self.windows.len(), self.eps.len()));
        }
        let want = model.config.window * model.config.input_dim;
        for w in &self.windows {
            if w.len() != want {
                return Err(Error::shape("gradient-check window", want, w.len()));
            }
        }
        for e in self.eps.iter().flatten() {
            if e.len() != model.config.latent_dim {
                return Err(Error::shape("gradient-check noise", model.config.latent_dim, e.len()));
            }
        }
        Ok(())
    }
}

fn batch_loss<T: Real>(model: &VaeModel<T>, params: &[T], batch: &GradCheckBatch<T>, grad: Option<&mut [T]>) -> T {
    let n = T::lit(batch.windows.len() as f64);
    let mut total = CompensatedSum::new();
    match grad {
        Some(g) => {
            for (x, e) in batch.windows.iter().zip(&batch.eps) {
                total.add(sample_loss(model.layout(), params, x, model.config.window, e.as_deref(), batch.kl_weight, Some(&mut *g)).total);
            }
            for v in g.iter_mut() {
                *v = *v / n;
            }
        }
        None => {
            for (x, e) in batch.windows.iter().zip(&batch.eps) {
                total.add(sample_loss(model.layout(), params, x, model.config.window, e.as_deref(), batch.kl_weight, None).total);
            }
        }
    }
    total.value() / n
}

/// Analytic gradient of the mean batch loss.
pub fn analytic_gradient<T: Real>(model: &VaeModel<T>, batch: &GradCheckBatch<T>) -> Result<Vec<T>> {
    batch.validate(model)?;
    let mut g = vec![T::zero(); model.parameter_count()];
    batch_loss(model, &model.params, batch, Some(&mut g));
    Ok(g)
}

/// Central finite differences of the mean batch loss with step [`FD_STEP`].
pub fn numeric_gradient<T: Real>(model: &VaeModel<T>, batch: &GradCheckBatch<T>) -> Result<Vec<T>> {
    batch.validate(model)?;
    let h = T::lit(FD_STEP);
    Ok((0..model.parameter_count())
        .into_par_iter()
        .map(|i| {
            let mut p = model.params.clone();
            p[i] = model.params[i] + h;
            let up = batch_loss(model, &p, batch, None);
            p[i] = model.params[i] - h;
            let down = batch_loss(model, &p, batch, None);
            (up - down) / (h + h)
        })
        .collect())
}

/// Compares a supplied analytic gradient with finite differences.
pub fn compare_gradients<T: Real>(model: &VaeModel<T>, analytic: &[T], numeric: &[T], tolerance: f64) -> GradCheckReport {
    let mut worst = (0usize, 0.0f64);
    let mut max_abs = 0.0f64;
    for (i, (a, n)) in analytic.iter().zip(numeric).enumerate() {
        let (a, n) = (a.to_f64_lossy(), n.to_f64_lossy());
        let abs = (a - n).abs();
        let rel = abs / a.abs().max(n.abs()).max(REL_ERROR_FLOOR);
        let rel = if rel.is_nan() { f64::INFINITY } else { rel };
        max_abs = max_abs.max(abs);
        if rel > worst.1 || i == 0 {
            worst = (i, rel.max(worst.1));
        }
    }
    GradCheckReport {
        parameters: analytic.len(),
        max_rel_error: worst.1,
        max_abs_error: max_abs,
        worst_parameter: model.layout().describe(worst.0),
        tolerance,
        passed: worst.1 < tolerance && analytic.len() == numeric.len(),
    }
}

/// Checks the hand-derived gradient of the loss against central finite
/// differences over every parameter.
pub fn gradient_check<T: Real>(model: &VaeModel<T>, batch: &GradCheckBatch<T>, tolerance: f64) -> Result<GradCheckReport> {
    let a = analytic_gradient(model, batch)?;
    let n = numeric_gradient(model, batch)?;
    Ok(compare_gradients(model, &a, &n, tolerance))
}
