use std::ops::ControlFlow;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::VaeModel;
use super::network::{sample_loss, LossParts};
use crate::error::{Error, Result};
use crate::scalar::{CompensatedSum, Real};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;
pub const GRAD_CLIP_NORM: f64 = 1.0;

/// Mean losses over the whole dataset after one epoch, evaluated through `μ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub step: u64,
    pub total: f64,
    pub recon: f64,
    pub kl: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub history: Vec<EpochLoss>,
    pub steps: u64,
}

impl TrainReport {
    pub fn final_loss(&self) -> Option<&EpochLoss> {
        self.history.last()
    }
}

#[derive(Debug, Clone)]
struct Adam<T> {
    m: Vec<T>,
    v: Vec<T>,
    t: i32,
}

impl<T: Real> Adam<T> {
    fn new(n: usize) -> Self {
        Self { m: vec![T::zero(); n], v: vec![T::zero(); n], t: 0 }
    }

    fn step(&mut self, params: &mut [T], grad: &[T], lr: T) {
        let (b1, b2, eps) = (T::lit(ADAM_BETA1), T::lit(ADAM_BETA2), T::lit(ADAM_EPS));
        self.t += 1;
        let c1 = T::one() - b1.powi(self.t);
        let c2 = T::one() - b2.powi(self.t);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = b1 * self.m[i] + (T::one() - b1) * g;
            self.v[i] = b2 * self.v[i] + (T::one() - b2) * g * g;
            let mhat = self.m[i] / c1;
            let vhat = self.v[i] / c2;
            params[i] = params[i] - lr * mhat / (vhat.sqrt() + eps);
        }
    }
}

/// Scales `grad` so its global L2 norm is at most `max_norm`; returns the norm before clipping.
pub(crate) fn clip_grad_norm<T: Real>(grad: &mut [T], max_norm: T) -> T {
    let s: CompensatedSum<T> = grad.iter().map(|g| *g * *g).collect();
    let norm = s.value().sqrt();
    if norm > max_norm {
        let k = max_norm / norm;
        for g in grad.iter_mut() {
            *g = *g * k;
        }
    }
    norm
}

fn check_dataset<T: Real>(model: &VaeModel<T>, dataset: &[Vec<T>]) -> Result<()> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let want = model.config.window * model.config.input_dim;
    for (i, s) in dataset.iter().enumerate() {
        if s.len() != want {
            return Err(Error::ShapeMismatch {
                context: "training window",
                expected: format!("{want} values ({} x {})", model.config.window, model.config.input_dim),
                found: format!("{} values in window {i}", s.len()),
            });
        }
        if !s.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("training window"));
        }
    }
    Ok(())
}

/// Mean loss over `dataset` decoding `μ` without sampling.
pub fn evaluate_loss<T: Real>(model: &VaeModel<T>, dataset: &[Vec<T>]) -> Result<LossParts<T>> {
    check_dataset(model, dataset)?;
    let kl_w = T::lit(model.config.kl_weight);
    let parts: Vec<LossParts<T>> =
        dataset.par_iter().map(|x| sample_loss(model.layout(), &model.params, x, model.config.window, None, kl_w, None)).collect();
    Ok(mean_parts(&parts))
}

fn mean_parts<T: Real>(parts: &[LossParts<T>]) -> LossParts<T> {
    let n = T::lit(parts.len() as f64);
    let sum = |f: fn(&LossParts<T>) -> T| parts.iter().map(f).collect::<CompensatedSum<T>>().value() / n;
    LossParts { total: sum(|p| p.total), recon: sum(|p| p.recon), kl: sum(|p| p.kl) }
}

/// Mini-batch training with Adam and gradient-norm clipping using the
/// hyperparameters in `model.config`. Each epoch shuffles the dataset,
/// takes one optimizer step per batch, then records the `μ`-decoded mean
/// loss. Batch elements are processed in parallel and their gradients
/// summed in dataset order, so results do not depend on thread count.
pub fn train<T: Real>(model: &mut VaeModel<T>, dataset: &[Vec<T>]) -> Result<TrainReport> {
    train_with_progress(model, dataset, |_, _| ControlFlow::Continue(()))
}

/// [`train`] with a hook called after every epoch with the epoch's loss and
/// the current model. Returning `ControlFlow::Break` ends training after
/// that epoch.
pub fn train_with_progress<T: Real>(
    model: &mut VaeModel<T>,
    dataset: &[Vec<T>],
    mut on_epoch: impl FnMut(&EpochLoss, &VaeModel<T>) -> ControlFlow<()>,
) -> Result<TrainReport> {
    check_dataset(model, dataset)?;
    let cfg = model.config.clone();
    let n = model.parameter_count();
    let lr = T::lit(cfg.learning_rate);
    let kl_w = T::lit(cfg.kl_weight);
    let clip = T::lit(GRAD_CLIP_NORM);
    let mut adam = Adam::new(n);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed ^ 0x7a3d_91c4_55e0_b2f1);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut report = TrainReport::default();

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let eps: Vec<Vec<T>> =
                batch.iter().map(|_| (0..cfg.latent_dim).map(|_| T::lit(StandardNormal.sample(&mut rng))).collect()).collect();
            let layout = model.layout();
            let params = &model.params;
            let results: Vec<(LossParts<T>, Vec<T>)> = batch
                .par_iter()
                .zip(eps.par_iter())
                .map(|(&i, e)| {
                    let mut g = vec![T::zero(); n];
                    let parts = sample_loss(layout, params, &dataset[i], cfg.window, Some(e), kl_w, Some(&mut g));
                    (parts, g)
                })
                .collect();
            let inv_b = T::one() / T::lit(batch.len() as f64);
            let mut grad = vec![T::zero(); n];
            let mut loss = T::zero();
            for (parts, g) in &results {
                loss = loss + parts.total;
                for (a, b) in grad.iter_mut().zip(g) {
                    *a = *a + *b;
                }
            }
            loss = loss * inv_b;
            for g in grad.iter_mut() {
                *g = *g * inv_b;
            }
            model.step += 1;
            if !loss.is_finite() || !grad.iter().all(|g| g.is_finite()) {
                return Err(Error::Divergence { step: model.step, loss: loss.to_f64_lossy() });
            }
            clip_grad_norm(&mut grad, clip);
            adam.step(&mut model.params, &grad, lr);
        }
        let eval = evaluate_loss(model, dataset)?;
        if !eval.total.is_finite() {
            return Err(Error::Divergence { step: model.step, loss: eval.total.to_f64_lossy() });
        }
        let entry = EpochLoss {
            epoch,
            step: model.step,
            total: eval.total.to_f64_lossy(),
            recon: eval.recon.to_f64_lossy(),
            kl: eval.kl.to_f64_lossy(),
        };
        report.history.push(entry);
        if on_epoch(&entry, model).is_break() {
            break;
        }
    }
    report.steps = model.step;
    Ok(report)
}
