//! Motion variational autoencoder over windows of 6-DoF encoded poses.
//!
//! Encoder: bidirectional GRU over the `W` input rows, mean pooling of the
//! concatenated forward/backward states, a two-layer tanh perceptron and
//! linear `μ` / `log σ` heads (`log σ` clamped to `[-10, 10]`).
//!
//! Decoder: forward GRU whose input at step `t` is the previous output pose
//! (a learned initial pose token at `t = 0`) concatenated with `z`, followed
//! by a two-layer tanh perceptron and a linear output layer.
//!
//! The minimized loss is `MSE + kl_weight * KL(N(μ, σ²) || N(0, I)) / S_z`.
//! Gradients are computed by hand-written reverse mode through both
//! recurrences, including the autoregressive feedback of the decoder.

mod gradcheck;
mod layers;
mod model;
mod network;
mod train;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

pub use gradcheck::{analytic_gradient, compare_gradients, gradient_check, numeric_gradient, GradCheckBatch, GradCheckReport, FD_STEP};
pub use layers::{Dense, Gru, Span, TensorInfo};
pub use model::{LatentCode, VaeConfig, VaeLayout, VaeModel};
pub use network::LossParts;
pub use train::{evaluate_loss, train, train_with_progress, EpochLoss, TrainReport};

use crate::error::{Error, Result};
use crate::motion::{MotionSequence, PoseFrame};
use crate::scalar::Real;
use crate::smoothing::{sliding_windows, stitch_windows, OverlapPolicy, WindowSpec};
use network::{clamp_log_sigma, decoder_forward, encoder_forward, kl_term, mse};

impl<T: Real> VaeModel<T> {
    /// `seq` is `window × input_dim`, row-major.
    pub fn encode(&self, seq: &[T]) -> Result<LatentCode<T>> {
        let want = self.config.window * self.config.input_dim;
        if seq.len() != want {
            return Err(Error::shape("encoder input", want, seq.len()));
        }
        if !seq.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("encoder input"));
        }
        let tr = encoder_forward(self.layout(), &self.params, seq, self.config.window);
        LatentCode::new(tr.mu, tr.log_sigma)
    }

    /// Autoregressive rollout of `window` steps; returns `window × input_dim` values.
    pub fn decode(&self, z: &[T], window: usize) -> Result<Vec<T>> {
        if z.len() != self.config.latent_dim {
            return Err(Error::shape("latent code", self.config.latent_dim, z.len()));
        }
        Ok(decoder_forward(self.layout(), &self.params, z, window).output)
    }
}

/// `z = μ + exp(log σ) ⊙ ε` with `ε` drawn from a standard normal seeded by
/// `seed`. `log σ` is clamped to `[-10, 10]` first.
pub fn reparameterize<T: Real>(code: &LatentCode<T>, seed: u64) -> Vec<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    code.mu
        .iter()
        .zip(&code.log_sigma)
        .map(|(m, ls)| {
            let e: f64 = StandardNormal.sample(&mut rng);
            *m + clamp_log_sigma(*ls).exp() * T::lit(e)
        })
        .collect()
}

/// Loss of one reconstruction against its target.
pub fn vae_loss<T: Real>(recon: &[T], target: &[T], code: &LatentCode<T>, kl_weight: T) -> Result<LossParts<T>> {
    if recon.len() != target.len() {
        return Err(Error::shape("reconstruction", target.len(), recon.len()));
    }
    if recon.is_empty() {
        return Err(Error::invalid("target", "empty"));
    }
    let ls: Vec<T> = code.log_sigma.iter().map(|v| clamp_log_sigma(*v)).collect();
    let recon_term = mse(recon, target);
    let kl = kl_term(&code.mu, &ls);
    Ok(LossParts { total: recon_term + kl_weight * kl, recon: recon_term, kl })
}

/// Splits `seq` into non-overlapping windows of the model width, encodes each
/// (using `μ`), decodes, and stitches the result. Rotations keep each input
/// joint's representation; betas, translations, fps and name carry over.
pub fn reconstruct_sequence<T: Real>(model: &VaeModel<T>, seq: &MotionSequence<T>) -> Result<MotionSequence<T>> {
    let w = model.config.window;
    if seq.joint_count() * 6 != model.config.input_dim {
        return Err(Error::shape("sequence joints x 6", model.config.input_dim, seq.joint_count() * 6));
    }
    let (windows, index) = sliding_windows(seq, &WindowSpec::new(w, w)?)?;
    let decoded: Vec<MotionSequence<T>> = windows
        .par_iter()
        .map(|win| {
            let code = model.encode(&win.sixd_rows()?)?;
            let rows = model.decode(&code.mu, w)?;
            let frames = rows
                .chunks_exact(model.config.input_dim)
                .zip(&win.frames)
                .map(|(row, src)| {
                    let mut f = PoseFrame::from_sixd_row(row, src.rotations[0].representation())?;
                    for (r, s) in f.rotations.iter_mut().zip(&src.rotations) {
                        *r = r.convert(s.representation())?;
                    }
                    f.betas = src.betas.clone();
                    f.root_translation = src.root_translation;
                    Ok(f)
                })
                .collect::<Result<Vec<_>>>()?;
            MotionSequence::new(frames, win.fps, win.name.clone())
        })
        .collect::<Result<_>>()?;
    let mut out = stitch_windows(&decoded, &index, OverlapPolicy::TakeFirst)?;
    out.name = seq.name.clone();
    Ok(out)
}
