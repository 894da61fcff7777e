//! Encoder/decoder passes over a flat parameter vector and the per-sample
//! loss with its reverse-mode gradient.

use super::layers::GruCache;
use super::model::VaeLayout;
use crate::scalar::{CompensatedSum, Real};

pub(crate) const LOG_SIGMA_MIN: f64 = -10.0;
pub(crate) const LOG_SIGMA_MAX: f64 = 10.0;

pub(crate) fn clamp_log_sigma<T: Real>(v: T) -> T {
    v.max(T::lit(LOG_SIGMA_MIN)).min(T::lit(LOG_SIGMA_MAX))
}

fn tanh_in_place<T: Real>(v: &mut [T]) {
    for x in v {
        *x = x.tanh();
    }
}

/// Multiplies `dy` by the tanh derivative given the activation `a`.
fn tanh_backward<T: Real>(dy: &mut [T], a: &[T]) {
    for (d, a) in dy.iter_mut().zip(a) {
        *d = *d * (T::one() - *a * *a);
    }
}

pub(crate) struct EncoderTrace<T> {
    fwd: Vec<GruCache<T>>,
    bwd: Vec<GruCache<T>>,
    pooled: Vec<T>,
    a1: Vec<T>,
    a2: Vec<T>,
    log_sigma_raw: Vec<T>,
    pub mu: Vec<T>,
    pub log_sigma: Vec<T>,
}

/// `x` is `window × input_dim`, row-major.
pub(crate) fn encoder_forward<T: Real>(l: &VaeLayout, p: &[T], x: &[T], window: usize) -> EncoderTrace<T> {
    let d = l.enc_fwd.inp;
    let he = l.enc_fwd.hidden;
    let mut fwd = Vec::with_capacity(window);
    let mut bwd = Vec::with_capacity(window);
    let mut sums: Vec<CompensatedSum<T>> = vec![CompensatedSum::new(); 2 * he];

    let mut h = vec![T::zero(); he];
    for t in 0..window {
        let (hn, c) = l.enc_fwd.step(p, &x[t * d..(t + 1) * d], &h);
        for k in 0..he {
            sums[k].add(hn[k]);
        }
        fwd.push(c);
        h = hn;
    }
    let mut h = vec![T::zero(); he];
    for t in (0..window).rev() {
        let (hn, c) = l.enc_bwd.step(p, &x[t * d..(t + 1) * d], &h);
        for k in 0..he {
            sums[he + k].add(hn[k]);
        }
        bwd.push(c);
        h = hn;
    }
    let inv_w = T::one() / T::lit(window as f64);
    let pooled: Vec<T> = sums.iter().map(|s| s.value() * inv_w).collect();

    let mut a1 = l.enc_mlp1.forward(p, &pooled);
    tanh_in_place(&mut a1);
    let mut a2 = l.enc_mlp2.forward(p, &a1);
    tanh_in_place(&mut a2);
    let mu = l.enc_mu.forward(p, &a2);
    let log_sigma_raw = l.enc_log_sigma.forward(p, &a2);
    let log_sigma = log_sigma_raw.iter().map(|v| clamp_log_sigma(*v)).collect();
    EncoderTrace { fwd, bwd, pooled, a1, a2, log_sigma_raw, mu, log_sigma }
}

pub(crate) fn encoder_backward<T: Real>(l: &VaeLayout, p: &[T], grad: &mut [T], tr: &EncoderTrace<T>, dmu: &[T], dlog_sigma: &[T]) {
    let he = l.enc_fwd.hidden;
    let window = tr.fwd.len();
    let lo = T::lit(LOG_SIGMA_MIN);
    let hi = T::lit(LOG_SIGMA_MAX);
    // clamp passes gradient only strictly inside its range
    let dls_raw: Vec<T> = tr.log_sigma_raw.iter().zip(dlog_sigma).map(|(r, g)| if *r > lo && *r < hi { *g } else { T::zero() }).collect();

    let mut da2 = vec![T::zero(); tr.a2.len()];
    l.enc_mu.backward(p, grad, &tr.a2, dmu, Some(&mut da2));
    l.enc_log_sigma.backward(p, grad, &tr.a2, &dls_raw, Some(&mut da2));
    tanh_backward(&mut da2, &tr.a2);
    let mut da1 = vec![T::zero(); tr.a1.len()];
    l.enc_mlp2.backward(p, grad, &tr.a1, &da2, Some(&mut da1));
    tanh_backward(&mut da1, &tr.a1);
    let mut dpooled = vec![T::zero(); tr.pooled.len()];
    l.enc_mlp1.backward(p, grad, &tr.pooled, &da1, Some(&mut dpooled));

    let inv_w = T::one() / T::lit(window as f64);
    let dpool_f: Vec<T> = dpooled[..he].iter().map(|v| *v * inv_w).collect();
    let dpool_b: Vec<T> = dpooled[he..].iter().map(|v| *v * inv_w).collect();

    // every hidden state feeds the pool, so each step receives dpool
    let mut dh = vec![T::zero(); he];
    for c in tr.fwd.iter().rev() {
        for k in 0..he {
            dh[k] = dh[k] + dpool_f[k];
        }
        dh = l.enc_fwd.step_backward(p, grad, c, &dh, None);
    }
    let mut dh = vec![T::zero(); he];
    for c in tr.bwd.iter().rev() {
        for k in 0..he {
            dh[k] = dh[k] + dpool_b[k];
        }
        dh = l.enc_bwd.step_backward(p, grad, c, &dh, None);
    }
}

pub(crate) struct DecoderStep<T> {
    gru: GruCache<T>,
    h: Vec<T>,
    b1: Vec<T>,
    b2: Vec<T>,
}

pub(crate) struct DecoderTrace<T> {
    steps: Vec<DecoderStep<T>>,
    /// `window × input_dim`, row-major.
    pub output: Vec<T>,
}

pub(crate) fn decoder_forward<T: Real>(l: &VaeLayout, p: &[T], z: &[T], window: usize) -> DecoderTrace<T> {
    let d = l.dec_out.out;
    let mut prev = l.dec_init_pose.of(p).to_vec();
    let mut h = vec![T::zero(); l.dec_gru.hidden];
    let mut steps = Vec::with_capacity(window);
    let mut output = Vec::with_capacity(window * d);
    let mut inp = Vec::with_capacity(d + z.len());
    for _ in 0..window {
        inp.clear();
        inp.extend_from_slice(&prev);
        inp.extend_from_slice(z);
        let (hn, gru) = l.dec_gru.step(p, &inp, &h);
        let mut b1 = l.dec_mlp1.forward(p, &hn);
        tanh_in_place(&mut b1);
        let mut b2 = l.dec_mlp2.forward(p, &b1);
        tanh_in_place(&mut b2);
        let y = l.dec_out.forward(p, &b2);
        output.extend_from_slice(&y);
        steps.push(DecoderStep { gru, h: hn.clone(), b1, b2 });
        h = hn;
        prev = y;
    }
    DecoderTrace { steps, output }
}

/// Backpropagates `dout` (`window × input_dim`) through the autoregressive
/// rollout and returns the gradient with respect to `z`.
pub(crate) fn decoder_backward<T: Real>(l: &VaeLayout, p: &[T], grad: &mut [T], tr: &DecoderTrace<T>, dout: &[T]) -> Vec<T> {
    let d = l.dec_out.out;
    let hd = l.dec_gru.hidden;
    let sz = l.dec_gru.inp - d;
    let mut dz = vec![T::zero(); sz];
    let mut dh_next = vec![T::zero(); hd];
    // gradient reaching output t through the next step's input
    let mut dprev = vec![T::zero(); d];
    for (t, s) in tr.steps.iter().enumerate().rev() {
        let dy: Vec<T> = dout[t * d..(t + 1) * d].iter().zip(&dprev).map(|(a, b)| *a + *b).collect();
        let mut db2 = vec![T::zero(); s.b2.len()];
        l.dec_out.backward(p, grad, &s.b2, &dy, Some(&mut db2));
        tanh_backward(&mut db2, &s.b2);
        let mut db1 = vec![T::zero(); s.b1.len()];
        l.dec_mlp2.backward(p, grad, &s.b1, &db2, Some(&mut db1));
        tanh_backward(&mut db1, &s.b1);
        let mut dh = dh_next.clone();
        l.dec_mlp1.backward(p, grad, &s.h, &db1, Some(&mut dh));
        let mut dinp = vec![T::zero(); d + sz];
        dh_next = l.dec_gru.step_backward(p, grad, &s.gru, &dh, Some(&mut dinp));
        dprev.copy_from_slice(&dinp[..d]);
        for (a, b) in dz.iter_mut().zip(&dinp[d..]) {
            *a = *a + *b;
        }
    }
    for (g, v) in l.dec_init_pose.of_mut(grad).iter_mut().zip(&dprev) {
        *g = *g + *v;
    }
    dz
}

/// Loss terms of one window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts<T> {
    pub total: T,
    pub recon: T,
    pub kl: T,
}

impl<T: Real> LossParts<T> {
    pub fn zero() -> Self {
        Self { total: T::zero(), recon: T::zero(), kl: T::zero() }
    }
}

pub(crate) fn mse<T: Real>(a: &[T], b: &[T]) -> T {
    let s: CompensatedSum<T> = a.iter().zip(b).map(|(x, y)| (*x - *y) * (*x - *y)).collect();
    s.value() / T::lit(a.len() as f64)
}

/// `-½ (1/S_z) Σ (1 + 2 log σ - μ² - σ²)` with `log σ` already clamped.
pub(crate) fn kl_term<T: Real>(mu: &[T], log_sigma: &[T]) -> T {
    let two = T::lit(2.0);
    let s: CompensatedSum<T> = mu.iter().zip(log_sigma).map(|(m, ls)| T::one() + two * *ls - *m * *m - (two * *ls).exp()).collect();
    -s.value() / (two * T::lit(mu.len() as f64))
}

/// Forward and backward pass for one window. `eps` is the standard-normal
/// draw of the reparameterization; pass `None` to decode `μ` directly.
/// Gradients of the returned total are added into `grad` when given.
pub(crate) fn sample_loss<T: Real>(
    l: &VaeLayout,
    p: &[T],
    x: &[T],
    window: usize,
    eps: Option<&[T]>,
    kl_weight: T,
    grad: Option<&mut [T]>,
) -> LossParts<T> {
    let enc = encoder_forward(l, p, x, window);
    let sigma: Vec<T> = enc.log_sigma.iter().map(|v| v.exp()).collect();
    let z: Vec<T> = match eps {
        Some(e) => enc.mu.iter().zip(&sigma).zip(e).map(|((m, s), e)| *m + *s * *e).collect(),
        None => enc.mu.clone(),
    };
    let dec = decoder_forward(l, p, &z, window);
    let recon = mse(&dec.output, x);
    let kl = kl_term(&enc.mu, &enc.log_sigma);
    let parts = LossParts { total: recon + kl_weight * kl, recon, kl };

    if let Some(grad) = grad {
        let n = T::lit(x.len() as f64);
        let two = T::lit(2.0);
        let dout: Vec<T> = dec.output.iter().zip(x).map(|(y, t)| two * (*y - *t) / n).collect();
        let dz = decoder_backward(l, p, grad, &dec, &dout);
        let sz = T::lit(enc.mu.len() as f64);
        let dmu: Vec<T> = dz.iter().zip(&enc.mu).map(|(g, m)| *g + kl_weight * *m / sz).collect();
        let dls: Vec<T> = (0..enc.mu.len())
            .map(|j| {
                let through_z = match eps {
                    Some(e) => dz[j] * e[j] * sigma[j],
                    None => T::zero(),
                };
                through_z + kl_weight * (sigma[j] * sigma[j] - T::one()) / sz
            })
            .collect();
        encoder_backward(l, p, grad, &enc, &dmu, &dls);
    }
    parts
}
