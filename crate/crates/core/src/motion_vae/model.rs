use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{Dense, Gru, LayoutBuilder, Span, TensorInfo};
use crate::error::{Error, Result};
use crate::io::ByteReader;
use crate::scalar::Real;

/// Architecture and optimization settings of the motion VAE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VaeConfig {
    pub window: usize,
    pub input_dim: usize,
    pub latent_dim: usize,
    pub encoder_hidden: usize,
    pub decoder_hidden: usize,
    pub mlp_hidden: [usize; 2],
    pub kl_weight: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub rng_seed: u64,
}

impl Default for VaeConfig {
    fn default() -> Self {
        Self {
            window: 90,
            input_dim: 144,
            latent_dim: 32,
            encoder_hidden: 64,
            decoder_hidden: 64,
            mlp_hidden: [64, 64],
            kl_weight: 1e-3,
            learning_rate: 1e-3,
            epochs: 200,
            batch_size: 16,
            rng_seed: 0,
        }
    }
}

impl VaeConfig {
    /// Full-size architecture: 512-dim latent and recurrent state, (1024, 512) perceptrons.
    pub fn paper_scale() -> Self {
        Self { latent_dim: 512, encoder_hidden: 512, decoder_hidden: 512, mlp_hidden: [1024, 512], ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("input_dim", self.input_dim),
            ("latent_dim", self.latent_dim),
            ("encoder_hidden", self.encoder_hidden),
            ("decoder_hidden", self.decoder_hidden),
            ("mlp_hidden", self.mlp_hidden[0].min(self.mlp_hidden[1])),
            ("batch_size", self.batch_size),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(Error::invalid(name, "must be at least 1"));
            }
        }
        if self.window < 2 {
            return Err(Error::invalid("window", format!("must be at least 2, got {}", self.window)));
        }
        if !(self.kl_weight >= 0.0 && self.kl_weight.is_finite()) {
            return Err(Error::invalid("kl_weight", format!("must be finite and >= 0, got {}", self.kl_weight)));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate", format!("must be finite and >= 0, got {}", self.learning_rate)));
        }
        Ok(())
    }
}

/// Where every tensor of a model lives in the flat parameter vector.
#[derive(Debug, Clone)]
pub struct VaeLayout {
    pub enc_fwd: Gru,
    pub enc_bwd: Gru,
    pub enc_mlp1: Dense,
    pub enc_mlp2: Dense,
    pub enc_mu: Dense,
    pub enc_log_sigma: Dense,
    pub dec_init_pose: Span,
    pub dec_gru: Gru,
    pub dec_mlp1: Dense,
    pub dec_mlp2: Dense,
    pub dec_out: Dense,
    pub tensors: Vec<TensorInfo>,
    pub total: usize,
}

impl VaeLayout {
    pub fn new(c: &VaeConfig) -> Self {
        let mut b = LayoutBuilder::default();
        let (d, he, hd, sz) = (c.input_dim, c.encoder_hidden, c.decoder_hidden, c.latent_dim);
        let [m1, m2] = c.mlp_hidden;
        let enc_fwd = b.gru("encoder.gru_forward", d, he);
        let enc_bwd = b.gru("encoder.gru_backward", d, he);
        let enc_mlp1 = b.dense("encoder.mlp1", 2 * he, m1);
        let enc_mlp2 = b.dense("encoder.mlp2", m1, m2);
        let enc_mu = b.dense("encoder.mu", m2, sz);
        let enc_log_sigma = b.dense("encoder.log_sigma", m2, sz);
        let dec_init_pose = b.tensor("decoder.init_pose", &[d]);
        let dec_gru = b.gru("decoder.gru", d + sz, hd);
        let dec_mlp1 = b.dense("decoder.mlp1", hd, m1);
        let dec_mlp2 = b.dense("decoder.mlp2", m1, m2);
        let dec_out = b.dense("decoder.out", m2, d);
        let total = b.total();
        Self {
            enc_fwd,
            enc_bwd,
            enc_mlp1,
            enc_mlp2,
            enc_mu,
            enc_log_sigma,
            dec_init_pose,
            dec_gru,
            dec_mlp1,
            dec_mlp2,
            dec_out,
            tensors: b.tensors,
            total,
        }
    }

    /// `tensor[index]` name for a flat parameter position.
    pub fn describe(&self, flat: usize) -> String {
        for t in &self.tensors {
            if flat >= t.span.offset && flat < t.span.offset + t.span.len {
                return format!("{}[{}]", t.name, flat - t.span.offset);
            }
        }
        format!("<out of range {flat}>")
    }
}

/// Gaussian posterior parameters for one window; `z` holds a sample once drawn.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentCode<T> {
    pub mu: Vec<T>,
    pub log_sigma: Vec<T>,
    pub z: Option<Vec<T>>,
}

impl<T: Real> LatentCode<T> {
    pub fn new(mu: Vec<T>, log_sigma: Vec<T>) -> Result<Self> {
        if mu.len() != log_sigma.len() {
            return Err(Error::shape("latent code", mu.len(), log_sigma.len()));
        }
        Ok(Self { mu, log_sigma, z: None })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn is_finite(&self) -> bool {
        self.mu.iter().chain(&self.log_sigma).all(|v| v.is_finite())
    }
}

/// Value a `6`-float block takes for the identity rotation.
pub(crate) fn identity_sixd<T: Real>(i: usize) -> T {
    if i.is_multiple_of(6) || i % 6 == 4 {
        T::one()
    } else {
        T::zero()
    }
}

/// Encoder, decoder and step counter sharing one flat parameter vector.
#[derive(Debug, Clone)]
pub struct VaeModel<T> {
    pub config: VaeConfig,
    layout: VaeLayout,
    pub params: Vec<T>,
    pub step: u64,
}

impl<T: Real> VaeModel<T> {
    /// All weights zero. The output bias and the initial pose token hold the
    /// identity 6-DoF pose when `input_dim` is a multiple of 6, so the decoder
    /// of a zero model rolls out a valid constant pose.
    pub fn zeros(config: VaeConfig) -> Result<Self> {
        config.validate()?;
        let layout = VaeLayout::new(&config);
        let mut params = vec![T::zero(); layout.total];
        if config.input_dim.is_multiple_of(6) {
            for span in [layout.dec_out.b, layout.dec_init_pose] {
                for (i, p) in span.of_mut(&mut params).iter_mut().enumerate() {
                    *p = identity_sixd(i);
                }
            }
        }
        Ok(Self { config, layout, params, step: 0 })
    }

    /// Uniform `(-k, k)` initialization with `k = 1/sqrt(fan_in)` (recurrent
    /// cells use `1/sqrt(hidden)`), drawn from `config.rng_seed`.
    pub fn new(config: VaeConfig) -> Result<Self> {
        let mut m = Self::zeros(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(m.config.rng_seed);
        let l = m.layout.clone();
        let mut fill = |span: Span, k: f64, params: &mut [T]| {
            for p in span.of_mut(params) {
                *p = T::lit(rng.random_range(-k..k));
            }
        };
        for g in [l.enc_fwd, l.enc_bwd, l.dec_gru] {
            let k = 1.0 / (g.hidden as f64).sqrt();
            for s in [g.w_ih, g.w_hh, g.b_ih, g.b_hh] {
                fill(s, k, &mut m.params);
            }
        }
        for d in [l.enc_mlp1, l.enc_mlp2, l.enc_mu, l.enc_log_sigma, l.dec_mlp1, l.dec_mlp2, l.dec_out] {
            let k = 1.0 / (d.inp as f64).sqrt();
            fill(d.w, k, &mut m.params);
            if d != l.dec_out {
                fill(d.b, k, &mut m.params);
            }
        }
        Ok(m)
    }

    pub fn from_params(config: VaeConfig, params: Vec<T>, step: u64) -> Result<Self> {
        config.validate()?;
        let layout = VaeLayout::new(&config);
        if params.len() != layout.total {
            return Err(Error::shape("model parameters", layout.total, params.len()));
        }
        Ok(Self { config, layout, params, step })
    }

    pub fn layout(&self) -> &VaeLayout {
        &self.layout
    }

    pub fn parameter_count(&self) -> usize {
        self.layout.total
    }

    pub fn tensor(&self, name: &str) -> Option<&[T]> {
        self.layout.tensors.iter().find(|t| t.name == name).map(|t| t.span.of(&self.params))
    }

    pub fn tensor_mut(&mut self, name: &str) -> Option<&mut [T]> {
        let span = self.layout.tensors.iter().find(|t| t.name == name)?.span;
        Some(span.of_mut(&mut self.params))
    }

    pub fn cast<U: Real>(&self) -> VaeModel<U> {
        VaeModel {
            config: self.config.clone(),
            layout: self.layout.clone(),
            params: self.params.iter().map(|p| U::lit(p.to_f64_lossy())).collect(),
            step: self.step,
        }
    }
}

const MODEL_MAGIC: [u8; 4] = *b"MVKM";
const MODEL_VERSION: u16 = 1;

// Layout, all little-endian:
//   magic "MVKM" | u16 version | u32 manifest length | manifest (TOML of VaeConfig)
//   u64 step | u32 tensor count
//   per tensor: u16 name length | name | u8 rank | u64 dims[rank] | f64 data
impl<T: Real> VaeModel<T> {
    pub fn to_bytes(&self) -> Vec<u8> {
        let manifest = toml::to_string(&self.config).expect("config serializes");
        let mut out = Vec::with_capacity(64 + manifest.len() + self.params.len() * 8);
        out.extend_from_slice(&MODEL_MAGIC);
        out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
        out.extend_from_slice(&(manifest.len() as u32).to_le_bytes());
        out.extend_from_slice(manifest.as_bytes());
        out.extend_from_slice(&self.step.to_le_bytes());
        out.extend_from_slice(&(self.layout.tensors.len() as u32).to_le_bytes());
        for t in &self.layout.tensors {
            out.extend_from_slice(&(t.name.len() as u16).to_le_bytes());
            out.extend_from_slice(t.name.as_bytes());
            out.push(t.shape.len() as u8);
            for d in &t.shape {
                out.extend_from_slice(&(*d as u64).to_le_bytes());
            }
            for v in t.span.of(&self.params) {
                out.extend_from_slice(&v.to_f64_lossy().to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        let magic: [u8; 4] = r.array()?;
        if magic != MODEL_MAGIC {
            return Err(Error::BadMagic { expected: MODEL_MAGIC, found: magic });
        }
        let version = u16::from_le_bytes(r.array()?);
        if version != MODEL_VERSION {
            return Err(Error::UnsupportedVersion { found: version.into(), supported: MODEL_VERSION.into() });
        }
        let mlen = u32::from_le_bytes(r.array()?) as usize;
        let manifest = std::str::from_utf8(r.take(mlen)?).map_err(|e| Error::HeaderMismatch(format!("manifest is not UTF-8: {e}")))?;
        let config: VaeConfig = toml::from_str(manifest).map_err(|e| Error::HeaderMismatch(format!("manifest: {e}")))?;
        let step = u64::from_le_bytes(r.array()?);
        let count = u32::from_le_bytes(r.array()?) as usize;
        let mut model = Self::zeros(config).map_err(|e| Error::HeaderMismatch(format!("manifest: {e}")))?;
        if count != model.layout.tensors.len() {
            return Err(Error::HeaderMismatch(format!("expected {} tensors, found {count}", model.layout.tensors.len())));
        }
        for t in model.layout.tensors.clone() {
            let nlen = u16::from_le_bytes(r.array()?) as usize;
            let name = String::from_utf8_lossy(r.take(nlen)?).into_owned();
            if name != t.name {
                return Err(Error::HeaderMismatch(format!("expected tensor `{}`, found `{name}`", t.name)));
            }
            let rank = r.take(1)?[0] as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(u64::from_le_bytes(r.array()?) as usize);
            }
            if shape != t.shape {
                return Err(Error::HeaderMismatch(format!("tensor `{name}`: expected shape {:?}, found {shape:?}", t.shape)));
            }
            for p in t.span.of_mut(&mut model.params) {
                *p = T::lit(f64::from_le_bytes(r.array()?));
            }
        }
        if r.pos != bytes.len() {
            return Err(Error::HeaderMismatch(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        model.step = step;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::File::create(path).and_then(|mut f| f.write_all(&self.to_bytes())).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut bytes = Vec::new();
        std::fs::File::open(path).and_then(|mut f| f.read_to_end(&mut bytes)).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
