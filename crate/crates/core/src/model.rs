//! The full network: shared intro conv, a trunk of NAFBlocks with SCAMs at
//! configured attachment points, a pixel-shuffle head, and a global
//! bilinear residual.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::nafblock::{nafblock_param_count, DropDecision, NafBlockParams};
use crate::nn::ConvParams;
use crate::params::{Bound, ParamStore};
use crate::rng::stream;
use crate::scam::{scam_param_count, ScamParams};
use crate::tensor::{Array4, Real, Tape, Tensor4};
use crate::tlsc::PoolingPolicy;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    T,
    S,
    B,
    L,
}

impl Variant {
    /// `(width, blocks)`.
    pub fn dims(self) -> (usize, usize) {
        match self {
            Variant::T => (48, 16),
            Variant::S => (64, 32),
            Variant::B => (96, 64),
            Variant::L => (128, 128),
        }
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "T" => Ok(Variant::T),
            "S" => Ok(Variant::S),
            "B" => Ok(Variant::B),
            "L" => Ok(Variant::L),
            _ => Err(Error::Config(format!("unknown variant {s:?} (expected T, S, B or L)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub width: usize,
    pub n_blocks: usize,
    pub scale: usize,
    pub scam_count: usize,
    pub drop_prob: f64,
    /// Window used for channel-attention pooling at inference, if any.
    pub tlsc: Option<(usize, usize)>,
}

impl ModelConfig {
    pub fn new(width: usize, n_blocks: usize, scale: usize) -> Self {
        ModelConfig {
            width,
            n_blocks,
            scale,
            scam_count: n_blocks,
            drop_prob: 0.0,
            tlsc: None,
        }
    }

    pub fn variant(v: Variant, scale: usize) -> Self {
        let (c, n) = v.dims();
        ModelConfig::new(c, n, scale)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 {
            return Err(Error::Config("width must be positive".into()));
        }
        if !matches!(self.scale, 2 | 4) {
            return Err(Error::Config(format!("scale must be 2 or 4, got {}", self.scale)));
        }
        if self.scam_count > self.n_blocks {
            return Err(Error::Config(format!(
                "scam_count {} exceeds block count {}",
                self.scam_count, self.n_blocks
            )));
        }
        if !(0.0..1.0).contains(&self.drop_prob) {
            return Err(Error::Config(format!("drop probability {} outside [0, 1)", self.drop_prob)));
        }
        if let Some((kh, kw)) = self.tlsc {
            if kh == 0 || kw == 0 {
                return Err(Error::Config("TLSC window must be positive".into()));
            }
        }
        Ok(())
    }

    /// Blocks followed by a SCAM. `k` SCAMs sit at the centres of `k` equal
    /// slices of the trunk, so a single SCAM lands mid-trunk and `k = n`
    /// attaches one to every block.
    pub fn scam_positions(&self) -> Vec<usize> {
        let (n, k) = (self.n_blocks, self.scam_count);
        (0..k).map(|j| (2 * j + 1) * n / (2 * k)).collect()
    }

    pub fn pooling_policy(&self) -> PoolingPolicy {
        match self.tlsc {
            Some((kh, kw)) => PoolingPolicy::Local { kh, kw },
            None => PoolingPolicy::Global,
        }
    }

    /// Closed-form parameter count, matching [`build_model`].
    pub fn param_count(&self) -> usize {
        let (c, s2) = (self.width, self.scale * self.scale);
        let intro = 3 * c * 9 + c;
        let head = c * 3 * s2 * 9 + 3 * s2;
        intro + self.n_blocks * nafblock_param_count(c) + self.scam_count * scam_param_count(c) + head
    }
}

impl fmt::Display for ModelConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "c={} blocks={} scale=x{} scams={} drop={}",
            self.width, self.n_blocks, self.scale, self.scam_count, self.drop_prob
        )?;
        if let Some((kh, kw)) = self.tlsc {
            write!(f, " tlsc={kh}x{kw}")?;
        }
        Ok(())
    }
}

/// Freshly initialized parameters for `cfg`, deterministic in `seed`.
pub fn build_model<T: Real>(cfg: &ModelConfig, seed: u64) -> Result<ParamStore<T>> {
    cfg.validate()?;
    let c = cfg.width;
    let mut rng = stream(seed, "init", 0);
    let mut store = ParamStore::new();
    store.init_conv("intro", 3, c, 3, 1, &mut rng)?;
    let scams = cfg.scam_positions();
    for i in 0..cfg.n_blocks {
        NafBlockParams::init(&mut store, &format!("blocks.{i}"), c, &mut rng)?;
        if scams.contains(&i) {
            ScamParams::init(&mut store, &format!("scams.{i}"), c, &mut rng)?;
        }
    }
    store.init_conv("head", c, 3 * cfg.scale * cfg.scale, 3, 1, &mut rng)?;
    Ok(store)
}

pub fn count_params<T: Real>(store: &ParamStore<T>) -> usize {
    store.count()
}

/// One stochastic-depth decision per block (and its SCAM, if any).
#[derive(Clone, Debug, PartialEq)]
pub struct DropPlan(pub Vec<DropDecision>);

impl DropPlan {
    pub fn inference(n_blocks: usize) -> Self {
        DropPlan(vec![DropDecision::Inference; n_blocks])
    }

    pub fn sample(n_blocks: usize, p: f64, rng: &mut impl Rng) -> Self {
        DropPlan(
            (0..n_blocks)
                .map(|_| {
                    if p > 0.0 && rng.gen::<f64>() < p {
                        DropDecision::Dropped
                    } else {
                        DropDecision::Kept { p }
                    }
                })
                .collect(),
        )
    }
}

pub struct Model<T: Real> {
    cfg: ModelConfig,
    intro: ConvParams<T>,
    blocks: Vec<NafBlockParams<T>>,
    scams: Vec<Option<ScamParams<T>>>,
    head: ConvParams<T>,
    params: Vec<(String, Tensor4<T>)>,
}

impl<T: Real> Model<T> {
    /// Register `store` on `tape` and assemble the network.
    pub fn bind(cfg: &ModelConfig, store: &ParamStore<T>, tape: &Tape<T>, requires_grad: bool) -> Result<Self> {
        Self::from_bound(cfg, &store.bind(tape, requires_grad))
    }

    /// Assemble the network from parameters already on a tape.
    pub fn from_bound(cfg: &ModelConfig, bound: &Bound<T>) -> Result<Self> {
        cfg.validate()?;
        let positions = cfg.scam_positions();
        let mut blocks = Vec::with_capacity(cfg.n_blocks);
        let mut scams = Vec::with_capacity(cfg.n_blocks);
        for i in 0..cfg.n_blocks {
            blocks.push(NafBlockParams::bind(bound, &format!("blocks.{i}"))?);
            scams.push(if positions.contains(&i) {
                Some(ScamParams::bind(bound, &format!("scams.{i}"))?)
            } else {
                None
            });
        }
        let model = Model {
            cfg: cfg.clone(),
            intro: bound.conv("intro", 1)?,
            blocks,
            scams,
            head: bound.conv("head", 1)?,
            params: bound.iter().map(|(k, t)| (k.to_string(), t.clone())).collect(),
        };
        if model.intro.out_channels() != cfg.width || model.head.out_channels() != 3 * cfg.scale * cfg.scale {
            return Err(Error::Config(format!("parameters do not match config {cfg}")));
        }
        Ok(model)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    /// Tape leaves for every parameter, in store order.
    pub fn parameters(&self) -> impl Iterator<Item = (&str, &Tensor4<T>)> {
        self.params.iter().map(|(k, t)| (k.as_str(), t))
    }

    /// Super-resolve a stereo pair. Both views run through the shared trunk
    /// together, stacked on the batch axis.
    pub fn forward(
        &self,
        tape: &Tape<T>,
        lr_l: &Tensor4<T>,
        lr_r: &Tensor4<T>,
        drops: &DropPlan,
        policy: &PoolingPolicy,
    ) -> Result<(Tensor4<T>, Tensor4<T>)> {
        let (sl, sr) = (lr_l.shape(), lr_r.shape());
        if sl != sr {
            return Err(Error::ShapeMismatch {
                op: "model_forward",
                lhs: sl,
                rhs: sr,
            });
        }
        if sl.c != 3 {
            return Err(Error::invalid("model_forward", format!("expected RGB input, got {sl}")));
        }
        if drops.0.len() != self.blocks.len() {
            return Err(Error::invalid(
                "model_forward",
                format!("{} drop decisions for {} blocks", drops.0.len(), self.blocks.len()),
            ));
        }
        let n = sl.n;
        let pair = tape.concat_batch(&[lr_l, lr_r])?;
        let mut x = tape.conv2d(&pair, &self.intro)?;
        for ((block, scam), &drop) in self.blocks.iter().zip(&self.scams).zip(&drops.0) {
            if drop == DropDecision::Dropped {
                continue;
            }
            x = tape.nafblock_forward(&x, block, drop, policy)?;
            if let Some(scam) = scam {
                let l = tape.slice_batch(&x, 0, n)?;
                let r = tape.slice_batch(&x, n, n)?;
                let (l, r) = tape.scam_forward(&l, &r, scam, drop.scale())?;
                x = tape.concat_batch(&[&l, &r])?;
            }
        }
        let residual = tape.pixel_shuffle(&tape.conv2d(&x, &self.head)?, self.cfg.scale)?;
        let up = tape.bilinear_resize(&pair, self.cfg.scale)?;
        let sr = tape.add(&up, &residual)?;
        Ok((tape.slice_batch(&sr, 0, n)?, tape.slice_batch(&sr, n, n)?))
    }
}

/// Inference on plain arrays: no gradients, no stochastic depth.
pub fn infer<T: Real>(
    cfg: &ModelConfig,
    store: &ParamStore<T>,
    lr_l: &Array4<T>,
    lr_r: &Array4<T>,
    policy: &PoolingPolicy,
) -> Result<(Array4<T>, Array4<T>)> {
    let tape = Tape::new();
    let model = Model::bind(cfg, store, &tape, false)?;
    let (l, r) = model.forward(
        &tape,
        &Tensor4::constant(lr_l.clone()),
        &Tensor4::constant(lr_r.clone()),
        &DropPlan::inference(cfg.n_blocks),
        policy,
    )?;
    Ok((l.into_array(), r.into_array()))
}
