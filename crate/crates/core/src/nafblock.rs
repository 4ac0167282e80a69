//! NAFBlock: an inverted-bottleneck branch (expand, depthwise, SimpleGate,
//! channel attention, project) and a gated feed-forward branch, each added
//! back through a zero-initialized per-channel scale.

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{ConvParams, LayerNormParams};
use crate::params::{Bound, ParamStore};
use crate::tensor::{Real, Tape, Tensor4};
use crate::tlsc::PoolingPolicy;

/// How stochastic depth treats one droppable unit in a forward pass.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DropDecision {
    /// Residual branches skipped entirely.
    Dropped,
    /// Training-time survivor; branches are scaled by `1 / (1 - p)`.
    Kept { p: f64 },
    /// Inference; branches unscaled.
    Inference,
}

impl DropDecision {
    pub fn scale(&self) -> f64 {
        match *self {
            DropDecision::Dropped => 0.0,
            DropDecision::Kept { p } => 1.0 / (1.0 - p),
            DropDecision::Inference => 1.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct NafBlockParams<T: Real> {
    pub ln1: LayerNormParams<T>,
    pub ln2: LayerNormParams<T>,
    pub conv_expand: ConvParams<T>,
    pub conv_dw: ConvParams<T>,
    pub sca: ConvParams<T>,
    pub conv_proj: ConvParams<T>,
    pub ffn_expand: ConvParams<T>,
    pub ffn_proj: ConvParams<T>,
    pub beta: Tensor4<T>,
    pub gamma_ffn: Tensor4<T>,
}

impl<T: Real> NafBlockParams<T> {
    /// Register a freshly initialized block under `prefix`.
    pub fn init(store: &mut ParamStore<T>, prefix: &str, c: usize, rng: &mut impl Rng) -> Result<()> {
        store.init_layernorm(&format!("{prefix}.ln1"), c)?;
        store.init_conv(&format!("{prefix}.conv_expand"), c, 2 * c, 1, 1, rng)?;
        store.init_conv(&format!("{prefix}.conv_dw"), 2 * c, 2 * c, 3, 2 * c, rng)?;
        store.init_conv(&format!("{prefix}.sca"), c, c, 1, 1, rng)?;
        store.init_conv(&format!("{prefix}.conv_proj"), c, c, 1, 1, rng)?;
        store.init_zero_scale(&format!("{prefix}.beta"), c)?;
        store.init_layernorm(&format!("{prefix}.ln2"), c)?;
        store.init_conv(&format!("{prefix}.ffn_expand"), c, 2 * c, 1, 1, rng)?;
        store.init_conv(&format!("{prefix}.ffn_proj"), c, c, 1, 1, rng)?;
        store.init_zero_scale(&format!("{prefix}.gamma_ffn"), c)
    }

    pub fn bind(bound: &Bound<T>, prefix: &str) -> Result<Self> {
        let c = bound.get(&format!("{prefix}.beta"))?.shape().c;
        Ok(NafBlockParams {
            ln1: bound.layernorm(&format!("{prefix}.ln1"))?,
            ln2: bound.layernorm(&format!("{prefix}.ln2"))?,
            conv_expand: bound.conv(&format!("{prefix}.conv_expand"), 1)?,
            conv_dw: bound.conv(&format!("{prefix}.conv_dw"), 2 * c)?,
            sca: bound.conv(&format!("{prefix}.sca"), 1)?,
            conv_proj: bound.conv(&format!("{prefix}.conv_proj"), 1)?,
            ffn_expand: bound.conv(&format!("{prefix}.ffn_expand"), 1)?,
            ffn_proj: bound.conv(&format!("{prefix}.ffn_proj"), 1)?,
            beta: bound.get(&format!("{prefix}.beta"))?.clone(),
            gamma_ffn: bound.get(&format!("{prefix}.gamma_ffn"))?.clone(),
        })
    }

    pub fn width(&self) -> usize {
        self.beta.shape().c
    }
}

/// Trainable scalars in one block of width `c`.
pub fn nafblock_param_count(c: usize) -> usize {
    let ln = 2 * c;
    let conv1x1 = |cin: usize, cout: usize| cin * cout + cout;
    2 * ln
        + conv1x1(c, 2 * c)
        + (2 * c * 9 + 2 * c)
        + conv1x1(c, c)
        + conv1x1(c, c)
        + conv1x1(c, 2 * c)
        + conv1x1(c, c)
        + 2 * c
}

impl<T: Real> Tape<T> {
    /// `x + s * beta * MBConv(LN1(x))`, then the same with the FFN branch.
    pub fn nafblock_forward(
        &self,
        x: &Tensor4<T>,
        p: &NafBlockParams<T>,
        drop: DropDecision,
        policy: &PoolingPolicy,
    ) -> Result<Tensor4<T>> {
        if x.shape().c != p.width() {
            return Err(Error::invalid(
                "nafblock_forward",
                format!("input width {} for a block of width {}", x.shape().c, p.width()),
            ));
        }
        if drop == DropDecision::Dropped {
            return Ok(x.clone());
        }
        let scale = drop.scale();

        let h = self.layernorm2d(x, &p.ln1)?;
        let h = self.conv2d(&h, &p.conv_expand)?;
        let h = self.conv2d(&h, &p.conv_dw)?;
        let h = self.simple_gate(&h)?;
        let h = self.simplified_channel_attention(&h, &p.sca, policy)?;
        let h = self.conv2d(&h, &p.conv_proj)?;
        let y = self.add(x, &self.scaled_residual(&h, &p.beta, scale)?)?;

        let h = self.layernorm2d(&y, &p.ln2)?;
        let h = self.conv2d(&h, &p.ffn_expand)?;
        let h = self.simple_gate(&h)?;
        let h = self.conv2d(&h, &p.ffn_proj)?;
        self.add(&y, &self.scaled_residual(&h, &p.gamma_ffn, scale)?)
    }

    /// `scale * (channel_scale ⊙ branch)`, skipping the multiply at scale 1.
    pub(crate) fn scaled_residual(
        &self,
        branch: &Tensor4<T>,
        channel_scale: &Tensor4<T>,
        scale: f64,
    ) -> Result<Tensor4<T>> {
        let r = self.mul(branch, channel_scale)?;
        if scale == 1.0 {
            Ok(r)
        } else {
            self.scale(&r, T::from_f64(scale))
        }
    }
}
