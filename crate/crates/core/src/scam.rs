//! Stereo cross-attention. Each image row of the left view attends over the
//! same row of the right view and vice versa, through one shared
//! correlation matrix per row.

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{ConvParams, LayerNormParams};
use crate::params::{Bound, ParamStore};
use crate::tensor::{Real, Tape, Tensor4};

#[derive(Clone, Debug)]
pub struct ScamParams<T: Real> {
    pub ln_l: LayerNormParams<T>,
    pub ln_r: LayerNormParams<T>,
    pub w1_l: ConvParams<T>,
    pub w1_r: ConvParams<T>,
    pub w2_l: ConvParams<T>,
    pub w2_r: ConvParams<T>,
    pub gamma_l: Tensor4<T>,
    pub gamma_r: Tensor4<T>,
}

impl<T: Real> ScamParams<T> {
    pub fn init(store: &mut ParamStore<T>, prefix: &str, c: usize, rng: &mut impl Rng) -> Result<()> {
        store.init_layernorm(&format!("{prefix}.ln_l"), c)?;
        store.init_layernorm(&format!("{prefix}.ln_r"), c)?;
        for proj in ["w1_l", "w1_r", "w2_l", "w2_r"] {
            store.init_conv(&format!("{prefix}.{proj}"), c, c, 1, 1, rng)?;
        }
        store.init_zero_scale(&format!("{prefix}.gamma_l"), c)?;
        store.init_zero_scale(&format!("{prefix}.gamma_r"), c)
    }

    pub fn bind(bound: &Bound<T>, prefix: &str) -> Result<Self> {
        Ok(ScamParams {
            ln_l: bound.layernorm(&format!("{prefix}.ln_l"))?,
            ln_r: bound.layernorm(&format!("{prefix}.ln_r"))?,
            w1_l: bound.conv(&format!("{prefix}.w1_l"), 1)?,
            w1_r: bound.conv(&format!("{prefix}.w1_r"), 1)?,
            w2_l: bound.conv(&format!("{prefix}.w2_l"), 1)?,
            w2_r: bound.conv(&format!("{prefix}.w2_r"), 1)?,
            gamma_l: bound.get(&format!("{prefix}.gamma_l"))?.clone(),
            gamma_r: bound.get(&format!("{prefix}.gamma_r"))?.clone(),
        })
    }
}

pub fn scam_param_count(c: usize) -> usize {
    2 * 2 * c + 4 * (c * c + c) + 2 * c
}

/// NCHW -> (n, h, w, c): each image row becomes a `w x c` matrix.
const ROWS: [usize; 4] = [0, 2, 3, 1];
/// (n, h, w, c) -> NCHW.
const UNROWS: [usize; 4] = [0, 3, 1, 2];

impl<T: Real> Tape<T> {
    /// Fused views `(x_l + gamma_l ⊙ F_{R→L}, x_r + gamma_r ⊙ F_{L→R})`.
    /// `scale` multiplies both fusion terms (stochastic depth).
    pub fn scam_forward(
        &self,
        x_l: &Tensor4<T>,
        x_r: &Tensor4<T>,
        p: &ScamParams<T>,
        scale: f64,
    ) -> Result<(Tensor4<T>, Tensor4<T>)> {
        if x_l.shape() != x_r.shape() {
            return Err(Error::ShapeMismatch {
                op: "scam_forward",
                lhs: x_l.shape(),
                rhs: x_r.shape(),
            });
        }
        let c = x_l.shape().c;
        let q = self.conv2d(&self.layernorm2d(x_l, &p.ln_l)?, &p.w1_l)?;
        let k = self.conv2d(&self.layernorm2d(x_r, &p.ln_r)?, &p.w1_r)?;
        let v_l = self.permute(&self.conv2d(x_l, &p.w2_l)?, ROWS)?;
        let v_r = self.permute(&self.conv2d(x_r, &p.w2_r)?, ROWS)?;

        // attention[n, h, i, j]: left column i against right column j.
        let q = self.permute(&q, ROWS)?;
        let k_t = self.permute(&k, [0, 2, 1, 3])?;
        let attention = self.scale(
            &self.batched_row_matmul(&q, &k_t)?,
            T::from_f64(1.0 / (c as f64).sqrt()),
        )?;

        let r2l = self.batched_row_matmul(&self.softmax_lastdim(&attention)?, &v_r)?;
        let attention_t = self.permute(&attention, [0, 1, 3, 2])?;
        let l2r = self.batched_row_matmul(&self.softmax_lastdim(&attention_t)?, &v_l)?;

        let r2l = self.permute(&r2l, UNROWS)?;
        let l2r = self.permute(&l2r, UNROWS)?;
        let f_l = self.add(x_l, &self.scaled_residual(&r2l, &p.gamma_l, scale)?)?;
        let f_r = self.add(x_r, &self.scaled_residual(&l2r, &p.gamma_r, scale)?)?;
        Ok((f_l, f_r))
    }
}
