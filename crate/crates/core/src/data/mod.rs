//! Stereo data: PNG I/O, bicubic degradation, patches, augmentation,
//! manifests and the synthetic scene generator.

mod augment;
mod bicubic;
mod image;
mod manifest;
mod patches;
mod synth;

pub use augment::{AugmentDraw, AugmentationConfig, CHANNEL_PERMUTATIONS};
pub use bicubic::{bicubic_downsample, cubic};
pub use image::{decode_png, encode_png, load_png, quantize, save_png};
pub use manifest::{Manifest, ManifestEntry};
pub use patches::{extract_patches, patch_count};
pub use synth::{render_scene, synth_stereo, Scene, SynthConfig};

use crate::error::{Error, Result};
use crate::tensor::Array4;

/// One stereo pair at both resolutions, values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct StereoSample {
    pub lr_l: Array4<f32>,
    pub lr_r: Array4<f32>,
    pub hr_l: Array4<f32>,
    pub hr_r: Array4<f32>,
    pub scale: usize,
}

impl StereoSample {
    pub fn new(lr_l: Array4<f32>, lr_r: Array4<f32>, hr_l: Array4<f32>, hr_r: Array4<f32>, scale: usize) -> Result<Self> {
        let sample = StereoSample {
            lr_l,
            lr_r,
            hr_l,
            hr_r,
            scale,
        };
        sample.check()?;
        Ok(sample)
    }

    pub fn check(&self) -> Result<()> {
        let (l, r, hl, hr) = (self.lr_l.shape(), self.lr_r.shape(), self.hr_l.shape(), self.hr_r.shape());
        if l != r || hl != hr {
            return Err(Error::ShapeMismatch {
                op: "StereoSample",
                lhs: l,
                rhs: r,
            });
        }
        if l.c != 3 || hl.n != l.n || hl.c != 3 || hl.h != l.h * self.scale || hl.w != l.w * self.scale {
            return Err(Error::ShapeMismatch {
                op: "StereoSample (scale)",
                lhs: l,
                rhs: hl,
            });
        }
        Ok(())
    }

    /// Stack samples with equal shapes along the batch axis.
    pub fn batch(samples: &[StereoSample]) -> Result<StereoSample> {
        let first = samples.first().ok_or_else(|| Error::invalid("StereoSample::batch", "empty batch"))?;
        let cat = |f: fn(&StereoSample) -> &Array4<f32>| {
            Array4::concat_batch(&samples.iter().map(f).collect::<Vec<_>>())
        };
        StereoSample::new(
            cat(|s| &s.lr_l)?,
            cat(|s| &s.lr_r)?,
            cat(|s| &s.hr_l)?,
            cat(|s| &s.hr_r)?,
            first.scale,
        )
    }
}
