use rand::Rng;

use super::StereoSample;
use crate::error::Result;
use crate::tensor::{Array4, Real};

/// All RGB orders; entry `i` lists, for each output channel, its source.
pub const CHANNEL_PERMUTATIONS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AugmentationConfig {
    pub hflip: bool,
    pub vflip: bool,
    pub channel_shuffle: bool,
}

impl AugmentationConfig {
    pub const ALL: AugmentationConfig = AugmentationConfig {
        hflip: true,
        vflip: true,
        channel_shuffle: true,
    };
    pub const NONE: AugmentationConfig = AugmentationConfig {
        hflip: false,
        vflip: false,
        channel_shuffle: false,
    };
}

/// One concrete transform, applied identically to all four images.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AugmentDraw {
    /// Mirror horizontally and swap the views.
    pub hflip: bool,
    pub vflip: bool,
    pub perm: [usize; 3],
}

impl AugmentDraw {
    pub const IDENTITY: AugmentDraw = AugmentDraw {
        hflip: false,
        vflip: false,
        perm: [0, 1, 2],
    };

    /// Each enabled augmentation fires with probability 1/2; a firing
    /// channel shuffle picks one of the six orders uniformly.
    pub fn sample(cfg: &AugmentationConfig, rng: &mut impl Rng) -> Self {
        let hflip = rng.gen_bool(0.5);
        let vflip = rng.gen_bool(0.5);
        let shuffle = rng.gen_bool(0.5);
        let perm = CHANNEL_PERMUTATIONS[rng.gen_range(0..6)];
        AugmentDraw {
            hflip: cfg.hflip && hflip,
            vflip: cfg.vflip && vflip,
            perm: if cfg.channel_shuffle && shuffle { perm } else { [0, 1, 2] },
        }
    }

    /// All 24 members of the test-time ensemble.
    pub fn all() -> Vec<AugmentDraw> {
        let mut out = Vec::with_capacity(24);
        for vflip in [false, true] {
            for hflip in [false, true] {
                for perm in CHANNEL_PERMUTATIONS {
                    out.push(AugmentDraw { hflip, vflip, perm });
                }
            }
        }
        out
    }

    pub fn inverse(&self) -> AugmentDraw {
        let mut perm = [0; 3];
        for (i, &p) in self.perm.iter().enumerate() {
            perm[p] = i;
        }
        AugmentDraw { perm, ..*self }
    }

    fn apply_one<T: Real>(&self, img: &Array4<T>) -> Result<Array4<T>> {
        let mut out = img.permute_channels(&self.perm)?;
        if self.vflip {
            out = out.flip_h();
        }
        if self.hflip {
            out = out.flip_w();
        }
        Ok(out)
    }

    /// Transform a view pair. A horizontal flip also swaps the views, which
    /// keeps disparities non-negative.
    pub fn apply_pair<T: Real>(&self, l: &Array4<T>, r: &Array4<T>) -> Result<(Array4<T>, Array4<T>)> {
        let (a, b) = (self.apply_one(l)?, self.apply_one(r)?);
        Ok(if self.hflip { (b, a) } else { (a, b) })
    }

    pub fn apply(&self, s: &StereoSample) -> Result<StereoSample> {
        let (lr_l, lr_r) = self.apply_pair(&s.lr_l, &s.lr_r)?;
        let (hr_l, hr_r) = self.apply_pair(&s.hr_l, &s.hr_r)?;
        Ok(StereoSample {
            lr_l,
            lr_r,
            hr_l,
            hr_r,
            scale: s.scale,
        })
    }
}
