use super::StereoSample;
use crate::error::Result;

/// Patches per axis: `floor((len - patch) / stride) + 1`, or 0 if too small.
pub fn patch_count(len: usize, patch: usize, stride: usize) -> usize {
    if len < patch || stride == 0 {
        0
    } else {
        (len - patch) / stride + 1
    }
}

/// Aligned LR patches of `patch` (at LR scale) on a `stride` grid, with the
/// matching HR crops. Both views share crop coordinates. Images smaller than
/// the patch yield an empty list.
pub fn extract_patches(sample: &StereoSample, patch: (usize, usize), stride: usize) -> Result<Vec<StereoSample>> {
    let s = sample.lr_l.shape();
    let (ph, pw) = patch;
    let k = sample.scale;
    let ny = patch_count(s.h, ph, stride);
    let nx = patch_count(s.w, pw, stride);
    let mut out = Vec::with_capacity(ny * nx);
    for iy in 0..ny {
        for ix in 0..nx {
            let (y0, x0) = (iy * stride, ix * stride);
            out.push(StereoSample::new(
                sample.lr_l.crop(y0, x0, ph, pw)?,
                sample.lr_r.crop(y0, x0, ph, pw)?,
                sample.hr_l.crop(k * y0, k * x0, k * ph, k * pw)?,
                sample.hr_r.crop(k * y0, k * x0, k * ph, k * pw)?,
                k,
            )?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::bicubic_downsample;
    use crate::rng::stream;
    use crate::tensor::{Array4, Shape};
    use rand::Rng;

    fn sample(h: usize, w: usize, s: usize, seed: u64) -> StereoSample {
        let mut rng = stream(seed, "patch", 0);
        let mut smooth = |shape: Shape| {
            let (a, b) = (rng.gen_range(0.05..0.2), rng.gen_range(0.05..0.2));
            Array4::from_fn(shape, |_, c, y, x| 0.5 + 0.4 * ((a * y as f64 + b * x as f64 + c as f64).sin()) as f32)
        };
        let hr_l = smooth(Shape::new(1, 3, h * s, w * s));
        let hr_r = smooth(Shape::new(1, 3, h * s, w * s));
        let lr_l = bicubic_downsample(&hr_l, s).unwrap();
        let lr_r = bicubic_downsample(&hr_r, s).unwrap();
        StereoSample::new(lr_l, lr_r, hr_l, hr_r, s).unwrap()
    }

    #[test]
    fn counts() {
        assert_eq!(extract_patches(&sample(30, 90, 2, 0), (30, 90), 20).unwrap().len(), 1);
        assert_eq!(extract_patches(&sample(50, 110, 2, 0), (30, 90), 20).unwrap().len(), 4);
        assert!(extract_patches(&sample(20, 90, 2, 0), (30, 90), 20).unwrap().is_empty());
        assert_eq!(patch_count(50, 30, 20), 2);
        assert_eq!(patch_count(49, 30, 20), 1);
    }

    #[test]
    fn hr_patch_is_aligned_with_lr_patch() {
        let full = sample(50, 110, 4, 1);
        let patches = extract_patches(&full, (30, 90), 20).unwrap();
        let p = &patches[3];
        assert_eq!(p.hr_l.shape(), Shape::new(1, 3, 120, 360));
        assert_eq!(p.lr_l, full.lr_l.crop(20, 20, 30, 90).unwrap());
        assert_eq!(p.hr_r, full.hr_r.crop(80, 80, 120, 360).unwrap());
        // Away from the crop border, downsampling the HR patch reproduces
        // the LR patch.
        let down = bicubic_downsample(&p.hr_l, 4).unwrap();
        let inner = |a: &Array4<f32>| a.crop(3, 3, 24, 84).unwrap();
        assert!(inner(&down).max_abs_diff(&inner(&p.lr_l)) < 1e-5);
    }
}
