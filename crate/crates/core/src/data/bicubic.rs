//! Antialiased bicubic downsampling (Keys kernel, a = -0.5).

use crate::error::{Error, Result};
use crate::tensor::{Array4, Real, Shape};

const A: f64 = -0.5;

pub fn cubic(x: f64) -> f64 {
    let x = x.abs();
    if x <= 1.0 {
        (A + 2.0) * x * x * x - (A + 3.0) * x * x + 1.0
    } else if x < 2.0 {
        A * x * x * x - 5.0 * A * x * x + 8.0 * A * x - 4.0 * A
    } else {
        0.0
    }
}

/// For every output index, `(source index, weight)` taps. Source indices are
/// clamped to the axis; weights sum to one.
fn taps(len: usize, s: usize) -> Vec<Vec<(usize, f64)>> {
    let sf = s as f64;
    let support = 2.0 * sf;
    (0..len / s)
        .map(|j| {
            let u = (j as f64 + 0.5) * sf - 0.5;
            let lo = (u - support).ceil() as i64;
            let hi = (u + support).floor() as i64;
            let mut row: Vec<(usize, f64)> = (lo..=hi)
                .filter(|&i| ((i as f64) - u).abs() < support)
                .map(|i| (i.clamp(0, len as i64 - 1) as usize, cubic((i as f64 - u) / sf)))
                .collect();
            let total: f64 = row.iter().map(|t| t.1).sum();
            row.iter_mut().for_each(|t| t.1 /= total);
            row
        })
        .collect()
}

pub fn bicubic_downsample<T: Real>(hr: &Array4<T>, s: usize) -> Result<Array4<T>> {
    let hs = hr.shape();
    if s == 0 || hs.h % s != 0 || hs.w % s != 0 {
        return Err(Error::invalid(
            "bicubic_downsample",
            format!("{}x{} not divisible by {s}", hs.h, hs.w),
        ));
    }
    let (oh, ow) = (hs.h / s, hs.w / s);
    let ty = taps(hs.h, s);
    let tx = taps(hs.w, s);
    let mut out = Array4::zeros(Shape::new(hs.n, hs.c, oh, ow));
    let mut rows = vec![0.0f64; hs.h * ow];
    for n in 0..hs.n {
        for c in 0..hs.c {
            let src = hr.plane(n, c);
            for y in 0..hs.h {
                let line = &src[y * hs.w..(y + 1) * hs.w];
                for (x, t) in tx.iter().enumerate() {
                    rows[y * ow + x] = t.iter().map(|&(i, wt)| line[i].to_f64() * wt).sum();
                }
            }
            let dst = out.plane_mut(n, c);
            for (y, t) in ty.iter().enumerate() {
                for x in 0..ow {
                    dst[y * ow + x] = T::from_f64(t.iter().map(|&(i, wt)| rows[i * ow + x] * wt).sum());
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use rand::Rng;

    #[test]
    fn constant_is_preserved() {
        let img = Array4::full(Shape::new(1, 3, 8, 12), 0.37f64);
        for s in [2, 4] {
            let lr = bicubic_downsample(&img, s).unwrap();
            assert!(lr.data().iter().all(|v| (v - 0.37).abs() < 1e-12));
        }
    }

    #[test]
    fn linear_ramp_reproduced_in_the_interior() {
        let img = Array4::from_fn(Shape::new(1, 1, 4, 32), |_, _, _, x| 0.01 * x as f64);
        let lr = bicubic_downsample(&img, 2).unwrap();
        // Output x samples the input at 2x + 0.5.
        for x in 2..14 {
            assert!((lr.get(0, 0, 1, x) - 0.01 * (2.0 * x as f64 + 0.5)).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_indivisible() {
        assert!(bicubic_downsample(&Array4::<f32>::zeros(Shape::new(1, 3, 9, 8)), 2).is_err());
        assert!(bicubic_downsample(&Array4::<f32>::zeros(Shape::new(1, 3, 8, 10)), 4).is_err());
    }

    /// Dense `(out x in)` resampling matrix built straight from the kernel,
    /// clamping each virtual tap position onto the border.
    fn dense(len: usize, s: usize) -> Vec<Vec<f64>> {
        let sf = s as f64;
        (0..len / s)
            .map(|j| {
                let centre = (j as f64 + 0.5) * sf - 0.5;
                let mut row = vec![0.0; len];
                for virt in -(4 * s as i64)..(len as i64 + 4 * s as i64) {
                    let d = (virt as f64 - centre) / sf;
                    if d.abs() < 2.0 {
                        row[virt.clamp(0, len as i64 - 1) as usize] += cubic(d);
                    }
                }
                let total: f64 = row.iter().sum();
                row.iter().map(|v| v / total).collect()
            })
            .collect()
    }

    #[test]
    fn matches_dense_matrix_oracle() {
        let mut rng = stream(3, "bicubic", 0);
        for s in [2, 4] {
            let (h, w) = (8, 8 + 4 * s);
            let img = Array4::from_fn(Shape::new(1, 2, h, w), |_, _, _, _| rng.gen_range(0.0..1.0));
            let lr = bicubic_downsample(&img, s).unwrap();
            let (my, mx) = (dense(h, s), dense(w, s));
            for c in 0..2 {
                for oy in 0..h / s {
                    for ox in 0..w / s {
                        let mut v = 0.0;
                        for iy in 0..h {
                            for ix in 0..w {
                                v += my[oy][iy] * mx[ox][ix] * img.get(0, c, iy, ix);
                            }
                        }
                        assert!((lr.get(0, c, oy, ox) - v).abs() < 1e-6);
                    }
                }
            }
        }
    }
}
