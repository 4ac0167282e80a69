//! Test-time local statistics conversion: swap the global average pool
//! inside channel attention for a local window at inference.

use crate::error::{Error, Result};
use crate::tensor::{Array4, Real, Tape, Tensor4};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PoolingPolicy {
    #[default]
    Global,
    Local {
        kh: usize,
        kw: usize,
    },
}

impl PoolingPolicy {
    pub fn local(kh: usize, kw: usize) -> Result<Self> {
        if kh == 0 || kw == 0 {
            return Err(Error::invalid("PoolingPolicy::local", "window must be positive"));
        }
        Ok(PoolingPolicy::Local { kh, kw })
    }

    /// The window to pool with on an `h x w` feature map, or `None` when the
    /// window covers the whole map and plain global pooling is equivalent.
    pub fn effective_window(&self, h: usize, w: usize) -> Option<(usize, usize)> {
        match *self {
            PoolingPolicy::Global => None,
            PoolingPolicy::Local { kh, kw } if kh >= h && kw >= w => None,
            PoolingPolicy::Local { kh, kw } => Some((kh, kw)),
        }
    }

    pub fn label(&self) -> String {
        match self {
            PoolingPolicy::Global => "global".into(),
            PoolingPolicy::Local { kh, kw } => format!("local {kh}x{kw}"),
        }
    }
}

/// 1.5x the training patch, rounded half away from zero.
pub fn tlsc_window_from_patch(patch: (usize, usize)) -> (usize, usize) {
    let scale = |v: usize| (1.5 * v as f64).round() as usize;
    (scale(patch.0), scale(patch.1))
}

/// Inclusive source range averaged at each position of an axis of length
/// `len` under a window of size `k`. A window at least as long as the axis
/// spans the whole axis; otherwise it is centred and clipped.
fn axis_ranges(len: usize, k: usize) -> Vec<(usize, usize)> {
    if k >= len {
        return vec![(0, len - 1); len];
    }
    let lo = (k - 1) / 2;
    let hi = k - 1 - lo;
    (0..len)
        .map(|i| (i.saturating_sub(lo), (i + hi).min(len - 1)))
        .collect()
}

/// Windowed mean along rows (`stride == 1`) or columns of a plane.
fn box_mean<T: Real>(src: &[T], dst: &mut [T], ranges: &[(usize, usize)], lines: usize, stride: usize, step: usize) {
    let len = ranges.len();
    let mut prefix = vec![T::ZERO; len + 1];
    for line in 0..lines {
        let base = line * step;
        for i in 0..len {
            prefix[i + 1] = prefix[i] + src[base + i * stride];
        }
        for (i, &(a, b)) in ranges.iter().enumerate() {
            dst[base + i * stride] = (prefix[b + 1] - prefix[a]) / T::from_usize(b - a + 1);
        }
    }
}

/// Adjoint of [`box_mean`]: spread `g[i] / count_i` over each source range.
fn box_mean_adjoint<T: Real>(
    g: &[T],
    dst: &mut [T],
    ranges: &[(usize, usize)],
    lines: usize,
    stride: usize,
    step: usize,
) {
    let len = ranges.len();
    let mut diff = vec![T::ZERO; len + 1];
    for line in 0..lines {
        let base = line * step;
        diff.fill(T::ZERO);
        for (i, &(a, b)) in ranges.iter().enumerate() {
            let v = g[base + i * stride] / T::from_usize(b - a + 1);
            diff[a] += v;
            diff[b + 1] -= v;
        }
        let mut run = T::ZERO;
        for (j, d) in diff[..len].iter().enumerate() {
            run += *d;
            dst[base + j * stride] = run;
        }
    }
}

fn separable<T: Real>(
    x: &Array4<T>,
    rows: &[(usize, usize)],
    cols: &[(usize, usize)],
    pass: fn(&[T], &mut [T], &[(usize, usize)], usize, usize, usize),
) -> Array4<T> {
    let s = x.shape();
    let mut tmp = Array4::zeros(s);
    let mut out = Array4::zeros(s);
    for n in 0..s.n {
        for c in 0..s.c {
            pass(x.plane(n, c), tmp.plane_mut(n, c), cols, s.h, 1, s.w);
            pass(tmp.plane(n, c), out.plane_mut(n, c), rows, s.w, s.w, 1);
        }
    }
    out
}

impl<T: Real> Tape<T> {
    /// Mean over a `kh x kw` window centred at each location, clipped to the
    /// image so border windows average only in-bounds pixels.
    pub fn local_avg_pool(&self, x: &Tensor4<T>, window: (usize, usize)) -> Result<Tensor4<T>> {
        let (kh, kw) = window;
        if kh == 0 || kw == 0 {
            return Err(Error::invalid("local_avg_pool", "window must be positive"));
        }
        let s = x.shape();
        if s.numel() == 0 {
            return Err(Error::invalid("local_avg_pool", "empty input"));
        }
        let rows = axis_ranges(s.h, kh);
        let cols = axis_ranges(s.w, kw);
        let out = separable(x.value(), &rows, &cols, box_mean);
        self.record(out, &[x], move |g, _| {
            // The pass order does not matter for a separable linear map.
            vec![Some(separable(g, &rows, &cols, box_mean_adjoint))]
        })
    }
}

/// Local mean of a plain array (no tape).
pub fn local_avg_pool<T: Real>(x: &Array4<T>, window: (usize, usize)) -> Result<Array4<T>> {
    let tape = Tape::new();
    Ok(tape.local_avg_pool(&Tensor4::constant(x.clone()), window)?.into_array())
}
