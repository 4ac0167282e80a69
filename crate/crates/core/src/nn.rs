//! Layers NAFSSR is assembled from: zero-padded stride-1 convolution,
//! channel LayerNorm, SimpleGate, simplified channel attention, pixel
//! shuffle and bilinear resize. Every op records its adjoint on the tape.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::tensor::{Array4, Fault, Real, Shape, Tape, Tensor4};
use crate::tlsc::PoolingPolicy;

/// Convolution weights `(c_out, c_in/groups, k, k)` and bias `(1, c_out, 1, 1)`.
#[derive(Clone, Debug)]
pub struct ConvParams<T: Real> {
    pub weight: Tensor4<T>,
    pub bias: Tensor4<T>,
    pub groups: usize,
}

impl<T: Real> ConvParams<T> {
    pub fn out_channels(&self) -> usize {
        self.weight.shape().n
    }

    pub fn kernel(&self) -> usize {
        self.weight.shape().h
    }
}

/// Per-channel affine parameters, each `(1, c, 1, 1)`.
#[derive(Clone, Debug)]
pub struct LayerNormParams<T: Real> {
    pub weight: Tensor4<T>,
    pub bias: Tensor4<T>,
    pub eps: f64,
}

pub const LAYERNORM_EPS: f64 = 1e-6;

struct ConvGeom {
    n: usize,
    c_in: usize,
    c_out: usize,
    h: usize,
    w: usize,
    k: usize,
    groups: usize,
}

impl ConvGeom {
    fn cin_g(&self) -> usize {
        self.c_in / self.groups
    }
    fn cout_g(&self) -> usize {
        self.c_out / self.groups
    }
    fn hw(&self) -> usize {
        self.h * self.w
    }
    fn pad(&self) -> usize {
        (self.k - 1) / 2
    }
}

/// Unfold `channels` consecutive planes starting at `src` into
/// `(channels*k*k) x (h*w)` columns.
fn im2col<T: Real>(src: &[T], channels: usize, g: &ConvGeom, cols: &mut [T]) {
    let (h, w, k, p) = (g.h, g.w, g.k, g.pad());
    let hw = h * w;
    for ci in 0..channels {
        let plane = &src[ci * hw..(ci + 1) * hw];
        for ky in 0..k {
            for kx in 0..k {
                let row = &mut cols[((ci * k + ky) * k + kx) * hw..][..hw];
                let (x_lo, x_hi) = valid_range(kx, p, w);
                for y in 0..h {
                    let dst = &mut row[y * w..(y + 1) * w];
                    let sy = y + ky;
                    if sy < p || sy - p >= h {
                        dst.fill(T::ZERO);
                        continue;
                    }
                    let sy = sy - p;
                    dst[..x_lo].fill(T::ZERO);
                    dst[x_hi..].fill(T::ZERO);
                    if x_lo < x_hi {
                        let sx0 = x_lo + kx - p;
                        dst[x_lo..x_hi].copy_from_slice(&plane[sy * w + sx0..sy * w + sx0 + (x_hi - x_lo)]);
                    }
                }
            }
        }
    }
}

/// Inverse of [`im2col`]: scatter-add columns back onto planes.
fn col2im<T: Real>(cols: &[T], channels: usize, g: &ConvGeom, dst: &mut [T]) {
    let (h, w, k, p) = (g.h, g.w, g.k, g.pad());
    let hw = h * w;
    for ci in 0..channels {
        let plane = &mut dst[ci * hw..(ci + 1) * hw];
        for ky in 0..k {
            for kx in 0..k {
                let row = &cols[((ci * k + ky) * k + kx) * hw..][..hw];
                let (x_lo, x_hi) = valid_range(kx, p, w);
                if x_lo >= x_hi {
                    continue;
                }
                for y in 0..h {
                    let sy = y + ky;
                    if sy < p || sy - p >= h {
                        continue;
                    }
                    let sy = sy - p;
                    let sx0 = x_lo + kx - p;
                    let src = &row[y * w + x_lo..y * w + x_hi];
                    for (d, &s) in plane[sy * w + sx0..].iter_mut().zip(src) {
                        *d += s;
                    }
                }
            }
        }
    }
}

/// Output columns `x` for which `x + kx - pad` lands inside `[0, w)`.
#[inline]
fn valid_range(kx: usize, pad: usize, w: usize) -> (usize, usize) {
    let lo = pad.saturating_sub(kx);
    let hi = (w + pad).saturating_sub(kx).min(w);
    (lo.min(hi), hi)
}

fn conv_forward<T: Real>(x: &Array4<T>, wt: &Array4<T>, b: &Array4<T>, g: &ConvGeom) -> Array4<T> {
    let hw = g.hw();
    let mut out = Array4::zeros(Shape::new(g.n, g.c_out, g.h, g.w));
    if g.groups == g.c_in && g.groups == g.c_out {
        depthwise_forward(x, wt, g, &mut out);
    } else {
        let (cin_g, cout_g, kk) = (g.cin_g(), g.cout_g(), g.k * g.k);
        let mut cols = if g.k > 1 { vec![T::ZERO; cin_g * kk * hw] } else { Vec::new() };
        for n in 0..g.n {
            let xi = x.item_slice(n);
            let oi = out.item_slice_mut(n);
            for grp in 0..g.groups {
                let src = &xi[grp * cin_g * hw..(grp + 1) * cin_g * hw];
                let cols_ref: &[T] = if g.k > 1 {
                    im2col(src, cin_g, g, &mut cols);
                    &cols
                } else {
                    src
                };
                let wg = &wt.data()[grp * cout_g * cin_g * kk..(grp + 1) * cout_g * cin_g * kk];
                T::gemm(
                    cout_g,
                    cin_g * kk,
                    hw,
                    T::ONE,
                    wg,
                    cin_g * kk,
                    1,
                    cols_ref,
                    hw,
                    1,
                    T::ZERO,
                    &mut oi[grp * cout_g * hw..(grp + 1) * cout_g * hw],
                    hw,
                    1,
                );
            }
        }
    }
    for n in 0..g.n {
        for c in 0..g.c_out {
            let bv = b.data()[c];
            for v in out.plane_mut(n, c) {
                *v += bv;
            }
        }
    }
    out
}

fn depthwise_forward<T: Real>(x: &Array4<T>, wt: &Array4<T>, g: &ConvGeom, out: &mut Array4<T>) {
    let (h, w, k, p) = (g.h, g.w, g.k, g.pad());
    for n in 0..g.n {
        for c in 0..g.c_in {
            let src = x.plane(n, c);
            let taps = &wt.data()[c * k * k..(c + 1) * k * k];
            let dst = out.plane_mut(n, c);
            for ky in 0..k {
                let (y_lo, y_hi) = valid_range(ky, p, h);
                for kx in 0..k {
                    let wv = taps[ky * k + kx];
                    let (x_lo, x_hi) = valid_range(kx, p, w);
                    if x_lo >= x_hi {
                        continue;
                    }
                    for y in y_lo..y_hi {
                        let sy = y + ky - p;
                        let s = &src[sy * w + x_lo + kx - p..sy * w + x_hi + kx - p];
                        for (d, &v) in dst[y * w + x_lo..y * w + x_hi].iter_mut().zip(s) {
                            *d += wv * v;
                        }
                    }
                }
            }
        }
    }
}

fn depthwise_backward<T: Real>(
    x: &Array4<T>,
    wt: &Array4<T>,
    gy: &Array4<T>,
    geo: &ConvGeom,
    gx: Option<&mut Array4<T>>,
    gw: Option<&mut Array4<T>>,
) {
    let (h, w, k, p) = (geo.h, geo.w, geo.k, geo.pad());
    let mut gx = gx;
    let mut gw = gw;
    for n in 0..geo.n {
        for c in 0..geo.c_in {
            let src = x.plane(n, c);
            let g = gy.plane(n, c);
            for ky in 0..k {
                let (y_lo, y_hi) = valid_range(ky, p, h);
                for kx in 0..k {
                    let (x_lo, x_hi) = valid_range(kx, p, w);
                    if x_lo >= x_hi {
                        continue;
                    }
                    let tap = c * k * k + ky * k + kx;
                    let wv = wt.data()[tap];
                    let mut acc = T::ZERO;
                    for y in y_lo..y_hi {
                        let sy = y + ky - p;
                        let off = sy * w + kx + x_lo - p;
                        let gr = &g[y * w + x_lo..y * w + x_hi];
                        if gw.is_some() {
                            let s = &src[off..off + (x_hi - x_lo)];
                            acc += gr.iter().zip(s).map(|(&a, &b)| a * b).sum::<T>();
                        }
                        if let Some(gx) = gx.as_deref_mut() {
                            let d = &mut gx.plane_mut(n, c)[off..off + (x_hi - x_lo)];
                            for (dv, &gv) in d.iter_mut().zip(gr) {
                                *dv += wv * gv;
                            }
                        }
                    }
                    if let Some(gw) = gw.as_deref_mut() {
                        gw.data_mut()[tap] += acc;
                    }
                }
            }
        }
    }
}

fn bias_grad<T: Real>(gy: &Array4<T>) -> Array4<T> {
    let s = gy.shape();
    let mut gb = Array4::zeros(Shape::new(1, s.c, 1, 1));
    for n in 0..s.n {
        for c in 0..s.c {
            gb.data_mut()[c] += gy.plane(n, c).iter().copied().sum::<T>();
        }
    }
    gb
}

impl<T: Real> Tape<T> {
    /// Stride-1 cross-correlation with zero padding `(k-1)/2`, so spatial
    /// size is preserved.
    pub fn conv2d(&self, x: &Tensor4<T>, p: &ConvParams<T>) -> Result<Tensor4<T>> {
        let (xs, ws, bs) = (x.shape(), p.weight.shape(), p.bias.shape());
        let groups = p.groups;
        if groups == 0 || ws.h != ws.w || ws.h % 2 == 0 {
            return Err(Error::invalid("conv2d", format!("unsupported kernel {ws} / groups {groups}")));
        }
        if xs.c % groups != 0 || ws.n % groups != 0 || ws.c * groups != xs.c {
            return Err(Error::ShapeMismatch {
                op: "conv2d",
                lhs: xs,
                rhs: ws,
            });
        }
        if bs != Shape::new(1, ws.n, 1, 1) {
            return Err(Error::ShapeMismatch {
                op: "conv2d bias",
                lhs: ws,
                rhs: bs,
            });
        }
        let geo = ConvGeom {
            n: xs.n,
            c_in: xs.c,
            c_out: ws.n,
            h: xs.h,
            w: xs.w,
            k: ws.h,
            groups,
        };
        let out = conv_forward(x.value(), p.weight.value(), p.bias.value(), &geo);
        let (xv, wv) = (x.shared_value(), p.weight.shared_value());
        self.record(out, &[x, &p.weight, &p.bias], move |gy, needs| {
            conv_backward(&xv, &wv, gy, &geo, needs)
        })
    }

    /// LayerNorm over the channel axis at every `(n, h, w)` location.
    pub fn layernorm2d(&self, x: &Tensor4<T>, p: &LayerNormParams<T>) -> Result<Tensor4<T>> {
        let s = x.shape();
        let affine = Shape::new(1, s.c, 1, 1);
        if p.weight.shape() != affine || p.bias.shape() != affine {
            return Err(Error::ShapeMismatch {
                op: "layernorm2d",
                lhs: s,
                rhs: p.weight.shape(),
            });
        }
        let hw = s.plane();
        let eps = T::from_f64(p.eps);
        let inv_c = T::ONE / T::from_usize(s.c);
        let mut xhat = Array4::zeros(s);
        let mut rstd = vec![T::ZERO; s.n * hw];
        for n in 0..s.n {
            let xi = x.value().item_slice(n);
            let mut mean = vec![T::ZERO; hw];
            for c in 0..s.c {
                for (m, &v) in mean.iter_mut().zip(&xi[c * hw..(c + 1) * hw]) {
                    *m += v;
                }
            }
            mean.iter_mut().for_each(|m| *m *= inv_c);
            let mut var = vec![T::ZERO; hw];
            for c in 0..s.c {
                for ((v, &xv), &m) in var.iter_mut().zip(&xi[c * hw..(c + 1) * hw]).zip(&mean) {
                    let d = xv - m;
                    *v += d * d;
                }
            }
            let r = &mut rstd[n * hw..(n + 1) * hw];
            for (ri, &v) in r.iter_mut().zip(&var) {
                *ri = T::ONE / (v * inv_c + eps).sqrt();
            }
            let xo = xhat.item_slice_mut(n);
            for c in 0..s.c {
                for (((o, &xv), &m), &ri) in xo[c * hw..(c + 1) * hw]
                    .iter_mut()
                    .zip(&xi[c * hw..(c + 1) * hw])
                    .zip(&mean)
                    .zip(r.iter())
                {
                    *o = (xv - m) * ri;
                }
            }
        }
        let (wv, bv) = (p.weight.value().data(), p.bias.value().data());
        let mut out = xhat.clone();
        for n in 0..s.n {
            for c in 0..s.c {
                let (a, b) = (wv[c], bv[c]);
                for v in out.plane_mut(n, c) {
                    *v = *v * a + b;
                }
            }
        }
        let wshared = p.weight.shared_value();
        let xhat = Arc::new(xhat);
        self.record(out, &[x, &p.weight, &p.bias], move |g, needs| {
            let mut gw = Array4::zeros(affine);
            let mut gb = Array4::zeros(affine);
            for n in 0..s.n {
                for c in 0..s.c {
                    let gp = g.plane(n, c);
                    let xp = xhat.plane(n, c);
                    gw.data_mut()[c] += gp.iter().zip(xp).map(|(&a, &b)| a * b).sum::<T>();
                    gb.data_mut()[c] += gp.iter().copied().sum::<T>();
                }
            }
            let gx = needs[0].then(|| {
                let mut gx = Array4::zeros(s);
                for n in 0..s.n {
                    let mut m1 = vec![T::ZERO; hw];
                    let mut m2 = vec![T::ZERO; hw];
                    for c in 0..s.c {
                        let a = wshared.data()[c];
                        for ((i, &gv), &xv) in g.plane(n, c).iter().enumerate().zip(xhat.plane(n, c)) {
                            let gh = gv * a;
                            m1[i] += gh;
                            m2[i] += gh * xv;
                        }
                    }
                    m1.iter_mut().for_each(|v| *v *= inv_c);
                    m2.iter_mut().for_each(|v| *v *= inv_c);
                    let r = &rstd[n * hw..(n + 1) * hw];
                    for c in 0..s.c {
                        let a = wshared.data()[c];
                        let gp = g.plane(n, c);
                        let xp = xhat.plane(n, c);
                        let out = gx.plane_mut(n, c);
                        for i in 0..hw {
                            out[i] = r[i] * (gp[i] * a - m1[i] - xp[i] * m2[i]);
                        }
                    }
                }
                gx
            });
            vec![gx, needs[1].then_some(gw), needs[2].then_some(gb)]
        })
    }

    /// Split channels into halves `x1 | x2` and return `x1 * x2`.
    pub fn simple_gate(&self, x: &Tensor4<T>) -> Result<Tensor4<T>> {
        let s = x.shape();
        if s.c % 2 != 0 {
            return Err(Error::invalid("simple_gate", format!("odd channel count {}", s.c)));
        }
        let half = s.c / 2;
        let os = Shape::new(s.n, half, s.h, s.w);
        let mut out = Array4::zeros(os);
        for n in 0..s.n {
            for c in 0..half {
                let (a, b) = (x.value().plane(n, c), x.value().plane(n, c + half));
                for ((o, &u), &v) in out.plane_mut(n, c).iter_mut().zip(a).zip(b) {
                    *o = u * v;
                }
            }
        }
        let xv = x.shared_value();
        let y = self.record(out, &[x], move |g, _| {
            let mut gx = Array4::zeros(s);
            for n in 0..s.n {
                for c in 0..half {
                    let gp = g.plane(n, c);
                    let (a, b) = (xv.plane(n, c), xv.plane(n, c + half));
                    let ga: Vec<T> = gp.iter().zip(b).map(|(&gv, &bv)| gv * bv).collect();
                    gx.plane_mut(n, c).copy_from_slice(&ga);
                    for ((o, &gv), &av) in gx.plane_mut(n, c + half).iter_mut().zip(gp).zip(a) {
                        *o = gv * av;
                    }
                }
            }
            vec![Some(gx)]
        })?;
        match self.fault() {
            Some(Fault::SimpleGateSign) => self.flip_gradient(&y),
            None => Ok(y),
        }
    }

    /// Spatial mean per `(n, c)`: `(n, c, h, w) -> (n, c, 1, 1)`.
    pub fn global_avg_pool(&self, x: &Tensor4<T>) -> Result<Tensor4<T>> {
        let s = x.shape();
        let inv = T::ONE / T::from_usize(s.plane());
        let mut out = Array4::zeros(Shape::new(s.n, s.c, 1, 1));
        for n in 0..s.n {
            for c in 0..s.c {
                out.data_mut()[n * s.c + c] = x.value().plane(n, c).iter().copied().sum::<T>() * inv;
            }
        }
        self.record(out, &[x], move |g, _| {
            let mut gx = Array4::zeros(s);
            for n in 0..s.n {
                for c in 0..s.c {
                    let v = g.data()[n * s.c + c] * inv;
                    gx.plane_mut(n, c).fill(v);
                }
            }
            vec![Some(gx)]
        })
    }

    /// `x * W pool(x)`: a pooled statistic, a 1x1 convolution on it, and a
    /// channel-wise product back onto `x`. Under a local pooling policy the
    /// statistic (and so the gate) varies per location.
    pub fn simplified_channel_attention(
        &self,
        x: &Tensor4<T>,
        conv: &ConvParams<T>,
        policy: &PoolingPolicy,
    ) -> Result<Tensor4<T>> {
        let s = x.shape();
        if conv.kernel() != 1 || conv.out_channels() != s.c || conv.weight.shape().c != s.c {
            return Err(Error::ShapeMismatch {
                op: "simplified_channel_attention",
                lhs: s,
                rhs: conv.weight.shape(),
            });
        }
        let pooled = match policy.effective_window(s.h, s.w) {
            None => self.global_avg_pool(x)?,
            Some(win) => self.local_avg_pool(x, win)?,
        };
        let gate = self.conv2d(&pooled, conv)?;
        self.mul(x, &gate)
    }

    /// Depth-to-space: input channel `c*s*s + i*s + j` lands at output
    /// channel `c`, position `(h*s + i, w*s + j)`.
    pub fn pixel_shuffle(&self, x: &Tensor4<T>, s: usize) -> Result<Tensor4<T>> {
        let xs = x.shape();
        if s == 0 || xs.c % (s * s) != 0 {
            return Err(Error::invalid(
                "pixel_shuffle",
                format!("{} channels not divisible by {}", xs.c, s * s),
            ));
        }
        let out = pixel_shuffle_array(x.value(), s);
        self.record(out, &[x], move |g, _| vec![Some(pixel_unshuffle_array(g, s))])
    }

    /// Bilinear upsampling by an integer factor, half-pixel centres
    /// (align-corners false) with edge clamping.
    pub fn bilinear_resize(&self, x: &Tensor4<T>, s: usize) -> Result<Tensor4<T>> {
        if s == 0 {
            return Err(Error::invalid("bilinear_resize", "scale must be >= 1"));
        }
        let xs = x.shape();
        let ty = bilinear_taps(xs.h, s);
        let tx = bilinear_taps(xs.w, s);
        let (oh, ow) = (xs.h * s, xs.w * s);
        let os = Shape::new(xs.n, xs.c, oh, ow);
        let mut out = Array4::zeros(os);
        for n in 0..xs.n {
            for c in 0..xs.c {
                let src = x.value().plane(n, c);
                let dst = out.plane_mut(n, c);
                for (oy, &(y0, y1, ly)) in ty.iter().enumerate() {
                    let ly = T::from_f64(ly);
                    let r0 = &src[y0 * xs.w..(y0 + 1) * xs.w];
                    let r1 = &src[y1 * xs.w..(y1 + 1) * xs.w];
                    for (ox, &(x0, x1, lx)) in tx.iter().enumerate() {
                        let lx = T::from_f64(lx);
                        let top = r0[x0] * (T::ONE - lx) + r0[x1] * lx;
                        let bot = r1[x0] * (T::ONE - lx) + r1[x1] * lx;
                        dst[oy * ow + ox] = top * (T::ONE - ly) + bot * ly;
                    }
                }
            }
        }
        self.record(out, &[x], move |g, _| {
            let mut gx = Array4::zeros(xs);
            for n in 0..xs.n {
                for c in 0..xs.c {
                    let gp = g.plane(n, c);
                    let dst = gx.plane_mut(n, c);
                    for (oy, &(y0, y1, ly)) in ty.iter().enumerate() {
                        let ly = T::from_f64(ly);
                        for (ox, &(x0, x1, lx)) in tx.iter().enumerate() {
                            let lx = T::from_f64(lx);
                            let gv = gp[oy * ow + ox];
                            let top = gv * (T::ONE - ly);
                            let bot = gv * ly;
                            dst[y0 * xs.w + x0] += top * (T::ONE - lx);
                            dst[y0 * xs.w + x1] += top * lx;
                            dst[y1 * xs.w + x0] += bot * (T::ONE - lx);
                            dst[y1 * xs.w + x1] += bot * lx;
                        }
                    }
                }
            }
            vec![Some(gx)]
        })
    }
}

fn conv_backward<T: Real>(
    x: &Array4<T>,
    wt: &Array4<T>,
    gy: &Array4<T>,
    geo: &ConvGeom,
    needs: &[bool],
) -> Vec<Option<Array4<T>>> {
    let hw = geo.hw();
    let mut gx = needs[0].then(|| Array4::zeros(x.shape()));
    let mut gw = needs[1].then(|| Array4::zeros(wt.shape()));
    let gb = needs[2].then(|| bias_grad(gy));
    if gx.is_none() && gw.is_none() {
        return vec![None, None, gb];
    }
    if geo.groups == geo.c_in && geo.groups == geo.c_out {
        depthwise_backward(x, wt, gy, geo, gx.as_mut(), gw.as_mut());
        return vec![gx, gw, gb];
    }
    let (cin_g, cout_g, kk) = (geo.cin_g(), geo.cout_g(), geo.k * geo.k);
    let rows = cin_g * kk;
    let mut cols = if geo.k > 1 { vec![T::ZERO; rows * hw] } else { Vec::new() };
    let mut gcols = if geo.k > 1 && gx.is_some() { vec![T::ZERO; rows * hw] } else { Vec::new() };
    for n in 0..geo.n {
        let xi = x.item_slice(n);
        let gi = gy.item_slice(n);
        for grp in 0..geo.groups {
            let src = &xi[grp * cin_g * hw..(grp + 1) * cin_g * hw];
            let gyg = &gi[grp * cout_g * hw..(grp + 1) * cout_g * hw];
            let wrange = grp * cout_g * rows..(grp + 1) * cout_g * rows;
            if let Some(gw) = gw.as_mut() {
                let cols_ref: &[T] = if geo.k > 1 {
                    im2col(src, cin_g, geo, &mut cols);
                    &cols
                } else {
                    src
                };
                // gW += gY (cout_g x hw) . cols^T (hw x rows)
                T::gemm(
                    cout_g,
                    hw,
                    rows,
                    T::ONE,
                    gyg,
                    hw,
                    1,
                    cols_ref,
                    1,
                    hw,
                    T::ONE,
                    &mut gw.data_mut()[wrange.clone()],
                    rows,
                    1,
                );
            }
            if let Some(gx) = gx.as_mut() {
                let wg = &wt.data()[wrange];
                let gxi = &mut gx.item_slice_mut(n)[grp * cin_g * hw..(grp + 1) * cin_g * hw];
                // gcols = W^T (rows x cout_g) . gY (cout_g x hw)
                if geo.k > 1 {
                    T::gemm(rows, cout_g, hw, T::ONE, wg, 1, rows, gyg, hw, 1, T::ZERO, &mut gcols, hw, 1);
                    col2im(&gcols, cin_g, geo, gxi);
                } else {
                    T::gemm(rows, cout_g, hw, T::ONE, wg, 1, rows, gyg, hw, 1, T::ONE, gxi, hw, 1);
                }
            }
        }
    }
    vec![gx, gw, gb]
}

/// Per output index: `(lower source, upper source, upper weight)`.
fn bilinear_taps(len: usize, s: usize) -> Vec<(usize, usize, f64)> {
    (0..len * s)
        .map(|d| {
            let src = ((d as f64 + 0.5) / s as f64 - 0.5).max(0.0);
            let i0 = (src.floor() as usize).min(len - 1);
            let i1 = (i0 + 1).min(len - 1);
            let l = if i1 == i0 { 0.0 } else { src - i0 as f64 };
            (i0, i1, l)
        })
        .collect()
}

pub(crate) fn pixel_shuffle_array<T: Real>(x: &Array4<T>, s: usize) -> Array4<T> {
    let xs = x.shape();
    let oc = xs.c / (s * s);
    let os = Shape::new(xs.n, oc, xs.h * s, xs.w * s);
    let mut out = Array4::zeros(os);
    for n in 0..xs.n {
        for c in 0..oc {
            for i in 0..s {
                for j in 0..s {
                    let src = x.plane(n, c * s * s + i * s + j);
                    let dst = out.plane_mut(n, c);
                    for y in 0..xs.h {
                        let row = (y * s + i) * os.w;
                        for xx in 0..xs.w {
                            dst[row + xx * s + j] = src[y * xs.w + xx];
                        }
                    }
                }
            }
        }
    }
    out
}

pub(crate) fn pixel_unshuffle_array<T: Real>(y: &Array4<T>, s: usize) -> Array4<T> {
    let ys = y.shape();
    let (h, w) = (ys.h / s, ys.w / s);
    let xs = Shape::new(ys.n, ys.c * s * s, h, w);
    let mut out = Array4::zeros(xs);
    for n in 0..ys.n {
        for c in 0..ys.c {
            for i in 0..s {
                for j in 0..s {
                    let src = y.plane(n, c);
                    let dst = out.plane_mut(n, c * s * s + i * s + j);
                    for yy in 0..h {
                        for xx in 0..w {
                            dst[yy * w + xx] = src[(yy * s + i) * ys.w + xx * s + j];
                        }
                    }
                }
            }
        }
    }
    out
}

/// Upsample a plain array bilinearly (no tape).
pub fn bilinear_upsample<T: Real>(x: &Array4<T>, s: usize) -> Result<Array4<T>> {
    let tape = Tape::new();
    Ok(tape.bilinear_resize(&Tensor4::constant(x.clone()), s)?.into_array())
}
