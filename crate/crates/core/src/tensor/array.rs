use std::fmt;

use super::Real;
use crate::error::{Error, Result};

/// Extent of a rank-4 array in `(n, c, h, w)` order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Shape {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape {
    pub const fn new(n: usize, c: usize, h: usize, w: usize) -> Self {
        Shape { n, c, h, w }
    }

    pub const fn scalar() -> Self {
        Shape::new(1, 1, 1, 1)
    }

    pub const fn numel(&self) -> usize {
        self.n * self.c * self.h * self.w
    }

    pub const fn plane(&self) -> usize {
        self.h * self.w
    }

    pub const fn dims(&self) -> [usize; 4] {
        [self.n, self.c, self.h, self.w]
    }

    pub const fn from_dims(d: [usize; 4]) -> Self {
        Shape::new(d[0], d[1], d[2], d[3])
    }

    #[inline]
    pub const fn offset(&self, n: usize, c: usize, h: usize, w: usize) -> usize {
        ((n * self.c + c) * self.h + h) * self.w + w
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{},{})", self.n, self.c, self.h, self.w)
    }
}

/// Dense row-major `(n, c, h, w)` array with value semantics.
#[derive(Clone, Debug, PartialEq)]
pub struct Array4<T> {
    shape: Shape,
    data: Vec<T>,
}

impl<T: Real> Array4<T> {
    pub fn zeros(shape: Shape) -> Self {
        Self::full(shape, T::ZERO)
    }

    pub fn ones(shape: Shape) -> Self {
        Self::full(shape, T::ONE)
    }

    pub fn full(shape: Shape, value: T) -> Self {
        Array4 {
            shape,
            data: vec![value; shape.numel()],
        }
    }

    pub fn from_vec(shape: Shape, data: Vec<T>) -> Result<Self> {
        if data.len() != shape.numel() {
            return Err(Error::invalid(
                "Array4::from_vec",
                format!("{} elements for shape {shape}", data.len()),
            ));
        }
        Ok(Array4 { shape, data })
    }

    pub fn from_fn(shape: Shape, mut f: impl FnMut(usize, usize, usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(shape.numel());
        for n in 0..shape.n {
            for c in 0..shape.c {
                for h in 0..shape.h {
                    for w in 0..shape.w {
                        data.push(f(n, c, h, w));
                    }
                }
            }
        }
        Array4 { shape, data }
    }

    pub fn scalar(value: T) -> Self {
        Self::full(Shape::scalar(), value)
    }

    #[inline]
    pub fn shape(&self) -> Shape {
        self.shape
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, n: usize, c: usize, h: usize, w: usize) -> T {
        self.data[self.shape.offset(n, c, h, w)]
    }

    #[inline]
    pub fn set(&mut self, n: usize, c: usize, h: usize, w: usize, v: T) {
        let i = self.shape.offset(n, c, h, w);
        self.data[i] = v;
    }

    /// The single value of a `(1,1,1,1)` array.
    pub fn item(&self) -> T {
        assert_eq!(self.data.len(), 1, "item() on non-scalar {}", self.shape);
        self.data[0]
    }

    pub fn reshape(self, shape: Shape) -> Result<Self> {
        if shape.numel() != self.shape.numel() {
            return Err(Error::invalid(
                "Array4::reshape",
                format!("{} -> {shape}", self.shape),
            ));
        }
        Ok(Array4 {
            shape,
            data: self.data,
        })
    }

    pub fn map(&self, mut f: impl FnMut(T) -> T) -> Self {
        Array4 {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, mut f: impl FnMut(T, T) -> T) -> Self {
        assert_eq!(self.shape, other.shape);
        Array4 {
            shape: self.shape,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// Element-wise `self += other`.
    pub fn add_assign(&mut self, other: &Self) {
        assert_eq!(self.shape, other.shape, "accumulate shape mismatch");
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale_inplace(&mut self, s: T) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.shape, other.shape);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a.to_f64() - b.to_f64()).abs())
            .fold(0.0, f64::max)
    }

    pub fn cast<U: Real>(&self) -> Array4<U> {
        Array4 {
            shape: self.shape,
            data: self.data.iter().map(|v| U::from_f64(v.to_f64())).collect(),
        }
    }

    /// Plane `(n, c)` as a contiguous slice of length `h*w`.
    #[inline]
    pub fn plane(&self, n: usize, c: usize) -> &[T] {
        let p = self.shape.plane();
        let start = (n * self.shape.c + c) * p;
        &self.data[start..start + p]
    }

    #[inline]
    pub fn plane_mut(&mut self, n: usize, c: usize) -> &mut [T] {
        let p = self.shape.plane();
        let start = (n * self.shape.c + c) * p;
        &mut self.data[start..start + p]
    }

    /// Batch item `n` as a contiguous `c*h*w` slice.
    #[inline]
    pub fn item_slice(&self, n: usize) -> &[T] {
        let s = self.shape.c * self.shape.plane();
        &self.data[n * s..(n + 1) * s]
    }

    #[inline]
    pub fn item_slice_mut(&mut self, n: usize) -> &mut [T] {
        let s = self.shape.c * self.shape.plane();
        &mut self.data[n * s..(n + 1) * s]
    }

    /// Concatenate along the batch axis. All parts must share `(c, h, w)`.
    pub fn concat_batch(parts: &[&Self]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::invalid("concat_batch", "no parts"))?
            .shape;
        let mut data = Vec::new();
        let mut n = 0;
        for p in parts {
            let s = p.shape;
            if (s.c, s.h, s.w) != (first.c, first.h, first.w) {
                return Err(Error::ShapeMismatch {
                    op: "concat_batch",
                    lhs: first,
                    rhs: s,
                });
            }
            n += s.n;
            data.extend_from_slice(&p.data);
        }
        Ok(Array4 {
            shape: Shape::new(n, first.c, first.h, first.w),
            data,
        })
    }

    /// Split along the batch axis into single-item arrays.
    pub fn split_batch(&self) -> Vec<Self> {
        let s = self.shape;
        (0..s.n)
            .map(|n| Array4 {
                shape: Shape::new(1, s.c, s.h, s.w),
                data: self.item_slice(n).to_vec(),
            })
            .collect()
    }

    /// Spatial crop `[y0, y0+h) x [x0, x0+w)` of every plane.
    pub fn crop(&self, y0: usize, x0: usize, h: usize, w: usize) -> Result<Self> {
        let s = self.shape;
        if y0 + h > s.h || x0 + w > s.w {
            return Err(Error::invalid(
                "crop",
                format!("window {h}x{w} at ({y0},{x0}) exceeds {s}"),
            ));
        }
        let out_shape = Shape::new(s.n, s.c, h, w);
        let mut data = Vec::with_capacity(out_shape.numel());
        for n in 0..s.n {
            for c in 0..s.c {
                let plane = self.plane(n, c);
                for y in y0..y0 + h {
                    data.extend_from_slice(&plane[y * s.w + x0..y * s.w + x0 + w]);
                }
            }
        }
        Ok(Array4 {
            shape: out_shape,
            data,
        })
    }

    /// Mirror along the width axis.
    pub fn flip_w(&self) -> Self {
        let s = self.shape;
        let mut out = self.clone();
        for (src, dst) in self.data.chunks(s.w).zip(out.data.chunks_mut(s.w)) {
            for (d, v) in dst.iter_mut().zip(src.iter().rev()) {
                *d = *v;
            }
        }
        out
    }

    /// Mirror along the height axis.
    pub fn flip_h(&self) -> Self {
        let s = self.shape;
        let mut out = self.clone();
        for n in 0..s.n {
            for c in 0..s.c {
                let src = self.plane(n, c);
                let dst = out.plane_mut(n, c);
                for y in 0..s.h {
                    let yy = s.h - 1 - y;
                    dst[y * s.w..(y + 1) * s.w].copy_from_slice(&src[yy * s.w..(yy + 1) * s.w]);
                }
            }
        }
        out
    }

    /// Reorder channels: output channel `i` takes input channel `perm[i]`.
    pub fn permute_channels(&self, perm: &[usize]) -> Result<Self> {
        let s = self.shape;
        if perm.len() != s.c {
            return Err(Error::invalid(
                "permute_channels",
                format!("permutation of length {} for {} channels", perm.len(), s.c),
            ));
        }
        let mut out = Array4::zeros(s);
        for n in 0..s.n {
            for (i, &src) in perm.iter().enumerate() {
                if src >= s.c {
                    return Err(Error::invalid("permute_channels", "index out of range"));
                }
                out.plane_mut(n, i).copy_from_slice(self.plane(n, src));
            }
        }
        Ok(out)
    }
}
