//! Differentiable primitives shared by every layer: element-wise arithmetic
//! with per-channel broadcast, reductions, axis permutation, row softmax and
//! the per-row batched matrix product used by cross-view attention.

use super::{Array4, Real, Shape, Tape, Tensor4};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Elementwise {
    Add,
    Sub,
    Mul,
}

/// How the right operand of an element-wise op lines up with the left.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Broadcast {
    Same,
    /// `(1, c, 1, 1)`: one value per channel.
    Channel,
    /// `(n, c, 1, 1)`: one value per batch item and channel.
    ItemChannel,
}

fn broadcast_kind(op: &'static str, a: Shape, b: Shape) -> Result<Broadcast> {
    if a == b {
        Ok(Broadcast::Same)
    } else if b.c == a.c && b.h == 1 && b.w == 1 && b.n == 1 {
        Ok(Broadcast::Channel)
    } else if b.c == a.c && b.h == 1 && b.w == 1 && b.n == a.n {
        Ok(Broadcast::ItemChannel)
    } else {
        Err(Error::ShapeMismatch { op, lhs: a, rhs: b })
    }
}

#[inline]
fn bcast_index(kind: Broadcast, s: Shape, n: usize, c: usize) -> usize {
    match kind {
        Broadcast::Same => unreachable!(),
        Broadcast::Channel => c,
        Broadcast::ItemChannel => n * s.c + c,
    }
}

fn apply_binary<T: Real>(
    a: &Array4<T>,
    b: &Array4<T>,
    kind: Broadcast,
    f: impl Fn(T, T) -> T,
) -> Array4<T> {
    if kind == Broadcast::Same {
        return a.zip_map(b, f);
    }
    let s = a.shape();
    let mut out = Array4::zeros(s);
    for n in 0..s.n {
        for c in 0..s.c {
            let bv = b.data()[bcast_index(kind, s, n, c)];
            for (o, &x) in out.plane_mut(n, c).iter_mut().zip(a.plane(n, c)) {
                *o = f(x, bv);
            }
        }
    }
    out
}

/// Sum `g` down to the broadcast operand's shape.
fn reduce_to<T: Real>(g: &Array4<T>, kind: Broadcast, target: Shape) -> Array4<T> {
    if kind == Broadcast::Same {
        return g.clone();
    }
    let s = g.shape();
    let mut out = Array4::zeros(target);
    for n in 0..s.n {
        for c in 0..s.c {
            let acc: T = g.plane(n, c).iter().copied().sum();
            out.data_mut()[bcast_index(kind, s, n, c)] += acc;
        }
    }
    out
}

impl<T: Real> Tape<T> {
    /// `a op b`, where `b` is either the same shape as `a` or broadcast per
    /// channel (`(1,c,1,1)` or `(n,c,1,1)`).
    pub fn elementwise(
        &self,
        a: &Tensor4<T>,
        b: &Tensor4<T>,
        kind: Elementwise,
    ) -> Result<Tensor4<T>> {
        let op = match kind {
            Elementwise::Add => "add",
            Elementwise::Sub => "sub",
            Elementwise::Mul => "mul",
        };
        let bk = broadcast_kind(op, a.shape(), b.shape())?;
        let (av, bv) = (a.shared_value(), b.shared_value());
        let b_shape = b.shape();
        match kind {
            Elementwise::Add => {
                let out = apply_binary(&av, &bv, bk, |x, y| x + y);
                self.record(out, &[a, b], move |g, needs| {
                    vec![
                        needs[0].then(|| g.clone()),
                        needs[1].then(|| reduce_to(g, bk, b_shape)),
                    ]
                })
            }
            Elementwise::Sub => {
                let out = apply_binary(&av, &bv, bk, |x, y| x - y);
                self.record(out, &[a, b], move |g, needs| {
                    vec![
                        needs[0].then(|| g.clone()),
                        needs[1].then(|| {
                            let mut r = reduce_to(g, bk, b_shape);
                            r.scale_inplace(-T::ONE);
                            r
                        }),
                    ]
                })
            }
            Elementwise::Mul => {
                let out = apply_binary(&av, &bv, bk, |x, y| x * y);
                self.record(out, &[a, b], move |g, needs| {
                    let ga = needs[0].then(|| apply_binary(g, &bv, bk, |x, y| x * y));
                    let gb = needs[1].then(|| {
                        let prod = g.zip_map(&av, |x, y| x * y);
                        reduce_to(&prod, bk, b_shape)
                    });
                    vec![ga, gb]
                })
            }
        }
    }

    pub fn add(&self, a: &Tensor4<T>, b: &Tensor4<T>) -> Result<Tensor4<T>> {
        self.elementwise(a, b, Elementwise::Add)
    }

    pub fn sub(&self, a: &Tensor4<T>, b: &Tensor4<T>) -> Result<Tensor4<T>> {
        self.elementwise(a, b, Elementwise::Sub)
    }

    pub fn mul(&self, a: &Tensor4<T>, b: &Tensor4<T>) -> Result<Tensor4<T>> {
        self.elementwise(a, b, Elementwise::Mul)
    }

    /// Multiply by a constant.
    pub fn scale(&self, a: &Tensor4<T>, s: T) -> Result<Tensor4<T>> {
        let out = a.value().map(|v| v * s);
        self.record(out, &[a], move |g, _| vec![Some(g.map(|v| v * s))])
    }

    /// Sum of all elements as a `(1,1,1,1)` tensor.
    pub fn sum(&self, a: &Tensor4<T>) -> Result<Tensor4<T>> {
        let shape = a.shape();
        let out = Array4::scalar(a.value().sum());
        self.record(out, &[a], move |g, _| vec![Some(Array4::full(shape, g.item()))])
    }

    pub fn mean(&self, a: &Tensor4<T>) -> Result<Tensor4<T>> {
        let n = T::from_usize(a.shape().numel());
        let s = self.sum(a)?;
        self.scale(&s, T::ONE / n)
    }

    /// `sum(a * weights)` against a constant weight array.
    pub fn weighted_sum(&self, a: &Tensor4<T>, weights: &Array4<T>) -> Result<Tensor4<T>> {
        if a.shape() != weights.shape() {
            return Err(Error::ShapeMismatch {
                op: "weighted_sum",
                lhs: a.shape(),
                rhs: weights.shape(),
            });
        }
        let total: T = a
            .value()
            .data()
            .iter()
            .zip(weights.data())
            .map(|(&x, &r)| x * r)
            .sum();
        let w = weights.clone();
        self.record(Array4::scalar(total), &[a], move |g, _| {
            let gv = g.item();
            vec![Some(w.map(|r| r * gv))]
        })
    }

    /// Reorder axes: output axis `i` is input axis `perm[i]`.
    pub fn permute(&self, a: &Tensor4<T>, perm: [usize; 4]) -> Result<Tensor4<T>> {
        let mut seen = [false; 4];
        for &p in &perm {
            if p >= 4 || seen[p] {
                return Err(Error::invalid("permute", format!("{perm:?} is not a permutation")));
            }
            seen[p] = true;
        }
        let out = permute_array(a.value(), perm);
        let mut inv = [0usize; 4];
        for (i, &p) in perm.iter().enumerate() {
            inv[p] = i;
        }
        self.record(out, &[a], move |g, _| vec![Some(permute_array(g, inv))])
    }

    /// Softmax along the last (width) axis, with max subtraction.
    pub fn softmax_lastdim(&self, a: &Tensor4<T>) -> Result<Tensor4<T>> {
        let av = a.value();
        if !av.all_finite() {
            return Err(Error::NonFinite("softmax_lastdim"));
        }
        let w = av.shape().w;
        let mut out = av.clone();
        if w > 0 {
            for row in out.data_mut().chunks_mut(w) {
                let m = row.iter().copied().fold(row[0], T::max);
                let mut z = T::ZERO;
                for v in row.iter_mut() {
                    *v = (*v - m).exp();
                    z += *v;
                }
                for v in row.iter_mut() {
                    *v /= z;
                }
            }
        }
        let y = std::sync::Arc::new(out.clone());
        self.record(out, &[a], move |g, _| {
            let mut gx = Array4::zeros(g.shape());
            if w > 0 {
                for ((gr, yr), xr) in g
                    .data()
                    .chunks(w)
                    .zip(y.data().chunks(w))
                    .zip(gx.data_mut().chunks_mut(w))
                {
                    let dot: T = gr.iter().zip(yr).map(|(&a, &b)| a * b).sum();
                    for ((x, &gv), &yv) in xr.iter_mut().zip(gr).zip(yr) {
                        *x = yv * (gv - dot);
                    }
                }
            }
            vec![Some(gx)]
        })
    }

    /// Independent matrix products per `(n, h)` slice:
    /// `(n, h, w1, k) x (n, h, k, w2) -> (n, h, w1, w2)`.
    pub fn batched_row_matmul(&self, a: &Tensor4<T>, b: &Tensor4<T>) -> Result<Tensor4<T>> {
        let (sa, sb) = (a.shape(), b.shape());
        if sa.n != sb.n || sa.c != sb.c || sa.w != sb.h {
            return Err(Error::ShapeMismatch {
                op: "batched_row_matmul",
                lhs: sa,
                rhs: sb,
            });
        }
        let (m, k, n) = (sa.h, sa.w, sb.w);
        let out_shape = Shape::new(sa.n, sa.c, m, n);
        let mut out = Array4::zeros(out_shape);
        let slices = sa.n * sa.c;
        for s in 0..slices {
            T::gemm(
                m,
                k,
                n,
                T::ONE,
                &a.value().data()[s * m * k..(s + 1) * m * k],
                k,
                1,
                &b.value().data()[s * k * n..(s + 1) * k * n],
                n,
                1,
                T::ZERO,
                &mut out.data_mut()[s * m * n..(s + 1) * m * n],
                n,
                1,
            );
        }
        let (av, bv) = (a.shared_value(), b.shared_value());
        self.record(out, &[a, b], move |g, needs| {
            let ga = needs[0].then(|| {
                // g (m x n) . b^T (n x k)
                let mut ga = Array4::zeros(sa);
                for s in 0..slices {
                    T::gemm(
                        m,
                        n,
                        k,
                        T::ONE,
                        &g.data()[s * m * n..(s + 1) * m * n],
                        n,
                        1,
                        &bv.data()[s * k * n..(s + 1) * k * n],
                        1,
                        n,
                        T::ZERO,
                        &mut ga.data_mut()[s * m * k..(s + 1) * m * k],
                        k,
                        1,
                    );
                }
                ga
            });
            let gb = needs[1].then(|| {
                // a^T (k x m) . g (m x n)
                let mut gb = Array4::zeros(sb);
                for s in 0..slices {
                    T::gemm(
                        k,
                        m,
                        n,
                        T::ONE,
                        &av.data()[s * m * k..(s + 1) * m * k],
                        1,
                        k,
                        &g.data()[s * m * n..(s + 1) * m * n],
                        n,
                        1,
                        T::ZERO,
                        &mut gb.data_mut()[s * k * n..(s + 1) * k * n],
                        n,
                        1,
                    );
                }
                gb
            });
            vec![ga, gb]
        })
    }

    /// Mean absolute error between `pred` and `target` as a scalar. The
    /// subgradient at an exactly-zero residual is 0.
    pub fn l1_mean(&self, pred: &Tensor4<T>, target: &Tensor4<T>) -> Result<Tensor4<T>> {
        if pred.shape() != target.shape() {
            return Err(Error::ShapeMismatch {
                op: "l1_mean",
                lhs: pred.shape(),
                rhs: target.shape(),
            });
        }
        let count = T::from_usize(pred.shape().numel());
        let total: T = pred
            .value()
            .data()
            .iter()
            .zip(target.value().data())
            .map(|(&p, &t)| (p - t).abs())
            .sum();
        let (pv, tv) = (pred.shared_value(), target.shared_value());
        self.record(Array4::scalar(total / count), &[pred, target], move |g, needs| {
            let step = g.item() / count;
            let sign = pv.zip_map(&tv, |p, t| {
                if p > t {
                    step
                } else if p < t {
                    -step
                } else {
                    T::ZERO
                }
            });
            let gt = needs[1].then(|| sign.map(|v| -v));
            vec![needs[0].then_some(sign), gt]
        })
    }
}

impl<T: Real> Tape<T> {
    /// Stack tensors with matching `(c, h, w)` along the batch axis.
    pub fn concat_batch(&self, parts: &[&Tensor4<T>]) -> Result<Tensor4<T>> {
        let values: Vec<&Array4<T>> = parts.iter().map(|t| t.value()).collect();
        let out = Array4::concat_batch(&values)?;
        let sizes: Vec<usize> = parts.iter().map(|t| t.shape().numel()).collect();
        let shapes: Vec<Shape> = parts.iter().map(|t| t.shape()).collect();
        self.record(out, parts, move |g, needs| {
            let mut offset = 0;
            sizes
                .iter()
                .zip(&shapes)
                .zip(needs)
                .map(|((&len, &shape), &need)| {
                    let chunk = &g.data()[offset..offset + len];
                    offset += len;
                    need.then(|| Array4::from_vec(shape, chunk.to_vec()).expect("chunk size"))
                })
                .collect()
        })
    }

    /// Items `start..start + len` of the batch axis.
    pub fn slice_batch(&self, x: &Tensor4<T>, start: usize, len: usize) -> Result<Tensor4<T>> {
        let s = x.shape();
        if start + len > s.n || len == 0 {
            return Err(Error::invalid("slice_batch", format!("items {start}..{} of {s}", start + len)));
        }
        let item = s.c * s.plane();
        let out = Array4::from_vec(
            Shape::new(len, s.c, s.h, s.w),
            x.value().data()[start * item..(start + len) * item].to_vec(),
        )?;
        self.record(out, &[x], move |g, _| {
            let mut gx = Array4::zeros(s);
            gx.data_mut()[start * item..(start + len) * item].copy_from_slice(g.data());
            vec![Some(gx)]
        })
    }

    /// Identity forward, negated adjoint. Only used to inject a known-wrong
    /// gradient when exercising the gradient checker.
    pub fn flip_gradient(&self, x: &Tensor4<T>) -> Result<Tensor4<T>> {
        self.record(x.value().clone(), &[x], |g, _| vec![Some(g.map(|v| -v))])
    }
}

pub(crate) fn permute_array<T: Real>(a: &Array4<T>, perm: [usize; 4]) -> Array4<T> {
    let sd = a.shape().dims();
    let od = [sd[perm[0]], sd[perm[1]], sd[perm[2]], sd[perm[3]]];
    let out_shape = Shape::from_dims(od);
    // Input strides, then strides seen from each output axis.
    let istr = [sd[1] * sd[2] * sd[3], sd[2] * sd[3], sd[3], 1];
    let ps = [istr[perm[0]], istr[perm[1]], istr[perm[2]], istr[perm[3]]];
    let src = a.data();
    let mut data = Vec::with_capacity(out_shape.numel());
    for i0 in 0..od[0] {
        for i1 in 0..od[1] {
            for i2 in 0..od[2] {
                let base = i0 * ps[0] + i1 * ps[1] + i2 * ps[2];
                for i3 in 0..od[3] {
                    data.push(src[base + i3 * ps[3]]);
                }
            }
        }
    }
    Array4::from_vec(out_shape, data).expect("permute preserves element count")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probe;
    use crate::tensor::gradcheck::{check_gradients, GradCheckConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn arr(shape: Shape, v: &[f64]) -> Array4<f64> {
        Array4::from_vec(shape, v.to_vec()).unwrap()
    }

    fn random(shape: Shape, rng: &mut ChaCha8Rng) -> Array4<f64> {
        Array4::from_fn(shape, |_, _, _, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn mul_and_add_identity() {
        let tape = Tape::<f64>::new();
        let a = Tensor4::constant(arr(Shape::new(1, 1, 1, 2), &[2., 3.]));
        let b = Tensor4::constant(arr(Shape::new(1, 1, 1, 2), &[4., 5.]));
        assert_eq!(tape.mul(&a, &b).unwrap().value().data(), &[8., 15.]);
        let z = Tensor4::constant(Array4::zeros(Shape::new(1, 1, 1, 2)));
        assert_eq!(tape.add(&a, &z).unwrap().value(), a.value());
    }

    #[test]
    fn broadcast_mismatch_reports_both_shapes() {
        let tape = Tape::<f32>::new();
        let a = Tensor4::constant(Array4::zeros(Shape::new(2, 3, 4, 4)));
        let b = Tensor4::constant(Array4::zeros(Shape::new(1, 3, 4, 1)));
        let err = tape.add(&a, &b).unwrap_err().to_string();
        assert!(err.contains("(2,3,4,4)") && err.contains("(1,3,4,1)"), "{err}");
    }

    #[test]
    fn channel_broadcast_mul() {
        let tape = Tape::<f64>::new();
        let a = Tensor4::constant(Array4::ones(Shape::new(2, 2, 1, 2)));
        let b = Tensor4::constant(arr(Shape::new(1, 2, 1, 1), &[3., -1.]));
        let y = tape.mul(&a, &b).unwrap();
        assert_eq!(y.value().data(), &[3., 3., -1., -1., 3., 3., -1., -1.]);
    }

    #[test]
    fn softmax_examples() {
        let tape = Tape::<f64>::new();
        let x = Tensor4::constant(arr(Shape::new(1, 1, 1, 3), &[0., 0., 0.]));
        let y = tape.softmax_lastdim(&x).unwrap();
        for &v in y.value().data() {
            assert!((v - 1.0 / 3.0).abs() < 1e-12);
        }
        let x = Tensor4::constant(arr(Shape::new(1, 1, 1, 1), &[7.5]));
        assert_eq!(tape.softmax_lastdim(&x).unwrap().value().data(), &[1.0]);
        // Hand-evaluated: 1/(1+e) = 0.268941..., e/(1+e) = 0.731058...
        let x = Tensor4::constant(arr(Shape::new(1, 1, 1, 2), &[1., 2.]));
        let y = tape.softmax_lastdim(&x).unwrap();
        assert!((y.value().data()[0] - 0.268_941_421_369_995).abs() < 1e-12);
        assert!((y.value().data()[1] - 0.731_058_578_630_005).abs() < 1e-12);
    }

    #[test]
    fn softmax_rejects_non_finite() {
        let tape = Tape::<f32>::new();
        let x = Tensor4::constant(Array4::from_vec(Shape::new(1, 1, 1, 2), vec![1.0, f32::NAN]).unwrap());
        assert!(matches!(tape.softmax_lastdim(&x), Err(Error::NonFinite(_))));
    }

    fn naive_row_matmul(a: &Array4<f64>, b: &Array4<f64>) -> Array4<f64> {
        let (sa, sb) = (a.shape(), b.shape());
        Array4::from_fn(Shape::new(sa.n, sa.c, sa.h, sb.w), |n, h, i, j| {
            let mut acc = 0.0;
            for k in 0..sa.w {
                acc += a.get(n, h, i, k) * b.get(n, h, k, j);
            }
            acc
        })
    }

    #[test]
    fn row_matmul_against_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let tape = Tape::<f64>::new();
        for _ in 0..10 {
            let a = random(Shape::new(2, 3, 2, 3), &mut rng);
            let b = random(Shape::new(2, 3, 3, 2), &mut rng);
            let y = tape
                .batched_row_matmul(&Tensor4::constant(a.clone()), &Tensor4::constant(b.clone()))
                .unwrap();
            assert!(y.value().max_abs_diff(&naive_row_matmul(&a, &b)) < 1e-6);
        }
        let eye = Array4::from_fn(Shape::new(1, 2, 3, 3), |_, _, i, j| if i == j { 1.0 } else { 0.0 });
        let m = random(Shape::new(1, 2, 3, 4), &mut rng);
        let y = tape
            .batched_row_matmul(&Tensor4::constant(eye), &Tensor4::constant(m.clone()))
            .unwrap();
        assert_eq!(y.value(), &m);
        let y = tape
            .batched_row_matmul(
                &Tensor4::constant(arr(Shape::new(1, 1, 1, 1), &[3.])),
                &Tensor4::constant(arr(Shape::new(1, 1, 1, 1), &[-2.])),
            )
            .unwrap();
        assert_eq!(y.value().data(), &[-6.]);
    }

    #[test]
    fn row_matmul_rejects_inner_mismatch() {
        let tape = Tape::<f32>::new();
        let a = Tensor4::constant(Array4::zeros(Shape::new(1, 2, 3, 4)));
        let b = Tensor4::constant(Array4::zeros(Shape::new(1, 2, 3, 4)));
        assert!(tape.batched_row_matmul(&a, &b).is_err());
    }

    #[test]
    fn permute_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random(Shape::new(2, 3, 4, 5), &mut rng);
        let p = permute_array(&a, [0, 2, 3, 1]);
        assert_eq!(p.shape(), Shape::new(2, 4, 5, 3));
        assert_eq!(p.get(1, 2, 3, 0), a.get(1, 0, 2, 3));
        assert_eq!(permute_array(&p, [0, 3, 1, 2]), a);
    }

    #[test]
    fn l1_values() {
        let tape = Tape::<f64>::new();
        let p = Tensor4::constant(arr(Shape::new(1, 1, 1, 3), &[1., 2., 3.]));
        assert_eq!(tape.l1_mean(&p, &p).unwrap().value().item(), 0.0);
        let t = Tensor4::constant(p.value().map(|v| v + 0.5));
        assert_eq!(tape.l1_mean(&p, &t).unwrap().value().item(), 0.5);
    }

    #[test]
    fn primitive_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cfg = GradCheckConfig::default();
        for trial in 0..20 {
            let s = Shape::new(
                rng.gen_range(1..3),
                rng.gen_range(1..4),
                rng.gen_range(1..4),
                rng.gen_range(1..5),
            );
            let a = random(s, &mut rng);
            let b = random(s, &mut rng);
            let ch = random(Shape::new(1, s.c, 1, 1), &mut rng);
            let k = rng.gen_range(1..4);
            let m1 = random(Shape::new(s.n, s.c, s.h, k), &mut rng);
            let m2 = random(Shape::new(s.n, s.c, k, s.w), &mut rng);

            let r = check_gradients::<f64, _>(
                &probe!(|t, x| {
                let y = t.mul(&x[0], &x[1])?;
                t.add(&y, &x[0])
            }),
                &[a.clone(), b.clone()],
                &cfg,
                trial,
            )
            .unwrap();
            assert!(r.max_rel_err < 1e-5, "mul/add {r:?}");

            let r = check_gradients::<f64, _>(
                &probe!(|t, x| {
                let y = t.mul(&x[0], &x[1])?;
                t.sub(&y, &x[1])
            }),
                &[a.clone(), ch],
                &cfg,
                trial,
            )
            .unwrap();
            assert!(r.max_rel_err < 1e-5, "broadcast {r:?}");

            let r = check_gradients::<f64, _>(
                &probe!(|t, x| {
                t.softmax_lastdim(&x[0])
            }),
                &[a.clone()],
                &cfg,
                trial,
            )
            .unwrap();
            assert!(r.max_rel_err < 1e-5, "softmax {r:?}");

            let r = check_gradients::<f64, _>(
                &probe!(|t, x| {
                t.batched_row_matmul(&x[0], &x[1])
            }),
                &[m1, m2],
                &cfg,
                trial,
            )
            .unwrap();
            assert!(r.max_rel_err < 1e-5, "matmul {r:?}");

            let r = check_gradients::<f64, _>(
                &probe!(|t, x| {
                t.permute(&x[0], [3, 1, 0, 2])
            }),
                &[a.clone()],
                &cfg,
                trial,
            )
            .unwrap();
            assert!(r.max_rel_err < 1e-5, "permute {r:?}");

            let r = check_gradients::<f64, _>(
                &probe!(|t, x| {
                let l = t.l1_mean(&x[0], &x[1])?;
                t.scale(&l, T::from_f64(3.0))
            }),
                &[a, b],
                &cfg,
                trial,
            )
            .unwrap();
            assert!(r.max_rel_err < 1e-5, "l1 {r:?}");
        }
    }

    #[test]
    fn single_precision_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let cfg = GradCheckConfig::default();
        for trial in 0..20 {
            let s = Shape::new(1, rng.gen_range(1..4), rng.gen_range(1..4), rng.gen_range(2..6));
            let a = random(s, &mut rng);
            let b = random(s, &mut rng);
            let r = check_gradients::<f32, _>(
                &probe!(|t, x| {
                let y = t.mul(&x[0], &x[1])?;
                t.softmax_lastdim(&y)
            }),
                &[a, b],
                &cfg,
                trial,
            )
            .unwrap();
            assert!(r.max_rel_err < 1e-3, "{r:?}");
        }
    }
}
