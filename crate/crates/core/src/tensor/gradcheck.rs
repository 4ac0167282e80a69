//! Central-difference gradient oracle.
//!
//! [`finite_diff_grad`] is the raw oracle. [`check_gradients`] scalarizes a
//! tensor-valued [`Probe`] with a fixed random projection, runs the tape's
//! backward pass at precision `T`, and compares every input gradient against
//! central differences evaluated in `f64`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Array4, Fault, Real, Tape, Tensor4};
use crate::error::Result;

/// A differentiable function of several tensors that can be evaluated at any
/// precision.
pub trait Probe {
    fn eval<T: Real>(&self, tape: &Tape<T>, inputs: &[Tensor4<T>]) -> Result<Tensor4<T>>;
}

/// Build a capture-free [`Probe`] from a closure-like body.
#[macro_export]
macro_rules! probe {
    (|$tape:ident, $x:ident| $body:expr) => {{
        struct __Probe;
        impl $crate::tensor::gradcheck::Probe for __Probe {
            fn eval<T: $crate::tensor::Real>(
                &self,
                $tape: &$crate::tensor::Tape<T>,
                $x: &[$crate::tensor::Tensor4<T>],
            ) -> $crate::Result<$crate::tensor::Tensor4<T>> {
                $body
            }
        }
        __Probe
    }};
}

/// `(f(x + eps e_i) - f(x - eps e_i)) / 2 eps` for every element `i`.
pub fn finite_diff_grad<T: Real>(
    mut f: impl FnMut(&Array4<T>) -> T,
    x: &Array4<T>,
    eps: T,
) -> Array4<T> {
    let mut probe = x.clone();
    let mut grad = Array4::zeros(x.shape());
    let two_eps = eps + eps;
    for i in 0..x.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + eps;
        let hi = f(&probe);
        probe.data_mut()[i] = orig - eps;
        let lo = f(&probe);
        probe.data_mut()[i] = orig;
        grad.data_mut()[i] = (hi - lo) / two_eps;
    }
    grad
}

#[derive(Clone, Debug)]
pub struct GradCheckConfig {
    /// Finite-difference step, applied in `f64`.
    pub eps: f64,
    /// Elements smaller than this fraction of the largest oracle gradient
    /// are compared against that floor instead of their own magnitude.
    pub floor_frac: f64,
    pub abs_floor: f64,
    /// Fault injected into the analytic pass only.
    pub fault: Option<Fault>,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            eps: 1e-5,
            floor_frac: 1e-2,
            abs_floor: 1e-6,
            fault: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    /// Input index and flat element index of the worst element.
    pub worst: (usize, usize),
    pub per_input: Vec<f64>,
    pub elements_checked: usize,
}

/// Relative error of `analytic` against `numeric`, floored per
/// [`GradCheckConfig`].
pub fn relative_error(analytic: &Array4<f64>, numeric: &Array4<f64>, cfg: &GradCheckConfig) -> (f64, usize) {
    let peak = numeric.data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = (cfg.floor_frac * peak).max(cfg.abs_floor);
    let mut worst = (0.0, 0);
    for (i, (&a, &n)) in analytic.data().iter().zip(numeric.data()).enumerate() {
        let err = (a - n).abs() / a.abs().max(n.abs()).max(floor);
        if err > worst.0 {
            worst = (err, i);
        }
    }
    worst
}

/// Gradient of `sum(probe(inputs) * R)` for a seeded random `R`, analytic at
/// precision `T` versus `f64` central differences.
pub fn check_gradients<T: Real, P: Probe>(
    probe: &P,
    inputs: &[Array4<f64>],
    cfg: &GradCheckConfig,
    seed: u64,
) -> Result<GradCheckReport> {
    // Projection weights, shaped after one reference evaluation.
    let reference = {
        let tape = Tape::<f64>::new();
        let xs: Vec<_> = inputs.iter().map(|a| Tensor4::constant(a.clone())).collect();
        probe.eval(&tape, &xs)?.into_array()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let weights = Array4::from_fn(reference.shape(), |_, _, _, _| rng.gen_range(-1.0..1.0));

    let analytic: Vec<Array4<f64>> = {
        let tape = Tape::<T>::with_fault(cfg.fault);
        let xs: Vec<_> = inputs.iter().map(|a| tape.leaf(a.cast::<T>(), true)).collect();
        let out = probe.eval(&tape, &xs)?;
        let loss = tape.weighted_sum(&out, &weights.cast::<T>())?;
        let grads = tape.backward(&loss)?;
        xs.iter()
            .map(|x| grads.get(x).expect("leaf gradient").cast::<f64>())
            .collect()
    };

    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst: (0, 0),
        per_input: Vec::with_capacity(inputs.len()),
        elements_checked: 0,
    };
    for (idx, input) in inputs.iter().enumerate() {
        let mut failure = None;
        let numeric = finite_diff_grad(
            |x: &Array4<f64>| {
                let tape = Tape::<f64>::new();
                let xs: Vec<_> = inputs
                    .iter()
                    .enumerate()
                    .map(|(j, a)| Tensor4::constant(if j == idx { x.clone() } else { a.clone() }))
                    .collect();
                match probe.eval(&tape, &xs).and_then(|o| tape.weighted_sum(&o, &weights)) {
                    Ok(v) => v.value().item(),
                    Err(e) => {
                        failure.get_or_insert(e);
                        f64::NAN
                    }
                }
            },
            input,
            cfg.eps,
        );
        if let Some(e) = failure {
            return Err(e);
        }
        let (err, at) = relative_error(&analytic[idx], &numeric, cfg);
        report.per_input.push(err);
        report.elements_checked += input.len();
        if idx == 0 || err > report.max_rel_err {
            report.max_rel_err = err;
            report.worst = (idx, at);
        }
    }
    Ok(report)
}
