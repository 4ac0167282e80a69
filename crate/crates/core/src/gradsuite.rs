//! Layer-by-layer and end-to-end gradient checks against central
//! differences, shared by the test suite and the `gradcheck` subcommand.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{build_model, infer, DropPlan, Model, ModelConfig};
use crate::nafblock::{DropDecision, NafBlockParams};
use crate::params::{Bound, ParamStore};
use crate::rng::stream;
use crate::scam::ScamParams;
use crate::tensor::gradcheck::{check_gradients, GradCheckConfig, Probe};
use crate::tensor::{Array4, Fault, Real, Shape, Tape, Tensor4};
use crate::tlsc::PoolingPolicy;
use crate::train::l1_loss;

/// Precision of the analytic pass. The oracle always runs in `f64`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Precision {
    F32,
    F64,
}

impl Precision {
    pub fn tolerance(self) -> f64 {
        match self {
            Precision::F32 => 1e-3,
            Precision::F64 => 1e-5,
        }
    }
}

impl FromStr for Precision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "32" | "f32" => Ok(Precision::F32),
            "64" | "f64" => Ok(Precision::F64),
            _ => Err(Error::Config(format!("precision must be 32 or 64, got {s:?}"))),
        }
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Precision::F32 => "32",
            Precision::F64 => "64",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Check {
    Conv2d,
    DepthwiseConv2d,
    LayerNorm2d,
    SimpleGate,
    ChannelAttention,
    ChannelAttentionLocal,
    PixelShufflePath,
    Scam,
    NafBlock,
    EndToEnd,
}

impl Check {
    pub const ALL: [Check; 10] = [
        Check::Conv2d,
        Check::DepthwiseConv2d,
        Check::LayerNorm2d,
        Check::SimpleGate,
        Check::ChannelAttention,
        Check::ChannelAttentionLocal,
        Check::PixelShufflePath,
        Check::Scam,
        Check::NafBlock,
        Check::EndToEnd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Check::Conv2d => "conv2d",
            Check::DepthwiseConv2d => "conv2d_depthwise",
            Check::LayerNorm2d => "layernorm2d",
            Check::SimpleGate => "simple_gate",
            Check::ChannelAttention => "channel_attention",
            Check::ChannelAttentionLocal => "channel_attention_tlsc",
            Check::PixelShufflePath => "pixel_shuffle_path",
            Check::Scam => "scam",
            Check::NafBlock => "nafblock",
            Check::EndToEnd => "nafssr_micro",
        }
    }
}

#[derive(Clone, Debug)]
pub struct CheckOutcome {
    pub check: Check,
    pub max_rel_err: f64,
    pub tolerance: f64,
    pub elements: usize,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.max_rel_err < self.tolerance
    }
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<24} max_rel_err {:.3e} (tol {:.0e}, {} elements)",
            if self.passed() { "PASS" } else { "FAIL" },
            self.check.name(),
            self.max_rel_err,
            self.tolerance,
            self.elements
        )
    }
}

/// Micro model checked end to end.
pub fn micro_config() -> ModelConfig {
    ModelConfig::new(8, 2, 2)
}

/// Spatial size of the micro model's low-resolution inputs.
pub const MICRO_INPUT: (usize, usize) = (8, 24);

struct CheckProbe {
    check: Check,
    /// Leading inputs that are data rather than named parameters.
    data: usize,
    names: Vec<String>,
    model: ModelConfig,
    targets: Vec<Array4<f64>>,
}

impl Probe for CheckProbe {
    fn eval<T: Real>(&self, tape: &Tape<T>, x: &[Tensor4<T>]) -> Result<Tensor4<T>> {
        let bound = Bound::from_parts(self.names.iter().cloned(), x[self.data..].iter().cloned());
        match self.check {
            Check::Conv2d => tape.conv2d(&x[0], &bound.conv("conv", 1)?),
            Check::DepthwiseConv2d => tape.conv2d(&x[0], &bound.conv("conv", x[0].shape().c)?),
            Check::LayerNorm2d => tape.layernorm2d(&x[0], &bound.layernorm("ln")?),
            Check::SimpleGate => tape.simple_gate(&x[0]),
            Check::ChannelAttention => tape.simplified_channel_attention(&x[0], &bound.conv("conv", 1)?, &PoolingPolicy::Global),
            Check::ChannelAttentionLocal => tape.simplified_channel_attention(
                &x[0],
                &bound.conv("conv", 1)?,
                &PoolingPolicy::Local { kh: 2, kw: 3 },
            ),
            Check::PixelShufflePath => {
                let res = tape.pixel_shuffle(&tape.conv2d(&x[0], &bound.conv("head", 1)?)?, 2)?;
                tape.add(&tape.bilinear_resize(&x[1], 2)?, &res)
            }
            Check::Scam => {
                let p = ScamParams::bind(&bound, "scam")?;
                let (l, r) = tape.scam_forward(&x[0], &x[1], &p, 1.0)?;
                tape.concat_batch(&[&l, &r])
            }
            Check::NafBlock => {
                let p = NafBlockParams::bind(&bound, "block")?;
                tape.nafblock_forward(&x[0], &p, DropDecision::Kept { p: 0.25 }, &PoolingPolicy::Global)
            }
            Check::EndToEnd => {
                let model = Model::from_bound(&self.model, &bound)?;
                let drops = DropPlan::inference(self.model.n_blocks);
                let (sl, sr) = model.forward(tape, &x[0], &x[1], &drops, &PoolingPolicy::Global)?;
                let hl = Tensor4::constant(self.targets[0].cast());
                let hr = Tensor4::constant(self.targets[1].cast());
                l1_loss(tape, &sl, &sr, &hl, &hr)
            }
        }
    }
}

fn uniform(shape: Shape, lo: f64, hi: f64, rng: &mut impl Rng) -> Array4<f64> {
    Array4::from_fn(shape, |_, _, _, _| rng.gen_range(lo..hi))
}

/// Replace every value with a draw from `[-0.5, 0.5)`.
fn scramble(store: &mut ParamStore<f64>, rng: &mut impl Rng) {
    for (_, e) in store.iter_mut() {
        e.value = uniform(e.value.shape(), -0.5, 0.5, rng);
    }
}

/// Inputs and probe for one check. Deterministic in `seed`.
fn setup(check: Check, seed: u64) -> Result<(CheckProbe, Vec<Array4<f64>>)> {
    let mut rng = stream(seed, check.name(), 0);
    let mut store = ParamStore::<f64>::new();
    let mut data = Vec::new();
    let mut targets = Vec::new();
    let model = micro_config();
    match check {
        Check::Conv2d => {
            data.push(uniform(Shape::new(1, 3, 5, 6), -1.0, 1.0, &mut rng));
            store.init_conv("conv", 3, 4, 3, 1, &mut rng)?;
        }
        Check::DepthwiseConv2d => {
            data.push(uniform(Shape::new(1, 4, 5, 6), -1.0, 1.0, &mut rng));
            store.init_conv("conv", 4, 4, 3, 4, &mut rng)?;
        }
        Check::LayerNorm2d => {
            data.push(uniform(Shape::new(2, 4, 3, 5), -1.0, 1.0, &mut rng));
            store.init_layernorm("ln", 4)?;
        }
        Check::SimpleGate => data.push(uniform(Shape::new(1, 6, 3, 4), -1.0, 1.0, &mut rng)),
        Check::ChannelAttention | Check::ChannelAttentionLocal => {
            data.push(uniform(Shape::new(1, 4, 3, 5), -1.0, 1.0, &mut rng));
            store.init_conv("conv", 4, 4, 1, 1, &mut rng)?;
        }
        Check::PixelShufflePath => {
            data.push(uniform(Shape::new(1, 4, 3, 4), -1.0, 1.0, &mut rng));
            data.push(uniform(Shape::new(1, 3, 3, 4), 0.0, 1.0, &mut rng));
            store.init_conv("head", 4, 12, 3, 1, &mut rng)?;
        }
        Check::Scam => {
            // Four channels: LayerNorm over two is nearly singular whenever
            // the pair is close, which swamps the stencil.
            data.push(uniform(Shape::new(1, 4, 2, 3), -1.0, 1.0, &mut rng));
            data.push(uniform(Shape::new(1, 4, 2, 3), -1.0, 1.0, &mut rng));
            ScamParams::init(&mut store, "scam", 4, &mut rng)?;
        }
        Check::NafBlock => {
            data.push(uniform(Shape::new(1, 4, 3, 4), -1.0, 1.0, &mut rng));
            NafBlockParams::init(&mut store, "block", 4, &mut rng)?;
        }
        Check::EndToEnd => {
            let (h, w) = MICRO_INPUT;
            let s = model.scale;
            data.push(uniform(Shape::new(1, 3, h, w), 0.0, 1.0, &mut rng));
            data.push(uniform(Shape::new(1, 3, h, w), 0.0, 1.0, &mut rng));
            store = build_model(&model, seed)?;
            // Wake the zero-initialized scales so every path carries gradient.
            for (name, e) in store.iter_mut() {
                if name.ends_with(".beta") || name.contains(".gamma") {
                    e.value = uniform(e.value.shape(), -0.5, 0.5, &mut rng);
                }
            }
            // Keep every residual at least 0.05 from the L1 kink so the
            // finite-difference stencil never straddles it.
            let (sl, sr) = infer(&model, &store, &data[0], &data[1], &PoolingPolicy::Global)?;
            for out in [sl, sr] {
                targets.push(out.map(|v| {
                    let d = rng.gen_range(0.05..0.3);
                    if rng.gen_bool(0.5) {
                        v + d
                    } else {
                        v - d
                    }
                }));
            }
            debug_assert_eq!(targets[0].shape(), Shape::new(1, 3, h * s, w * s));
        }
    }
    if check != Check::EndToEnd {
        scramble(&mut store, &mut rng);
    }
    let names: Vec<String> = store.names().map(String::from).collect();
    let probe = CheckProbe {
        check,
        data: data.len(),
        names,
        model,
        targets,
    };
    let mut inputs = data;
    inputs.extend(store.iter().map(|(_, e)| e.value.clone()));
    Ok((probe, inputs))
}

/// Run one check at `precision`, optionally with an injected fault.
pub fn run_check(check: Check, precision: Precision, fault: Option<Fault>, seed: u64) -> Result<CheckOutcome> {
    let (probe, inputs) = setup(check, seed)?;
    let cfg = GradCheckConfig {
        fault,
        // The full network accumulates more rounding than a single layer;
        // a wider stencil keeps that noise below the truncation error.
        eps: if check == Check::EndToEnd { 1e-4 } else { 1e-5 },
        ..GradCheckConfig::default()
    };
    let report = match precision {
        Precision::F32 => check_gradients::<f32, _>(&probe, &inputs, &cfg, seed)?,
        Precision::F64 => check_gradients::<f64, _>(&probe, &inputs, &cfg, seed)?,
    };
    Ok(CheckOutcome {
        check,
        max_rel_err: report.max_rel_err,
        tolerance: precision.tolerance(),
        elements: report.elements_checked,
    })
}

/// Every check in [`Check::ALL`] order.
pub fn run_suite(precision: Precision, fault: Option<Fault>, seed: u64) -> Result<Vec<CheckOutcome>> {
    Check::ALL.iter().map(|&c| run_check(c, precision, fault, seed)).collect()
}
