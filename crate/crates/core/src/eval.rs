//! Evaluation protocol, self-ensemble and multi-checkpoint averaging.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::checkpoint::Checkpoint;
use crate::data::{AugmentDraw, Manifest, StereoSample};
use crate::error::{Error, Result};
use crate::metrics::{psnr, ssim};
use crate::model::{infer, ModelConfig};
use crate::params::ParamStore;
use crate::tensor::{Array4, Real};
use crate::tlsc::PoolingPolicy;

/// Columns removed from the left edge in [`Mode::LeftCrop64`].
pub const LEFT_CROP: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Left view only, with its left 64 columns removed.
    LeftCrop64,
    /// Mean of the left and right per-view scores.
    PairAverage,
    /// Scores of the averaged image `(left + right) / 2`.
    PairJoint,
}

impl Mode {
    pub fn label(self) -> &'static str {
        match self {
            Mode::LeftCrop64 => "left_crop64",
            Mode::PairAverage => "pair_average",
            Mode::PairJoint => "pair_joint",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "left_crop64" => Ok(Mode::LeftCrop64),
            "pair_average" => Ok(Mode::PairAverage),
            "pair_joint" => Ok(Mode::PairJoint),
            _ => Err(Error::Config(format!(
                "unknown metric mode {s:?} (left_crop64, pair_average, pair_joint)"
            ))),
        }
    }

    pub const DEFAULT: [Mode; 2] = [Mode::LeftCrop64, Mode::PairAverage];
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ImageScore {
    pub id: String,
    pub mode: Mode,
    pub psnr: f64,
    pub ssim: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricReport {
    pub dataset: String,
    pub scale: usize,
    pub policy: String,
    pub self_ensemble: bool,
    pub records: Vec<ImageScore>,
}

impl MetricReport {
    /// Mean `(psnr, ssim)` over the records of `mode`.
    pub fn mean(&self, mode: Mode) -> Option<(f64, f64)> {
        let rows: Vec<_> = self.records.iter().filter(|r| r.mode == mode).collect();
        if rows.is_empty() {
            return None;
        }
        let n = rows.len() as f64;
        Some((
            rows.iter().map(|r| r.psnr).sum::<f64>() / n,
            rows.iter().map(|r| r.ssim).sum::<f64>() / n,
        ))
    }

    fn modes(&self) -> Vec<Mode> {
        let mut modes: Vec<Mode> = Vec::new();
        for r in &self.records {
            if !modes.contains(&r.mode) {
                modes.push(r.mode);
            }
        }
        modes
    }

    pub fn to_table(&self) -> String {
        let mut out = format!(
            "# dataset {} scale x{} policy {} self_ensemble {}\n",
            self.dataset, self.scale, self.policy, self.self_ensemble
        );
        let _ = writeln!(out, "{:<24} {:<13} {:>9} {:>8}", "id", "mode", "psnr", "ssim");
        for r in &self.records {
            let _ = writeln!(out, "{:<24} {:<13} {:>9.4} {:>8.5}", r.id, r.mode.label(), r.psnr, r.ssim);
        }
        for mode in self.modes() {
            if let Some((p, s)) = self.mean(mode) {
                let _ = writeln!(out, "{:<24} {:<13} {:>9.4} {:>8.5}", "mean", mode.label(), p, s);
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Write `<stem>.txt` and `<stem>.json` next to each other.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (ext, text) in [("txt", self.to_table()), ("json", self.to_json())] {
            let path = dir.join(format!("{stem}.{ext}"));
            std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

fn crop_left<T: Real>(img: &Array4<T>) -> Result<Array4<T>> {
    let s = img.shape();
    if s.w <= LEFT_CROP {
        return Err(Error::invalid(
            "left_crop64",
            format!("image is {} px wide; nothing remains after cropping {LEFT_CROP}", s.w),
        ));
    }
    img.crop(0, LEFT_CROP, s.h, s.w - LEFT_CROP)
}

/// Scores of one super-resolved pair against its ground truth.
pub fn score_pair<T: Real>(
    id: &str,
    sr: (&Array4<T>, &Array4<T>),
    hr: (&Array4<T>, &Array4<T>),
    modes: &[Mode],
) -> Result<Vec<ImageScore>> {
    let mut out = Vec::with_capacity(modes.len());
    for &mode in modes {
        let (p, s) = match mode {
            Mode::LeftCrop64 => {
                let (a, b) = (crop_left(sr.0)?, crop_left(hr.0)?);
                (psnr(&a, &b)?, ssim(&a, &b)?)
            }
            Mode::PairAverage => (
                (psnr(sr.0, hr.0)? + psnr(sr.1, hr.1)?) / 2.0,
                (ssim(sr.0, hr.0)? + ssim(sr.1, hr.1)?) / 2.0,
            ),
            Mode::PairJoint => {
                let half = T::from_f64(0.5);
                let a = sr.0.zip_map(sr.1, |x, y| (x + y) * half);
                let b = hr.0.zip_map(hr.1, |x, y| (x + y) * half);
                (psnr(&a, &b)?, ssim(&a, &b)?)
            }
        };
        out.push(ImageScore {
            id: id.to_string(),
            mode,
            psnr: p,
            ssim: s,
        });
    }
    Ok(out)
}

/// Average of the model outputs over `members`, each applied to the input
/// and inverted on the output.
pub fn self_ensemble_infer<T: Real>(
    cfg: &ModelConfig,
    store: &ParamStore<T>,
    lr_l: &Array4<T>,
    lr_r: &Array4<T>,
    policy: &PoolingPolicy,
    members: &[AugmentDraw],
) -> Result<(Array4<T>, Array4<T>)> {
    if members.is_empty() {
        return Err(Error::invalid("self_ensemble_infer", "no ensemble members"));
    }
    let mut acc: Option<(Array4<T>, Array4<T>)> = None;
    for draw in members {
        let (l, r) = draw.apply_pair(lr_l, lr_r)?;
        let (sl, sr) = infer(cfg, store, &l, &r, policy)?;
        let (sl, sr) = draw.inverse().apply_pair(&sl, &sr)?;
        match &mut acc {
            Some((al, ar)) => {
                al.add_assign(&sl);
                ar.add_assign(&sr);
            }
            None => acc = Some((sl, sr)),
        }
    }
    log::debug!("self-ensemble averaged {} members: {:?}", members.len(), members);
    let (mut l, mut r) = acc.expect("at least one member");
    let inv = T::ONE / T::from_usize(members.len());
    l.scale_inplace(inv);
    r.scale_inplace(inv);
    Ok((l, r))
}

/// Arithmetic mean of several models' outputs on the same pair.
pub fn average_outputs<T: Real>(
    members: &[(&ModelConfig, &ParamStore<T>)],
    lr_l: &Array4<T>,
    lr_r: &Array4<T>,
    policy: &PoolingPolicy,
) -> Result<(Array4<T>, Array4<T>)> {
    let Some(((first, _), _)) = members.split_first() else {
        return Err(Error::invalid("average_outputs", "no checkpoints"));
    };
    if let Some((cfg, _)) = members.iter().find(|(c, _)| c.scale != first.scale) {
        return Err(Error::Config(format!(
            "cannot average x{} and x{} models",
            first.scale, cfg.scale
        )));
    }
    let mut acc: Option<(Array4<T>, Array4<T>)> = None;
    for (cfg, store) in members {
        let (l, r) = infer(cfg, store, lr_l, lr_r, policy)?;
        match &mut acc {
            Some((al, ar)) => {
                al.add_assign(&l);
                ar.add_assign(&r);
            }
            None => acc = Some((l, r)),
        }
    }
    let (mut l, mut r) = acc.expect("at least one member");
    let inv = T::ONE / T::from_usize(members.len());
    l.scale_inplace(inv);
    r.scale_inplace(inv);
    Ok((l, r))
}

/// How [`evaluate`] turns a low-resolution pair into a prediction.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalOptions {
    pub modes: Vec<Mode>,
    pub policy: PoolingPolicy,
    pub self_ensemble: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            modes: Mode::DEFAULT.to_vec(),
            policy: PoolingPolicy::Global,
            self_ensemble: false,
        }
    }
}

fn clamp01(a: &Array4<f32>) -> Array4<f32> {
    a.map(|v| v.clamp(0.0, 1.0))
}

/// Super-resolve one sample with the options' policy and ensemble setting.
pub fn predict(
    cfg: &ModelConfig,
    store: &ParamStore<f32>,
    sample: &StereoSample,
    opts: &EvalOptions,
) -> Result<(Array4<f32>, Array4<f32>)> {
    if sample.scale != cfg.scale {
        return Err(Error::Config(format!(
            "checkpoint upscales x{} but the data is x{}",
            cfg.scale, sample.scale
        )));
    }
    let (l, r) = if opts.self_ensemble {
        self_ensemble_infer(cfg, store, &sample.lr_l, &sample.lr_r, &opts.policy, &AugmentDraw::all())?
    } else {
        infer(cfg, store, &sample.lr_l, &sample.lr_r, &opts.policy)?
    };
    Ok((clamp01(&l), clamp01(&r)))
}

/// Score every pair of `manifest` in manifest order.
pub fn evaluate(
    ck: &Checkpoint<f32>,
    manifest: &Manifest,
    dataset: &str,
    opts: &EvalOptions,
) -> Result<MetricReport> {
    let mut report = MetricReport {
        dataset: dataset.to_string(),
        scale: ck.model.scale,
        policy: opts.policy.label(),
        self_ensemble: opts.self_ensemble,
        records: Vec::new(),
    };
    for (i, entry) in manifest.entries.iter().enumerate() {
        let sample = manifest.load_sample(i)?;
        let (l, r) = predict(&ck.model, &ck.params, &sample, opts)?;
        report
            .records
            .extend(score_pair(&entry.id(), (&l, &r), (&sample.hr_l, &sample.hr_r), &opts.modes)?);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_model;
    use crate::nn::bilinear_upsample;
    use crate::rng::stream;
    use crate::tensor::Shape;
    use rand::Rng;

    fn random(shape: Shape, seed: u64) -> Array4<f32> {
        let mut rng = stream(seed, "eval", 0);
        Array4::from_fn(shape, |_, _, _, _| rng.gen_range(0.0..1.0))
    }

    fn zero_head(cfg: &ModelConfig) -> ParamStore<f32> {
        let mut store = build_model::<f32>(cfg, 1).unwrap();
        for name in ["head.weight", "head.bias"] {
            let w = store.get_mut(name).unwrap();
            *w = Array4::zeros(w.shape());
        }
        store
    }

    fn trunk_awake(cfg: &ModelConfig, seed: u64) -> ParamStore<f32> {
        let mut store = build_model::<f32>(cfg, seed).unwrap();
        let mut rng = stream(seed, "wake", 0);
        for (name, e) in store.iter_mut() {
            if name.ends_with("beta") || name.ends_with("gamma_ffn") || name.contains("gamma_") {
                e.value = e.value.map(|_| rng.gen_range(-0.5..0.5));
            }
        }
        store
    }

    #[test]
    fn ground_truth_scores_perfectly() {
        let s = Shape::new(1, 3, 16, 80);
        let (l, r) = (random(s, 1), random(s, 2));
        let scores = score_pair("x", (&l, &r), (&l, &r), &[Mode::LeftCrop64, Mode::PairAverage, Mode::PairJoint]).unwrap();
        assert_eq!(scores.len(), 3);
        for sc in scores {
            assert_eq!(sc.psnr, 100.0);
            assert!((sc.ssim - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn left_crop_needs_width() {
        let s = Shape::new(1, 3, 16, 64);
        let l = random(s, 3);
        assert!(score_pair("x", (&l, &l), (&l, &l), &[Mode::LeftCrop64]).is_err());
        assert!(score_pair("x", (&l, &l), (&l, &l), &[Mode::PairAverage]).is_ok());
    }

    #[test]
    fn left_crop_ignores_left_edge_and_right_view() {
        let s = Shape::new(1, 3, 16, 80);
        let hr = random(s, 4);
        let mut sr = hr.clone();
        for c in 0..3 {
            for y in 0..16 {
                for x in 0..LEFT_CROP {
                    sr.set(0, c, y, x, 0.0);
                }
            }
        }
        let junk = random(s, 5);
        let sc = score_pair("x", (&sr, &junk), (&hr, &hr), &[Mode::LeftCrop64, Mode::PairAverage]).unwrap();
        assert_eq!(sc[0].psnr, 100.0);
        assert!(sc[1].psnr < 30.0);
    }

    #[test]
    fn pair_average_is_mean_of_views() {
        let s = Shape::new(1, 3, 12, 12);
        let (hl, hr) = (random(s, 6), random(s, 7));
        let sl = hl.map(|v| v + 0.1);
        let sr = hr.map(|v| v + 0.01);
        let sc = score_pair("x", (&sl, &sr), (&hl, &hr), &[Mode::PairAverage]).unwrap();
        assert!((sc[0].psnr - 30.0).abs() < 1e-3, "{}", sc[0].psnr);
    }

    #[test]
    fn identity_ensemble_equals_plain_inference() {
        let cfg = ModelConfig::new(8, 2, 2);
        let store = trunk_awake(&cfg, 2);
        let s = Shape::new(1, 3, 6, 12);
        let (l, r) = (random(s, 8), random(s, 9));
        let policy = PoolingPolicy::Global;
        let plain = infer(&cfg, &store, &l, &r, &policy).unwrap();
        let ens = self_ensemble_infer(&cfg, &store, &l, &r, &policy, &[AugmentDraw::IDENTITY]).unwrap();
        assert_eq!(plain, ens);
    }

    #[test]
    fn zero_head_ensemble_is_bilinear() {
        let cfg = ModelConfig::new(8, 2, 2);
        let store = zero_head(&cfg);
        let s = Shape::new(1, 3, 6, 12);
        let (l, r) = (random(s, 10), random(s, 11));
        let (el, er) =
            self_ensemble_infer(&cfg, &store, &l, &r, &PoolingPolicy::Global, &AugmentDraw::all()).unwrap();
        assert!(el.max_abs_diff(&bilinear_upsample(&l, 2).unwrap()) < 1e-6);
        assert!(er.max_abs_diff(&bilinear_upsample(&r, 2).unwrap()) < 1e-6);
    }

    #[test]
    fn ensemble_members_invert_exactly() {
        // Each member's output mapped back must depend on the member only
        // through the model, so a zero-head model agrees member by member.
        let cfg = ModelConfig::new(8, 1, 2);
        let store = zero_head(&cfg);
        let s = Shape::new(1, 3, 4, 8);
        let (l, r) = (random(s, 12), random(s, 13));
        let base = infer(&cfg, &store, &l, &r, &PoolingPolicy::Global).unwrap();
        for draw in AugmentDraw::all() {
            let one = self_ensemble_infer(&cfg, &store, &l, &r, &PoolingPolicy::Global, &[draw]).unwrap();
            assert!(one.0.max_abs_diff(&base.0) < 1e-6, "{draw:?}");
            assert!(one.1.max_abs_diff(&base.1) < 1e-6, "{draw:?}");
        }
    }

    #[test]
    fn averaging_checkpoints() {
        let cfg = ModelConfig::new(8, 2, 2);
        let (a, b) = (trunk_awake(&cfg, 3), trunk_awake(&cfg, 4));
        let s = Shape::new(1, 3, 6, 12);
        let (l, r) = (random(s, 14), random(s, 15));
        let policy = PoolingPolicy::Global;
        let plain = infer(&cfg, &a, &l, &r, &policy).unwrap();
        assert_eq!(average_outputs(&[(&cfg, &a)], &l, &r, &policy).unwrap(), plain);
        assert_eq!(average_outputs(&[(&cfg, &a), (&cfg, &a)], &l, &r, &policy).unwrap(), plain);

        let other = infer(&cfg, &b, &l, &r, &policy).unwrap();
        let avg = average_outputs(&[(&cfg, &a), (&cfg, &b)], &l, &r, &policy).unwrap();
        let mid = plain.0.zip_map(&other.0, |x, y| (x + y) / 2.0);
        assert!(avg.0.max_abs_diff(&mid) < 1e-6);

        let x4 = ModelConfig::new(8, 2, 4);
        let c = build_model::<f32>(&x4, 1).unwrap();
        assert!(average_outputs(&[(&cfg, &a), (&x4, &c)], &l, &r, &policy).is_err());
        assert!(average_outputs::<f32>(&[], &l, &r, &policy).is_err());
    }

    #[test]
    fn report_formats() {
        let report = MetricReport {
            dataset: "val".into(),
            scale: 2,
            policy: "global".into(),
            self_ensemble: false,
            records: vec![
                ImageScore {
                    id: "0000".into(),
                    mode: Mode::PairAverage,
                    psnr: 30.0,
                    ssim: 0.9,
                },
                ImageScore {
                    id: "0001".into(),
                    mode: Mode::PairAverage,
                    psnr: 32.0,
                    ssim: 0.8,
                },
            ],
        };
        let (p, s) = report.mean(Mode::PairAverage).unwrap();
        assert_eq!(p, 31.0);
        assert!((s - 0.85).abs() < 1e-12);
        assert_eq!(report.mean(Mode::LeftCrop64), None);
        let table = report.to_table();
        assert!(table.lines().last().unwrap().starts_with("mean"));
        let json: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
        assert_eq!(json["records"][1]["mode"], "pair_average");
        assert_eq!(Mode::parse("pair_joint").unwrap(), Mode::PairJoint);
        assert!(Mode::parse("both").is_err());
    }
}
