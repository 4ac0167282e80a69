//! Training loop: L1 loss, AdamW, cosine annealing, stochastic depth and
//! checkpointing. Every random choice comes from a named stream keyed by the
//! seed and the iteration or sample index, so a run resumed from a
//! checkpoint continues exactly as the uninterrupted run would have.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;

use crate::checkpoint::Checkpoint;
use crate::data::{extract_patches, AugmentDraw, AugmentationConfig, Manifest, StereoSample};
use crate::error::{Error, Result};
use crate::model::{build_model, DropPlan, Model, ModelConfig, Variant};
use crate::params::ParamStore;
use crate::rng::stream;
use crate::tensor::{Array4, Real, Tape, Tensor4};
use crate::tlsc::PoolingPolicy;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub lr_init: f64,
    pub lr_final: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub weight_decay: f64,
    pub eps: f64,
    pub iters: u64,
    pub batch: usize,
    pub seed: u64,
    /// LR patch size; `None` trains on whole images.
    pub patch: Option<(usize, usize)>,
    pub stride: usize,
    pub augment: AugmentationConfig,
    pub checkpoint_every: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr_init: 3e-3,
            lr_final: 1e-7,
            beta1: 0.9,
            beta2: 0.9,
            weight_decay: 0.0,
            eps: 1e-8,
            iters: 1000,
            batch: 4,
            seed: 0,
            patch: Some((30, 90)),
            stride: 20,
            augment: AugmentationConfig::ALL,
            checkpoint_every: 500,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.lr_final < self.lr_init) || self.lr_final < 0.0 {
            return bad(format!("need 0 <= lr_final < lr_init, got {} and {}", self.lr_final, self.lr_init));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return bad(format!("{name} must lie in [0, 1), got {b}"));
            }
        }
        if !(self.eps > 0.0) || !(self.weight_decay >= 0.0) {
            return bad("eps must be positive and weight_decay non-negative".into());
        }
        if self.iters == 0 || self.batch == 0 || self.stride == 0 || self.checkpoint_every == 0 {
            return bad("iters, batch, stride and checkpoint_every must be positive".into());
        }
        if let Some((h, w)) = self.patch {
            if h == 0 || w == 0 {
                return bad(format!("empty patch {h}x{w}"));
            }
        }
        Ok(())
    }
}

/// Stochastic-depth probability used for each variant.
pub fn default_drop_prob(v: Variant) -> f64 {
    match v {
        Variant::T => 0.0,
        Variant::S => 0.1,
        Variant::B => 0.2,
        Variant::L => 0.3,
    }
}

/// Mean absolute error of each view, summed.
pub fn l1_loss<T: Real>(
    tape: &Tape<T>,
    sr_l: &Tensor4<T>,
    sr_r: &Tensor4<T>,
    hr_l: &Tensor4<T>,
    hr_r: &Tensor4<T>,
) -> Result<Tensor4<T>> {
    let l = tape.l1_mean(sr_l, hr_l)?;
    let r = tape.l1_mean(sr_r, hr_r)?;
    tape.add(&l, &r)
}

/// Cosine annealing from `lr_init` at `t = 0` to `lr_final` at `t = iters`.
pub fn cosine_lr(t: u64, cfg: &TrainConfig) -> f64 {
    if t == 0 {
        return cfg.lr_init;
    }
    if t >= cfg.iters {
        return cfg.lr_final;
    }
    let phase = std::f64::consts::PI * t as f64 / cfg.iters as f64;
    cfg.lr_final + (cfg.lr_init - cfg.lr_final) * (1.0 + phase.cos()) / 2.0
}

/// One AdamW update. `grads` follows the store's order and `step` is the
/// 1-based update count used for bias correction. Nothing is modified if any
/// gradient is non-finite.
pub fn adamw_step<T: Real>(
    store: &mut ParamStore<T>,
    grads: &[Array4<T>],
    lr: f64,
    cfg: &TrainConfig,
    step: u64,
) -> Result<()> {
    if grads.len() != store.len() {
        return Err(Error::invalid(
            "adamw_step",
            format!("{} gradients for {} parameters", grads.len(), store.len()),
        ));
    }
    for ((name, e), g) in store.iter().zip(grads) {
        if g.shape() != e.value.shape() {
            return Err(Error::ShapeMismatch {
                op: "adamw_step",
                lhs: e.value.shape(),
                rhs: g.shape(),
            });
        }
        if !g.all_finite() {
            log::warn!("non-finite gradient for {name}; step {step} skipped");
            return Err(Error::NonFiniteGradient(name.to_string()));
        }
    }
    let (b1, b2) = (cfg.beta1, cfg.beta2);
    let c1 = 1.0 - b1.powi(step as i32);
    let c2 = 1.0 - b2.powi(step as i32);
    let decay = 1.0 - lr * cfg.weight_decay;
    for ((_, e), g) in store.iter_mut().zip(grads) {
        let shape = e.value.shape();
        let m = e.m.get_or_insert_with(|| Array4::zeros(shape));
        let v = e.v.get_or_insert_with(|| Array4::zeros(shape));
        for (((p, m), v), &g) in e
            .value
            .data_mut()
            .iter_mut()
            .zip(m.data_mut())
            .zip(v.data_mut())
            .zip(g.data())
        {
            let g = g.to_f64();
            let m1 = b1 * m.to_f64() + (1.0 - b1) * g;
            let v1 = b2 * v.to_f64() + (1.0 - b2) * g * g;
            let update = (m1 / c1) / ((v1 / c2).sqrt() + cfg.eps);
            *p = T::from_f64(p.to_f64() * decay - lr * update);
            *m = T::from_f64(m1);
            *v = T::from_f64(v1);
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepStats {
    /// Zero-based index of the finished step.
    pub iteration: u64,
    pub lr: f64,
    pub loss: f64,
}

impl StepStats {
    pub fn log_line(&self) -> String {
        format!("{} {:.6e} {:.6e}", self.iteration, self.lr, self.loss)
    }
}

/// Owns the parameters and the training pool; one call to [`Trainer::step`]
/// is one optimizer update.
pub struct Trainer {
    cfg: TrainConfig,
    model: ModelConfig,
    params: ParamStore<f32>,
    iteration: u64,
    pool: Vec<StereoSample>,
    epoch: Option<(u64, Vec<usize>)>,
}

impl Trainer {
    pub fn new(cfg: TrainConfig, model: ModelConfig, samples: &[StereoSample]) -> Result<Self> {
        let params = build_model(&model, cfg.seed)?;
        Self::assemble(cfg, model, params, 0, samples)
    }

    /// Continue from `ck`. Seed and model come from the checkpoint.
    pub fn resume(mut cfg: TrainConfig, ck: Checkpoint<f32>, samples: &[StereoSample]) -> Result<Self> {
        if cfg.seed != ck.seed {
            log::warn!("using checkpoint seed {} instead of {}", ck.seed, cfg.seed);
            cfg.seed = ck.seed;
        }
        Self::assemble(cfg, ck.model, ck.params, ck.iteration, samples)
    }

    fn assemble(
        cfg: TrainConfig,
        model: ModelConfig,
        params: ParamStore<f32>,
        iteration: u64,
        samples: &[StereoSample],
    ) -> Result<Self> {
        cfg.validate()?;
        model.validate()?;
        let mut pool = Vec::new();
        for s in samples {
            if s.scale != model.scale {
                return Err(Error::Config(format!(
                    "data is x{} but the model upscales x{}",
                    s.scale, model.scale
                )));
            }
            let views = [s.lr_l.split_batch(), s.lr_r.split_batch(), s.hr_l.split_batch(), s.hr_r.split_batch()];
            for item in 0..views[0].len() {
                let single = StereoSample {
                    lr_l: views[0][item].clone(),
                    lr_r: views[1][item].clone(),
                    hr_l: views[2][item].clone(),
                    hr_r: views[3][item].clone(),
                    scale: s.scale,
                };
                match cfg.patch {
                    Some(p) => pool.extend(extract_patches(&single, p, cfg.stride)?),
                    None => pool.push(single),
                }
            }
        }
        if pool.is_empty() {
            return Err(Error::Config(format!(
                "no training patches: {} images, patch {:?}",
                samples.len(),
                cfg.patch
            )));
        }
        Ok(Trainer {
            cfg,
            model,
            params,
            iteration,
            pool,
            epoch: None,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn model_config(&self) -> &ModelConfig {
        &self.model
    }

    pub fn params(&self) -> &ParamStore<f32> {
        &self.params
    }

    /// Completed iterations.
    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn pool_len(&self) -> usize {
        self.pool.len()
    }

    pub fn is_done(&self) -> bool {
        self.iteration >= self.cfg.iters
    }

    /// Pool index of the `k`-th sample drawn since the start of training.
    fn draw_index(&mut self, k: u64) -> usize {
        let len = self.pool.len() as u64;
        let (epoch, pos) = (k / len, (k % len) as usize);
        if self.epoch.as_ref().map(|(e, _)| *e) != Some(epoch) {
            let mut order: Vec<usize> = (0..self.pool.len()).collect();
            order.shuffle(&mut stream(self.cfg.seed, "epoch", epoch));
            self.epoch = Some((epoch, order));
        }
        self.epoch.as_ref().expect("epoch order set").1[pos]
    }

    /// The augmented batch used at iteration `t`.
    pub fn batch_at(&mut self, t: u64) -> Result<StereoSample> {
        let mut items = Vec::with_capacity(self.cfg.batch);
        for b in 0..self.cfg.batch as u64 {
            let k = t * self.cfg.batch as u64 + b;
            let idx = self.draw_index(k);
            let draw = AugmentDraw::sample(&self.cfg.augment, &mut stream(self.cfg.seed, "augment", k));
            items.push(draw.apply(&self.pool[idx])?);
        }
        StereoSample::batch(&items)
    }

    pub fn step(&mut self) -> Result<StepStats> {
        let t = self.iteration;
        let batch = self.batch_at(t)?;
        let drops = DropPlan::sample(self.model.n_blocks, self.model.drop_prob, &mut stream(self.cfg.seed, "drop", t));

        let tape = Tape::new();
        let model = Model::bind(&self.model, &self.params, &tape, true)?;
        let (sr_l, sr_r) = model.forward(
            &tape,
            &Tensor4::constant(batch.lr_l),
            &Tensor4::constant(batch.lr_r),
            &drops,
            &PoolingPolicy::Global,
        )?;
        let loss = l1_loss(
            &tape,
            &sr_l,
            &sr_r,
            &Tensor4::constant(batch.hr_l),
            &Tensor4::constant(batch.hr_r),
        )?;
        let loss_value = loss.value().item() as f64;
        if !loss_value.is_finite() {
            return Err(Error::Diverged { iteration: t });
        }
        let mut grads = tape.backward(&loss)?;
        let grads: Vec<Array4<f32>> = model
            .parameters()
            .map(|(_, p)| grads.take(p).expect("parameter leaf gradient"))
            .collect();
        let lr = cosine_lr(t, &self.cfg);
        adamw_step(&mut self.params, &grads, lr, &self.cfg, t + 1)?;
        self.iteration += 1;
        Ok(StepStats {
            iteration: t,
            lr,
            loss: loss_value,
        })
    }

    pub fn checkpoint(&self) -> Checkpoint<f32> {
        Checkpoint {
            model: self.model.clone(),
            train_patch: self.cfg.patch,
            iteration: self.iteration,
            seed: self.cfg.seed,
            params: self.params.clone(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainSummary {
    pub steps: Vec<StepStats>,
    pub checkpoints: Vec<PathBuf>,
    pub final_checkpoint: PathBuf,
}

/// Run `trainer` to completion, appending `iteration lr loss` lines to
/// `out_dir/train.log` and writing checkpoints at the configured cadence
/// plus `final.ckpt`.
pub fn run(trainer: &mut Trainer, out_dir: &Path) -> Result<TrainSummary> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let log_path = out_dir.join("train.log");
    let mut log = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&log_path)
        .map_err(|e| Error::io(&log_path, e))?;
    let mut summary = TrainSummary {
        steps: Vec::new(),
        checkpoints: Vec::new(),
        final_checkpoint: out_dir.join("final.ckpt"),
    };
    while !trainer.is_done() {
        let stats = trainer.step()?;
        append(&mut log, &log_path, &stats.log_line())?;
        log::debug!("{}", stats.log_line());
        summary.steps.push(stats);
        let done = trainer.iteration();
        if done % trainer.cfg.checkpoint_every == 0 {
            let path = out_dir.join(format!("iter_{done:07}.ckpt"));
            trainer.checkpoint().save(&path)?;
            log::info!("iteration {done}: loss {:.5}, saved {}", stats.loss, path.display());
            summary.checkpoints.push(path);
        }
    }
    trainer.checkpoint().save(&summary.final_checkpoint)?;
    Ok(summary)
}

fn append(file: &mut File, path: &Path, line: &str) -> Result<()> {
    writeln!(file, "{line}").map_err(|e| Error::io(path, e))
}

/// Load every pair in `manifest` and train from scratch.
pub fn train(cfg: &TrainConfig, model: &ModelConfig, manifest: &Manifest, out_dir: &Path) -> Result<TrainSummary> {
    let samples = manifest.load_all()?;
    let mut trainer = Trainer::new(cfg.clone(), model.clone(), &samples)?;
    run(&mut trainer, out_dir)
}
