use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use log::info;

use nafssr::data::{load_png, save_png, AugmentationConfig, Manifest, SynthConfig};
use nafssr::eval::{average_outputs, evaluate, score_pair, self_ensemble_infer, EvalOptions, MetricReport, Mode};
use nafssr::gradsuite::{run_suite, Precision};
use nafssr::tensor::{Array4, Fault};
use nafssr::tlsc::tlsc_window_from_patch;
use nafssr::train::{default_drop_prob, run, Trainer};
use nafssr::{Checkpoint, ModelConfig, PoolingPolicy, TrainConfig, Variant};

use crate::config::{config_error, Config, Dims};
use crate::{Common, NumericFailure};

fn setup(common: &Common, flags: impl FnOnce(&mut Config), known: &[&str]) -> Result<Config> {
    let mut cfg = Config::load(common.config.as_deref())?;
    flags(&mut cfg);
    cfg.apply_overrides(&common.overrides)?;
    cfg.check_keys(known)?;
    Ok(cfg)
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[command(flatten)]
    common: Common,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    count: Option<usize>,
    /// HR size, e.g. `64x192`.
    #[arg(long)]
    size: Option<String>,
    #[arg(long)]
    scale: Option<usize>,
    /// Largest disparity in HR pixels; 0 makes both views identical.
    #[arg(long)]
    max_disparity: Option<usize>,
    /// Highest texture frequency in cycles per HR pixel.
    #[arg(long)]
    max_frequency: Option<f64>,
    /// Allow writing into a non-empty directory.
    #[arg(long)]
    force: bool,
}

const SYNTH_KEYS: &[&str] = &[
    "out",
    "force",
    "synth.seed",
    "synth.count",
    "synth.size",
    "synth.scale",
    "synth.max_disparity",
    "synth.max_frequency",
    "synth.layers",
];

pub fn synth(a: SynthArgs) -> Result<()> {
    let cfg = setup(
        &a.common,
        |c| {
            c.set_opt("out", a.out.as_ref().map(|p| p.display()));
            c.set_opt("synth.seed", a.seed);
            c.set_opt("synth.count", a.count);
            c.set_opt("synth.size", a.size.clone());
            c.set_opt("synth.scale", a.scale);
            c.set_opt("synth.max_disparity", a.max_disparity);
            c.set_opt("synth.max_frequency", a.max_frequency);
            if a.force {
                c.set("force", true);
            }
        },
        SYNTH_KEYS,
    )?;
    let d = SynthConfig::default();
    let layers = match cfg.raw("synth.layers") {
        Some(raw) => {
            let (lo, hi) = raw
                .split_once('-')
                .and_then(|(l, h)| Some((l.trim().parse().ok()?, h.trim().parse().ok()?)))
                .ok_or_else(|| config_error(format!("synth.layers = {raw:?}: expected MIN-MAX")))?;
            (lo, hi)
        }
        None => d.layers,
    };
    let size = cfg.get::<Dims>("synth.size")?.map(|s| (s.0, s.1)).unwrap_or(d.size);
    let sc = SynthConfig {
        seed: cfg.get_or("synth.seed", d.seed)?,
        count: cfg.get_or("synth.count", d.count)?,
        size,
        scale: cfg.get_or("synth.scale", d.scale)?,
        max_disparity: cfg.get_or("synth.max_disparity", d.max_disparity)?,
        max_frequency: cfg.get_or("synth.max_frequency", d.max_frequency)?,
        layers,
    };
    let out = cfg.require_path("out")?;
    if !cfg.flag("force")? && is_non_empty_dir(&out) {
        return Err(config_error(format!(
            "{} exists and is not empty (use --force)",
            out.display()
        )));
    }
    cfg.echo_to(&out)?;
    let manifest = nafssr::data::synth_stereo(&sc, &out)?;
    info!("wrote {} stereo pairs to {}", manifest.len(), out.display());
    Ok(())
}

fn is_non_empty_dir(p: &Path) -> bool {
    std::fs::read_dir(p).map(|mut d| d.next().is_some()).unwrap_or(false)
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    common: Common,
    /// Training manifest.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Directory for checkpoints, the loss log and the echoed config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Architecture variant: T, S, B or L.
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    scale: Option<usize>,
    #[arg(long)]
    iters: Option<u64>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Stochastic-depth probability; defaults per variant.
    #[arg(long)]
    drop_prob: Option<f64>,
    /// LR training patch `HxW`, or `none` for whole images.
    #[arg(long)]
    patch: Option<String>,
    /// Continue from a checkpoint.
    #[arg(long)]
    resume: Option<PathBuf>,
}

const TRAIN_KEYS: &[&str] = &[
    "out",
    "data.manifest",
    "resume",
    "model.variant",
    "model.width",
    "model.blocks",
    "model.scale",
    "model.scams",
    "model.drop_prob",
    "model.tlsc",
    "train.lr_init",
    "train.lr_final",
    "train.beta1",
    "train.beta2",
    "train.weight_decay",
    "train.eps",
    "train.iters",
    "train.batch",
    "train.seed",
    "train.patch",
    "train.stride",
    "train.augment",
    "train.checkpoint_every",
];

fn parse_augment(raw: &str) -> Result<AugmentationConfig> {
    let mut aug = AugmentationConfig::NONE;
    match raw {
        "all" => return Ok(AugmentationConfig::ALL),
        "none" => return Ok(aug),
        _ => {}
    }
    for part in raw.split(',').map(str::trim) {
        match part {
            "hflip" => aug.hflip = true,
            "vflip" => aug.vflip = true,
            "shuffle" => aug.channel_shuffle = true,
            other => {
                return Err(config_error(format!(
                    "train.augment: unknown augmentation {other:?} (hflip, vflip, shuffle, all, none)"
                )))
            }
        }
    }
    Ok(aug)
}

fn parse_window(cfg: &Config, key: &str) -> Result<Option<(usize, usize)>> {
    match cfg.raw(key) {
        None | Some("none") => Ok(None),
        Some(_) => Ok(cfg.get::<Dims>(key)?.map(|d| (d.0, d.1))),
    }
}

fn model_config(cfg: &Config) -> Result<ModelConfig> {
    let variant: Variant = cfg.get_or("model.variant", Variant::T)?;
    let scale = cfg.get_or("model.scale", 4)?;
    let (c, n) = variant.dims();
    let mut m = ModelConfig::new(cfg.get_or("model.width", c)?, cfg.get_or("model.blocks", n)?, scale);
    m.scam_count = cfg.get_or("model.scams", m.n_blocks)?;
    m.drop_prob = cfg.get_or("model.drop_prob", default_drop_prob(variant))?;
    m.tlsc = parse_window(cfg, "model.tlsc")?;
    m.validate()?;
    Ok(m)
}

fn train_config(cfg: &Config) -> Result<TrainConfig> {
    let d = TrainConfig::default();
    let t = TrainConfig {
        lr_init: cfg.get_or("train.lr_init", d.lr_init)?,
        lr_final: cfg.get_or("train.lr_final", d.lr_final)?,
        beta1: cfg.get_or("train.beta1", d.beta1)?,
        beta2: cfg.get_or("train.beta2", d.beta2)?,
        weight_decay: cfg.get_or("train.weight_decay", d.weight_decay)?,
        eps: cfg.get_or("train.eps", d.eps)?,
        iters: cfg.get_or("train.iters", d.iters)?,
        batch: cfg.get_or("train.batch", 32)?,
        seed: cfg.get_or("train.seed", d.seed)?,
        patch: match cfg.raw("train.patch") {
            None => d.patch,
            Some(_) => parse_window(cfg, "train.patch")?,
        },
        stride: cfg.get_or("train.stride", d.stride)?,
        augment: match cfg.raw("train.augment") {
            Some(raw) => parse_augment(raw)?,
            None => d.augment,
        },
        checkpoint_every: cfg.get_or("train.checkpoint_every", d.checkpoint_every)?,
    };
    t.validate()?;
    Ok(t)
}

pub fn train(a: TrainArgs) -> Result<()> {
    let cfg = setup(
        &a.common,
        |c| {
            c.set_opt("data.manifest", a.manifest.as_ref().map(|p| p.display()));
            c.set_opt("out", a.out.as_ref().map(|p| p.display()));
            c.set_opt("resume", a.resume.as_ref().map(|p| p.display()));
            c.set_opt("model.variant", a.variant.clone());
            c.set_opt("model.scale", a.scale);
            c.set_opt("model.drop_prob", a.drop_prob);
            c.set_opt("train.iters", a.iters);
            c.set_opt("train.batch", a.batch);
            c.set_opt("train.seed", a.seed);
            c.set_opt("train.patch", a.patch.clone());
        },
        TRAIN_KEYS,
    )?;
    let model = model_config(&cfg)?;
    let tc = train_config(&cfg)?;
    let out = cfg.require_path("out")?;
    let manifest_path = cfg.require_path("data.manifest")?;
    cfg.echo_to(&out)?;

    let count = model.param_count();
    println!("model: {model}");
    println!("parameters: {:.2}M ({count})", count as f64 / 1e6);

    let manifest = Manifest::load(&manifest_path)?;
    let samples = manifest.load_all()?;
    let mut trainer = match cfg.path("resume") {
        Some(p) => {
            let ck = Checkpoint::<f32>::load(&p)?;
            info!("resuming from {} at iteration {}", p.display(), ck.iteration);
            Trainer::resume(tc, ck, &samples)?
        }
        None => Trainer::new(tc, model, &samples)?,
    };
    info!(
        "{} training patches, {} iterations, batch {}",
        trainer.pool_len(),
        trainer.config().iters,
        trainer.config().batch
    );
    let summary = run(&mut trainer, &out)?;
    if let Some(last) = summary.steps.last() {
        println!("final loss {:.6} after {} iterations", last.loss, trainer.iteration());
    }
    println!("checkpoint: {}", summary.final_checkpoint.display());
    Ok(())
}

/// Pooling policy from a `tlsc` setting: `HxW`, `auto` (1.5x the recorded
/// training patch), `none`, or unset (the checkpoint's own policy).
fn resolve_policy(cfg: &Config, ck: &Checkpoint<f32>) -> Result<PoolingPolicy> {
    match cfg.raw("tlsc") {
        None => Ok(ck.model.pooling_policy()),
        Some("none") | Some("global") => Ok(PoolingPolicy::Global),
        Some("auto") => {
            let patch = ck.train_patch.ok_or_else(|| {
                config_error("tlsc = auto needs a checkpoint that records its training patch")
            })?;
            let (kh, kw) = tlsc_window_from_patch(patch);
            Ok(PoolingPolicy::Local { kh, kw })
        }
        Some(_) => {
            let d: Dims = cfg.get("tlsc")?.expect("present");
            Ok(PoolingPolicy::local(d.0, d.1)?)
        }
    }
}

fn tlsc_setting(window: &Option<String>, auto: bool, off: bool) -> Option<String> {
    if off {
        Some("none".into())
    } else if auto {
        Some("auto".into())
    } else {
        window.clone()
    }
}

#[derive(Args, Debug)]
pub struct InferArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Low-resolution left view (PNG).
    #[arg(long)]
    left: Option<PathBuf>,
    /// Low-resolution right view (PNG).
    #[arg(long)]
    right: Option<PathBuf>,
    /// Directory receiving sr_left.png and sr_right.png.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Local pooling window `HxW` for channel attention.
    #[arg(long, conflicts_with_all = ["tlsc_auto", "no_tlsc"])]
    tlsc_window: Option<String>,
    /// Local pooling at 1.5x the checkpoint's training patch.
    #[arg(long, conflicts_with = "no_tlsc")]
    tlsc_auto: bool,
    /// Global pooling regardless of the checkpoint.
    #[arg(long)]
    no_tlsc: bool,
    /// Average over the 24 flip/channel-order transforms.
    #[arg(long)]
    self_ensemble: bool,
    /// Further checkpoints whose outputs are averaged in.
    #[arg(long, num_args = 1..)]
    average_with: Vec<PathBuf>,
    /// Expected upscale factor; rejected if the checkpoint differs.
    #[arg(long)]
    scale: Option<usize>,
}

const INFER_KEYS: &[&str] = &["checkpoint", "left", "right", "out", "tlsc", "self_ensemble", "average_with", "scale"];

fn join_paths(ps: &[PathBuf]) -> Option<String> {
    (!ps.is_empty()).then(|| ps.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(","))
}

pub fn infer(a: InferArgs) -> Result<()> {
    let cfg = setup(
        &a.common,
        |c| {
            c.set_opt("checkpoint", a.checkpoint.as_ref().map(|p| p.display()));
            c.set_opt("left", a.left.as_ref().map(|p| p.display()));
            c.set_opt("right", a.right.as_ref().map(|p| p.display()));
            c.set_opt("out", a.out.as_ref().map(|p| p.display()));
            c.set_opt("tlsc", tlsc_setting(&a.tlsc_window, a.tlsc_auto, a.no_tlsc));
            if a.self_ensemble {
                c.set("self_ensemble", true);
            }
            c.set_opt("average_with", join_paths(&a.average_with));
            c.set_opt("scale", a.scale);
        },
        INFER_KEYS,
    )?;
    let out = cfg.require_path("out")?;
    cfg.echo_to(&out)?;
    let ck = Checkpoint::<f32>::load(&cfg.require_path("checkpoint")?)?;
    let mut members = vec![ck];
    for p in cfg.paths("average_with") {
        members.push(Checkpoint::<f32>::load(&p)?);
    }
    if let Some(s) = cfg.get::<usize>("scale")? {
        if let Some(m) = members.iter().find(|m| m.model.scale != s) {
            return Err(config_error(format!("requested x{s} but a checkpoint upscales x{}", m.model.scale)));
        }
    }
    let policy = resolve_policy(&cfg, &members[0])?;
    let left = load_png(&cfg.require_path("left")?)?;
    let right = load_png(&cfg.require_path("right")?)?;
    let ensemble = cfg.flag("self_ensemble")?;
    info!(
        "policy {}, self-ensemble {ensemble}, {} checkpoint(s)",
        policy.label(),
        members.len()
    );

    let (l, r) = if ensemble {
        let mut acc: Option<(Array4<f32>, Array4<f32>)> = None;
        for m in &members {
            let (l, r) = self_ensemble_infer(&m.model, &m.params, &left, &right, &policy, &nafssr::data::AugmentDraw::all())?;
            match &mut acc {
                Some((al, ar)) => {
                    al.add_assign(&l);
                    ar.add_assign(&r);
                }
                None => acc = Some((l, r)),
            }
        }
        let (mut l, mut r) = acc.expect("one member");
        let inv = 1.0 / members.len() as f32;
        l.scale_inplace(inv);
        r.scale_inplace(inv);
        (l, r)
    } else {
        let refs: Vec<_> = members.iter().map(|m| (&m.model, &m.params)).collect();
        average_outputs(&refs, &left, &right, &policy)?
    };
    save_png(&out.join("sr_left.png"), &l)?;
    save_png(&out.join("sr_right.png"), &r)?;
    println!("wrote {} and {}", out.join("sr_left.png").display(), out.join("sr_right.png").display());
    Ok(())
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Directory receiving the report files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated metric modes: left_crop64, pair_average, pair_joint.
    #[arg(long)]
    modes: Option<String>,
    #[arg(long, conflicts_with_all = ["tlsc_auto", "no_tlsc"])]
    tlsc_window: Option<String>,
    #[arg(long, conflicts_with = "no_tlsc")]
    tlsc_auto: bool,
    #[arg(long)]
    no_tlsc: bool,
    #[arg(long)]
    self_ensemble: bool,
    /// Dataset label written into the report.
    #[arg(long)]
    name: Option<String>,
    /// Score the ground truth against itself; no checkpoint needed.
    #[arg(long)]
    ground_truth: bool,
}

const EVAL_KEYS: &[&str] = &[
    "checkpoint",
    "manifest",
    "out",
    "modes",
    "tlsc",
    "self_ensemble",
    "name",
    "ground_truth",
];

fn report_stem(report: &MetricReport) -> String {
    let mut stem = format!("report_{}", report.policy.replace(' ', "_"));
    if report.self_ensemble {
        stem.push_str("_ensemble");
    }
    stem
}

pub fn eval(a: EvalArgs) -> Result<()> {
    let cfg = setup(
        &a.common,
        |c| {
            c.set_opt("checkpoint", a.checkpoint.as_ref().map(|p| p.display()));
            c.set_opt("manifest", a.manifest.as_ref().map(|p| p.display()));
            c.set_opt("out", a.out.as_ref().map(|p| p.display()));
            c.set_opt("modes", a.modes.clone());
            c.set_opt("tlsc", tlsc_setting(&a.tlsc_window, a.tlsc_auto, a.no_tlsc));
            if a.self_ensemble {
                c.set("self_ensemble", true);
            }
            c.set_opt("name", a.name.clone());
            if a.ground_truth {
                c.set("ground_truth", true);
            }
        },
        EVAL_KEYS,
    )?;
    let out = cfg.require_path("out")?;
    cfg.echo_to(&out)?;
    let modes = match cfg.raw("modes") {
        Some(raw) => raw.split(',').map(|m| Mode::parse(m.trim())).collect::<nafssr::Result<Vec<_>>>()?,
        None => Mode::DEFAULT.to_vec(),
    };
    let manifest_path = cfg.require_path("manifest")?;
    let manifest = Manifest::load(&manifest_path)?;
    let name = cfg
        .raw("name")
        .map(String::from)
        .unwrap_or_else(|| manifest_path.parent().and_then(|p| p.file_name()).map_or("dataset".into(), |n| n.to_string_lossy().into_owned()));

    let report = if cfg.flag("ground_truth")? {
        let mut report = MetricReport {
            dataset: name,
            scale: manifest.entries.first().map_or(0, |e| e.scale),
            policy: "ground_truth".into(),
            self_ensemble: false,
            records: Vec::new(),
        };
        for (i, e) in manifest.entries.iter().enumerate() {
            let s = manifest.load_sample(i)?;
            report
                .records
                .extend(score_pair(&e.id(), (&s.hr_l, &s.hr_r), (&s.hr_l, &s.hr_r), &modes)?);
        }
        report
    } else {
        let ck_path = cfg.require_path("checkpoint")?;
        let ck = Checkpoint::<f32>::load(&ck_path).with_context(|| format!("loading {}", ck_path.display()))?;
        let opts = EvalOptions {
            modes,
            policy: resolve_policy(&cfg, &ck)?,
            self_ensemble: cfg.flag("self_ensemble")?,
        };
        evaluate(&ck, &manifest, &name, &opts)?
    };
    let stem = report_stem(&report);
    report.save(&out, &stem)?;
    print!("{}", report.to_table());
    println!("report: {}", out.join(format!("{stem}.txt")).display());
    Ok(())
}

#[derive(Args, Debug)]
pub struct GradcheckArgs {
    #[command(flatten)]
    common: Common,
    /// Analytic precision, 32 or 64 bit.
    #[arg(long)]
    precision: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Optional directory for the echoed config and the report.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Deliberately break an adjoint to confirm the checker notices.
    #[arg(long, hide = true, value_name = "FAULT")]
    inject_fault: Option<String>,
}

const GRADCHECK_KEYS: &[&str] = &["precision", "seed", "out", "inject_fault"];

pub fn gradcheck(a: GradcheckArgs) -> Result<()> {
    let cfg = setup(
        &a.common,
        |c| {
            c.set_opt("precision", a.precision.clone());
            c.set_opt("seed", a.seed);
            c.set_opt("out", a.out.as_ref().map(|p| p.display()));
            c.set_opt("inject_fault", a.inject_fault.clone());
        },
        GRADCHECK_KEYS,
    )?;
    let precision: Precision = cfg.get_or("precision", Precision::F32)?;
    let seed = cfg.get_or("seed", 0u64)?;
    let fault = match cfg.raw("inject_fault") {
        None => None,
        Some("simplegate-sign") => Some(Fault::SimpleGateSign),
        Some(other) => return Err(config_error(format!("unknown fault {other:?}"))),
    };
    if let Some(out) = cfg.path("out") {
        cfg.echo_to(&out)?;
    }
    println!("gradient checks at {precision}-bit, tolerance {:.0e}", precision.tolerance());
    let outcomes = run_suite(precision, fault, seed)?;
    let mut text = String::new();
    for o in &outcomes {
        text.push_str(&format!("{o}\n"));
    }
    print!("{text}");
    if let Some(out) = cfg.path("out") {
        let path = out.join("gradcheck.txt");
        std::fs::write(&path, &text).with_context(|| format!("writing {}", path.display()))?;
    }
    let failed: Vec<&str> = outcomes.iter().filter(|o| !o.passed()).map(|o| o.check.name()).collect();
    if failed.is_empty() {
        println!("all {} checks passed", outcomes.len());
        Ok(())
    } else {
        Err(NumericFailure(format!("gradient check failed: {}", failed.join(", "))).into())
    }
}
